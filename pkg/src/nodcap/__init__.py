"""Session-typed processes with bounded client/server pools."""

from .checker import TypeCheckError, check, check_file, cut_measure
from .kernel import HyperEnv, dual
from .parser import (
    ParseError,
    parse_file,
    parse_hyperenv,
    parse_term,
    parse_type,
    pretty_term,
    pretty_type,
)

__all__ = [
    "HyperEnv",
    "ParseError",
    "TypeCheckError",
    "check",
    "check_file",
    "cut_measure",
    "dual",
    "parse_file",
    "parse_hyperenv",
    "parse_term",
    "parse_type",
    "pretty_term",
    "pretty_type",
]
