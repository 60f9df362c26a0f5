"""Hypothesis strategies for types and (untyped) terms."""

from hypothesis import strategies as st

from nodcap.kernel import (
    Absurd,
    Bot,
    Case,
    Client,
    ClientReq,
    Close,
    Halt,
    In,
    Inl,
    Inr,
    Link,
    New,
    One,
    Out,
    Par,
    Parr,
    Plus,
    Server,
    ServerAcc,
    Tensor,
    Top,
    Wait,
    With,
    Zero,
)

units = st.sampled_from([One(), Bot(), Zero(), Top()])


def types(max_index: int = 5):
    def extend(inner):
        binary = st.builds(
            lambda c, a, b: c(a, b), st.sampled_from([Tensor, Parr, Plus, With]), inner, inner
        )
        indexed = st.builds(
            lambda c, n, a: c(n, a),
            st.sampled_from([Client, Server]),
            st.integers(1, max_index),
            inner,
        )
        return binary | indexed

    return st.recursive(units, extend, max_leaves=8)


names = st.sampled_from(["a", "b", "c", "x", "x'", "y", "y'", "w0", "z_1"])


def terms(max_leaves: int = 8):
    leaves = st.just(Halt()) | st.builds(Link, names, names) | st.builds(Absurd, names)

    def extend(inner):
        return st.one_of(
            st.builds(Par, inner, inner),
            st.builds(New, st.just("x"), st.just("x'"), inner),
            st.builds(New, st.just("u"), st.just("v"), inner),
            st.builds(lambda c, x, y, p: c(x, y, p), st.sampled_from([Out, In, ClientReq, ServerAcc]), names, names, inner),
            st.builds(lambda c, x, p: c(x, p), st.sampled_from([Close, Wait, Inl, Inr]), names, inner),
            st.builds(Case, names, inner, inner),
        )

    return st.recursive(leaves, extend, max_leaves=max_leaves)
