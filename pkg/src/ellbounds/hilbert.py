"""Empirical Hilbert space of zero-mean square-integrable functions.

Functions are represented by their values on one shared sample batch, as a
q x M matrix with column m holding h(x_m).  The inner product is the
empirical expectation <h1, h2> = (1/M) sum_m h1(x_m)' h2(x_m), so
projections onto finite spans are exact finite-dimensional least squares:
orthogonality, idempotence and Pythagoras hold to machine precision, and the
only statistical error left is the batch size.

Rows are centered on construction (empirical means are never exactly zero).
All reductions run over fixed-size column chunks combined with compensated
summation in index order, so results do not depend on how callers
parallelize.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BatchMismatch, ShapeError, SingularSpan

__all__ = [
    "FunctionSample",
    "SpanBasis",
    "ProjectionPolicy",
    "inner",
    "cov0",
    "cross_cov",
    "norm",
    "project_span",
    "residual",
    "orthonormal_rows",
]

_CHUNK = 1 << 16


def _chunked_gram(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """A @ B.T over column chunks with Kahan-compensated combination."""
    total = np.zeros((A.shape[0], B.shape[0]))
    comp = np.zeros_like(total)
    for lo in range(0, A.shape[1], _CHUNK):
        part = A[:, lo : lo + _CHUNK] @ B[:, lo : lo + _CHUNK].T
        y = part - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total


@dataclass(frozen=True)
class FunctionSample:
    """q-dimensional function evaluated on a shared batch; rows centered."""

    values: np.ndarray  # (q, M), centered
    batch_fingerprint: str
    raw_row_means: np.ndarray = None  # means removed at construction

    def __post_init__(self):
        vals = np.atleast_2d(np.asarray(self.values, dtype=float))
        if not np.all(np.isfinite(vals)):
            raise ShapeError("function sample contains non-finite values")
        means = vals.mean(axis=1)
        vals = vals - means[:, None]
        vals.setflags(write=False)
        means.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "raw_row_means", means)

    @property
    def q(self) -> int:
        return self.values.shape[0]

    @property
    def M(self) -> int:
        return self.values.shape[1]

    def rows(self, idx) -> "FunctionSample":
        """New sample from a subset of rows (already centered)."""
        return FunctionSample(self.values[list(idx), :], self.batch_fingerprint)

    @classmethod
    def zero(cls, q: int, M: int, batch_fingerprint: str) -> "FunctionSample":
        return cls(np.zeros((q, M)), batch_fingerprint)


def _check_same_batch(a, b) -> None:
    if a.batch_fingerprint != b.batch_fingerprint:
        raise BatchMismatch(
            f"samples built on different batches: {a.batch_fingerprint} vs {b.batch_fingerprint}"
        )


def inner(h1: FunctionSample, h2: FunctionSample) -> float:
    """Empirical inner product (1/M) sum_m h1(x_m)' h2(x_m)."""
    _check_same_batch(h1, h2)
    if h1.q != h2.q or h1.M != h2.M:
        raise ShapeError(f"incompatible shapes {h1.values.shape} vs {h2.values.shape}")
    total = 0.0
    comp = 0.0
    for lo in range(0, h1.M, _CHUNK):
        part = float(np.sum(h1.values[:, lo : lo + _CHUNK] * h2.values[:, lo : lo + _CHUNK]))
        y = part - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total / h1.M


def norm(h: FunctionSample) -> float:
    return float(np.sqrt(max(inner(h, h), 0.0)))


def cov0(h: FunctionSample) -> np.ndarray:
    """Empirical covariance (1/M) V V' of a centered sample; symmetric PSD."""
    C = _chunked_gram(h.values, h.values) / h.M
    return 0.5 * (C + C.T)


def cross_cov(h1: FunctionSample, h2: FunctionSample) -> np.ndarray:
    """(1/M) V1 V2' between two samples on the same batch."""
    _check_same_batch(h1, h2)
    if h1.M != h2.M:
        raise ShapeError("samples have different M")
    return _chunked_gram(h1.values, h2.values) / h1.M


@dataclass(frozen=True)
class SpanBasis:
    """Span of k scalar functions evaluated on the shared batch."""

    basis: np.ndarray  # (k, M), centered
    batch_fingerprint: str
    gram: np.ndarray = None
    gram_eigvals: np.ndarray = None
    gram_rank: int = 0
    rcond: float = 1e-10

    def __post_init__(self):
        B = np.asarray(self.basis, dtype=float)
        if B.ndim != 2:
            B = np.atleast_2d(B)
        if not np.all(np.isfinite(B)):
            raise ShapeError("span basis contains non-finite values")
        B = B - B.mean(axis=1, keepdims=True) if B.shape[0] else B
        B.setflags(write=False)
        object.__setattr__(self, "basis", B)
        if B.shape[0] == 0:
            object.__setattr__(self, "gram", np.zeros((0, 0)))
            object.__setattr__(self, "gram_eigvals", np.zeros(0))
            object.__setattr__(self, "gram_rank", 0)
            return
        G = _chunked_gram(B, B) / B.shape[1]
        G = 0.5 * (G + G.T)
        eig = np.linalg.eigvalsh(G)
        rank = int(np.sum(eig > self.rcond * max(eig.max(), 0.0))) if eig.size else 0
        G.setflags(write=False)
        eig.setflags(write=False)
        object.__setattr__(self, "gram", G)
        object.__setattr__(self, "gram_eigvals", eig)
        object.__setattr__(self, "gram_rank", rank)

    @property
    def k(self) -> int:
        return self.basis.shape[0]

    @property
    def M(self) -> int:
        return self.basis.shape[1]

    @property
    def condition(self) -> float:
        if self.k == 0:
            return 1.0
        ev = self.gram_eigvals
        if ev[-1] <= 0.0:
            return np.inf
        small = ev[0]
        return np.inf if small <= 0.0 else float(ev[-1] / small)

    @classmethod
    def empty(cls, M: int, batch_fingerprint: str) -> "SpanBasis":
        return cls(np.zeros((0, M)), batch_fingerprint)


@dataclass(frozen=True)
class ProjectionPolicy:
    """Gram-inversion policy for span projections.

    Eigenvalues below ``rcond`` times the largest are treated as zero
    (pseudo-inverse).  ``ridge`` > 0 adds ridge*trace(G)/k to the diagonal
    first.  With ``strict=True`` and no ridge, a Gram condition number above
    ``max_condition`` raises SingularSpan instead of regularizing.
    """

    rcond: float = 1e-10
    ridge: float = 0.0
    max_condition: float = 1e12
    strict: bool = False


DEFAULT_POLICY = ProjectionPolicy()


def _gram_pinv(span: SpanBasis, policy: ProjectionPolicy) -> np.ndarray:
    G = span.gram
    if policy.strict and policy.ridge == 0.0 and span.condition > policy.max_condition:
        raise SingularSpan(
            f"span Gram condition {span.condition:.3e} exceeds {policy.max_condition:.1e} "
            "and regularization is disabled"
        )
    if policy.ridge > 0.0 and span.k > 0:
        G = G + (policy.ridge * np.trace(G) / span.k) * np.eye(span.k)
    w, V = np.linalg.eigh(G)
    cutoff = policy.rcond * max(w.max(initial=0.0), 0.0)
    inv_w = np.where(w > cutoff, 1.0 / np.where(w > cutoff, w, 1.0), 0.0)
    return (V * inv_w) @ V.T


def project_span(
    h: FunctionSample, span: SpanBasis, policy: ProjectionPolicy = DEFAULT_POLICY
) -> FunctionSample:
    """Orthogonal projection of h onto the span: E0[h v'] C0(v)^+ v."""
    _check_same_batch(h, span)
    if span.k == 0:
        return FunctionSample.zero(h.q, h.M, h.batch_fingerprint)
    if span.M != h.M:
        raise ShapeError("span and sample have different M")
    coeff = (_chunked_gram(h.values, span.basis) / h.M) @ _gram_pinv(span, policy)
    return FunctionSample(coeff @ span.basis, h.batch_fingerprint)


def residual(
    h: FunctionSample, span: SpanBasis, policy: ProjectionPolicy = DEFAULT_POLICY
) -> FunctionSample:
    """h minus its projection onto the span."""
    proj = project_span(h, span, policy)
    return FunctionSample(h.values - proj.values, h.batch_fingerprint)


def orthonormal_rows(
    values: np.ndarray, drop_tol: float = 1e-8
) -> tuple[np.ndarray, list[int]]:
    """Sequential empirical orthonormalization of centered rows.

    Modified Gram-Schmidt with one reorthogonalization pass, processing rows
    in index order.  Near-dependent rows (residual norm below drop_tol times
    the row norm) are dropped.  Because each output row is a combination of
    input rows with index <= its own, the span of the first j outputs equals
    the span of the first j inputs: prefixes of the result realize exactly
    nested spans.

    Returns (U, kept) with U row-orthonormal under the empirical inner
    product and kept the original index of each row of U.
    """
    V = np.atleast_2d(np.asarray(values, dtype=float))
    V = V - V.mean(axis=1, keepdims=True)
    M = V.shape[1]
    out: list[np.ndarray] = []
    kept: list[int] = []
    for j in range(V.shape[0]):
        w = V[j].copy()
        n0 = np.sqrt(np.dot(w, w) / M)
        for _ in range(2):
            if out:
                U = np.asarray(out)
                w -= (U @ w / M) @ U
        nw = np.sqrt(np.dot(w, w) / M)
        if nw <= drop_tol * max(n0, 1e-300):
            continue
        out.append(w / nw)
        kept.append(j)
    U = np.asarray(out) if out else np.zeros((0, M))
    return U, kept
