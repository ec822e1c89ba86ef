"""Elliptical model: density, parameterization, interest/nuisance split.

The scatter matrix and the generator are jointly identifiable only up to a
scale swap, so one scatter coordinate is eliminated by a constraint:

* ``trace``  tr(Sigma) = N (default),
* ``det``    det(Sigma) = 1.

The packed parameter vector is ``theta = (mu_1..mu_N, vech(Sigma))`` with
vech taken row-major over the lower triangle and the *last diagonal entry*
``Sigma[N-1, N-1]`` dropped; it is recovered from the constraint on unpack.
This fixed ordering is what ties score rows, Fisher blocks and estimator
error coordinates together.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import linalg

from .errors import ModelError, ShapeError
from .generators import DensityGenerator

__all__ = [
    "ResModel",
    "pack_point",
    "ParamPartition",
    "vech_indices",
    "normalize_scatter",
    "mahalanobis",
    "res_logpdf",
    "pack_params",
    "unpack_params",
    "constraint_jacobian",
    "make_partition",
]

CONSTRAINTS = ("trace", "det")


def vech_indices(N: int) -> list[tuple[int, int]]:
    """Row-major lower-triangle index order for the scatter coordinates."""
    return [(i, j) for i in range(N) for j in range(i + 1)]


def normalize_scatter(sigma: np.ndarray, constraint: str) -> np.ndarray:
    """Rescale an SPD matrix so the identifiability constraint holds exactly."""
    sigma = np.asarray(sigma, dtype=float)
    N = sigma.shape[0]
    if constraint == "trace":
        tr = float(np.trace(sigma))
        if tr <= 0:
            raise ModelError("cannot trace-normalize: non-positive trace")
        return sigma * (N / tr)
    if constraint == "det":
        sign, logdet = np.linalg.slogdet(sigma)
        if sign <= 0:
            raise ModelError("cannot det-normalize: non-positive determinant")
        return sigma * np.exp(-logdet / N)
    raise ModelError(f"unknown constraint {constraint!r}; options: {CONSTRAINTS}")


@dataclass(frozen=True)
class ResModel:
    """One point of the elliptical model; immutable after construction."""

    mu: np.ndarray
    sigma: np.ndarray
    generator: DensityGenerator
    constraint: str = "trace"

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        sigma = np.asarray(self.sigma, dtype=float)
        if mu.ndim != 1:
            raise ShapeError(f"mu must be a vector, got shape {mu.shape}")
        N = mu.shape[0]
        if sigma.shape != (N, N):
            raise ShapeError(f"sigma must be {N}x{N}, got {sigma.shape}")
        if not np.all(np.isfinite(mu)) or not np.all(np.isfinite(sigma)):
            raise ModelError("mu and sigma must be finite")
        if not np.allclose(sigma, sigma.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(sigma).max())):
            raise ModelError("sigma must be symmetric")
        if self.constraint not in CONSTRAINTS:
            raise ModelError(f"unknown constraint {self.constraint!r}; options: {CONSTRAINTS}")
        sigma = 0.5 * (sigma + sigma.T)
        try:
            np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError as exc:
            raise ModelError("sigma is not positive definite") from exc
        if self.constraint == "trace":
            if abs(np.trace(sigma) - N) > 1e-8 * N:
                raise ModelError(
                    f"trace constraint violated: tr(sigma)={np.trace(sigma)!r}, expected {N}; "
                    "use normalize_scatter() first"
                )
        else:
            if abs(np.linalg.slogdet(sigma)[1]) > 1e-8:
                raise ModelError(
                    "det constraint violated: det(sigma) != 1; use normalize_scatter() first"
                )
        mu.setflags(write=False)
        sigma.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def N(self) -> int:
        return self.mu.shape[0]

    @cached_property
    def chol(self) -> np.ndarray:
        """Lower Cholesky factor of the scatter (computed once)."""
        return np.linalg.cholesky(self.sigma)

    @cached_property
    def sigma_inv(self) -> np.ndarray:
        return linalg.cho_solve((self.chol, True), np.eye(self.N))

    @cached_property
    def logdet_sigma(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))

    @cached_property
    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(f"resmodel:N={self.N}:gen={self.generator.kind}:{self.generator.param!r}"
                 f":constraint={self.constraint}:".encode())
        h.update(self.mu.tobytes())
        h.update(self.sigma.tobytes())
        return h.hexdigest()[:16]


def mahalanobis(x: np.ndarray, mu: np.ndarray, sigma_or_chol, lower: bool = False):
    """Squared Mahalanobis distance t = (x-mu)' Sigma^{-1} (x-mu).

    ``x`` may be a single vector or an (M, N) matrix of rows.  Pass a lower
    Cholesky factor with ``lower=True`` to skip refactorization.
    """
    x = np.asarray(x, dtype=float)
    mu = np.asarray(mu, dtype=float)
    N = mu.shape[0]
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != N:
        raise ShapeError(f"x has dimension {X.shape[1]}, model has {N}")
    chol = np.asarray(sigma_or_chol, dtype=float)
    if not lower:
        if chol.shape != (N, N):
            raise ShapeError(f"sigma must be {N}x{N}, got {chol.shape}")
        try:
            chol = np.linalg.cholesky(0.5 * (chol + chol.T))
        except np.linalg.LinAlgError as exc:
            raise ModelError("sigma is not positive definite") from exc
    W = linalg.solve_triangular(chol, (X - mu).T, lower=True)
    t = np.einsum("ij,ij->j", W, W)
    return float(t[0]) if single else t


def res_logpdf(x: np.ndarray, model: ResModel):
    """Log of the fully normalized elliptical density at x (vector or rows)."""
    t = mahalanobis(x, model.mu, model.chol, lower=True)
    return -0.5 * model.logdet_sigma + model.generator.logg(t, model.N)


# -- packed parameterization ------------------------------------------------


def n_packed_shape(N: int) -> int:
    return N * (N + 1) // 2 - 1


def n_params(N: int) -> int:
    return N + n_packed_shape(N)


def pack_point(mu: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Packed coordinates of a raw (mu, sigma) point; the eliminated entry
    Sigma[N-1, N-1] is simply dropped, so moving along it leaves the packed
    vector unchanged."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    idx = vech_indices(mu.shape[0])[:-1]
    shape_part = np.array([sigma[i, j] for (i, j) in idx], dtype=float)
    return np.concatenate([mu, shape_part])


def pack_params(model: ResModel) -> np.ndarray:
    """theta = (mu, vech(sigma) with the last diagonal entry dropped)."""
    return pack_point(model.mu, model.sigma)


def unpack_params(
    theta: np.ndarray, N: int, generator: DensityGenerator, constraint: str = "trace"
) -> ResModel:
    """Rebuild a model from packed coordinates, re-imposing the constraint.

    Raises ModelError when theta implies a non-SPD scatter.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (n_params(N),):
        raise ShapeError(f"theta must have length {n_params(N)}, got {theta.shape}")
    mu = theta[:N].copy()
    sigma = np.zeros((N, N))
    for val, (i, j) in zip(theta[N:], vech_indices(N)[:-1]):
        sigma[i, j] = val
        sigma[j, i] = val
    sigma[N - 1, N - 1] = _eliminated_entry(sigma, N, constraint)
    return ResModel(mu=mu, sigma=sigma, generator=generator, constraint=constraint)


def _eliminated_entry(sigma: np.ndarray, N: int, constraint: str) -> float:
    """Value of Sigma[N-1, N-1] implied by the constraint."""
    if N == 1:
        return 1.0
    if constraint == "trace":
        return N - float(np.trace(sigma[: N - 1, : N - 1]))
    if constraint == "det":
        A = sigma[: N - 1, : N - 1]
        b = sigma[: N - 1, N - 1]
        sign, logdetA = np.linalg.slogdet(A)
        if sign <= 0:
            raise ModelError("leading block not positive definite under det constraint")
        w = np.linalg.solve(A, b)
        return float(b @ w + np.exp(-logdetA))
    raise ModelError(f"unknown constraint {constraint!r}")


def constraint_jacobian(sigma: np.ndarray, constraint: str) -> np.ndarray:
    """Jacobian d vech_full / d theta_shape of the constrained embedding.

    Rows follow the full vech order, columns the packed order (full vech
    without its last element).  The last row holds the gradient of the
    eliminated entry with respect to each packed shape coordinate.
    """
    sigma = np.asarray(sigma, dtype=float)
    N = sigma.shape[0]
    idx = vech_indices(N)
    P_full = len(idx)
    P = P_full - 1
    J = np.zeros((P_full, P))
    for k in range(P):
        J[k, k] = 1.0
    if P == 0:
        return J
    if constraint == "trace":
        for k, (i, j) in enumerate(idx[:-1]):
            if i == j and i < N - 1:
                J[P_full - 1, k] = -1.0
        return J
    if constraint == "det":
        A = sigma[: N - 1, : N - 1]
        b = sigma[: N - 1, N - 1]
        Ainv = np.linalg.inv(A)
        detA = np.linalg.det(A)
        w = Ainv @ b
        # unstructured gradient of c = b'A^{-1}b + 1/det(A) wrt symmetric A
        GA = -np.outer(w, w) - Ainv / detA
        for k, (i, j) in enumerate(idx[:-1]):
            if i < N - 1 and j < N - 1:
                J[P_full - 1, k] = GA[i, j] if i == j else 2.0 * GA[i, j]
            elif i == N - 1 and j < N - 1:
                J[P_full - 1, k] = 2.0 * w[j]
        return J
    raise ModelError(f"unknown constraint {constraint!r}")


# -- interest / nuisance split ----------------------------------------------


@dataclass(frozen=True)
class ParamPartition:
    """Index split of the packed parameter vector into interest and nuisance."""

    interest_idx: tuple[int, ...]
    nuisance_idx: tuple[int, ...]
    d: int
    label: str = field(default="custom")

    def __post_init__(self):
        inter = tuple(int(i) for i in self.interest_idx)
        nuis = tuple(int(i) for i in self.nuisance_idx)
        if set(inter) & set(nuis):
            raise ModelError("interest and nuisance indices overlap")
        if sorted(inter + nuis) != list(range(self.d)):
            raise ModelError("partition must cover all packed coordinates exactly once")
        if len(inter) < 1:
            raise ModelError("at least one interest coordinate is required")
        object.__setattr__(self, "interest_idx", inter)
        object.__setattr__(self, "nuisance_idx", nuis)

    @property
    def q(self) -> int:
        return len(self.interest_idx)

    @property
    def r(self) -> int:
        return len(self.nuisance_idx)


def make_partition(N: int, interest: str) -> ParamPartition:
    """Partition for interest = 'mu' | 'shape' | 'mu+shape'."""
    d = n_params(N)
    mu_idx = tuple(range(N))
    shape_idx = tuple(range(N, d))
    key = interest.strip().lower()
    if key == "mu":
        return ParamPartition(mu_idx, shape_idx, d, label="mu")
    if key == "shape":
        if not shape_idx:
            raise ModelError("no free shape coordinates at N=1 (constraint fixes the scale)")
        return ParamPartition(shape_idx, mu_idx, d, label="shape")
    if key in ("mu+shape", "all"):
        return ParamPartition(mu_idx + shape_idx, (), d, label="mu+shape")
    raise ModelError(f"unknown interest spec {interest!r}; options: mu | shape | mu+shape")
