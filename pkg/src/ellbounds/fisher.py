"""Scores, Fisher information, and the two Cramer-Rao bound routes.

The score of the packed parameterization is computed analytically (mu block
``-2 psi(t) Sigma^{-1}(x - mu)``, scatter block through the constrained vech
embedding) and cross-checked by a central finite-difference oracle that
re-imposes the constraint at every perturbed point.

Two routes to the bound with nuisance parameters are kept side by side:

* Schur: invert ``C(s_g) - I_gn C(s_n)^{-1} I_gn'`` from the FIM blocks;
* Projection: covariance of the efficient score (the residual of the
  interest score after projection onto the nuisance span), inverted.

On a shared batch the two are the same matrix up to solver roundoff; the
projection route is authoritative and their agreement is reported as a free
self-check with every bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

from . import hilbert
from .errors import ModelError, NonIdentifiable, ScoreError, ShapeError, SingularFim
from .hilbert import FunctionSample, ProjectionPolicy, SpanBasis
from .model import (
    ParamPartition,
    ResModel,
    constraint_jacobian,
    pack_params,
    res_logpdf,
    unpack_params,
    vech_indices,
)
from .sampling import SampleBatch, sample_res

__all__ = [
    "ScoreSample",
    "BoundResult",
    "score_analytic",
    "score_fd",
    "fim_mc",
    "crb_schur",
    "efficient_score",
    "efficient_fim",
    "compute_bounds",
    "spd_inverse",
]

DEGENERACY_TOL = 1e-8
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class ScoreSample:
    """Stacked score evaluations s_theta(x_m) with the interest/nuisance split."""

    full: FunctionSample  # (d, M)
    partition: ParamPartition

    def __post_init__(self):
        if self.full.q != self.partition.d:
            raise ShapeError(
                f"score has {self.full.q} rows but partition expects d={self.partition.d}"
            )

    @property
    def interest(self) -> FunctionSample:
        return self.full.rows(self.partition.interest_idx)

    @property
    def nuisance(self) -> FunctionSample:
        if self.partition.r == 0:
            return FunctionSample.zero(0, self.full.M, self.full.batch_fingerprint)
        return self.full.rows(self.partition.nuisance_idx)

    def mean_sigmas(self) -> np.ndarray:
        """|raw row mean| in units of (row std / sqrt(M)); ~N(0,1) per row
        when the score formula is right, so values beyond 4-6 flag a bug."""
        stds = np.sqrt(np.maximum(np.diag(hilbert.cov0(self.full)), 1e-300))
        return np.abs(self.full.raw_row_means) * np.sqrt(self.full.M) / stds


def _check_batch(model: ResModel, batch: SampleBatch) -> None:
    if batch.model_fingerprint != model.fingerprint:
        raise ModelError(
            "batch was drawn from a different model "
            f"({batch.model_fingerprint} vs {model.fingerprint})"
        )


def score_analytic(model: ResModel, batch: SampleBatch, partition: ParamPartition) -> ScoreSample:
    """Exact score rows in packed order (mu first, then constrained vech)."""
    _check_batch(model, batch)
    N = model.N
    U = (batch.data - model.mu).T  # (N, M)
    W = sla.cho_solve((model.chol, True), U)  # Sigma^{-1} (x - mu)
    t = np.einsum("ij,ij->j", U, W)
    psi = model.generator.psi(t, N)
    if not np.all(np.isfinite(psi)):
        bad = int(np.flatnonzero(~np.isfinite(psi))[0])
        raise ScoreError(
            f"psi overflowed at sample index {bad} (t={t[bad]!r}, "
            f"generator {model.generator.label()})"
        )
    s_mu = -2.0 * psi * W

    idx = vech_indices(N)
    s_vech = np.empty((len(idx), U.shape[1]))
    Sinv = model.sigma_inv
    for k, (i, j) in enumerate(idx):
        g = -0.5 * Sinv[i, j] - psi * W[i] * W[j]
        s_vech[k] = g if i == j else 2.0 * g
    J = constraint_jacobian(model.sigma, model.constraint)
    s_shape = J.T @ s_vech  # (P, M)

    values = np.vstack([s_mu, s_shape]) if s_shape.shape[0] else s_mu
    return ScoreSample(FunctionSample(values, batch.fingerprint), partition)


def score_fd(
    model: ResModel,
    batch: SampleBatch,
    partition: ParamPartition,
    step: float = 1e-5,
) -> ScoreSample:
    """Central-difference score oracle along each packed coordinate.

    Each perturbed point is unpacked, which re-imposes the identifiability
    constraint, so the differences run along the constraint surface exactly
    like the analytic packed score.
    """
    _check_batch(model, batch)
    if step <= 0:
        raise ScoreError(f"step must be positive, got {step}")
    theta0 = pack_params(model)
    d = theta0.shape[0]
    values = np.empty((d, batch.M))
    for k in range(d):
        try:
            lo = unpack_params(theta0 - step * _unit(d, k), model.N, model.generator, model.constraint)
            hi = unpack_params(theta0 + step * _unit(d, k), model.N, model.generator, model.constraint)
        except ModelError as exc:
            raise ScoreError(f"constraint projection failed at coordinate {k}: {exc}") from exc
        values[k] = (res_logpdf(batch.data, hi) - res_logpdf(batch.data, lo)) / (2.0 * step)
    return ScoreSample(FunctionSample(values, batch.fingerprint), partition)


def _unit(d: int, k: int) -> np.ndarray:
    e = np.zeros(d)
    e[k] = 1.0
    return e


def fim_mc(scores: ScoreSample) -> np.ndarray:
    """Fisher information as the empirical covariance of the stacked score."""
    return hilbert.cov0(scores.full)


def spd_inverse(A: np.ndarray, what: str = "matrix", max_condition: float = MAX_CONDITION) -> np.ndarray:
    """Inverse of a symmetric positive definite matrix with a condition guard."""
    A = 0.5 * (A + A.T)
    eig = np.linalg.eigvalsh(A)
    if eig[0] <= 0.0 or eig[-1] / eig[0] > max_condition:
        raise SingularFim(
            f"{what} is numerically singular (eigenvalues in [{eig[0]:.3e}, {eig[-1]:.3e}])"
        )
    c = np.linalg.cholesky(A)
    inv = sla.cho_solve((c, True), np.eye(A.shape[0]))
    return 0.5 * (inv + inv.T)


def crb_schur(fim: np.ndarray, partition: ParamPartition) -> np.ndarray:
    """Bound on the interest block: inverse Schur complement of the nuisance."""
    fim = np.asarray(fim, dtype=float)
    if fim.shape != (partition.d, partition.d):
        raise ShapeError(f"FIM must be {partition.d}x{partition.d}, got {fim.shape}")
    gi = list(partition.interest_idx)
    ni = list(partition.nuisance_idx)
    I_gg = fim[np.ix_(gi, gi)]
    if partition.r == 0:
        return spd_inverse(I_gg, "interest information")
    I_gn = fim[np.ix_(gi, ni)]
    I_nn = fim[np.ix_(ni, ni)]
    eig = np.linalg.eigvalsh(0.5 * (I_nn + I_nn.T))
    if eig[0] <= 0.0 or eig[-1] / eig[0] > MAX_CONDITION:
        raise SingularFim(
            f"nuisance information block is numerically singular "
            f"(eigenvalues in [{eig[0]:.3e}, {eig[-1]:.3e}])"
        )
    S = I_gg - I_gn @ np.linalg.solve(I_nn, I_gn.T)
    return spd_inverse(0.5 * (S + S.T), "efficient information (Schur route)")


def efficient_score(
    scores: ScoreSample, policy: ProjectionPolicy = hilbert.DEFAULT_POLICY
) -> FunctionSample:
    """Residual of the interest score after projecting out the nuisance span."""
    span = SpanBasis(scores.nuisance.values, scores.full.batch_fingerprint)
    return hilbert.residual(scores.interest, span, policy)


def efficient_fim(
    scores: ScoreSample, policy: ProjectionPolicy = hilbert.DEFAULT_POLICY
) -> np.ndarray:
    """Covariance of the efficient score; inverse equals the Schur-route bound."""
    return hilbert.cov0(efficient_score(scores, policy))


@dataclass(frozen=True)
class BoundResult:
    """FIM, efficient FIM and bound matrices with Monte Carlo provenance."""

    fim: np.ndarray
    crb: np.ndarray
    efficient_fim: np.ndarray
    crb_schur: np.ndarray
    route: str
    route_agreement: float
    partition: ParamPartition
    M: int
    seed: int
    model_fingerprint: str
    batch_fingerprint: str
    conditions: dict = field(default_factory=dict)


def bounds_from_scores(scores: ScoreSample, M: int, seed: int, model_fingerprint: str,
                       policy: ProjectionPolicy = hilbert.DEFAULT_POLICY) -> BoundResult:
    """Assemble both bound routes from one score sample on one batch."""
    fim = fim_mc(scores)
    s_star = efficient_score(scores, policy)
    n_star = hilbert.norm(s_star)
    n_gamma = hilbert.norm(scores.interest)
    if n_star <= DEGENERACY_TOL * n_gamma:
        raise NonIdentifiable(
            f"efficient score collapsed (|s*| = {n_star:.3e} <= {DEGENERACY_TOL:.0e} * "
            f"|s_interest| = {DEGENERACY_TOL * n_gamma:.3e}); interest direction is "
            "confounded with the nuisance span"
        )
    eff = hilbert.cov0(s_star)
    crb_proj = spd_inverse(eff, "efficient information (projection route)")
    crb_s = crb_schur(fim, scores.partition)
    agree = float(
        np.linalg.norm(crb_proj - crb_s) / max(np.linalg.norm(crb_s), 1e-300)
    )
    fim_eig = np.linalg.eigvalsh(fim)
    eff_eig = np.linalg.eigvalsh(eff)
    conditions = {
        "fim_condition": float(fim_eig[-1] / fim_eig[0]) if fim_eig[0] > 0 else np.inf,
        "efficient_condition": float(eff_eig[-1] / eff_eig[0]) if eff_eig[0] > 0 else np.inf,
    }
    return BoundResult(
        fim=fim,
        crb=crb_proj,
        efficient_fim=eff,
        crb_schur=crb_s,
        route="projection",
        route_agreement=agree,
        partition=scores.partition,
        M=M,
        seed=seed,
        model_fingerprint=model_fingerprint,
        batch_fingerprint=scores.full.batch_fingerprint,
        conditions=conditions,
    )


def compute_bounds(
    model: ResModel,
    partition: ParamPartition,
    M: int,
    seed: int,
    threads: int = 1,
    policy: ProjectionPolicy = hilbert.DEFAULT_POLICY,
) -> BoundResult:
    """Sample a batch, evaluate analytic scores, and build both bound routes."""
    batch = sample_res(model, M, seed, threads=threads)
    scores = score_analytic(model, batch, partition)
    return bounds_from_scores(scores, M, seed, model.fingerprint, policy)
