"""Location/scatter estimators and Monte Carlo benchmarking against bounds.

The catalog deliberately spans the robustness range: sample moments
(efficient at the Gaussian, fragile elsewhere), Tyler's fixed point
(distribution-free for the shape), a Huber-weighted M-estimator, and the
Student-t maximum likelihood fixed point (a parametric benchmark).  All
scatter outputs are reported in the constraint-normalized shape scale so
their error covariances are directly comparable to the bound matrices, which
live on the same constrained surface.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import stats

from .errors import EstimatorError, NonConvergence
from .model import ResModel, normalize_scatter, pack_point
from .sampling import SampleBatch, sample_res

__all__ = [
    "FixedPointResult",
    "EstimatorReport",
    "sample_moments",
    "tyler",
    "huber_m",
    "student_t_mle",
    "benchmark",
    "ESTIMATOR_IDS",
]

ESTIMATOR_IDS = ("mean", "tyler", "huber", "student-t")


class FixedPointResult(NamedTuple):
    location: np.ndarray
    scatter: np.ndarray  # constraint-normalized shape
    iterations: int
    residual: float


def _as_data(batch) -> np.ndarray:
    return batch.data if isinstance(batch, SampleBatch) else np.asarray(batch, dtype=float)


def sample_moments(batch, constraint: str = "trace") -> tuple[np.ndarray, np.ndarray]:
    """Sample mean and unbiased covariance, shape-normalized.

    Raises EstimatorError when M <= N or the covariance is rank deficient.
    """
    X = _as_data(batch)
    M, N = X.shape
    if M <= N:
        raise EstimatorError(f"need M > N observations, got M={M}, N={N}")
    mean = X.mean(axis=0)
    U = X - mean
    cov = (U.T @ U) / (M - 1)
    eig = np.linalg.eigvalsh(cov)
    if eig[0] <= 1e-12 * max(eig[-1], 1e-300):
        raise EstimatorError("sample covariance is rank deficient")
    return mean, normalize_scatter(cov, constraint)


def _maha_all(X: np.ndarray, mu: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    W = np.linalg.solve(sigma, (X - mu).T)
    return np.einsum("ij,ji->i", X - mu, W)


def tyler(
    batch,
    center: np.ndarray | None = None,
    tol: float = 1e-9,
    max_iter: int = 200,
    constraint: str = "trace",
) -> FixedPointResult:
    """Tyler's scatter fixed point; joint location update when center is None.

    Iterates Sigma <- (N/M) sum_m u_m u_m' / t_m with t_m the current squared
    Mahalanobis distance, renormalized to the constraint each step.  With no
    center given, the location is updated with 1/sqrt(t) weights from the
    coordinatewise median.  Observations exactly at the center are excluded
    with a warning.
    """
    X = _as_data(batch)
    M, N = X.shape
    if M <= N:
        raise EstimatorError(f"need M > N observations, got M={M}, N={N}")
    if max_iter < 1:
        raise EstimatorError(f"max_iter must be >= 1, got {max_iter}")
    joint = center is None
    mu = np.median(X, axis=0) if joint else np.asarray(center, dtype=float)
    sigma = np.eye(N)
    for it in range(1, max_iter + 1):
        if joint:
            t = _maha_all(X, mu, sigma)
            ok = t > 0
            w = 1.0 / np.sqrt(t[ok])
            mu = (w[:, None] * X[ok]).sum(axis=0) / w.sum()
        U = X - mu
        t = _maha_all(X, mu, sigma)
        ok = t > 0
        if not np.all(ok):
            warnings.warn(
                f"excluding {int((~ok).sum())} observation(s) at the center from the "
                "Tyler fixed point",
                stacklevel=2,
            )
        Uw = U[ok] / np.sqrt(t[ok])[:, None]
        new = normalize_scatter((N / ok.sum()) * (Uw.T @ Uw), constraint)
        resid = np.linalg.norm(new - sigma) / np.linalg.norm(sigma)
        sigma = new
        if resid <= tol:
            return FixedPointResult(mu, sigma, it, resid)
    raise NonConvergence(
        f"Tyler fixed point did not reach tol={tol:g} in {max_iter} iterations "
        f"(residual {resid:.3e})",
        residual=resid,
    )


def huber_m(
    batch,
    q01: float = 0.9,
    tol: float = 1e-9,
    max_iter: int = 500,
    constraint: str = "trace",
) -> FixedPointResult:
    """Joint Huber-weighted location/scatter fixed point.

    Weights w(t) = 1 for t <= c^2 and c^2/t above, with c^2 the chi^2_N
    quantile at q01; q01 -> 1 removes the truncation and the fixed point
    collapses to the sample moments.
    """
    X = _as_data(batch)
    M, N = X.shape
    if M <= N:
        raise EstimatorError(f"need M > N observations, got M={M}, N={N}")
    if not 0.0 < q01 < 1.0:
        raise EstimatorError(f"q01 must lie in (0, 1), got {q01}")
    if max_iter < 1:
        raise EstimatorError(f"max_iter must be >= 1, got {max_iter}")
    c2 = float(stats.chi2.ppf(q01, N))
    mu = np.median(X, axis=0)
    sigma = np.eye(N)
    for it in range(1, max_iter + 1):
        t = _maha_all(X, mu, sigma)
        w = np.where(t <= c2, 1.0, c2 / np.maximum(t, 1e-300))
        mu_new = (w[:, None] * X).sum(axis=0) / w.sum()
        U = X - mu_new
        new = normalize_scatter((U.T * w) @ U / M, constraint)
        resid = np.linalg.norm(new - sigma) / np.linalg.norm(sigma)
        shift = np.linalg.norm(mu_new - mu) / max(1.0, np.linalg.norm(mu_new))
        mu, sigma = mu_new, new
        if resid <= tol and shift <= tol:
            return FixedPointResult(mu, sigma, it, max(resid, shift))
    raise NonConvergence(
        f"Huber fixed point did not reach tol={tol:g} in {max_iter} iterations "
        f"(residual {max(resid, shift):.3e})",
        residual=max(resid, shift),
    )


def student_t_mle(
    batch,
    nu: float = 4.0,
    tol: float = 1e-9,
    max_iter: int = 500,
    constraint: str = "trace",
) -> FixedPointResult:
    """EM fixed point for the t model at fixed dof; shape-normalized output.

    Weights (N + nu)/(nu + t) recover the sample moments as nu -> inf.
    """
    X = _as_data(batch)
    M, N = X.shape
    if M <= N:
        raise EstimatorError(f"need M > N observations, got M={M}, N={N}")
    if not nu > 0:
        raise EstimatorError(f"nu must be positive, got {nu}")
    if max_iter < 1:
        raise EstimatorError(f"max_iter must be >= 1, got {max_iter}")
    mu = np.median(X, axis=0)
    sigma = np.eye(N)
    for it in range(1, max_iter + 1):
        t = _maha_all(X, mu, sigma)
        w = (N + nu) / (nu + t)
        mu_new = (w[:, None] * X).sum(axis=0) / w.sum()
        U = X - mu_new
        new = (U.T * w) @ U / M
        resid = np.linalg.norm(new - sigma) / np.linalg.norm(sigma)
        shift = np.linalg.norm(mu_new - mu) / max(1.0, np.linalg.norm(mu_new))
        mu, sigma = mu_new, new
        if resid <= tol and shift <= tol:
            return FixedPointResult(mu, normalize_scatter(sigma, constraint), it, max(resid, shift))
    raise NonConvergence(
        f"Student-t EM did not reach tol={tol:g} in {max_iter} iterations "
        f"(residual {max(resid, shift):.3e})",
        residual=max(resid, shift),
    )


# -- benchmarking -------------------------------------------------------------


@dataclass(frozen=True)
class EstimatorReport:
    """Per-estimator Monte Carlo summary against the bounds."""

    estimator: str
    R: int
    M: int
    bias: np.ndarray  # packed interest coordinates
    error_cov: np.ndarray  # E[(est - true)(est - true)'] over trials
    vs_crb: float | None  # min eig of (M * error_cov - crb)
    vs_scrb: float | None
    n_failures: int
    mean_iterations: float
    valid: bool
    trial_errors: np.ndarray  # (R_ok, q), one row per successful trial
    partition_label: str
    seed: int
    model_fingerprint: str


def _run_estimator(est: str, batch: SampleBatch, model: ResModel, params: dict) -> FixedPointResult:
    c = model.constraint
    if est == "mean":
        mean, shape = sample_moments(batch, constraint=c)
        return FixedPointResult(mean, shape, 1, 0.0)
    if est == "tyler":
        return tyler(batch, center=params.get("tyler_center"), constraint=c)
    if est == "huber":
        return huber_m(batch, q01=params.get("huber_q", 0.9), constraint=c)
    if est == "student-t":
        return student_t_mle(batch, nu=params.get("student_t_nu", 4.0), constraint=c)
    raise EstimatorError(f"unknown estimator {est!r}; catalog: {ESTIMATOR_IDS}")


def benchmark(
    model: ResModel,
    estimator_ids,
    R: int,
    M: int,
    seed: int,
    partition,
    crb: np.ndarray | None = None,
    scrb_final: np.ndarray | None = None,
    params: dict | None = None,
    threads: int = 1,
    max_failure_rate: float = 0.05,
) -> list[EstimatorReport]:
    """Error covariance of each estimator over R trials vs the bounds.

    Every trial draws a fresh batch from a seed derived as
    (root seed, "bench", trial index); all estimators see the same trial
    batches.  M * error_cov in packed interest coordinates is compared to
    per-observation bounds through the minimum eigenvalue of the Loewner
    slack.  A report with more than ``max_failure_rate`` failed trials is
    flagged invalid.
    """
    if R < 2:
        raise EstimatorError(f"need R >= 2 trials for an error covariance, got R={R}")
    ids = tuple(estimator_ids)
    for est in ids:
        if est not in ESTIMATOR_IDS:
            raise EstimatorError(f"unknown estimator {est!r}; catalog: {ESTIMATOR_IDS}")
    params = dict(params or {})
    theta0 = pack_point(model.mu, model.sigma)
    gi = list(partition.interest_idx)

    def run_trial(r: int) -> dict[str, tuple[np.ndarray, int] | None]:
        batch = sample_res(model, M, seed=_trial_seed(seed, r))
        out: dict[str, tuple[np.ndarray, int] | None] = {}
        for est in ids:
            try:
                res = _run_estimator(est, batch, model, params)
            except (EstimatorError, NonConvergence):
                out[est] = None
                continue
            err = pack_point(res.location, res.scatter)[gi] - theta0[gi]
            out[est] = (err, res.iterations)
        return out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trials = list(pool.map(run_trial, range(R)))
    else:
        trials = [run_trial(r) for r in range(R)]

    reports = []
    for est in ids:
        errs, iters = [], []
        for tr in trials:
            if tr[est] is not None:
                errs.append(tr[est][0])
                iters.append(tr[est][1])
        n_fail = R - len(errs)
        if len(errs) < 2:
            raise EstimatorError(f"estimator {est!r} failed in {n_fail}/{R} trials")
        E = np.asarray(errs)
        bias = E.mean(axis=0)
        err_cov = (E.T @ E) / E.shape[0]
        err_cov = 0.5 * (err_cov + err_cov.T)
        vs_crb = _slack(M * err_cov, crb)
        vs_scrb = _slack(M * err_cov, scrb_final)
        reports.append(
            EstimatorReport(
                estimator=est,
                R=R,
                M=M,
                bias=bias,
                error_cov=err_cov,
                vs_crb=vs_crb,
                vs_scrb=vs_scrb,
                n_failures=n_fail,
                mean_iterations=float(np.mean(iters)),
                valid=(n_fail / R) <= max_failure_rate,
                trial_errors=E,
                partition_label=partition.label,
                seed=int(seed),
                model_fingerprint=model.fingerprint,
            )
        )
    return reports


def _trial_seed(root: int, trial: int) -> int:
    # documented derivation: trial seeds come from the root via (tag, index)
    from .seeding import derive_seed_sequence

    return int(derive_seed_sequence(root, "bench", trial).generate_state(1, np.uint64)[0])


def _slack(scaled_cov: np.ndarray, bound: np.ndarray | None) -> float | None:
    if bound is None:
        return None
    diff = scaled_cov - bound
    return float(np.linalg.eigvalsh(0.5 * (diff + diff.T))[0])
