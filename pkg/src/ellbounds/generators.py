"""Density generators for elliptically symmetric laws.

A generator ``g`` defines the density ``p(x) = |Sigma|^{-1/2} g(t)`` with
``t = (x - mu)' Sigma^{-1} (x - mu)``.  All normalization constants live
inside ``log g`` so the density is self-normalized for every dimension:
the squared modular radius then has density

    f_T(t) = pi^{N/2} / Gamma(N/2) * t^{N/2 - 1} * g(t),   t >= 0.

Catalog:

* ``gaussian``            g(t) = (2 pi)^{-N/2} exp(-t/2); T ~ chi^2_N.
* ``student-t`` (nu > 2)  multivariate t with nu dof; T ~ N F(N, nu).
* ``gen-gaussian`` (s>0)  exponential power: g(t) prop exp(-t^s / 2), unit
                          internal scale; T^s/2 ~ Gamma(N/(2s)).

Both the log-generator and its derivative ``psi = d log g / dt`` are exact,
as are the radial cdf / quantile maps (used for inverse-cdf sampling).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import MomentError, ModelError

__all__ = ["DensityGenerator", "make_generator", "GENERATOR_KINDS"]

GENERATOR_KINDS = ("gaussian", "student-t", "gen-gaussian")


@dataclass(frozen=True)
class DensityGenerator:
    """One catalog density generator; immutable.

    ``param`` is the degrees of freedom for ``student-t`` and the exponent
    for ``gen-gaussian``; ``0.0`` (unused) for ``gaussian``.
    """

    kind: str
    param: float = 0.0

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise ModelError(f"unknown generator kind {self.kind!r}; catalog: {GENERATOR_KINDS}")
        if self.kind == "student-t" and not self.param > 2.0:
            raise MomentError(
                f"student-t requires nu > 2 (got nu={self.param}); second moments "
                "must exist for error-covariance comparisons"
            )
        if self.kind == "gen-gaussian" and not self.param > 0.0:
            raise ModelError(f"gen-gaussian requires shape s > 0 (got s={self.param})")

    # -- log-generator and its derivative ---------------------------------

    def logg(self, t, N: int):
        """log g(t) for dimension N, fully normalized."""
        t = np.asarray(t, dtype=float)
        if self.kind == "gaussian":
            return -0.5 * N * np.log(2.0 * np.pi) - 0.5 * t
        if self.kind == "student-t":
            nu = self.param
            const = (
                special.gammaln((nu + N) / 2.0)
                - special.gammaln(nu / 2.0)
                - 0.5 * N * np.log(nu * np.pi)
            )
            return const - 0.5 * (nu + N) * np.log1p(t / nu)
        s = self.param
        const = (
            np.log(s)
            + special.gammaln(N / 2.0)
            - 0.5 * N * np.log(np.pi)
            - (N / (2.0 * s)) * np.log(2.0)
            - special.gammaln(N / (2.0 * s))
        )
        return const - 0.5 * t**s

    def psi(self, t, N: int):
        """psi(t) = d log g / dt.  Singular at t = 0 when s < 1."""
        t = np.asarray(t, dtype=float)
        if self.kind == "gaussian":
            return np.full_like(t, -0.5)
        if self.kind == "student-t":
            nu = self.param
            return -(nu + N) / (2.0 * (nu + t))
        s = self.param
        with np.errstate(divide="ignore"):
            return -0.5 * s * t ** (s - 1.0)

    # -- radial law of the squared Mahalanobis distance --------------------

    def radial_pdf(self, t, N: int):
        t = np.asarray(t, dtype=float)
        lc = 0.5 * N * np.log(np.pi) - special.gammaln(N / 2.0)
        with np.errstate(divide="ignore"):
            logpdf = lc + (N / 2.0 - 1.0) * np.log(t) + self.logg(t, N)
        return np.exp(logpdf)

    def radial_cdf(self, t, N: int):
        t = np.asarray(t, dtype=float)
        if self.kind == "gaussian":
            return special.gammainc(N / 2.0, t / 2.0)
        if self.kind == "student-t":
            return special.fdtr(N, self.param, t / N)
        s = self.param
        return special.gammainc(N / (2.0 * s), 0.5 * t**s)

    def radial_quantile(self, u, N: int):
        """Quantile of the squared radius T; exact inverse of radial_cdf."""
        u = np.asarray(u, dtype=float)
        if np.any((u < 0.0) | (u > 1.0)) or not np.all(np.isfinite(u)):
            raise ValueError("quantile argument must lie in [0, 1]")
        if self.kind == "gaussian":
            return 2.0 * special.gammaincinv(N / 2.0, u)
        if self.kind == "student-t":
            return N * special.fdtri(N, self.param, u)
        s = self.param
        return (2.0 * special.gammaincinv(N / (2.0 * s), u)) ** (1.0 / s)

    def radial_cdf_inverse(self, u, N: int):
        """Modular-radius quantile: R = sqrt of the squared-radius quantile."""
        return np.sqrt(self.radial_quantile(u, N))

    # -- moments -----------------------------------------------------------

    def moment_exists(self, k: float) -> bool:
        """Whether E[R^k] is finite (R = modular radius)."""
        if self.kind == "student-t":
            return k < self.param
        return True

    def label(self) -> str:
        if self.kind == "gaussian":
            return "gaussian"
        if self.kind == "student-t":
            return f"student-t(nu={self.param:g})"
        return f"gen-gaussian(s={self.param:g})"


def make_generator(kind: str, param: float | None = None) -> DensityGenerator:
    """Build a catalog generator from its config spelling."""
    kind = kind.strip().lower()
    if kind == "gaussian":
        return DensityGenerator("gaussian")
    if kind in ("student-t", "student_t", "studentt"):
        if param is None:
            raise ModelError("student-t requires a degrees-of-freedom parameter nu")
        return DensityGenerator("student-t", float(param))
    if kind in ("gen-gaussian", "generalized-gaussian", "gen_gaussian"):
        if param is None:
            raise ModelError("gen-gaussian requires a shape parameter s")
        return DensityGenerator("gen-gaussian", float(param))
    raise ModelError(f"unknown generator kind {kind!r}; catalog: {GENERATOR_KINDS}")
