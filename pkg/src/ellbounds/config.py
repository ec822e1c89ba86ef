"""Plain-text experiment configuration.

The format is flat ``key = value`` lines with ``#`` comments, documented in
the README.  The same canonical payload dict backs the wire format of the
service, the config hash embedded in every output file, and reproducibility
checks, so a config file, a JSON request and an output header always agree.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EllboundsError
from .estimators import ESTIMATOR_IDS
from .generators import make_generator
from .model import ParamPartition, ResModel, make_partition, normalize_scatter
from .semiparam import TILT_FAMILIES

__all__ = ["ExperimentConfig", "parse_config", "config_from_payload"]


@dataclass(frozen=True)
class ExperimentConfig:
    model: ResModel
    partition: ParamPartition
    interest: str
    M: int
    R: int
    seed: int
    schedule: tuple[int, ...]
    family: str
    estimators: tuple[str, ...]
    huber_q: float = 0.9
    student_t_nu: float = 4.0
    rtol: float = 1e-3
    extras: dict = field(default_factory=dict)

    def payload(self) -> dict:
        """Canonical JSON-ready dict; the config hash is taken over this."""
        gen = self.model.generator
        out = {
            "dimension": self.model.N,
            "mu": [float(v) for v in self.model.mu],
            "sigma": [[float(v) for v in row] for row in self.model.sigma],
            "generator": gen.kind,
            "constraint": self.model.constraint,
            "interest": self.interest,
            "M": self.M,
            "R": self.R,
            "seed": self.seed,
            "schedule": list(self.schedule),
            "family": self.family,
            "estimators": list(self.estimators),
            "huber_q": self.huber_q,
            "student_t_nu": self.student_t_nu,
            "rtol": self.rtol,
        }
        if gen.kind == "student-t":
            out["nu"] = gen.param
        if gen.kind == "gen-gaussian":
            out["shape"] = gen.param
        return out

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.payload(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _parse_floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


def _parse_matrix(text: str, N: int) -> np.ndarray:
    if text.strip().lower() == "identity":
        return np.eye(N)
    rows = [r for r in text.split(";") if r.strip()]
    mat = np.array([[float(v) for v in r.split(",") if v.strip()] for r in rows])
    if mat.shape != (N, N):
        raise ConfigError(f"sigma must be {N}x{N}, got {mat.shape}")
    return mat


def parse_config(text: str) -> ExperimentConfig:
    """Parse key/value text into a validated configuration."""
    kv: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = line.split("=", 1)
        kv[key.strip().lower()] = val.strip()
    return _build(kv)


def config_from_payload(payload: dict) -> ExperimentConfig:
    """Rebuild a configuration from its canonical payload dict."""
    kv: dict[str, str] = {}
    for key, val in payload.items():
        key = key.lower()
        if key == "mu":
            kv["mu"] = ",".join(str(float(v)) for v in val)
        elif key == "sigma":
            kv["sigma"] = ";".join(",".join(str(float(v)) for v in row) for row in val)
        elif key in ("schedule", "estimators"):
            kv[key] = ",".join(str(v) for v in val)
        else:
            kv[key] = str(val)
    return _build(kv)


def _build(kv: dict[str, str]) -> ExperimentConfig:
    try:
        if "dimension" not in kv:
            raise ConfigError("missing required key: dimension")
        N = int(kv["dimension"])
        if N < 1:
            raise ConfigError(f"dimension must be >= 1, got {N}")
        if "seed" not in kv:
            raise ConfigError("missing required key: seed (no wall-clock default)")
        seed = int(kv["seed"])
        if "generator" not in kv:
            raise ConfigError("missing required key: generator")

        param = None
        if "nu" in kv:
            param = float(kv["nu"])
        if "shape" in kv:
            param = float(kv["shape"])
        generator = make_generator(kv["generator"], param)

        mu_txt = kv.get("mu", "0")
        mu_vals = _parse_floats(mu_txt)
        if len(mu_vals) == 1:
            mu = np.full(N, mu_vals[0])
        elif len(mu_vals) == N:
            mu = np.asarray(mu_vals)
        else:
            raise ConfigError(f"mu must have 1 or {N} entries, got {len(mu_vals)}")

        constraint = kv.get("constraint", "trace").lower()
        sigma = _parse_matrix(kv.get("sigma", "identity"), N)
        sigma = normalize_scatter(0.5 * (sigma + sigma.T), constraint)
        model = ResModel(mu=mu, sigma=sigma, generator=generator, constraint=constraint)

        interest = kv.get("interest", "mu").lower()
        partition = make_partition(N, interest)

        M = int(kv.get("m", kv.get("samples", "10000")))
        if M < 1:
            raise ConfigError(f"M must be >= 1, got {M}")
        R = int(kv.get("r", kv.get("trials", "100")))

        schedule = tuple(int(v) for v in kv.get("schedule", "2,4,8").split(",") if v.strip())
        if any(b <= a for a, b in zip(schedule, schedule[1:])) or any(k < 1 for k in schedule):
            raise ConfigError(f"schedule must be strictly increasing positive ints, got {schedule}")

        family = kv.get("family", "poly-log-t").lower()
        if family not in TILT_FAMILIES:
            raise ConfigError(f"unknown family {family!r}; options: {TILT_FAMILIES}")

        estimators = tuple(
            e.strip().lower() for e in kv.get("estimators", "mean").split(",") if e.strip()
        )
        for est in estimators:
            if est not in ESTIMATOR_IDS:
                raise ConfigError(f"unknown estimator {est!r}; catalog: {ESTIMATOR_IDS}")

        return ExperimentConfig(
            model=model,
            partition=partition,
            interest=interest,
            M=M,
            R=R,
            seed=seed,
            schedule=schedule,
            family=family,
            estimators=estimators,
            huber_q=float(kv.get("huber_q", "0.9")),
            student_t_nu=float(kv.get("student_t_nu", "4.0")),
            rtol=float(kv.get("rtol", "1e-3")),
        )
    except ConfigError:
        raise
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"malformed configuration value: {exc}") from exc
    except EllboundsError as exc:
        raise ConfigError(str(exc)) from exc
