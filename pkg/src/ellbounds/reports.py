"""CSV serialization of results.

Dialect: comma separated, '.' decimal, '#'-prefixed metadata lines, floats
written with Python's shortest round-trip repr.  Every file starts with the
package version, the config hash and the seed, so re-running a config must
reproduce each file byte for byte.
"""

from __future__ import annotations

import io

import numpy as np

from . import __version__
from .estimators import EstimatorReport
from .fisher import BoundResult
from .sampling import SampleBatch, write_batch_csv
from .semiparam import SieveTrace

__all__ = ["batch_csv", "bounds_csv", "sieve_csv", "estimator_csv", "trials_csv"]


def _fmt(v) -> str:
    return str(float(v))


def _header(kind: str, config_hash: str, seed: int, extra: dict) -> list[str]:
    lines = [
        f"# ellbounds-{kind} v1",
        f"# version: {__version__}",
        f"# config: {config_hash}",
        f"# seed: {seed}",
    ]
    lines.extend(f"# {key}: {val}" for key, val in extra.items())
    return lines


def batch_csv(batch: SampleBatch, config_hash: str) -> str:
    buf = io.StringIO()
    buf.write(f"# config: {config_hash}\n# version: {__version__}\n")
    write_batch_csv(batch, buf)
    return buf.getvalue()


def bounds_csv(result: BoundResult, config_hash: str) -> str:
    part = result.partition
    head = _header(
        "bounds",
        config_hash,
        result.seed,
        {
            "model": result.model_fingerprint,
            "batch": result.batch_fingerprint,
            "M": result.M,
            "route": result.route,
            "route_agreement": _fmt(result.route_agreement),
            "partition": f"{part.label} (q={part.q}, r={part.r})",
            **{key: _fmt(val) for key, val in result.conditions.items()},
        },
    )
    lines = head + ["matrix,i,j,value"]
    for name, mat in (
        ("fim", result.fim),
        ("efficient_fim", result.efficient_fim),
        ("crb", result.crb),
        ("crb_schur", result.crb_schur),
    ):
        for i in range(mat.shape[0]):
            for j in range(mat.shape[1]):
                lines.append(f"{name},{i},{j},{_fmt(mat[i, j])}")
    return "\n".join(lines) + "\n"


def sieve_csv(trace: SieveTrace, config_hash: str) -> str:
    q = trace.final_scrb.shape[0]
    head = _header(
        "sieve",
        config_hash,
        trace.seed,
        {
            "model": trace.model_fingerprint,
            "batch": trace.batch_fingerprint,
            "M": trace.M,
            "family": trace.family,
            "rtol": _fmt(trace.rtol),
            "converged": str(trace.converged).lower(),
        },
    )
    cols = ["k", "rel_change", "span_size", "gram_condition"]
    cols += [f"scrb_{i}_{j}" for i in range(q) for j in range(q)]
    lines = head + [",".join(cols)]

    def row(k, rel, size, cond, mat):
        vals = [str(k), _fmt(rel), str(size), _fmt(cond)]
        vals += [_fmt(mat[i, j]) for i in range(q) for j in range(q)]
        return ",".join(vals)

    lines.append(row(0, 0.0, trace.partition.r if trace.partition else 0, 1.0,
                     trace.parametric_crb))
    for idx, k in enumerate(trace.k_schedule):
        rel = trace.rel_changes[idx - 1] if idx >= 1 else float("nan")
        lines.append(row(k, rel, trace.span_sizes[idx], trace.gram_conditions[idx],
                         trace.scrb_k[idx]))
    return "\n".join(lines) + "\n"


def estimator_csv(reports: list[EstimatorReport], config_hash: str) -> str:
    if not reports:
        return "# ellbounds-bench v1\n"
    first = reports[0]
    q = first.bias.shape[0]
    head = _header(
        "bench",
        config_hash,
        first.seed,
        {
            "model": first.model_fingerprint,
            "M": first.M,
            "R": first.R,
            "partition": first.partition_label,
        },
    )
    cols = ["estimator", "R", "failures", "valid", "mean_iterations", "vs_crb", "vs_scrb"]
    cols += [f"bias_{i}" for i in range(q)]
    cols += [f"mcov_{i}_{j}" for i in range(q) for j in range(q)]
    lines = head + [",".join(cols)]
    for rep in reports:
        vals = [
            rep.estimator,
            str(rep.R),
            str(rep.n_failures),
            str(rep.valid).lower(),
            _fmt(rep.mean_iterations),
            "" if rep.vs_crb is None else _fmt(rep.vs_crb),
            "" if rep.vs_scrb is None else _fmt(rep.vs_scrb),
        ]
        vals += [_fmt(v) for v in rep.bias]
        scaled = rep.M * rep.error_cov
        vals += [_fmt(scaled[i, j]) for i in range(q) for j in range(q)]
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


def trials_csv(reports: list[EstimatorReport], config_hash: str) -> str:
    """Long-format per-trial errors for external plotting."""
    if not reports:
        return "# ellbounds-trials v1\n"
    head = _header("trials", config_hash, reports[0].seed, {"model": reports[0].model_fingerprint})
    lines = head + ["estimator,trial,coord,error"]
    for rep in reports:
        for r in range(rep.trial_errors.shape[0]):
            for c in range(rep.trial_errors.shape[1]):
                lines.append(f"{rep.estimator},{r},{c},{_fmt(rep.trial_errors[r, c])}")
    return "\n".join(lines) + "\n"
