"""Thin command-line client for the bound-computation service.

By default each command mounts the service in-process (ASGI transport), so
no server needs to run and outputs stay byte-identical; point ``--server``
at a deployed instance to offload the computation.  Exit codes: 0 success,
1 configuration error, 2 numerical degeneracy, 3 integrity violation.
"""

from __future__ import annotations

import pathlib
import sys

import click
import httpx

from . import __version__
from .config import parse_config
from .errors import ConfigError

_EXIT_BY_KIND = {"config": 1, "degenerate": 2, "integrity": 3}


def _post(command: str, payload: dict, server: str | None) -> tuple[int, dict]:
    """POST to a remote service, or mount the app in-process over ASGI."""
    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            resp = client.post(f"/v1/{command}", json=payload)
            try:
                return resp.status_code, resp.json()
            except ValueError:
                return resp.status_code, {"error_kind": "config", "detail": resp.text}

    import asyncio

    from .service import create_app

    async def go() -> tuple[int, dict]:
        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(
            transport=transport, base_url="http://ellbounds.local", timeout=None
        ) as client:
            resp = await client.post(f"/v1/{command}", json=payload)
            return resp.status_code, resp.json()

    return asyncio.run(go())


def _run_command(command: str, config_path: str, out_dir: str, threads: int,
                 server: str | None) -> None:
    try:
        text = pathlib.Path(config_path).read_text()
        cfg = parse_config(text)
    except OSError as exc:
        click.echo(f"error: cannot read config: {exc}", err=True)
        sys.exit(1)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)

    try:
        status, body = _post(command, {"config": cfg.payload(), "threads": threads}, server)
    except httpx.HTTPError as exc:
        click.echo(f"error: service unreachable: {exc}", err=True)
        sys.exit(1)

    if status != 200:
        kind = body.get("error_kind", "config")
        click.echo(f"{kind} error: {body.get('detail', body)}", err=True)
        sys.exit(_EXIT_BY_KIND.get(kind, 1))

    try:
        out = pathlib.Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, content in body["files"].items():
            (out / name).write_text(content)
            click.echo(f"wrote {out / name}")
    except OSError as exc:
        click.echo(f"error: cannot write outputs: {exc}", err=True)
        sys.exit(1)
    for key, val in body["summary"].items():
        click.echo(f"{key}: {val}")
    if body.get("degenerate"):
        click.echo("benchmark contains invalid reports (failure rate > 5%)", err=True)
        sys.exit(2)


def _common(fn):
    fn = click.option("--config", "config_path", required=True,
                      type=click.Path(exists=False), help="experiment config file")(fn)
    fn = click.option("--out", "out_dir", required=True, type=click.Path(),
                      help="output directory for CSV files")(fn)
    fn = click.option("--threads", default=1, show_default=True,
                      help="worker threads (results are identical for any value)")(fn)
    fn = click.option("--server", default=None,
                      help="base URL of a running service; default runs in-process")(fn)
    return fn


@click.group()
@click.version_option(__version__)
def main() -> None:
    """Cramer-Rao and semiparametric bounds for elliptical models."""


@main.command()
@_common
def sample(config_path, out_dir, threads, server):
    """Draw a seeded sample batch and write it as CSV."""
    _run_command("sample", config_path, out_dir, threads, server)


@main.command()
@_common
def crb(config_path, out_dir, threads, server):
    """Compute the parametric bound by both routes and write the matrices."""
    _run_command("crb", config_path, out_dir, threads, server)


@main.command()
@_common
def scrb(config_path, out_dir, threads, server):
    """Run the sieve schedule and write the semiparametric bound trace."""
    _run_command("scrb", config_path, out_dir, threads, server)


@main.command()
@_common
def bench(config_path, out_dir, threads, server):
    """Benchmark estimators against the bounds and write the reports."""
    _run_command("bench", config_path, out_dir, threads, server)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
