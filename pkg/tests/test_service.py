"""Service-level tests exercising the HTTP surface directly."""

import numpy as np
import pytest
from fastapi.testclient import TestClient

from ellbounds import __version__
from ellbounds.service import create_app


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


BASE = {
    "dimension": 2,
    "generator": "student-t",
    "nu": 4.0,
    "seed": 4242,
    "interest": "mu",
    "M": 3000,
    "R": 30,
    "schedule": [2, 4],
    "estimators": ["mean"],
}


def test_health(client):
    body = client.get("/v1/health").json()
    assert body == {"status": "ok", "version": __version__}


def test_catalog(client):
    body = client.get("/v1/catalog").json()
    assert {g["kind"] for g in body["generators"]} == {
        "gaussian", "student-t", "gen-gaussian",
    }
    assert body["constraints"] == ["trace", "det"]
    assert "poly-log-t" in body["families"]


def test_sample_endpoint(client):
    resp = client.post("/v1/sample", json={"config": BASE})
    assert resp.status_code == 200
    body = resp.json()
    assert set(body["files"]) == {"batch.csv"}
    assert body["summary"]["M"] == 3000 and body["summary"]["N"] == 2
    lines = body["files"]["batch.csv"].splitlines()
    data_rows = [ln for ln in lines if ln and not ln.startswith("#") and not ln.startswith("x")]
    assert len(data_rows) == 3000


def test_crb_endpoint_route_agreement(client):
    resp = client.post("/v1/crb", json={"config": BASE, "threads": 2})
    assert resp.status_code == 200
    body = resp.json()
    assert body["summary"]["route"] == "projection"
    assert body["summary"]["route_agreement"] <= 1e-8
    assert "bounds.csv" in body["files"]


def test_scrb_endpoint(client):
    resp = client.post("/v1/scrb", json={"config": BASE})
    assert resp.status_code == 200
    body = resp.json()
    assert body["summary"]["k_schedule"] == [2, 4]
    assert "sieve.csv" in body["files"]


def test_bench_endpoint(client):
    resp = client.post("/v1/bench", json={"config": BASE})
    assert resp.status_code == 200
    body = resp.json()
    assert body["summary"]["invalid"] == []
    assert set(body["files"]) == {"report.csv", "trials.csv"}


def test_identical_requests_are_byte_identical(client):
    a = client.post("/v1/sample", json={"config": BASE}).json()
    b = client.post("/v1/sample", json={"config": BASE}).json()
    assert a["files"] == b["files"]


def test_config_error_maps_to_400(client):
    bad = dict(BASE, generator="cauchy")
    resp = client.post("/v1/crb", json={"config": bad})
    assert resp.status_code == 400
    assert resp.json()["error_kind"] == "config"


def test_moment_rule_maps_to_degenerate_kind(client):
    # nu <= 2 violates the second-moment requirement; surfaced as config
    bad = dict(BASE, nu=1.5)
    resp = client.post("/v1/sample", json={"config": bad})
    assert resp.status_code == 400
    assert "nu > 2" in resp.json()["detail"]


def test_singular_fim_maps_to_422(client):
    # d = 4 packed parameters but only 4 observations: singular information
    bad = dict(BASE, interest="mu+shape", M=4)
    resp = client.post("/v1/crb", json={"config": bad})
    assert resp.status_code == 422
    assert resp.json()["error_kind"] == "degenerate"


def test_missing_required_field_is_schema_error(client):
    payload = {k: v for k, v in BASE.items() if k != "seed"}
    resp = client.post("/v1/crb", json={"config": payload})
    assert resp.status_code == 422  # pydantic validation


def test_error_kind_classification():
    from ellbounds.errors import ConfigError, IntegrityError, SingularFim
    from ellbounds.service.app import classify_error

    assert classify_error(ConfigError("x")) == (400, "config")
    assert classify_error(SingularFim("x")) == (422, "degenerate")
    assert classify_error(IntegrityError("x")) == (500, "integrity")


def test_outputs_embed_version_config_seed(client):
    for cmd in ("sample", "crb", "scrb", "bench"):
        body = client.post(f"/v1/{cmd}", json={"config": BASE}).json()
        for text in body["files"].values():
            assert "# version:" in text
            assert "# config:" in text
            assert "# seed:" in text or cmd == "sample"
        if cmd == "sample":
            assert "# seed:" in body["files"]["batch.csv"]


def test_summary_matches_file_content(client):
    resp = client.post("/v1/crb", json={"config": BASE}).json()
    text = resp["files"]["bounds.csv"]
    crb00 = None
    for line in text.splitlines():
        if line.startswith("crb,0,0,"):
            crb00 = float(line.rsplit(",", 1)[1])
    assert crb00 is not None and np.isfinite(crb00)
