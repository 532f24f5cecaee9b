import numpy as np
import pytest
from fastapi.testclient import TestClient

from backend.app.main import app

from .conftest import eq5_structure


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


def test_health(client):
    res = client.get("/health")
    assert res.status_code == 200
    assert res.json()["status"] == "healthy"


def test_fit_identity_picks_noise_model(client):
    res = client.post("/api/factors/fit", json={"matrix": np.eye(4).tolist(), "n": 100})
    assert res.status_code == 200
    body = res.json()
    assert body["models_tested"] == 1
    assert body["selected"]["structure"]["d"] == 0


def test_fit_eq5_population(client, eq5):
    res = client.post("/api/factors/fit", json={"matrix": eq5["sigma"].to_list(), "n": 1000, "kind": "population"})
    assert res.status_code == 200
    assert res.json()["selected"]["structure"]["d"] == 2


def test_fit_needs_sample_size(client):
    res = client.post("/api/factors/fit", json={"matrix": np.eye(3).tolist()})
    assert res.status_code == 400
    assert res.json()["detail"]["error"] == "InputError"


def test_fit_without_null_reports_no_candidates(client):
    res = client.post("/api/factors/fit", json={"matrix": np.eye(3).tolist(), "n": 50, "fit_null": False})
    assert res.status_code == 422
    assert res.json()["detail"]["error"] == "NoCandidates"


def test_fit_csv_upload(client, eq5):
    text = "\n".join(",".join(repr(v) for v in row) for row in eq5["sigma"].to_list())
    res = client.post(
        "/api/factors/fit-csv",
        files={"file": ("corr.csv", text, "text/csv")},
        data={"input_type": "corr", "n": "1000", "grid": "equi:50"},
    )
    assert res.status_code == 200
    assert res.json()["selected"]["structure"]["d"] == 2


def test_scan_with_truth(client, eq5):
    res = client.post(
        "/api/factors/scan",
        json={"matrix": eq5["sigma"].to_list(), "truth": eq5_structure().to_dict()},
    )
    assert res.status_code == 200
    assert res.json()["best"]["hd"] == 0


def test_score(client):
    truth = {"p": 4, "d": 2, "support": [[0, 0], [1, 0], [2, 1], [3, 1]]}
    est = {"p": 4, "d": 2, "support": [[0, 1], [1, 1], [2, 0]]}
    res = client.post("/api/factors/score", json={"estimate": est, "truth": truth})
    assert res.status_code == 200
    assert res.json()["hd"] == 1


def test_score_rejects_malformed_structure(client):
    res = client.post("/api/factors/score", json={"estimate": {"p": 4}, "truth": {"p": 4, "d": 0, "support": []}})
    assert res.status_code == 400


def test_simulate(client):
    res = client.post("/api/simulations/simulate", json={"config": {"d": 2, "n": 30, "seed": 3}, "include_data": True})
    assert res.status_code == 200
    body = res.json()
    assert np.allclose(np.diag(body["sigma"]), 1.0)
    assert len(body["data"]) == 30 and len(body["data"][0]) == 10


def test_bench_diagnostics(client):
    spec = {"d": [2], "n": [200], "alpha": [0.0], "replicates": 2, "mode": "diagnostics", "seed": 1}
    res = client.post("/api/simulations/bench", json=spec)
    assert res.status_code == 200
    body = res.json()
    assert body["schema_version"] == 1
    assert len(body["rows"]) == 2
    assert body["cells"][0]["metrics"]["pop_thresholdable"]["mean"] == 1.0
