import pytest
from fastapi.testclient import TestClient

from app.core.config import settings
from app.main import app


@pytest.fixture
def client(tmp_path, monkeypatch):
    monkeypatch.setattr(settings, "OUTPUT_ROOT", str(tmp_path))
    return TestClient(app)


def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json() == {"status": "ok"}


def test_run_then_fetch_report(client, desk_config, tmp_path):
    response = client.post("/experiments/run", json={"name": "Desk Run", "config": {**desk_config, "stage_through": "slr"}})
    assert response.status_code == 200
    body = response.json()
    assert body["run_name"] == "desk-run"
    assert body["report"]["status"] == "completed"
    assert (tmp_path / "desk-run" / "report.json").exists()

    fetched = client.get("/experiments/desk-run/report")
    assert fetched.status_code == 200
    assert fetched.json()["silhouette"] == body["report"]["silhouette"]


def test_invalid_config_is_unprocessable(client, desk_config):
    response = client.post("/experiments/run", json={"name": "bad", "config": {**desk_config, "d_out": 9}})
    assert response.status_code == 422


def test_failed_data_stage_is_unprocessable(client, tmp_path):
    config = {"data_csv": str(tmp_path / "absent.csv"), "d_pca": 2, "d_out": 1}
    response = client.post("/experiments/run", json={"name": "absent", "config": config})
    assert response.status_code == 422
    assert client.get("/experiments/absent/report").json()["status"] == "failed"


def test_unknown_report_is_404(client):
    assert client.get("/experiments/nothing-here/report").status_code == 404
