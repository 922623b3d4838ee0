import pytest
from fastapi.testclient import TestClient

from evcoord import __version__
from evcoord.service import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


@pytest.fixture(scope="module")
def small_scenario(client):
    response = client.post("/scenarios/generate", json={"size": 3, "seed": 11})
    assert response.status_code == 200
    return response.json()


class TestHealth:
    def test_health(self, client):
        body = client.get("/health").json()
        assert body == {"status": "ok", "version": __version__}


class TestGenerate:
    def test_deterministic_payload(self, client):
        a = client.post("/scenarios/generate", json={"size": 2, "seed": 4}).json()
        b = client.post("/scenarios/generate", json={"size": 2, "seed": 4}).json()
        assert a == b

    def test_size_respected(self, small_scenario):
        assert len(small_scenario["fleet"]) == 3

    def test_invalid_params_rejected(self, client):
        response = client.post("/scenarios/generate", json={"size": 0, "seed": 1})
        assert response.status_code == 422


class TestCentralEndpoint:
    def test_solves_and_certifies(self, client, small_scenario):
        response = client.post(
            "/solve/central", json={"scenario": small_scenario, "tolerance": 1e-6}
        )
        assert response.status_code == 200
        body = response.json()
        assert body["residuals"]["max_residual"] <= 1e-6
        assert len(body["schedules"]) == 3
        assert body["pev_ids"] == [p["id"] for p in small_scenario["fleet"]]

    def test_infeasible_scenario_reported(self, client, small_scenario):
        broken = dict(small_scenario)
        broken["fleet"] = [dict(p) for p in small_scenario["fleet"]]
        broken["fleet"][0]["connection"] = [0] * len(broken["fleet"][0]["connection"])
        response = client.post("/solve/central", json={"scenario": broken})
        assert response.status_code == 422
        assert "pev-000" in response.json()["detail"]


class TestDistributedEndpoint:
    def test_trace_rows_match_iterations(self, client, small_scenario):
        response = client.post("/runs/distributed", json={
            "scenario": small_scenario,
            "iterations": 50,
        })
        assert response.status_code == 200
        body = response.json()
        assert body["iterations"] == 50
        assert len(body["trace"]) == 50
        assert body["trace"][0]["rel_obj"] is None
        assert len(body["schedules"]) == 3

    def test_oracle_enables_relative_metrics(self, client, small_scenario):
        central = client.post("/solve/central", json={"scenario": small_scenario}).json()
        response = client.post("/runs/distributed", json={
            "scenario": small_scenario,
            "iterations": 20,
            "oracle": {"objective": central["objective"], "load": central["load"]},
        })
        body = response.json()
        assert body["trace"][0]["rel_obj"] is not None
        assert body["final"]["rel_load"] is not None

    def test_trace_can_be_suppressed(self, client, small_scenario):
        body = client.post("/runs/distributed", json={
            "scenario": small_scenario,
            "iterations": 20,
            "include_trace": False,
        }).json()
        assert body["trace"] == []
        assert body["final"]["iteration"] == 20

    def test_ring_override_and_faults(self, client, small_scenario):
        body = client.post("/runs/distributed", json={
            "scenario": small_scenario,
            "iterations": 30,
            "topology_kind": "ring",
            "drop_probability": 0.2,
            "fault_seed": 5,
        }).json()
        assert body["iterations"] == 30
        repeat = client.post("/runs/distributed", json={
            "scenario": small_scenario,
            "iterations": 30,
            "topology_kind": "ring",
            "drop_probability": 0.2,
            "fault_seed": 5,
        }).json()
        assert body["trace"] == repeat["trace"]


class TestCompareEndpoint:
    def test_compare_round_trip(self, client, small_scenario):
        central = client.post("/solve/central", json={"scenario": small_scenario}).json()
        run = client.post("/runs/distributed", json={
            "scenario": small_scenario,
            "iterations": 200,
            "oracle": {"objective": central["objective"], "load": central["load"]},
        }).json()
        response = client.post("/analysis/compare", json={
            "scenario": small_scenario,
            "schedules": run["schedules"],
            "central": {
                "objective": central["objective"],
                "load": central["load"],
                "schedules": central["schedules"],
            },
            "trace": run["trace"],
        })
        assert response.status_code == 200
        body = response.json()
        assert body["rel_obj"] == pytest.approx(run["final"]["rel_obj"], rel=1e-9)
        assert body["rel_load"] == pytest.approx(run["final"]["rel_load"], rel=1e-9)
        assert body["valley_central"]["combined_variance"] > 0
        assert len(body["series"]) == 200

    def test_shape_mismatch_rejected(self, client, small_scenario):
        central = client.post("/solve/central", json={"scenario": small_scenario}).json()
        response = client.post("/analysis/compare", json={
            "scenario": small_scenario,
            "schedules": [[1.0, 2.0]],
            "central": {
                "objective": central["objective"],
                "load": central["load"],
                "schedules": central["schedules"],
            },
        })
        assert response.status_code == 422


class TestDiameterEndpoint:
    def test_path_and_ring(self, client):
        path = client.post("/topology/diameter", json={"num_agents": 100, "kind": "path"}).json()
        ring = client.post("/topology/diameter", json={"num_agents": 100, "kind": "ring"}).json()
        assert path["diameter"] == 99
        assert ring["diameter"] == 50
        assert ring["num_edges"] == path["num_edges"] + 1

    def test_custom_edges(self, client):
        body = client.post("/topology/diameter", json={
            "num_agents": 4,
            "kind": "custom",
            "edges": [[0, 1], [1, 2], [2, 3], [3, 0]],
        }).json()
        assert body["diameter"] == 2

    def test_disconnected_rejected(self, client):
        response = client.post("/topology/diameter", json={
            "num_agents": 4,
            "kind": "custom",
            "edges": [[0, 1], [2, 3]],
        })
        assert response.status_code == 422
