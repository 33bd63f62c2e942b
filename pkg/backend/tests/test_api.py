"""
Tests for the HTTP API.
"""
import json

from fastapi import status

from app.core.config import settings

API = settings.API_V1_STR


def test_health(client):
    response = client.get("/health")
    assert response.status_code == status.HTTP_200_OK
    assert response.json()["status"] == "ok"
    assert response.json()["environment"] == "testing"


def test_metrics_endpoint_exposes_counters(client):
    client.post(
        f"{API}/analysis/check-cq",
        json={"problem_name": "halfspace", "options": {"point": "origin", "cq": "licq"}},
    )
    response = client.get("/metrics")
    assert response.status_code == status.HTTP_200_OK
    assert "regkit_analysis_runs_total" in response.text


def test_list_bundled_problems(client):
    response = client.get(f"{API}/analysis/problems")
    assert response.status_code == status.HTTP_200_OK
    by_name = {p["name"]: p for p in response.json()}
    assert by_name["ex42_bilevel"]["bilevel"] is True
    assert by_name["ex_qp"]["points"] == ["negative", "positive"]


def test_check_cq_by_name(client):
    response = client.post(
        f"{API}/analysis/check-cq",
        json={"problem_name": "ex32", "options": {"point": "origin", "cq": "licq"}},
    )
    assert response.status_code == status.HTTP_200_OK
    body = response.json()
    assert body["payload"]["verdict"] == "fails"
    assert body["payload"]["active_set"] == [1, 2]
    assert body["command"] == ["check-cq", "ex32_gamma"]


def test_inline_problem_with_explicit_point(client):
    problem = {
        "name": "inline",
        "dims": {"n": 1, "m": 1},
        "lower": {"ineq": ["y1 - x1"], "objective": "y1"},
    }
    response = client.post(
        f"{API}/analysis/check-cq",
        json={"problem": problem, "options": {"point": {"x": [0.0], "y": [0.0]}, "cq": "mfcq"}},
    )
    assert response.status_code == status.HTTP_200_OK
    assert response.json()["payload"]["verdict"] == "holds"


def test_infinite_values_are_serialised(client):
    response = client.post(
        f"{API}/analysis/scan",
        json={"problem_name": "jump", "options": {"grid": "-1:1:3"}},
    )
    assert response.status_code == status.HTTP_200_OK
    nodes = json.loads(response.text)["payload"]["scan"]["nodes"]
    assert nodes[0]["phi"] in ("inf", "Infinity")


def test_both_problem_sources_rejected(client):
    response = client.post(
        f"{API}/analysis/check-cq",
        json={"problem_name": "qp", "problem": {"name": "x", "dims": {"n": 0, "m": 1}}},
    )
    assert response.status_code == status.HTTP_422_UNPROCESSABLE_ENTITY


def test_analysis_errors_map_to_422(client):
    problem = {"name": "bad", "dims": {"n": 1, "m": 1}, "lower": {"ineq": ["y3 - x1"]}}
    response = client.post(f"{API}/analysis/check-cq", json={"problem": problem, "options": {"point": "0,0"}})
    assert response.status_code == status.HTTP_422_UNPROCESSABLE_ENTITY
    body = response.json()
    assert body["error"] == "index_error"
    assert body["index"] == 3
    assert body["where"] == "lower.ineq[1]"


def test_unknown_bundled_problem(client):
    response = client.post(f"{API}/analysis/probe-rreg", json={"problem_name": "nope", "options": {"point": "origin"}})
    assert response.status_code == status.HTTP_422_UNPROCESSABLE_ENTITY
    assert response.json()["error"] == "problem_file_error"


def test_config_overrides_are_applied(client):
    response = client.post(
        f"{API}/analysis/probe-rreg",
        json={
            "problem_name": "halfspace",
            "options": {"point": "origin"},
            "overrides": {"radii": [0.1, 0.01], "samples_per_radius": 8, "seed": 7},
        },
    )
    assert response.status_code == status.HTTP_200_OK
    body = response.json()
    assert body["seed"] == 7
    assert [r["radius"] for r in body["payload"]["records"]] == [0.1, 0.01]
    assert all(r["samples"] == 8 for r in body["payload"]["records"])


def test_bilevel_command_without_upper_level(client):
    response = client.post(f"{API}/analysis/solve-opt", json={"problem_name": "halfspace"})
    assert response.status_code == status.HTTP_422_UNPROCESSABLE_ENTITY
    body = response.json()
    assert body["error"] == "precondition_violation"
    assert "no upper level" in body["detail"]
