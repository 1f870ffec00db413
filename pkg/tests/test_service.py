"""HTTP layer: endpoint contracts, payload shapes and error mapping."""

import numpy as np
import pytest
from fastapi.testclient import TestClient

import volterra
from volterra.config import builtin_config, linear_growth_config
from volterra.service import create_app

BAD_MODULUS_TEXT = """
[domain]
dim = 1
omega = (0, inf)
exhaustion = anchored
lambda_lower = "0"
lambda_upper = "x1"
tau = "x1"

[kernel]
k = "1"

[F]
f = "u"
b = "1"
eta = "1"

[outer]
form = additive
g = "2 * u"
phi = "x"

[solve]
n = 1
h = 0.125
"""


@pytest.fixture(scope="module")
def client():
    with TestClient(create_app(), raise_server_exceptions=False) as c:
        yield c


@pytest.fixture(scope="module")
def linear_text():
    return linear_growth_config(n=1, h=1.0 / 64.0).serialize()


class TestHealth:
    def test_health(self, client):
        resp = client.get("/health")
        assert resp.status_code == 200
        assert resp.json() == {"status": "ok", "version": volterra.__version__}


class TestExprEval:
    def test_plain_value(self, client):
        resp = client.post("/expr/eval", json={"expression": "exp(1)"})
        assert resp.status_code == 200
        assert resp.json()["value"] == pytest.approx(np.e, rel=1e-15)

    def test_bindings(self, client):
        resp = client.post(
            "/expr/eval",
            json={"expression": "x ^ 2 + y", "bindings": {"x": 3.0, "y": 1.0}},
        )
        assert resp.json()["value"] == 10.0

    def test_parse_error_maps_to_400(self, client):
        resp = client.post("/expr/eval", json={"expression": "2 +"})
        assert resp.status_code == 400
        body = resp.json()
        assert body["error"] == "ParseError"
        assert "message" in body

    def test_unbound_variable_maps_to_400(self, client):
        resp = client.post("/expr/eval", json={"expression": "x + 1"})
        assert resp.status_code == 400
        assert resp.json()["error"] == "UnboundVariableError"


class TestCheck:
    @pytest.mark.parametrize("name", ["second-kind", "goursat"])
    def test_builtins_pass(self, client, name):
        config_text = builtin_config(name).serialize()
        resp = client.post("/check", json={"config_text": config_text})
        assert resp.status_code == 200
        body = resp.json()
        assert body["passed"] is True
        names = {s["name"] for s in body["sections"]}
        assert len(body["sections"]) == 4
        for section in body["sections"]:
            assert section["passed"], section

    def test_bad_modulus_fails_with_witness(self, client):
        resp = client.post("/check", json={"config_text": BAD_MODULUS_TEXT})
        assert resp.status_code == 200
        body = resp.json()
        assert body["passed"] is False
        failed = [s for s in body["sections"] if not s["passed"]]
        assert failed
        assert any(s["items"] for s in failed)

    def test_config_error_maps_to_400(self, client):
        resp = client.post("/check", json={"config_text": "[domain]\ndim = 1\n"})
        assert resp.status_code == 400
        assert resp.json()["error"] == "ConfigError"


class TestWeights:
    def test_rows_and_csv_agree(self, client, linear_text):
        resp = client.post("/weights", json={"config_text": linear_text, "n_max": 3})
        assert resp.status_code == 200
        body = resp.json()
        assert body["start"] == 1
        assert [row["n"] for row in body["rows"]] == [1, 2, 3]
        header = body["csv"].splitlines()[0]
        assert header == "n,L,Lhat,a,k,r,phi_b,phi_eta"
        assert len(body["csv"].splitlines()) == 4
        for row in body["rows"]:
            assert 0.0 < row["k"] < 1.0
            assert row["L"] > 0.0

    def test_selection_failure_maps_to_400(self, client):
        text = BAD_MODULUS_TEXT  # modulus slope one leaves no margin
        resp = client.post("/weights", json={"config_text": text})
        assert resp.status_code == 400
        assert resp.json()["error"] == "WeightSelectionFailed"


class TestSolve:
    def test_solve_linear(self, client, linear_text):
        resp = client.post("/solve", json={"config_text": linear_text})
        assert resp.status_code == 200
        body = resp.json()
        assert body["converged"] is True
        assert body["residual"] <= 1e-8
        assert body["contraction_ratio"] < 1.0
        assert body["csv"].splitlines()[0] == "x,u"
        assert "schedule_csv" in body and body["schedule_csv"].startswith("n,")
        assert "iterations" in body and body["iterations"] > 1

    def test_external_schedule_reproduces_solution(self, client, linear_text):
        first = client.post("/solve", json={"config_text": linear_text}).json()
        again = client.post(
            "/solve",
            json={"config_text": linear_text, "schedule_csv": first["schedule_csv"]},
        ).json()
        assert again["csv"] == first["csv"]
        assert again["schedule_csv"] == first["schedule_csv"]

    def test_overrides_change_grid(self, client, linear_text):
        resp = client.post(
            "/solve",
            json={"config_text": linear_text, "overrides": {"h": 0.25, "n": 2}},
        )
        body = resp.json()
        assert body["n"] == 2
        # member 2 of the anchored ladder is (0, 2) sampled every 0.25
        assert len(body["csv"].splitlines()) == 1 + 9

    def test_schedule_missing_member_maps_to_400(self, client, linear_text):
        resp = client.post(
            "/solve",
            json={
                "config_text": linear_text,
                "schedule_csv": "n,L,Lhat,a,k,r,phi_b,phi_eta\n"
                "2,1.0,1.0,4.0,0.5,10.0,0.3,0.1\n",
            },
        )
        assert resp.status_code == 400
        assert resp.json()["error"] == "WeightSelectionFailed"


class TestExample:
    def test_second_kind_comparison(self, client):
        resp = client.post(
            "/example", json={"name": "second-kind", "n": 1, "h": 1.0 / 64.0}
        )
        assert resp.status_code == 200
        body = resp.json()
        assert body["comparison"] is not None
        assert body["comparison"]["passed"] is True
        assert body["comparison"]["max_error"] <= body["comparison"]["tolerance"]
        assert body["solve"]["converged"] is True
        assert "[domain]" in body["config_text"]

    def test_goursat_traces(self, client):
        resp = client.post(
            "/example",
            json={
                "name": "goursat",
                "f": "0",
                "traces": {"x1": "x1", "x2": "x2 ^ 2"},
                "h": 1.0 / 16.0,
            },
        )
        assert resp.status_code == 200
        body = resp.json()
        assert body["comparison"]["passed"] is True
        assert body["comparison"]["max_error"] <= 1e-9

    def test_no_solve_returns_config_only(self, client):
        resp = client.post(
            "/example", json={"name": "oscillating", "solve": False}
        )
        assert resp.status_code == 200
        body = resp.json()
        assert body["solve"] is None
        assert body["csv"] is None
        assert "[outer]" in body["config_text"]

    def test_incompatible_traces_map_to_400(self, client):
        resp = client.post(
            "/example",
            json={
                "name": "goursat",
                "f": "0",
                "traces": {"x1": "1 + x1", "x2": "x2"},
                "h": 0.125,
            },
        )
        assert resp.status_code == 400
        assert resp.json()["error"] == "IncompatibleTraces"

    def test_unknown_example_maps_to_400(self, client):
        resp = client.post("/example", json={"name": "wave"})
        assert resp.status_code == 400
        assert resp.json()["error"] == "ConfigError"
