
import pytest
from fastapi.testclient import TestClient

from pdoa.service import app
from pdoa import ChannelParams, ClockModel, Scenario, default_synthesizer, run_cell


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


def test_health(client):
    assert client.get("/health").json() == {"status": "ok"}


def test_simulate_defaults(client):
    resp = client.post("/simulate", json={})
    assert resp.status_code == 200
    body = resp.json()
    assert body["p"] == 10 and body["n"] == 10
    assert body["noiseless"] is True
    assert body["df_hz"] == 0.5e6
    mags = [
        body["re"][i][j] ** 2 + body["im"][i][j] ** 2
        for i in range(10)
        for j in range(10)
    ]
    assert all(abs(m - 1.0) < 1e-9 for m in mags)


def test_simulate_then_estimate_round_trip(client):
    sim = client.post("/simulate", json={"n": 8, "p": 6}).json()
    resp = client.post(
        "/estimate",
        json={"matrix": {"re": sim["re"], "im": sim["im"]}},
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["eta_ppm"] == pytest.approx(80.0, abs=1e-6)
    assert body["d_hat_m"] == pytest.approx(140.0, abs=1e-6)
    assert body["method"] == "wls"
    assert body["low_confidence"] is False


def test_estimate_ls_method(client):
    sim = client.post("/simulate", json={}).json()
    resp = client.post(
        "/estimate",
        json={"matrix": {"re": sim["re"], "im": sim["im"]}, "method": "ls"},
    )
    assert resp.json()["method"] == "ls"


def test_simulate_with_noise_is_seed_deterministic(client):
    req = {"snr_db": 10.0, "seed": 3, "mode": "physical"}
    a = client.post("/simulate", json=req).json()
    b = client.post("/simulate", json=req).json()
    assert a == b
    assert a["noiseless"] is False


def test_crlb_desk_numbers(client):
    resp = client.post("/crlb", json={})
    body = resp.json()
    assert body["sigma_eta"] == pytest.approx(3.0975488788782e-05, rel=1e-9)
    assert body["sigma_d_m"] == pytest.approx(0.37144871686961534, rel=1e-9)
    # variances scale inversely with SNR
    ten_db_up = client.post("/crlb", json={"snr_db": 20.0}).json()
    assert body["var_eta"] / ten_db_up["var_eta"] == pytest.approx(10.0, rel=1e-9)


def test_sweep_matches_harness(client):
    resp = client.post(
        "/sweep",
        json={
            "snr_db": [10.0],
            "hops": [[6, 6]],
            "trials": 20,
            "estimators": ["wls"],
            "seed": 99,
        },
    )
    assert resp.status_code == 200
    rows = resp.json()["rows"]
    assert len(rows) == 1
    # mirror the service's ppm-to-skew conversion bit for bit
    scenario = Scenario(
        clock=ClockModel(nu1=32e6, eta0=80.0 * 1e-6),
        synth=default_synthesizer(),
        channel=ChannelParams(d01=140.0),
        dt=80e-6,
    )
    expected = run_cell(scenario, 6, 6, 10.0, "wls", 20, 99)
    assert rows[0]["rmse_eta"] == expected.rmse_eta
    assert rows[0]["rmse_d"] == expected.rmse_d
    assert rows[0]["crlb_sigma_d"] == expected.crlb_sigma_d


def test_validation_errors_are_422(client):
    assert client.post("/crlb", json={"p": 1}).status_code == 422
    assert client.post("/simulate", json={"n": 1}).status_code == 422
    assert client.post("/simulate", json={"df_hz": -1.0}).status_code == 422


def test_domain_errors_are_400(client):
    # more carriers than the synthesizer ladder supports
    assert client.post("/simulate", json={"n": 200}).status_code == 400
    # zero matrix cannot be factorized
    zeros = [[0.0] * 4 for _ in range(4)]
    resp = client.post("/estimate", json={"matrix": {"re": zeros, "im": zeros}})
    assert resp.status_code == 400
    # non-finite SNR rejected (sent as a string: strict JSON has no inf)
    assert client.post("/crlb", json={"snr_db": "inf"}).status_code in (400, 422)


def test_ragged_matrix_rejected(client):
    resp = client.post(
        "/estimate",
        json={"matrix": {"re": [[1.0, 2.0], [3.0]], "im": [[0.0, 0.0], [0.0]]}},
    )
    assert resp.status_code == 422
