"""FastAPI service wrapping the core package.

Run with ``uvicorn pdoa.service:app``. Each endpoint is a stateless wrapper
over the corresponding library call; long sweeps run synchronously in the
request, so put a job queue in front of /sweep if you need cancellation.
"""

from __future__ import annotations

import json
import math
import typing

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse

from ..crlb import crlb_closed_form
from ..estimator import DegenerateInputError, estimate_joint, rank_one_factors
from ..harness import Scenario, SweepConfig, TrialFailureError, run_sweep
from ..model import ChannelParams, ClockModel, SynthesizerConfig
from ..protocol import (
    MeasurementMatrix,
    NoiseSpec,
    ProtocolConfig,
    add_noise,
    synthesize_matrix,
)
from . import schemas

class PreciseJSONResponse(JSONResponse):
    """JSON response with shortest round-trip float formatting.

    Estimates and bounds must survive the wire bit-exactly; the default
    response class truncates floats.
    """

    def render(self, content: typing.Any) -> bytes:
        return json.dumps(content, separators=(",", ":")).encode("utf-8")


app = FastAPI(
    title="pdoa",
    description="Two-way phase-ranging simulation and joint skew/range estimation",
    default_response_class=PreciseJSONResponse,
)


def _scenario_parts(
    req: schemas.ScenarioIn,
) -> tuple[ClockModel, SynthesizerConfig, ChannelParams]:
    clock = ClockModel(nu1=req.nu1_hz, eta0=req.eta_ppm * 1e-6)
    synth = SynthesizerConfig.from_frequency_step(req.df_hz, req.nu1_hz)
    channel = ChannelParams(d01=req.d_m, c=req.c_mps)
    return clock, synth, channel


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/simulate", response_model=schemas.MatrixResponse)
def simulate(req: schemas.SimulateRequest) -> schemas.MatrixResponse:
    clock, synth, channel = _scenario_parts(req)
    cfg = ProtocolConfig(n_freq=req.n, p_time=req.p, dt=req.dt_s)
    rng = np.random.default_rng([req.seed, 1]) if req.mode == "physical" else None
    try:
        matrix = synthesize_matrix(req.mode, cfg, clock, synth, channel, rng)
        if req.snr_db is not None:
            matrix = add_noise(
                matrix, NoiseSpec(snr_db=req.snr_db, model=req.noise, seed=req.seed)
            )
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return schemas.MatrixResponse(
        re=matrix.entries.real.tolist(),
        im=matrix.entries.imag.tolist(),
        p=matrix.p_time,
        n=matrix.n_freq,
        df_hz=matrix.df1,
        dt_s=matrix.dt,
        noiseless=matrix.noiseless,
    )


@app.post("/estimate", response_model=schemas.EstimateResponse)
def estimate(req: schemas.EstimateRequest) -> schemas.EstimateResponse:
    entries = np.asarray(req.matrix.re) + 1j * np.asarray(req.matrix.im)
    matrix = MeasurementMatrix(
        entries=entries,
        p_time=entries.shape[0],
        n_freq=entries.shape[1],
        df1=req.df_hz,
        dt=req.dt_s,
        noiseless=False,
    )
    try:
        factors = rank_one_factors(matrix)
        result = estimate_joint(matrix, method=req.method, c=req.c_mps)
    except (DegenerateInputError, ValueError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return schemas.EstimateResponse(
        eta_hat=result.eta_hat,
        eta_ppm=result.eta_hat * 1e6,
        d_hat_m=result.d_hat,
        phi_arg=float(np.angle(result.phi_hat)),
        gamma_arg=float(np.angle(result.gamma_hat)),
        sigma_ratio=factors.sigma2 / factors.sigma1,
        method=result.method,
        low_confidence=result.low_confidence,
    )


@app.post("/crlb", response_model=schemas.CrlbResponse)
def crlb(req: schemas.CrlbRequest) -> schemas.CrlbResponse:
    if not math.isfinite(req.snr_db):
        raise HTTPException(status_code=400, detail="snr_db must be finite")
    bound = crlb_closed_form(req.snr_db, req.df_hz, req.dt_s, req.p, req.n, req.c_mps)
    return schemas.CrlbResponse(
        snr_db=req.snr_db,
        var_eta=bound.var_eta,
        var_d_m2=bound.var_d,
        sigma_eta=bound.sigma_eta,
        sigma_eta_ppm=bound.sigma_eta * 1e6,
        sigma_d_m=bound.sigma_d,
    )


@app.post("/sweep", response_model=schemas.SweepResponse)
def sweep(req: schemas.SweepRequest) -> schemas.SweepResponse:
    clock, synth, channel = _scenario_parts(req)
    scenario = Scenario(clock=clock, synth=synth, channel=channel, dt=req.dt_s)
    try:
        cfg = SweepConfig(
            snr_db_list=tuple(req.snr_db),
            hop_list=tuple(req.hops),
            trials=req.trials,
            scenario=scenario,
            estimators=tuple(req.estimators),
            master_seed=req.seed,
            noise_model=req.noise,
            randomize_d01=req.randomize_d01,
        )
        report = run_sweep(cfg)
    except (ValueError, TrialFailureError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return schemas.SweepResponse(
        rows=[
            schemas.SweepRow(
                snr_db=r.snr_db,
                n=r.n_freq,
                p=r.p_time,
                estimator=r.estimator,
                rmse_eta=r.rmse_eta,
                rmse_d=r.rmse_d,
                bias_eta=r.bias_eta,
                bias_d=r.bias_d,
                crlb_sigma_eta=r.crlb_sigma_eta,
                crlb_sigma_d=r.crlb_sigma_d,
                wrap_fraction=r.wrap_fraction,
                trials=r.trials,
                failures=r.failures,
            )
            for r in report.rows
        ]
    )
