"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field, model_validator

from ..model import SPEED_OF_LIGHT


class ScenarioIn(BaseModel):
    """Scenario parameters shared by the simulation endpoints."""

    df_hz: float = Field(default=0.5e6, gt=0)
    dt_s: float = Field(default=80e-6, gt=0)
    eta_ppm: float = Field(default=80.0, gt=-1e4, lt=1e4)
    d_m: float = Field(default=140.0, ge=0)
    nu1_hz: float = Field(default=32e6, gt=0)
    c_mps: float = Field(default=SPEED_OF_LIGHT, gt=0)


class SimulateRequest(ScenarioIn):
    n: int = Field(default=10, ge=2)
    p: int = Field(default=10, ge=1)
    mode: Literal["idealized", "physical"] = "idealized"
    snr_db: float | None = None  # omit for a noiseless matrix
    noise: Literal["gaussian", "von-mises"] = "gaussian"
    seed: int = 0


class MatrixPayload(BaseModel):
    """Complex matrix split into real/imaginary parts, row-major."""

    re: list[list[float]]
    im: list[list[float]]

    @model_validator(mode="after")
    def _consistent(self) -> "MatrixPayload":
        if len(self.re) != len(self.im):
            raise ValueError("re and im row counts differ")
        if not self.re or not self.re[0]:
            raise ValueError("matrix must be non-empty")
        width = len(self.re[0])
        for row_re, row_im in zip(self.re, self.im):
            if len(row_re) != width or len(row_im) != width:
                raise ValueError("ragged matrix rows")
        return self


class MatrixResponse(MatrixPayload):
    p: int
    n: int
    df_hz: float
    dt_s: float
    noiseless: bool


class EstimateRequest(BaseModel):
    matrix: MatrixPayload
    df_hz: float = Field(default=0.5e6, gt=0)
    dt_s: float = Field(default=80e-6, gt=0)
    c_mps: float = Field(default=SPEED_OF_LIGHT, gt=0)
    method: Literal["ls", "wls"] = "wls"


class EstimateResponse(BaseModel):
    eta_hat: float
    eta_ppm: float
    d_hat_m: float
    phi_arg: float
    gamma_arg: float
    sigma_ratio: float
    method: str
    low_confidence: bool


class CrlbRequest(BaseModel):
    snr_db: float = 10.0
    df_hz: float = Field(default=0.5e6, gt=0)
    dt_s: float = Field(default=80e-6, gt=0)
    n: int = Field(default=10, ge=2)
    p: int = Field(default=10, ge=2)
    c_mps: float = Field(default=SPEED_OF_LIGHT, gt=0)


class CrlbResponse(BaseModel):
    snr_db: float
    var_eta: float
    var_d_m2: float
    sigma_eta: float
    sigma_eta_ppm: float
    sigma_d_m: float


class SweepRequest(ScenarioIn):
    snr_db: list[float] = Field(default=[-10, -5, 0, 5, 10, 15, 20, 25, 30])
    hops: list[tuple[int, int]] = Field(default=[(10, 10)], description="(n, p) pairs")
    estimators: list[Literal["ls", "wls", "oracle", "classical"]] = ["wls", "ls"]
    trials: int = Field(default=1000, ge=1)
    seed: int = 0
    noise: Literal["gaussian", "von-mises"] = "gaussian"
    randomize_d01: bool = False


class SweepRow(BaseModel):
    snr_db: float
    n: int
    p: int
    estimator: str
    rmse_eta: float
    rmse_d: float
    bias_eta: float
    bias_d: float
    crlb_sigma_eta: float
    crlb_sigma_d: float
    wrap_fraction: float
    trials: int
    failures: int


class SweepResponse(BaseModel):
    rows: list[SweepRow]
