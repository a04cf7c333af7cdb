"""Monte Carlo experiment engine: RMSE vs SNR and vs hop count, with bounds.

Every Monte Carlo trial owns a private counter-based generator stream
(Philox) keyed on (master seed, SNR bits, N, P, trial index), so a sweep is
reproducible bit-for-bit regardless of execution order or thread count; the
estimator name is deliberately not part of the key, so different estimators
at the same cell see identical measurements. Per-trial results land in
preallocated slots and are reduced in trial order.

Thread-level parallelism inside a cell is capped by the ``PDOA_THREADS``
environment variable (default 1).
"""

from __future__ import annotations

import json
import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np

from .crlb import crlb_closed_form
from .estimator import (
    DegenerateInputError,
    ambiguity_limits,
    estimate_joint,
    grid_search_oracle,
    shift_ls,
)
from .model import ChannelParams, ClockModel, SynthesizerConfig, frequency_step
from .protocol import (
    MeasurementMatrix,
    NoiseModel,
    NoiseSpec,
    ProtocolConfig,
    apply_noise,
    classical_pdoa_vector,
    synthesize_matrix,
)

ESTIMATORS = ("ls", "wls", "oracle", "classical")
WRAP_THRESHOLD = 0.95 * math.pi


class TrialFailureError(RuntimeError):
    """Too many failed trials, or a cell could not be evaluated."""


@dataclass(frozen=True)
class Scenario:
    """Fixed true parameters shared by every cell of a sweep."""

    clock: ClockModel
    synth: SynthesizerConfig
    channel: ChannelParams
    dt: float

    @property
    def df1(self) -> float:
        return frequency_step(self.synth, self.clock.nu1)


@dataclass(frozen=True)
class SweepConfig:
    snr_db_list: tuple[float, ...]
    hop_list: tuple[tuple[int, int], ...]
    trials: int
    scenario: Scenario
    estimators: tuple[str, ...]
    master_seed: int
    noise_model: NoiseModel = "gaussian"
    randomize_d01: bool = False
    d01_range: tuple[float, float] = (1.0, 140.0)

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if not self.snr_db_list:
            raise ValueError("snr_db_list must not be empty")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown:
            raise ValueError(f"unknown estimators: {sorted(unknown)}")
        for n, p in self.hop_list:
            if n < 2:
                raise ValueError(f"hop pair ({n}, {p}): n must be >= 2")
            if p < 2 and any(e != "classical" for e in self.estimators):
                raise ValueError(f"hop pair ({n}, {p}): matrix estimators need p >= 2")
        eta_max, d_max = ambiguity_limits(
            self.scenario.df1, self.scenario.dt, self.scenario.channel.c
        )
        if abs(self.scenario.clock.eta0) >= eta_max:
            raise ValueError(
                f"scenario skew {self.scenario.clock.eta0} outside ambiguity limit {eta_max}"
            )
        if self.scenario.channel.d01 >= d_max:
            raise ValueError(
                f"scenario range {self.scenario.channel.d01} outside ambiguity limit {d_max}"
            )
        if self.randomize_d01 and self.d01_range[1] >= d_max:
            raise ValueError(
                f"randomized range upper bound {self.d01_range[1]} outside limit {d_max}"
            )


@dataclass(frozen=True)
class RmseRow:
    snr_db: float
    n_freq: int
    p_time: int
    estimator: str
    rmse_eta: float
    rmse_d: float
    bias_eta: float
    bias_d: float
    crlb_sigma_eta: float
    crlb_sigma_d: float
    wrap_fraction: float
    trials: int
    failures: int = 0  # reported in the JSON summary, not the CSV


@dataclass(frozen=True)
class RmseReport:
    rows: tuple[RmseRow, ...]
    config: SweepConfig | None = None


def rmse(estimates: Iterable[float], truth: float) -> tuple[float, float]:
    """(root-mean-square error, bias) of estimates against a scalar truth."""
    arr = np.asarray(list(estimates), dtype=float)
    if arr.size == 0:
        raise ValueError("rmse of an empty estimate list")
    bias = float(arr.mean() - truth)
    return float(np.sqrt(np.mean((arr - truth) ** 2))), bias


def trial_rng(
    master_seed: int, snr_db: float, n_freq: int, p_time: int, trial: int
) -> np.random.Generator:
    """Philox stream keyed on (seed, cell coordinates, trial index).

    The SNR enters through its IEEE-754 bit pattern so non-integer and
    infinite values key distinct streams deterministically.
    """
    snr_bits = struct.unpack("<Q", struct.pack("<d", float(snr_db)))[0]
    seq = np.random.SeedSequence(
        entropy=[master_seed & 0xFFFFFFFFFFFFFFFF, snr_bits, n_freq, p_time, trial]
    )
    return np.random.Generator(np.random.Philox(seq))


def _thread_count() -> int:
    raw = os.environ.get("PDOA_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"PDOA_THREADS must be an integer, got {raw!r}") from None


def run_cell(
    scenario: Scenario,
    n_freq: int,
    p_time: int,
    snr_db: float,
    estimator: str,
    trials: int,
    master_seed: int,
    noise_model: NoiseModel = "gaussian",
    randomize_d01: bool = False,
    d01_range: tuple[float, float] = (1.0, 140.0),
) -> RmseRow:
    """One (SNR, N, P, estimator) cell: aggregate RMSE/bias over trials.

    The noiseless signal is synthesized once per cell (per trial when the
    range is randomized), fresh noise is drawn per trial from that trial's
    own stream, and failed trials are excluded from the aggregates. More
    than 1% failures at SNR >= 0 dB aborts the cell.
    """
    if estimator not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator!r}")
    if estimator != "classical" and p_time < 2:
        raise ValueError(f"estimator {estimator!r} needs p >= 2, got {p_time}")
    cfg = ProtocolConfig(n_freq=n_freq, p_time=p_time, dt=scenario.dt)
    spec = NoiseSpec(snr_db=snr_db, model=noise_model)
    df1 = scenario.df1
    c = scenario.channel.c
    truth_eta = scenario.clock.eta0

    if estimator == "classical":
        base = classical_pdoa_vector(cfg, scenario.clock, scenario.synth, scenario.channel)
    else:
        base = synthesize_matrix(
            "idealized", cfg, scenario.clock, scenario.synth, scenario.channel
        ).entries

    eta_est = np.full(trials, np.nan)
    d_est = np.full(trials, np.nan)
    d_truth = np.full(trials, scenario.channel.d01)
    wrapped = np.zeros(trials, dtype=bool)
    failed = np.zeros(trials, dtype=bool)

    def one_trial(t: int) -> None:
        rng = trial_rng(master_seed, snr_db, n_freq, p_time, t)
        signal = base
        if randomize_d01:
            d01 = rng.uniform(*d01_range)
            d_truth[t] = d01
            channel = ChannelParams(d01=d01, c=c, alpha=scenario.channel.alpha)
            if estimator == "classical":
                signal = classical_pdoa_vector(cfg, scenario.clock, scenario.synth, channel)
            else:
                signal = synthesize_matrix(
                    "idealized", cfg, scenario.clock, scenario.synth, channel
                ).entries
        noisy = apply_noise(signal, spec, rng)
        try:
            if estimator == "classical":
                z = shift_ls(noisy)
                tau_hat = float(np.angle(z)) / (2.0 * math.pi * df1)
                d_est[t] = c * tau_hat / 2.0
                wrapped[t] = abs(np.angle(z)) > WRAP_THRESHOLD
            else:
                matrix = MeasurementMatrix(
                    entries=noisy,
                    p_time=p_time,
                    n_freq=n_freq,
                    df1=df1,
                    dt=scenario.dt,
                    noiseless=False,
                )
                if estimator == "oracle":
                    est = grid_search_oracle(matrix, c=c)
                else:
                    est = estimate_joint(matrix, method=estimator, c=c)
                eta_est[t] = est.eta_hat
                d_est[t] = est.d_hat
                wrapped[t] = (
                    abs(np.angle(est.phi_hat)) > WRAP_THRESHOLD
                    or abs(np.angle(est.gamma_hat)) > WRAP_THRESHOLD
                )
        except (DegenerateInputError, np.linalg.LinAlgError):
            failed[t] = True

    workers = _thread_count()
    if workers == 1:
        for t in range(trials):
            one_trial(t)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(one_trial, range(trials)))

    n_failed = int(failed.sum())
    ok = ~failed
    n_ok = int(ok.sum())
    if n_ok == 0:
        raise TrialFailureError(f"all {trials} trials failed")
    if snr_db >= 0 and n_failed > 0.01 * trials:
        raise TrialFailureError(
            f"{n_failed}/{trials} trials failed at snr_db={snr_db} (>1% threshold)"
        )

    if estimator == "classical":
        rmse_eta = bias_eta = float("nan")
    else:
        eta_err = eta_est[ok] - truth_eta
        rmse_eta = float(np.sqrt(np.mean(eta_err**2)))
        bias_eta = float(np.mean(eta_err))
    d_err = d_est[ok] - d_truth[ok]
    rmse_d = float(np.sqrt(np.mean(d_err**2)))
    bias_d = float(np.mean(d_err))

    if math.isinf(snr_db) and snr_db > 0:
        sigma_eta = sigma_d = 0.0
    elif p_time < 2:
        # classical single-epoch cell: the 2-D bound is undefined
        sigma_eta = sigma_d = float("nan")
    else:
        bound = crlb_closed_form(snr_db, df1, scenario.dt, p_time, n_freq, c)
        sigma_eta, sigma_d = bound.sigma_eta, bound.sigma_d

    return RmseRow(
        snr_db=snr_db,
        n_freq=n_freq,
        p_time=p_time,
        estimator=estimator,
        rmse_eta=rmse_eta,
        rmse_d=rmse_d,
        bias_eta=bias_eta,
        bias_d=bias_d,
        crlb_sigma_eta=sigma_eta,
        crlb_sigma_d=sigma_d,
        wrap_fraction=float(wrapped[ok].mean()),
        trials=n_ok,
        failures=n_failed,
    )


def run_sweep(cfg: SweepConfig) -> RmseReport:
    """Cartesian product of SNRs x hop pairs x estimators, via run_cell.

    Rows come out in deterministic order: SNR outermost, then hop pairs,
    then estimators, each in the order listed in the config.
    """
    rows = []
    for snr_db in cfg.snr_db_list:
        for n_freq, p_time in cfg.hop_list:
            for estimator in cfg.estimators:
                try:
                    rows.append(
                        run_cell(
                            cfg.scenario,
                            n_freq,
                            p_time,
                            snr_db,
                            estimator,
                            cfg.trials,
                            cfg.master_seed,
                            noise_model=cfg.noise_model,
                            randomize_d01=cfg.randomize_d01,
                            d01_range=cfg.d01_range,
                        )
                    )
                except (TrialFailureError, ValueError) as exc:
                    raise TrialFailureError(
                        f"cell snr_db={snr_db} n={n_freq} p={p_time} "
                        f"estimator={estimator}: {exc}"
                    ) from exc
    return RmseReport(rows=tuple(rows), config=cfg)


CSV_COLUMNS = (
    "snr_db,n,p,estimator,rmse_eta,rmse_d,bias_eta,bias_d,"
    "crlb_sigma_eta,crlb_sigma_d,wrap_fraction,trials"
)


def write_report_csv(report: RmseReport, stream: IO[str]) -> None:
    """Emit rows with the fixed column order; floats in round-trip form."""
    stream.write(CSV_COLUMNS + "\n")
    for r in report.rows:
        stream.write(
            f"{float(r.snr_db)!r},{r.n_freq},{r.p_time},{r.estimator},"
            f"{float(r.rmse_eta)!r},{float(r.rmse_d)!r},"
            f"{float(r.bias_eta)!r},{float(r.bias_d)!r},"
            f"{float(r.crlb_sigma_eta)!r},{float(r.crlb_sigma_d)!r},"
            f"{float(r.wrap_fraction)!r},{r.trials}\n"
        )


def report_json_summary(report: RmseReport) -> str:
    """JSON summary with a config echo and per-row failure counts."""
    cfg = report.config
    payload: dict = {
        "config": None
        if cfg is None
        else {
            "snr_db_list": list(cfg.snr_db_list),
            "hop_list": [list(h) for h in cfg.hop_list],
            "trials": cfg.trials,
            "estimators": list(cfg.estimators),
            "master_seed": cfg.master_seed,
            "noise_model": cfg.noise_model,
            "randomize_d01": cfg.randomize_d01,
            "d01_range": list(cfg.d01_range),
            "scenario": {
                "nu1_hz": cfg.scenario.clock.nu1,
                "eta0": cfg.scenario.clock.eta0,
                "d01_m": cfg.scenario.channel.d01,
                "c_mps": cfg.scenario.channel.c,
                "df1_hz": cfg.scenario.df1,
                "dt_s": cfg.scenario.dt,
            },
        },
        "rows": [
            {
                "snr_db": r.snr_db,
                "n": r.n_freq,
                "p": r.p_time,
                "estimator": r.estimator,
                "rmse_eta": r.rmse_eta,
                "rmse_d": r.rmse_d,
                "bias_eta": r.bias_eta,
                "bias_d": r.bias_d,
                "crlb_sigma_eta": r.crlb_sigma_eta,
                "crlb_sigma_d": r.crlb_sigma_d,
                "wrap_fraction": r.wrap_fraction,
                "trials": r.trials,
                "failures": r.failures,
            }
            for r in report.rows
        ],
    }
    return json.dumps(payload, indent=2)
