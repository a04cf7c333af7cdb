"""Command-line front end: simulate | sweep | estimate | crlb.

The CLI is a thin client of the core package. Physical units at this
boundary follow human convention (skew in ppm, distances in metres); the
conversion to internal dimensionless skew happens here and only here.
Values come from built-in defaults, overridden by an optional flat JSON
config file, overridden by explicit flags.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .crlb import crlb_closed_form
from .estimator import estimate_joint, rank_one_factors
from .harness import (
    Scenario,
    SweepConfig,
    TrialFailureError,
    report_json_summary,
    run_sweep,
    write_report_csv,
)
from .model import (
    ChannelParams,
    ClockModel,
    SPEED_OF_LIGHT,
    SynthesizerConfig,
)
from .protocol import (
    MatrixFormatError,
    NoiseSpec,
    ProtocolConfig,
    add_noise,
    read_matrix_csv,
    synthesize_matrix,
    write_matrix_csv,
)


class CliError(Exception):
    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


@dataclass(frozen=True)
class CliConfig:
    subcommand: str
    values: dict


_SCENARIO_DEFAULTS = {
    "df_hz": 0.5e6,
    "dt_s": 80e-6,
    "eta_ppm": 80.0,
    "d_m": 140.0,
    "nu1_hz": 32e6,
    "c_mps": SPEED_OF_LIGHT,
}

DEFAULTS: dict[str, dict] = {
    "simulate": {
        **_SCENARIO_DEFAULTS,
        "n": 10,
        "p": 10,
        "mode": "idealized",
        "snr_db": None,  # noiseless unless given
        "noise": "gaussian",
        "seed": 0,
        "out": None,
    },
    "sweep": {
        **_SCENARIO_DEFAULTS,
        "snr_db": [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
        "n": 10,
        "p": 10,
        "estimator": ["wls", "ls"],
        "trials": 1000,
        "seed": 0,
        "noise": "gaussian",
        "randomize_d01": False,
        "out": None,
        "summary_json": None,
    },
    "estimate": {
        "df_hz": _SCENARIO_DEFAULTS["df_hz"],
        "dt_s": _SCENARIO_DEFAULTS["dt_s"],
        "c_mps": SPEED_OF_LIGHT,
        "estimator": "wls",
        "matrix_csv": None,
    },
    "crlb": {
        "snr_db": 10.0,
        "df_hz": _SCENARIO_DEFAULTS["df_hz"],
        "dt_s": _SCENARIO_DEFAULTS["dt_s"],
        "n": 10,
        "p": 10,
        "c_mps": SPEED_OF_LIGHT,
    },
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdoa",
        description="Two-way phase-ranging simulator and joint skew/range estimator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--df-hz", type=float, dest="df_hz")
        p.add_argument("--dt-s", type=float, dest="dt_s")
        p.add_argument("--eta-ppm", type=float, dest="eta_ppm")
        p.add_argument("--d-m", type=float, dest="d_m")
        p.add_argument("--nu1-hz", type=float, dest="nu1_hz")
        p.add_argument("--c-mps", type=float, dest="c_mps")

    sim = sub.add_parser("simulate", help="synthesize a measurement matrix CSV")
    scenario_flags(sim)
    sim.add_argument("--config")
    sim.add_argument("--n", type=int)
    sim.add_argument("--p", type=int)
    sim.add_argument("--mode", choices=["idealized", "physical"])
    sim.add_argument("--snr-db", type=float, dest="snr_db")
    sim.add_argument("--noise", choices=["gaussian", "von-mises"])
    sim.add_argument("--seed", type=int)
    sim.add_argument("--out")

    swp = sub.add_parser("sweep", help="Monte Carlo RMSE sweep to a report CSV")
    scenario_flags(swp)
    swp.add_argument("--config")
    swp.add_argument("--snr-db", dest="snr_db", help="comma-separated dB values")
    swp.add_argument("--n", help="comma-separated carrier hop counts")
    swp.add_argument("--p", help="comma-separated epoch counts (zipped with --n)")
    swp.add_argument("--estimator", help="comma-separated subset of ls,wls,oracle,classical")
    swp.add_argument("--trials", type=int)
    swp.add_argument("--seed", type=int)
    swp.add_argument("--noise", choices=["gaussian", "von-mises"])
    swp.add_argument("--randomize-d01", action="store_const", const=True, dest="randomize_d01")
    swp.add_argument("--out")
    swp.add_argument("--summary-json", dest="summary_json")

    est = sub.add_parser("estimate", help="joint estimate from a matrix CSV")
    est.add_argument("matrix_csv")
    est.add_argument("--config")
    est.add_argument("--df-hz", type=float, dest="df_hz")
    est.add_argument("--dt-s", type=float, dest="dt_s")
    est.add_argument("--c-mps", type=float, dest="c_mps")
    est.add_argument("--estimator", choices=["ls", "wls"])

    crb = sub.add_parser("crlb", help="closed-form error lower bounds")
    crb.add_argument("--config")
    crb.add_argument("--snr-db", type=float, dest="snr_db")
    crb.add_argument("--df-hz", type=float, dest="df_hz")
    crb.add_argument("--dt-s", type=float, dest="dt_s")
    crb.add_argument("--n", type=int)
    crb.add_argument("--p", type=int)
    crb.add_argument("--c-mps", type=float, dest="c_mps")

    return parser


def parse_config(argv: list[str] | None = None) -> CliConfig:
    """Merge defaults, optional JSON config file, and explicit flags."""
    ns = _build_parser().parse_args(argv)
    command = ns.command
    merged = dict(DEFAULTS[command])
    config_path = getattr(ns, "config", None)
    if config_path:
        try:
            loaded = json.loads(Path(config_path).read_text())
        except OSError as exc:
            raise CliError("config", str(exc)) from exc
        except json.JSONDecodeError as exc:
            raise CliError("config", f"invalid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise CliError("config", "top level must be a JSON object")
        for key, value in loaded.items():
            if key not in merged:
                raise CliError("config", f"unknown field {key!r} for {command}")
            merged[key] = value
    for key, value in vars(ns).items():
        if key in ("command", "config") or value is None:
            continue
        merged[key] = value
    return CliConfig(subcommand=command, values=merged)


def _positive(values: dict, field: str) -> float:
    v = float(values[field])
    if not v > 0:
        raise CliError(field, f"must be positive, got {v}")
    return v


def _scenario(values: dict) -> tuple[ClockModel, SynthesizerConfig, ChannelParams, float]:
    nu1 = _positive(values, "nu1_hz")
    df = _positive(values, "df_hz")
    dt = _positive(values, "dt_s")
    c = _positive(values, "c_mps")
    eta_ppm = float(values["eta_ppm"])
    d_m = float(values["d_m"])
    try:
        clock = ClockModel(nu1=nu1, eta0=eta_ppm * 1e-6)
    except ValueError as exc:
        raise CliError("eta-ppm", str(exc)) from exc
    try:
        channel = ChannelParams(d01=d_m, c=c)
    except ValueError as exc:
        raise CliError("d-m", str(exc)) from exc
    synth = SynthesizerConfig.from_frequency_step(df, nu1)
    return clock, synth, channel, dt


def _int_list(values: dict, field: str) -> list[int]:
    raw = values[field]
    items = raw if isinstance(raw, list) else str(raw).split(",")
    try:
        return [int(x) for x in items]
    except (TypeError, ValueError) as exc:
        raise CliError(field, f"expected integers, got {raw!r}") from exc


def _float_list(values: dict, field: str) -> list[float]:
    raw = values[field]
    items = raw if isinstance(raw, list) else str(raw).split(",")
    try:
        return [float(x) for x in items]
    except (TypeError, ValueError) as exc:
        raise CliError(field, f"expected numbers, got {raw!r}") from exc


def _str_list(values: dict, field: str) -> list[str]:
    raw = values[field]
    items = raw if isinstance(raw, list) else str(raw).split(",")
    return [str(x).strip() for x in items]


def _atomic_write(path: str, text: str) -> None:
    """Write via a temp file and rename, so failures leave no partial file."""
    target = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(dir=target.parent or Path("."), suffix=".tmp")
    except OSError as exc:
        raise CliError("out", str(exc)) from exc
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, target)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise CliError("out", str(exc)) from exc


def cmd_simulate(values: dict) -> int:
    clock, synth, channel, dt = _scenario(values)
    n, p = int(values["n"]), int(values["p"])
    if n < 2:
        raise CliError("n", f"must be >= 2, got {n}")
    if p < 1:
        raise CliError("p", f"must be >= 1, got {p}")
    cfg = ProtocolConfig(n_freq=n, p_time=p, dt=dt)
    seed = int(values["seed"])
    rng = np.random.default_rng([seed, 1]) if values["mode"] == "physical" else None
    try:
        matrix = synthesize_matrix(values["mode"], cfg, clock, synth, channel, rng)
    except ValueError as exc:
        raise CliError("n", str(exc)) from exc
    if values["snr_db"] is not None:
        spec = NoiseSpec(
            snr_db=float(values["snr_db"]), model=values["noise"], seed=seed
        )
        matrix = add_noise(matrix, spec)
    buf = io.StringIO()
    write_matrix_csv(matrix, buf)
    if values["out"]:
        _atomic_write(values["out"], buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return 0


def cmd_estimate(values: dict) -> int:
    df = _positive(values, "df_hz")
    dt = _positive(values, "dt_s")
    c = _positive(values, "c_mps")
    path = values["matrix_csv"]
    try:
        with open(path) as handle:
            matrix = read_matrix_csv(handle, df1=df, dt=dt)
    except OSError as exc:
        raise CliError("matrix_csv", str(exc)) from exc
    except MatrixFormatError as exc:
        raise CliError("matrix_csv", str(exc)) from exc
    try:
        factors = rank_one_factors(matrix)
        estimate = estimate_joint(matrix, method=values["estimator"], c=c)
    except ValueError as exc:
        raise CliError("matrix_csv", str(exc)) from exc
    print(
        json.dumps(
            {
                "eta_hat": estimate.eta_hat,
                "eta_ppm": estimate.eta_hat * 1e6,
                "d_hat_m": estimate.d_hat,
                "phi_arg": float(np.angle(estimate.phi_hat)),
                "gamma_arg": float(np.angle(estimate.gamma_hat)),
                "sigma_ratio": factors.sigma2 / factors.sigma1,
            }
        )
    )
    return 0


def cmd_crlb(values: dict) -> int:
    snr_db = float(values["snr_db"])
    if not math.isfinite(snr_db):
        raise CliError("snr-db", "must be finite")
    df = _positive(values, "df_hz")
    dt = _positive(values, "dt_s")
    c = _positive(values, "c_mps")
    n, p = int(values["n"]), int(values["p"])
    if n < 2:
        raise CliError("n", f"must be >= 2, got {n}")
    if p < 2:
        raise CliError("p", f"must be >= 2, got {p}")
    bound = crlb_closed_form(snr_db, df, dt, p, n, c)
    print(
        json.dumps(
            {
                "snr_db": snr_db,
                "df_hz": df,
                "dt_s": dt,
                "n": n,
                "p": p,
                "c_mps": c,
                "var_eta": bound.var_eta,
                "var_d_m2": bound.var_d,
                "sigma_eta": bound.sigma_eta,
                "sigma_eta_ppm": bound.sigma_eta * 1e6,
                "sigma_d_m": bound.sigma_d,
            }
        )
    )
    return 0


def cmd_sweep(values: dict) -> int:
    if not values["out"]:
        raise CliError("out", "sweep requires --out")
    clock, synth, channel, dt = _scenario(values)
    snr_list = _float_list(values, "snr_db")
    n_list = _int_list(values, "n")
    p_list = _int_list(values, "p")
    if len(n_list) != len(p_list):
        raise CliError("p", f"{len(p_list)} values for {len(n_list)} --n values")
    estimators = _str_list(values, "estimator")
    needs_matrix = any(e != "classical" for e in estimators)
    for n, p in zip(n_list, p_list):
        if n < 2:
            raise CliError("n", f"must be >= 2, got {n}")
        if needs_matrix and p < 2:
            raise CliError("p", f"2-D estimators need p >= 2, got {p}")
    scenario = Scenario(clock=clock, synth=synth, channel=channel, dt=dt)
    try:
        sweep_cfg = SweepConfig(
            snr_db_list=tuple(snr_list),
            hop_list=tuple(zip(n_list, p_list)),
            trials=int(values["trials"]),
            scenario=scenario,
            estimators=tuple(estimators),
            master_seed=int(values["seed"]),
            noise_model=values["noise"],
            randomize_d01=bool(values["randomize_d01"]),
        )
    except ValueError as exc:
        raise CliError("sweep", str(exc)) from exc
    start = time.monotonic()
    try:
        report = run_sweep(sweep_cfg)
    except TrialFailureError as exc:
        raise CliError("sweep", str(exc)) from exc
    elapsed = time.monotonic() - start
    buf = io.StringIO()
    write_report_csv(report, buf)
    _atomic_write(values["out"], buf.getvalue())
    if values["summary_json"]:
        _atomic_write(values["summary_json"], report_json_summary(report) + "\n")
    print(f"rows={len(report.rows)} elapsed={elapsed:.2f}s", file=sys.stderr)
    return 0


_DISPATCH: dict[str, Callable[[dict], int]] = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "estimate": cmd_estimate,
    "crlb": cmd_crlb,
}


def main(argv: list[str] | None = None) -> int:
    try:
        cfg = parse_config(argv)
        return _DISPATCH[cfg.subcommand](cfg.values)
    except CliError as exc:
        print(f"error: {exc.field}: {exc.message}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
