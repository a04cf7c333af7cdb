"""Joint clock-skew and range estimation from the measurement matrix.

The noiseless matrix is an outer product, so its principal singular vectors
inherit the shift-invariance of the generating phasors: the left vector's
consecutive-element ratio is phi (skew) and the right vector's is the
conjugate of gamma (range). Ratios are estimated by least squares or by
weighted least squares with closed-form optimal weights, then inverted to
physical parameters:

    eta_hat = arg(phi_hat) / (2*pi*df1*dt)
    d_hat   = c * arg(gamma_hat) / (2*pi*df1*(2 + eta_hat))

A brute-force 2-D grid search over matched phasor vectors is provided as an
independent oracle, and the classical single-parameter estimator documents
the skew-induced ranging bias of the fixed-epoch protocol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .model import SPEED_OF_LIGHT
from .protocol import MeasurementMatrix

EstimatorMethod = Literal["ls", "wls", "oracle"]


class DegenerateInputError(ValueError):
    """Input carries no usable signal (zero matrix, zero head subvector)."""


@dataclass(frozen=True, eq=False)
class RankOneFactors:
    """Leading singular triple of the measurement matrix.

    ``u1`` and ``v1`` are unit norm; both are only defined up to a common
    unit-phase factor, which cancels in all shift ratios. ``sigma2`` is kept
    for degeneracy and noise-level diagnostics.
    """

    sigma1: float
    u1: np.ndarray
    v1: np.ndarray
    sigma2: float


@dataclass(frozen=True)
class JointEstimate:
    phi_hat: complex
    gamma_hat: complex
    eta_hat: float
    d_hat: float
    method: EstimatorMethod
    low_confidence: bool = False


def rank_one_factors(matrix: MeasurementMatrix) -> RankOneFactors:
    """Leading singular triple of the P x N matrix via full SVD."""
    if matrix.p_time < 2 or matrix.n_freq < 2:
        raise ValueError("rank_one_factors needs P >= 2 and N >= 2")
    u, s, vh = np.linalg.svd(matrix.entries)
    if s[0] == 0.0:
        raise DegenerateInputError("zero measurement matrix")
    return RankOneFactors(
        sigma1=float(s[0]),
        u1=u[:, 0],
        v1=vh[0, :].conj(),
        sigma2=float(s[1]),
    )


def shift_ls(w: np.ndarray) -> complex:
    """Least-squares consecutive-element ratio of ``w``, on the unit circle.

    Solves head * z ~= tail for the first/last L-1 element subvectors and
    normalizes the solution to unit modulus. Invariant to a common scaling
    of ``w``.
    """
    w = np.asarray(w)
    if w.shape[0] < 2:
        raise ValueError("shift_ls needs a vector of length >= 2")
    head, tail = w[:-1], w[1:]
    den = np.vdot(head, head).real
    if den == 0.0:
        raise DegenerateInputError("zero head subvector")
    z = np.vdot(head, tail) / den
    mag = abs(z)
    if mag == 0.0:
        raise DegenerateInputError("shift ratio vanished")
    return complex(z / mag)


def wls_weights(z: complex, length: int) -> np.ndarray:
    """Closed-form optimal weights for the shift-ratio residuals.

    For a length-L vector the (L-1) x (L-1) matrix is
    W[p, n] = (L*min(p, n) - p*n) * z^(p-n) / L with 1-based p, n, where
    ``z`` is the (estimated) shift ratio of that vector. Hermitian positive
    definite for |z| = 1.
    """
    if length < 2:
        raise ValueError("wls_weights needs length >= 2")
    idx = np.arange(1, length)
    coeff = (length * np.minimum.outer(idx, idx) - np.outer(idx, idx)) / length
    powers = np.asarray(z) ** (idx[:, None] - idx[None, :])
    return coeff * powers


def shift_wls(w: np.ndarray, weights: np.ndarray) -> complex:
    """Weighted least-squares shift ratio, normalized to unit modulus.

    Minimizes the weighted residual ||W^(1/2) (head*z - tail)||; with the
    identity weight this reduces to :func:`shift_ls`.
    """
    w = np.asarray(w)
    head, tail = w[:-1], w[1:]
    if weights.shape != (head.shape[0], head.shape[0]):
        raise ValueError(
            f"weight shape {weights.shape} does not match subvector length {head.shape[0]}"
        )
    den = (head.conj() @ weights @ head).real
    if den == 0.0:
        raise DegenerateInputError("zero head subvector")
    z = (head.conj() @ weights @ tail) / den
    mag = abs(z)
    if mag == 0.0:
        raise DegenerateInputError("shift ratio vanished")
    return complex(z / mag)


def _recover_parameters(
    phi_hat: complex, gamma_hat: complex, df1: float, dt: float, c: float
) -> tuple[float, float]:
    eta_hat = np.angle(phi_hat) / (2.0 * math.pi * df1 * dt)
    d_hat = c * np.angle(gamma_hat) / (2.0 * math.pi * df1 * (2.0 + eta_hat))
    return float(eta_hat), float(d_hat)


def estimate_joint(
    matrix: MeasurementMatrix,
    method: Literal["ls", "wls"] = "wls",
    c: float = SPEED_OF_LIGHT,
    wls_iterations: int = 1,
) -> JointEstimate:
    """Estimate skew and range from a measurement matrix.

    The LS shift ratios of the principal singular vectors are always
    computed first; with ``method="wls"`` they seed the closed-form weights
    and a refinement pass (one by default). The skew estimate is recovered
    first and reused in the range denominator.
    """
    if method not in ("ls", "wls"):
        raise ValueError(f"unknown method {method!r}")
    factors = rank_one_factors(matrix)
    low_confidence = factors.sigma1 - factors.sigma2 <= 1e-12 * factors.sigma1

    phi_hat = shift_ls(factors.u1)
    gamma_conj = shift_ls(factors.v1)
    if method == "wls":
        for _ in range(wls_iterations):
            phi_hat = shift_wls(factors.u1, wls_weights(phi_hat, matrix.p_time))
            gamma_conj = shift_wls(factors.v1, wls_weights(gamma_conj, matrix.n_freq))
    gamma_hat = gamma_conj.conjugate()
    eta_hat, d_hat = _recover_parameters(phi_hat, gamma_hat, matrix.df1, matrix.dt, c)
    return JointEstimate(
        phi_hat=phi_hat,
        gamma_hat=gamma_hat,
        eta_hat=eta_hat,
        d_hat=d_hat,
        method=method,
        low_confidence=low_confidence,
    )


def estimate_classical(a: np.ndarray, df1: float) -> float:
    """Composite-delay estimate tau_eta from the fixed-epoch 1-D vector.

    Returns arg(shift_ls(a)) / (2*pi*df1) in seconds. Interpreting the
    result as a range via c*tau_eta/2 is biased by c*eta0*(dt + tau01)/2
    whenever the sensor clock is skewed; that bias is the motivation for
    the joint 2-D estimator.
    """
    if np.asarray(a).shape[0] < 2:
        raise ValueError("estimate_classical needs a vector of length >= 2")
    return float(np.angle(shift_ls(a)) / (2.0 * math.pi * df1))


def grid_resolution(points: int, levels: int) -> float:
    """Angular resolution of the grid search after ``levels`` refinements."""
    return (2.0 * math.pi / points) * (4.0 / points) ** levels


def grid_search_oracle(
    matrix: MeasurementMatrix,
    phi_grid_points: int = 64,
    gamma_grid_points: int = 64,
    refinement_levels: int = 3,
    c: float = SPEED_OF_LIGHT,
) -> JointEstimate:
    """Brute-force matched-phasor search over (arg phi, arg gamma).

    Maximizes |u(phi)^H M v(gamma)|^2 with u(phi) = [1, phi, ..., phi^(P-1)]
    and v(gamma) = [1, gamma*, ..., gamma*^(N-1)] over a full-circle grid,
    then recenters a 4-cell-wide window on the argmax ``refinement_levels``
    times. Final resolution per axis is :func:`grid_resolution`.
    """
    if phi_grid_points < 8 or gamma_grid_points < 8:
        raise ValueError("grids need at least 8 points per axis")
    m = matrix.entries
    p_idx = np.arange(matrix.p_time)
    n_idx = np.arange(matrix.n_freq)

    def best_on_grid(phi_angles: np.ndarray, gamma_angles: np.ndarray) -> tuple[float, float]:
        u = np.exp(1j * np.outer(p_idx, phi_angles))
        v = np.exp(-1j * np.outer(n_idx, gamma_angles))
        scores = np.abs(u.conj().T @ m @ v) ** 2
        i, j = np.unravel_index(int(np.argmax(scores)), scores.shape)
        return float(phi_angles[i]), float(gamma_angles[j])

    phi_res = 2.0 * math.pi / phi_grid_points
    gamma_res = 2.0 * math.pi / gamma_grid_points
    phi_angles = -math.pi + phi_res * np.arange(phi_grid_points)
    gamma_angles = -math.pi + gamma_res * np.arange(gamma_grid_points)
    best_phi, best_gamma = best_on_grid(phi_angles, gamma_angles)
    for _ in range(refinement_levels):
        phi_res *= 4.0 / phi_grid_points
        gamma_res *= 4.0 / gamma_grid_points
        phi_angles = best_phi + phi_res * (
            np.arange(phi_grid_points) - phi_grid_points / 2
        )
        gamma_angles = best_gamma + gamma_res * (
            np.arange(gamma_grid_points) - gamma_grid_points / 2
        )
        best_phi, best_gamma = best_on_grid(phi_angles, gamma_angles)

    phi_hat = complex(np.exp(1j * best_phi))
    gamma_hat = complex(np.exp(1j * best_gamma))
    eta_hat, d_hat = _recover_parameters(phi_hat, gamma_hat, matrix.df1, matrix.dt, c)
    return JointEstimate(
        phi_hat=phi_hat,
        gamma_hat=gamma_hat,
        eta_hat=eta_hat,
        d_hat=d_hat,
        method="oracle",
    )


def ambiguity_limits(
    df1: float, dt: float, c: float = SPEED_OF_LIGHT
) -> tuple[float, float]:
    """Largest unambiguous |skew| and range before a phase argument wraps.

    Returns (eta_max, d_max) = (1/(2*df1*dt), c/(4*df1)); the range limit
    uses the (2 + eta) ~= 2 convention, the exact value for a known skew
    being c/(2*df1*(2 + eta0)).
    """
    if not (df1 > 0 and dt > 0):
        raise ValueError("df1 and dt must be positive")
    return 1.0 / (2.0 * df1 * dt), c / (4.0 * df1)
