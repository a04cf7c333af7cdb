"""Clock, frequency-synthesizer and channel models for two-way phase ranging.

The anchor node owns the reference oscillator; the sensor node's oscillator
runs at a fractionally offset frequency (its clock-skew). Both nodes derive
their carrier frequencies from the same rational synthesizer gain ladder, so
the carrier grid is equispaced on each side but the two grids differ by the
skew. Everything downstream (protocol synthesis, estimation, bounds) is
driven by the three unit phasors computed here:

* ``a_scalar`` - common phase factor of the first carrier / first epoch,
* ``phi``      - per-epoch phase increment, carries the clock-skew,
* ``gamma``    - per-carrier phase increment, carries the range.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction

SPEED_OF_LIGHT = 299_792_458.0


def wrap_phase(theta: float) -> float:
    """Reduce an angle in radians to the interval (-pi, pi]."""
    w = math.remainder(theta, math.tau)
    if w <= -math.pi:
        w += math.tau
    return w


@dataclass(frozen=True)
class ClockModel:
    """First-order affine clock: the sensor oscillator runs at nu1*(1+eta0).

    ``eta0`` is the dimensionless clock-skew (80 ppm is stored as 8e-5).
    """

    nu1: float
    eta0: float

    def __post_init__(self) -> None:
        if not self.nu1 > 0:
            raise ValueError(f"nu1 must be positive, got {self.nu1}")
        if not abs(self.eta0) < 1e-2:
            raise ValueError(f"|eta0| must be below 1e-2, got {self.eta0}")


@dataclass(frozen=True)
class SynthesizerConfig:
    """Rational gain ladder G(k) = G(1) + (k-1)*dG for k = 1..K.

    Gains are stored as exact integer ratios so the carrier grid stays
    exactly equispaced; each gain is converted to float only once, when a
    carrier frequency is evaluated.
    """

    g1_num: int
    g1_den: int
    dg_num: int
    dg_den: int
    k_count: int

    def __post_init__(self) -> None:
        if self.g1_den == 0 or self.dg_den == 0:
            raise ValueError("gain denominators must be nonzero")
        if self.k_count < 1:
            raise ValueError(f"k_count must be >= 1, got {self.k_count}")
        for k in (1, self.k_count):
            if self.gain(k) <= 0:
                raise ValueError(f"gain G({k}) = {self.gain(k)} is not positive")

    @property
    def g1(self) -> Fraction:
        return Fraction(self.g1_num, self.g1_den)

    @property
    def dg(self) -> Fraction:
        return Fraction(self.dg_num, self.dg_den)

    def gain(self, k: int) -> Fraction:
        """Exact gain of the k-th carrier, 1-based."""
        if not 1 <= k <= self.k_count:
            raise ValueError(f"carrier index k={k} outside 1..{self.k_count}")
        return self.g1 + (k - 1) * self.dg

    @classmethod
    def from_frequency_step(
        cls, df_hz: float, nu1: float, k_count: int = 128
    ) -> "SynthesizerConfig":
        """Build a ladder with G(1) = dG = df_hz/nu1 (first carrier == step).

        The ratio is taken from the exact binary values of the two floats,
        so e.g. 0.5 MHz over 32 MHz yields exactly 1/64.
        """
        ratio = Fraction(df_hz) / Fraction(nu1)
        return cls(
            g1_num=ratio.numerator,
            g1_den=ratio.denominator,
            dg_num=ratio.numerator,
            dg_den=ratio.denominator,
            k_count=k_count,
        )


@dataclass(frozen=True)
class ChannelParams:
    """Flat-fading single-path channel between anchor and sensor."""

    d01: float
    c: float = SPEED_OF_LIGHT
    alpha: float = 1.0

    def __post_init__(self) -> None:
        if self.d01 < 0:
            raise ValueError(f"range d01 must be >= 0, got {self.d01}")
        if not self.c > 0:
            raise ValueError(f"propagation speed must be positive, got {self.c}")

    @property
    def tau01(self) -> float:
        """One-way propagation delay in seconds."""
        return self.d01 / self.c


@dataclass(frozen=True)
class ModelPhasors:
    """The three generating phasors of the noiseless two-way data model.

    ``aliased`` is set when the raw phase of ``phi`` or ``gamma`` fell
    outside (-pi, pi] and had to be wrapped; estimates from such a scenario
    are ambiguous.
    """

    a_scalar: complex
    phi: complex
    gamma: complex
    tau_eta: float
    aliased: bool = False


def derived_frequency(clock: ClockModel) -> float:
    """Sensor-side oscillator frequency nu0 = nu1 * (1 + eta0), in Hz."""
    return clock.nu1 * (1.0 + clock.eta0)


def carrier_frequency(synth: SynthesizerConfig, osc_freq: float, k: int) -> float:
    """Carrier frequency G(k) * osc_freq for the k-th gain (1-based), in Hz.

    The product is formed in exact rational arithmetic and rounded to float
    once, so the carrier grid stays equispaced to a rounding of each value.
    """
    return float(synth.gain(k) * Fraction(osc_freq))


def frequency_step(synth: SynthesizerConfig, osc_freq: float) -> float:
    """Spacing dG * osc_freq between adjacent carriers, in Hz."""
    return float(synth.dg * Fraction(osc_freq))


def model_phasors(
    clock: ClockModel,
    synth: SynthesizerConfig,
    dt: float,
    channel: ChannelParams,
) -> ModelPhasors:
    """Compute (a_scalar, phi, gamma, tau_eta) for one scenario.

    Phase conventions, with df1 the anchor-side carrier step and tau01 the
    one-way delay:

    * arg(phi)   = 2*pi * df1 * eta0 * dt
    * arg(gamma) = 2*pi * df1 * (2 + eta0) * tau01
    * arg(a)     = 2*pi * f1(1) * tau_eta
    * tau_eta    = eta0*dt + (2 + eta0)*tau01

    Arguments of phi and gamma are reduced to (-pi, pi]; ``aliased`` flags
    whether reduction wrapped either of them.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    df1 = frequency_step(synth, clock.nu1)
    f11 = carrier_frequency(synth, clock.nu1, 1)
    tau01 = channel.tau01
    tau_eta = clock.eta0 * dt + (2.0 + clock.eta0) * tau01

    arg_phi = 2.0 * math.pi * df1 * clock.eta0 * dt
    arg_gamma = 2.0 * math.pi * df1 * (2.0 + clock.eta0) * tau01
    aliased = abs(arg_phi) > math.pi or abs(arg_gamma) > math.pi

    return ModelPhasors(
        a_scalar=cmath.exp(1j * wrap_phase(2.0 * math.pi * f11 * tau_eta)),
        phi=cmath.exp(1j * wrap_phase(arg_phi)),
        gamma=cmath.exp(1j * wrap_phase(arg_gamma)),
        tau_eta=tau_eta,
        aliased=aliased,
    )


def default_clock(eta0: float = 8e-5, nu1: float = 32e6) -> ClockModel:
    """32 MHz anchor oscillator, 80 ppm sensor skew unless overridden."""
    return ClockModel(nu1=nu1, eta0=eta0)


def default_synthesizer(k_count: int = 128) -> SynthesizerConfig:
    """G(1) = dG = 1/64 on a 32 MHz oscillator: 0.5 MHz carrier step."""
    return SynthesizerConfig(g1_num=1, g1_den=64, dg_num=1, dg_den=64, k_count=k_count)
