"""Input signal conditioning.

Every input channel (body rates, vertical accelerometer, rotor speeds) runs
through the same discrete second-order low-pass so the channels stay
synchronized, and angular accelerations are produced by backward-differencing
the filtered roll and pitch rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Channel layout of the conditioning filter bank.
CHANNELS = ("p", "q", "r", "az", "w1", "w2", "w3", "w4")
N_CHANNELS = len(CHANNELS)


@dataclass(frozen=True)
class FilterDesign:
    """Continuous-time prototype of the conditioning low-pass.

    The prototype is the unit-DC-gain second-order section
    ``wn^2 / (s^2 + 2*zeta*wn*s + wn^2)`` sampled every ``sample_interval``
    seconds.
    """

    natural_frequency: float = 50.0  # rad/s
    damping_ratio: float = 0.55
    sample_interval: float = 0.002  # s

    def __post_init__(self) -> None:
        if not self.natural_frequency > 0.0:
            raise ValueError("natural_frequency must be positive")
        if not 0.0 < self.damping_ratio < 1.0:
            raise ValueError("damping_ratio must be in (0, 1)")
        if not self.sample_interval > 0.0:
            raise ValueError("sample_interval must be positive")
        if self.natural_frequency >= math.pi / self.sample_interval:
            raise ValueError(
                "natural_frequency must stay below the Nyquist rate "
                f"pi/sample_interval = {math.pi / self.sample_interval:.3f} rad/s"
            )


@dataclass(frozen=True)
class FilterCoefficients:
    """Discrete biquad ``y[k] = b0*x[k] + b1*x[k-1] + b2*x[k-2] - a1*y[k-1] - a2*y[k-2]``."""

    b0: float
    b1: float
    b2: float
    a1: float
    a2: float


def design_lowpass(design: FilterDesign) -> FilterCoefficients:
    """Discretize the second-order low-pass with the bilinear transform.

    The transform is prewarped at the natural frequency, so the discrete
    magnitude response at ``natural_frequency`` equals the continuous
    prototype's 1/(2*zeta) there. The numerator is rebuilt from the
    denominator sum so that unity DC gain holds exactly in floating point
    (``math.fsum`` of the b's equals ``math.fsum`` of (1, a1, a2)).
    """
    wn = design.natural_frequency
    zeta = design.damping_ratio
    dt = design.sample_interval

    k = wn / math.tan(wn * dt / 2.0)  # prewarped bilinear rate
    d0 = k * k + 2.0 * zeta * wn * k + wn * wn
    a1 = (2.0 * wn * wn - 2.0 * k * k) / d0
    a2 = (k * k - 2.0 * zeta * wn * k + wn * wn) / d0

    s = math.fsum((1.0, a1, a2))
    b0 = 0.25 * s
    b1 = 0.5 * s
    b2 = 0.25 * s

    # Jury criterion: both poles of z^2 + a1 z + a2 strictly inside the unit circle.
    if not (abs(a2) < 1.0 and abs(a1) < 1.0 + a2):
        raise ValueError("discretization produced unstable recursion poles")
    return FilterCoefficients(b0=b0, b1=b1, b2=b2, a1=a1, a2=a2)


def frequency_response(coeffs: FilterCoefficients, omega: float, sample_interval: float) -> complex:
    """Discrete-time frequency response at ``omega`` rad/s."""
    z1 = np.exp(-1j * omega * sample_interval)
    z2 = z1 * z1
    num = coeffs.b0 + coeffs.b1 * z1 + coeffs.b2 * z2
    den = 1.0 + coeffs.a1 * z1 + coeffs.a2 * z2
    return num / den


class FilterState:
    """Recursion memory for one stream; every channel shares the same biquad.

    The memory is warm-started from the first sample, so a constant stream is
    a fixed point and there is no startup transient.
    """

    def __init__(self, coeffs: FilterCoefficients, n_channels: int = N_CHANNELS):
        self.coeffs = coeffs
        self.n_channels = n_channels
        self._x1 = np.zeros(n_channels)
        self._x2 = np.zeros(n_channels)
        self._y1 = np.zeros(n_channels)
        self._y2 = np.zeros(n_channels)
        self._primed = False

    def reset(self) -> None:
        self._x1[:] = 0.0
        self._x2[:] = 0.0
        self._y1[:] = 0.0
        self._y2[:] = 0.0
        self._primed = False

    def step(self, inputs: np.ndarray) -> np.ndarray:
        """Advance all channels one sample and return the filtered values."""
        x = np.array(inputs, dtype=float)
        if x.shape != (self.n_channels,):
            raise ValueError(f"expected {self.n_channels} channels, got shape {x.shape}")
        if not self._primed:
            self._x1 = x.copy()
            self._x2 = x.copy()
            self._y1 = x.copy()
            self._y2 = x.copy()
            self._primed = True
        c = self.coeffs
        y = c.b0 * x + c.b1 * self._x1
        y += c.b2 * self._x2
        y -= c.a1 * self._y1
        y -= c.a2 * self._y2
        self._x2 = self._x1
        self._x1 = x
        self._y2 = self._y1
        self._y1 = y
        return y


@dataclass(slots=True)
class RawSample:
    """One tick of the sensor streams feeding the detector."""

    timestamp: float  # s
    angular_rate: np.ndarray  # (3,) p, q, r in rad/s
    proper_accel_z: float  # m/s^2
    rotor_speeds: np.ndarray  # (4,) rad/s


@dataclass(slots=True)
class FilteredSample:
    """Low-passed copy of one sample, plus the differenced accelerations once known."""

    timestamp: float
    rates: np.ndarray  # (3,) filtered p, q, r
    accel_z: float
    rotor_speeds: np.ndarray  # (4,) filtered
    angular_accel: np.ndarray | None = None  # (2,) p_dot, q_dot in rad/s^2


def filter_step(state: FilterState, raw: RawSample) -> FilteredSample:
    """Advance every channel of ``state`` by one sample of ``raw``."""
    vec = np.empty(N_CHANNELS)
    vec[0:3] = raw.angular_rate
    vec[3] = raw.proper_accel_z
    vec[4:8] = raw.rotor_speeds
    out = state.step(vec)
    return FilteredSample(
        timestamp=raw.timestamp,
        rates=out[0:3],
        accel_z=float(out[3]),
        rotor_speeds=out[4:8],
    )


def differentiate(previous: FilteredSample | None, current: FilteredSample) -> np.ndarray:
    """Backward-difference angular acceleration of the filtered roll/pitch rates.

    The first sample of a stream has no predecessor and yields zero by
    definition.
    """
    if previous is None:
        return np.zeros(2)
    dt = current.timestamp - previous.timestamp
    if dt <= 0.0:
        raise ValueError(
            f"non-increasing timestamps: {previous.timestamp} -> {current.timestamp}"
        )
    return (current.rates[:2] - previous.rates[:2]) / dt
