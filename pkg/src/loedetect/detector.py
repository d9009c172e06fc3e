"""Streaming loss-of-effectiveness detector.

Wires the conditioning filters, backward differencing, observation building,
effectiveness estimator and hypothesis test into one per-sample pipeline. The
filters advance on every sensor sample; the estimator and the decision logic
advance on every estimator tick once a takeoff thrust gate has armed the
detector. Ground contact would otherwise read as zero effectiveness and
trigger false alarms, so nothing can latch while disarmed.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .decision import DecisionConfig, DetectionStatus, decide, failure_probabilities
from .effectiveness import SIGN_MATRIX, EffectivenessGains
from .filters import (
    FilterDesign,
    FilterState,
    FilteredSample,
    RawSample,
    design_lowpass,
    differentiate,
    filter_step,
)
from . import kalman
from .kalman import EstimatorState, NoiseConfig, ObservationFrame

# Sum of squared rotor speeds at hover for the default airframe
# (mass * g / thrust_coeff = 0.5 * 9.81 / 2.5e-6).
DEFAULT_HOVER_THRUST_REFERENCE = 1.962e6

# Length of the arming moving-average window, seconds.
ARMING_WINDOW_S = 1.0


@dataclass(frozen=True)
class DetectorConfig:
    """Full parameterization of one detector instance."""

    gains: EffectivenessGains = EffectivenessGains()
    lowpass: FilterDesign = FilterDesign()
    noise: NoiseConfig = NoiseConfig()
    decision: DecisionConfig = DecisionConfig()
    estimator_interval: float = 0.02  # s, estimator/decision tick
    sensor_interval: float = 0.002  # s, filter tick
    takeoff_thrust_fraction: float = 0.5
    hover_thrust_reference: float = DEFAULT_HOVER_THRUST_REFERENCE  # sum w_i^2, (rad/s)^2

    def __post_init__(self) -> None:
        if not self.sensor_interval > 0.0:
            raise ValueError("sensor_interval must be positive")
        if not self.estimator_interval > 0.0:
            raise ValueError("estimator_interval must be positive")
        ratio = self.estimator_interval / self.sensor_interval
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio) or round(ratio) < 1:
            raise ValueError(
                f"estimator_interval ({self.estimator_interval} s) is not an integer "
                f"multiple of sensor_interval ({self.sensor_interval} s)"
            )
        if not 0.0 < self.takeoff_thrust_fraction < 1.0:
            raise ValueError("takeoff_thrust_fraction must be in (0, 1)")
        if not self.hover_thrust_reference > 0.0:
            raise ValueError("hover_thrust_reference must be positive")
        if not math.isclose(self.lowpass.sample_interval, self.sensor_interval, rel_tol=1e-9):
            raise ValueError("lowpass.sample_interval must equal sensor_interval")

    def steps_per_estimate(self) -> int:
        return round(self.estimator_interval / self.sensor_interval)


def default_config() -> DetectorConfig:
    return DetectorConfig()


# ---------------------------------------------------------------------------
# Flat key-value schema, shared by the config file format and parameter sweeps.

CONFIG_KEYS = (
    "g_p",
    "g_q",
    "g_az",
    "filter_natural_frequency",
    "filter_damping_ratio",
    "process_noise_q",
    "measurement_noise_r",
    "k_threshold",
    "probability_threshold",
    "estimator_interval",
    "sensor_interval",
    "takeoff_thrust_fraction",
    "hover_thrust_reference",
)


def config_to_dict(config: DetectorConfig) -> dict[str, float]:
    return {
        "g_p": config.gains.g_p,
        "g_q": config.gains.g_q,
        "g_az": config.gains.g_az,
        "filter_natural_frequency": config.lowpass.natural_frequency,
        "filter_damping_ratio": config.lowpass.damping_ratio,
        "process_noise_q": config.noise.process_noise_q,
        "measurement_noise_r": config.noise.measurement_noise_r,
        "k_threshold": config.decision.k_threshold,
        "probability_threshold": config.decision.probability_threshold,
        "estimator_interval": config.estimator_interval,
        "sensor_interval": config.sensor_interval,
        "takeoff_thrust_fraction": config.takeoff_thrust_fraction,
        "hover_thrust_reference": config.hover_thrust_reference,
    }


def config_from_dict(values: dict[str, float]) -> DetectorConfig:
    unknown = set(values) - set(CONFIG_KEYS)
    if unknown:
        raise ValueError(f"unknown configuration keys: {sorted(unknown)}")
    missing = set(CONFIG_KEYS) - set(values)
    if missing:
        raise ValueError(f"missing configuration keys: {sorted(missing)}")
    return DetectorConfig(
        gains=EffectivenessGains(values["g_p"], values["g_q"], values["g_az"]),
        lowpass=FilterDesign(
            natural_frequency=values["filter_natural_frequency"],
            damping_ratio=values["filter_damping_ratio"],
            sample_interval=values["sensor_interval"],
        ),
        noise=NoiseConfig(values["process_noise_q"], values["measurement_noise_r"]),
        decision=DecisionConfig(values["k_threshold"], values["probability_threshold"]),
        estimator_interval=values["estimator_interval"],
        sensor_interval=values["sensor_interval"],
        takeoff_thrust_fraction=values["takeoff_thrust_fraction"],
        hover_thrust_reference=values["hover_thrust_reference"],
    )


def config_with(config: DetectorConfig, key: str, value: float) -> DetectorConfig:
    """Copy of ``config`` with one flat key replaced; rejects unknown keys."""
    if key not in CONFIG_KEYS:
        raise KeyError(f"unknown configuration key: {key!r}")
    values = config_to_dict(config)
    values[key] = float(value)
    return config_from_dict(values)


def format_config(config: DetectorConfig) -> str:
    lines = ["# loedetect detector configuration"]
    for key, value in config_to_dict(config).items():
        lines.append(f"{key} = {value!r}")
    return "\n".join(lines) + "\n"


def write_config(config: DetectorConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_config(config))


def parse_config(text: str) -> DetectorConfig:
    values: dict[str, float] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in CONFIG_KEYS:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        if key in values:
            raise ValueError(f"config line {lineno}: duplicate key {key!r}")
        try:
            values[key] = float(raw.strip())
        except ValueError as exc:
            raise ValueError(f"config line {lineno}: bad value for {key!r}: {raw.strip()!r}") from exc
    return config_from_dict(values)


def read_config(path) -> DetectorConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


# ---------------------------------------------------------------------------


@dataclass(slots=True)
class DetectorOutput:
    """Detector state published for one input sample.

    Estimator-derived fields repeat between estimator ticks; the arrays are
    read-only snapshots shared across outputs of the same tick.
    """

    timestamp: float
    k_hat: np.ndarray  # (4,)
    variances: np.ndarray  # (4,)
    p_fail: np.ndarray  # (4,)
    status: DetectionStatus
    armed: bool


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


class Detector:
    """One detection stream: feed samples in timestamp order, read outputs."""

    def __init__(self, config: DetectorConfig):
        self.config = config
        self._filter = FilterState(design_lowpass(config.lowpass))
        self._gains_col = config.gains.as_array()[:, None]
        self._estimator = kalman.init()
        self._status = DetectionStatus()
        self._steps_per_estimate = config.steps_per_estimate()
        self._sample_index = 0
        self._last_timestamp: float | None = None
        self._prev_tick: FilteredSample | None = None
        # Takeoff gate: moving average of sum(w_i^2) over a 1 s window.
        self._armed = False
        self._gate_level = config.takeoff_thrust_fraction * config.hover_thrust_reference
        self._gate_len = max(1, round(ARMING_WINDOW_S / config.sensor_interval))
        self._gate_buf = np.zeros(self._gate_len)
        self._gate_sum = 0.0
        self._gate_count = 0
        self._gate_pos = 0
        self._refresh_snapshots()

    @property
    def armed(self) -> bool:
        return self._armed

    @property
    def status(self) -> DetectionStatus:
        return self._status

    @property
    def estimator_state(self) -> EstimatorState:
        return self._estimator.copy()

    def _refresh_snapshots(self) -> None:
        est = self._estimator
        self._snap_k = _frozen(est.x)
        self._snap_var = _frozen(est.P.diagonal())
        self._snap_pfail = _frozen(
            failure_probabilities(est.x, self._snap_var, self.config.decision.k_threshold)
        )

    def _update_gate(self, rotor_speeds: np.ndarray) -> None:
        if self._armed:
            return
        thrust_proxy = float(rotor_speeds @ rotor_speeds)
        self._gate_sum += thrust_proxy - self._gate_buf[self._gate_pos]
        self._gate_buf[self._gate_pos] = thrust_proxy
        self._gate_pos = (self._gate_pos + 1) % self._gate_len
        if self._gate_count < self._gate_len:
            self._gate_count += 1
        if self._gate_sum / self._gate_count > self._gate_level:
            self._armed = True  # one-way: landing detection is out of scope

    def process_sample(self, raw: RawSample) -> DetectorOutput:
        t = raw.timestamp
        if self._last_timestamp is not None and t <= self._last_timestamp:
            raise ValueError(
                f"non-monotone timestamp: {t} after {self._last_timestamp}"
            )
        if (
            math.isnan(t)
            or math.isnan(raw.proper_accel_z)
            or np.isnan(raw.angular_rate).any()
            or np.isnan(raw.rotor_speeds).any()
        ):
            raise ValueError(f"NaN in sample at t={t}")
        self._last_timestamp = t

        filtered = filter_step(self._filter, raw)
        self._update_gate(raw.rotor_speeds)

        self._sample_index += 1
        if self._sample_index % self._steps_per_estimate == 0:
            accel = differentiate(self._prev_tick, filtered)
            filtered.angular_accel = accel
            if self._armed:
                w_sq = np.square(filtered.rotor_speeds)
                frame = ObservationFrame(
                    z=np.array([accel[0], accel[1], filtered.accel_z]),
                    rotor_speeds_sq=w_sq,
                )
                obs = SIGN_MATRIX * self._gains_col * w_sq[None, :]
                self._estimator = kalman.step(self._estimator, obs, frame.z, self.config.noise)
                self._refresh_snapshots()
                self._status = decide(
                    self._snap_pfail, self._status, self.config.decision, now=t
                )
            self._prev_tick = filtered

        return DetectorOutput(
            timestamp=t,
            k_hat=self._snap_k,
            variances=self._snap_var,
            p_fail=self._snap_pfail,
            status=self._status,
            armed=self._armed,
        )

    def process_stream(self, samples) -> list[DetectorOutput]:
        return [self.process_sample(s) for s in samples]


def create(config: DetectorConfig) -> Detector:
    """Build a detector in the disarmed state; invalid configs raise ValueError."""
    return Detector(config)


# ---------------------------------------------------------------------------
# Runtime budget measurement.


@dataclass(frozen=True)
class RuntimeReport:
    """Per-sample wall-time statistics of one synthetic detector run."""

    n_samples: int
    mean_us: float
    p99_us: float
    pre_fault_mean_us: float
    post_fault_mean_us: float
    latched: bool

    def __str__(self) -> str:
        return (
            f"runtime over {self.n_samples} samples: mean {self.mean_us:.2f} us, "
            f"p99 {self.p99_us:.2f} us, pre-fault {self.pre_fault_mean_us:.2f} us, "
            f"post-fault {self.post_fault_mean_us:.2f} us, latched={self.latched}"
        )


def _budget_stream(config: DetectorConfig, n_samples: int, fault_index: int):
    """Synthetic stream: trimmed hover, then a sudden loss of actuator 3.

    Post-fault the rotor speeds jump to the pattern a controller fighting the
    loss settles into (opposite rotor near idle, failed rotor driven hard);
    that pattern makes the failed actuator sharply observable, so the
    estimator provably latches. The fed roll/pitch rates integrate the
    accelerations the model implies for the current speeds and effectiveness
    (rate integration saturates 2 s after the fault to keep values bounded);
    values only, per-sample cost is unaffected.
    """
    dt = config.sensor_interval
    w_hover = math.sqrt(config.hover_thrust_reference / 4.0)
    hover_speeds = np.full(4, w_hover)
    response_speeds = w_hover * np.array([0.35, 1.15, 1.75, 1.15])
    roll_signs = SIGN_MATRIX[0]
    pitch_signs = SIGN_MATRIX[1]
    g_p, g_q, g_az = config.gains.g_p, config.gains.g_q, config.gains.g_az
    p = q = 0.0
    for index in range(n_samples):
        speeds = hover_speeds if index < fault_index else response_speeds
        k_eff = np.square(speeds)
        if index >= fault_index:
            k_eff[2] = 0.0  # actuator 3 loses all thrust, its speed stays reported
        az = -g_az * float(k_eff.sum())
        if (index - fault_index) * dt < 2.0:
            p += g_p * float(roll_signs @ k_eff) * dt
            q += g_q * float(pitch_signs @ k_eff) * dt
        yield RawSample(
            timestamp=(index + 1) * dt,
            angular_rate=np.array([p, q, 0.0]),
            proper_accel_z=az,
            rotor_speeds=speeds,
        )


def step_runtime_budget(
    config: DetectorConfig, n_samples: int = 100_000, fault_fraction: float = 0.5
) -> RuntimeReport:
    """Time ``process_sample`` over a synthetic stream on a fresh detector.

    The stream hovers, then carries a sudden-loss signature so the report can
    compare per-sample cost before and after a latched detection.
    """
    if n_samples < 100:
        raise ValueError("n_samples too small for a meaningful budget")
    detector = Detector(config)
    fault_index = int(n_samples * fault_fraction)
    times = np.empty(n_samples)
    perf = time.perf_counter
    for i, raw in enumerate(_budget_stream(config, n_samples, fault_index)):
        t0 = perf()
        detector.process_sample(raw)
        times[i] = perf() - t0
    times *= 1e6
    return RuntimeReport(
        n_samples=n_samples,
        mean_us=float(times.mean()),
        p99_us=float(np.quantile(times, 0.99)),
        pre_fault_mean_us=float(times[:fault_index].mean()),
        post_fault_mean_us=float(times[fault_index:].mean()),
        latched=detector.status.any_failed(),
    )
