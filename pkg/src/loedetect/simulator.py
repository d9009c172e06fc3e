"""Quadrotor flight simulator with injectable sudden actuator failures.

Rigid-body dynamics with first-order motor lag, a simple cascaded
attitude/rate controller to keep flights plausible, and a sensor model that
corrupts gyro and accelerometer channels with bias, white noise and
rotor-synchronous vibration. Rotor speed telemetry stays exact: the failure
being modeled is a propeller leaving the motor, so the motor keeps spinning
and reporting truthfully while its thrust vanishes instantly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .effectiveness import VehicleGeometry
from .filters import RawSample
from .flightlog import FlightLog

GRAVITY = 9.81  # m/s^2

# Reaction-torque sign of each rotor about body z (1 & 3 spin one way, 2 & 4
# the other); losing rotor 3 leaves a net negative yaw moment.
YAW_SIGNS = np.array([1.0, -1.0, 1.0, -1.0])

ROLL_SIGNS = np.array([1.0, -1.0, -1.0, 1.0])
PITCH_SIGNS = np.array([1.0, 1.0, -1.0, -1.0])

SCENARIOS = ("hover", "step", "wind", "ground_idle")


class DivergenceError(RuntimeError):
    """Simulated state left the plausible envelope."""


@dataclass(frozen=True)
class VehicleParams:
    """Default airframe sized so the lumped gains match the detector defaults."""

    mass: float = 0.5  # kg
    inertia_diag: tuple[float, float, float] = (1.5e-3, 1.5e-3, 2.8e-3)  # kg m^2
    thrust_coeff: float = 2.5e-6  # N s^2
    moment_coeff: float = 5e-8  # N m s^2
    arm_x: float = 0.06  # h, m
    arm_y: float = 0.06  # b, m
    motor_time_constant: float = 0.03  # s
    rotor_speed_limits: tuple[float, float] = (150.0, 1300.0)  # rad/s

    def __post_init__(self) -> None:
        positives = (
            self.mass,
            *self.inertia_diag,
            self.thrust_coeff,
            self.moment_coeff,
            self.arm_x,
            self.arm_y,
            self.motor_time_constant,
            self.rotor_speed_limits[0],
        )
        if not all(v > 0 for v in positives):
            raise ValueError("all vehicle parameters must be positive")
        if not self.rotor_speed_limits[0] < self.rotor_speed_limits[1]:
            raise ValueError("rotor_speed_limits must satisfy min < max")

    def geometry(self) -> VehicleGeometry:
        return VehicleGeometry(
            arm_x=self.arm_x,
            arm_y=self.arm_y,
            thrust_coeff=self.thrust_coeff,
            moment_coeff=self.moment_coeff,
            inertia_diag=self.inertia_diag,
            mass=self.mass,
        )

    def hover_speed(self) -> float:
        """Rotor speed at which four nominal rotors balance the weight."""
        return math.sqrt(self.mass * GRAVITY / (4.0 * self.thrust_coeff))


@dataclass
class SimState:
    angular_rate: np.ndarray  # (3,) body rad/s
    quaternion: np.ndarray  # (4,) w,x,y,z body-to-world
    velocity: np.ndarray  # (3,) world NED m/s
    position: np.ndarray  # (3,) world NED m, z down
    rotor_speeds: np.ndarray  # (4,) rad/s
    true_k: np.ndarray  # (4,) actual effectiveness factors

    def copy(self) -> "SimState":
        return SimState(
            self.angular_rate.copy(),
            self.quaternion.copy(),
            self.velocity.copy(),
            self.position.copy(),
            self.rotor_speeds.copy(),
            self.true_k.copy(),
        )


@dataclass(frozen=True)
class FaultEvent:
    """Sudden effectiveness change of one actuator (total loss by default)."""

    time: float
    actuator_index: int  # 1-based
    new_k: float = 0.0

    def __post_init__(self) -> None:
        if self.time < 0:
            raise ValueError("fault time must be non-negative")
        if not 1 <= self.actuator_index <= 4:
            raise ValueError(f"actuator_index must be 1..4, got {self.actuator_index}")
        if not 0.0 <= self.new_k <= 1.0:
            raise ValueError("new_k must lie in [0, 1]")


@dataclass
class SensorNoiseModel:
    """Gyro/accelerometer corruption; rotor speed telemetry is never corrupted.

    Biases and vibration phases are drawn once per reset from the seeded
    generator, so a (scenario, seed, params) triple fully determines a log.
    """

    gyro_noise_std: float = 0.005  # rad/s
    gyro_bias: float = 0.01  # rad/s, std of the per-axis constant bias
    accel_noise_std: float = 0.08  # m/s^2
    accel_bias: float = 0.05  # m/s^2
    gyro_vibration: float = 0.02  # rad/s at rotor frequency
    accel_vibration: float = 0.3  # m/s^2 at rotor frequency
    seed: int = 0
    _rng: np.random.Generator = field(init=False, repr=False, compare=False, default=None)
    _gyro_bias_vec: np.ndarray = field(init=False, repr=False, compare=False, default=None)
    _accel_bias_val: float = field(init=False, repr=False, compare=False, default=0.0)
    _phases: np.ndarray = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self) -> None:
        for name in (
            "gyro_noise_std",
            "gyro_bias",
            "accel_noise_std",
            "accel_bias",
            "gyro_vibration",
            "accel_vibration",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        self.reset()

    def reset(self) -> None:
        self._rng = np.random.default_rng(self.seed)
        self._gyro_bias_vec = self._rng.normal(0.0, self.gyro_bias, 3)
        self._accel_bias_val = float(self._rng.normal(0.0, self.accel_bias))
        self._phases = self._rng.uniform(0.0, 2.0 * math.pi, 4)

    def scaled(self, factor: float) -> "SensorNoiseModel":
        """Copy with every corruption magnitude multiplied by ``factor``."""
        if factor < 0:
            raise ValueError("factor must be non-negative")
        return SensorNoiseModel(
            gyro_noise_std=self.gyro_noise_std * factor,
            gyro_bias=self.gyro_bias * factor,
            accel_noise_std=self.accel_noise_std * factor,
            accel_bias=self.accel_bias * factor,
            gyro_vibration=self.gyro_vibration * factor,
            accel_vibration=self.accel_vibration * factor,
            seed=self.seed,
        )


# --------------------------------------------------------------------------
# Quaternion helpers (w, x, y, z convention, body-to-world).


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def _quat_rate(q: np.ndarray, omega: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    ox, oy, oz = omega
    return 0.5 * np.array(
        [
            -x * ox - y * oy - z * oz,
            w * ox + y * oz - z * oy,
            w * oy + z * ox - x * oz,
            w * oz + x * oy - y * ox,
        ]
    )


def _roll_pitch(q: np.ndarray) -> tuple[float, float]:
    w, x, y, z = q
    roll = math.atan2(2 * (w * x + y * z), 1 - 2 * (x * x + y * y))
    pitch = math.asin(max(-1.0, min(1.0, 2 * (w * y - z * x))))
    return roll, pitch


# --------------------------------------------------------------------------


def hover_state(params: VehicleParams, altitude: float = 1.5) -> SimState:
    """Trimmed hover ``altitude`` meters above the ground (NED: z = -altitude)."""
    return SimState(
        angular_rate=np.zeros(3),
        quaternion=np.array([1.0, 0.0, 0.0, 0.0]),
        velocity=np.zeros(3),
        position=np.array([0.0, 0.0, -altitude]),
        rotor_speeds=np.full(4, params.hover_speed()),
        true_k=np.ones(4),
    )


def actuator_moments_and_thrust(
    state: SimState, params: VehicleParams
) -> tuple[np.ndarray, float]:
    """Body moments from the actuators and the total thrust magnitude."""
    thrusts = params.thrust_coeff * state.true_k * np.square(state.rotor_speeds)
    m_x = params.arm_y * float(ROLL_SIGNS @ thrusts)
    m_y = params.arm_x * float(PITCH_SIGNS @ thrusts)
    m_z = params.moment_coeff * float(
        YAW_SIGNS @ (state.true_k * np.square(state.rotor_speeds))
    )
    return np.array([m_x, m_y, m_z]), float(thrusts.sum())


def dynamics_step(
    state: SimState,
    rotor_setpoints: np.ndarray,
    params: VehicleParams,
    dt: float,
    external_force: np.ndarray | None = None,
    external_moment: np.ndarray | None = None,
) -> SimState:
    """Advance the vehicle one fixed step (RK4 on the rigid body).

    Rotors track their setpoints through a first-order lag and are held
    constant inside the integration step. The Euler coupling term
    ``-Omega x I Omega`` is always included; external force is expressed in
    the world frame, external moment in the body frame.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    lo, hi = params.rotor_speed_limits
    decay = math.exp(-dt / params.motor_time_constant)
    new_speeds = np.clip(
        np.asarray(rotor_setpoints, dtype=float)
        + (state.rotor_speeds - rotor_setpoints) * decay,
        lo,
        hi,
    )

    work = state.copy()
    work.rotor_speeds = new_speeds
    moments, thrust_total = actuator_moments_and_thrust(work, params)
    if external_moment is not None:
        moments = moments + external_moment
    inertia = np.asarray(params.inertia_diag)
    f_body = np.array([0.0, 0.0, -thrust_total / params.mass])
    g_world = np.array([0.0, 0.0, GRAVITY])
    f_ext = (
        np.zeros(3) if external_force is None else np.asarray(external_force) / params.mass
    )

    def deriv(omega, q, vel):
        omega_dot = (moments - np.cross(omega, inertia * omega)) / inertia
        q_dot = _quat_rate(q, omega)
        v_dot = quat_to_matrix(q) @ f_body + g_world + f_ext
        return omega_dot, q_dot, v_dot

    om, q, v, pos = state.angular_rate, state.quaternion, state.velocity, state.position

    k1 = deriv(om, q, v)
    k2 = deriv(om + 0.5 * dt * k1[0], q + 0.5 * dt * k1[1], v + 0.5 * dt * k1[2])
    k3 = deriv(om + 0.5 * dt * k2[0], q + 0.5 * dt * k2[1], v + 0.5 * dt * k2[2])
    k4 = deriv(om + dt * k3[0], q + dt * k3[1], v + dt * k3[2])

    sixth = dt / 6.0
    new_omega = om + sixth * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    new_q = q + sixth * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    new_q = new_q / np.linalg.norm(new_q)
    new_v = v + sixth * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
    # velocity enters position linearly; same RK4 weights on the v stages
    new_pos = pos + sixth * (
        v + 2 * (v + 0.5 * dt * k1[2]) + 2 * (v + 0.5 * dt * k2[2]) + (v + dt * k3[2])
    )

    return SimState(
        angular_rate=new_omega,
        quaternion=new_q,
        velocity=new_v,
        position=new_pos,
        rotor_speeds=new_speeds,
        true_k=state.true_k.copy(),
    )


def inject_fault(state: SimState, event: FaultEvent) -> SimState:
    """Apply a sudden effectiveness change; the motor keeps spinning."""
    out = state.copy()
    out.true_k[event.actuator_index - 1] = event.new_k
    return out


def _measure(
    omega: np.ndarray,
    az_true: float,
    rotor_speeds: np.ndarray,
    noise: SensorNoiseModel,
    t: float,
) -> RawSample:
    wbar = float(rotor_speeds.mean())
    gyro = (
        omega
        + noise._gyro_bias_vec
        + noise._rng.normal(0.0, noise.gyro_noise_std, 3)
        + noise.gyro_vibration * np.sin(wbar * t + noise._phases[:3])
    )
    az = (
        az_true
        + noise._accel_bias_val
        + float(noise._rng.normal(0.0, noise.accel_noise_std))
        + noise.accel_vibration * math.sin(wbar * t + noise._phases[3])
    )
    return RawSample(
        timestamp=t,
        angular_rate=gyro,
        proper_accel_z=az,
        rotor_speeds=rotor_speeds.copy(),
    )


def synthesize_sensors(
    state: SimState,
    params: VehicleParams,
    noise: SensorNoiseModel,
    t: float,
    external_force: np.ndarray | None = None,
) -> RawSample:
    """Corrupted gyro/accelerometer readings plus exact rotor speeds."""
    _, thrust_total = actuator_moments_and_thrust(state, params)
    az_true = -thrust_total / params.mass
    if external_force is not None:
        f_body = quat_to_matrix(state.quaternion).T @ np.asarray(external_force)
        az_true += float(f_body[2]) / params.mass
    return _measure(state.angular_rate, az_true, state.rotor_speeds, noise, t)


# --------------------------------------------------------------------------
# Closed-loop scenario generation.


class _Controller:
    """Cascaded attitude/rate controller with nominal-effectiveness allocation."""

    ATT_P = 6.0  # attitude to rate setpoint, 1/s
    RATE_P = 25.0  # rate loop bandwidth, 1/s
    YAW_RATE_P = 8.0
    ALT_P = 2.5
    ALT_D = 3.0

    def __init__(self, params: VehicleParams):
        self.params = params
        ct, cm = params.thrust_coeff, params.moment_coeff
        alloc = np.array(
            [
                [ct, ct, ct, ct],
                ct * params.arm_y * ROLL_SIGNS,
                ct * params.arm_x * PITCH_SIGNS,
                cm * YAW_SIGNS,
            ]
        )
        self._alloc_inv = np.linalg.inv(alloc)
        self._w_sq_limits = (
            params.rotor_speed_limits[0] ** 2,
            params.rotor_speed_limits[1] ** 2,
        )

    def setpoints(
        self, state: SimState, roll_sp: float, pitch_sp: float, z_sp: float
    ) -> np.ndarray:
        params = self.params
        roll, pitch = _roll_pitch(state.quaternion)
        p, q, r = state.angular_rate
        ix, iy, iz = params.inertia_diag

        p_sp = self.ATT_P * (roll_sp - roll)
        q_sp = self.ATT_P * (pitch_sp - pitch)
        m_x = ix * self.RATE_P * (p_sp - p)
        m_y = iy * self.RATE_P * (q_sp - q)
        m_z = iz * self.YAW_RATE_P * (0.0 - r)

        z, vz = state.position[2], state.velocity[2]
        thrust = params.mass * (
            GRAVITY + self.ALT_P * (z - z_sp) + self.ALT_D * vz
        )
        thrust = max(thrust, 0.1 * params.mass * GRAVITY)

        w_sq = self._alloc_inv @ np.array([thrust, m_x, m_y, m_z])
        w_sq = np.clip(w_sq, *self._w_sq_limits)
        return np.sqrt(w_sq)


def _attitude_schedule(scenario: str, t: float) -> tuple[float, float]:
    if scenario != "step":
        return 0.0, 0.0
    block = int(t) % 5
    return [(0.12, 0.0), (0.0, 0.12), (-0.12, 0.0), (0.0, -0.12), (0.0, 0.0)][block]


def _wind(scenario: str, t: float) -> tuple[np.ndarray | None, np.ndarray | None]:
    if scenario != "wind":
        return None, None
    force = np.array(
        [
            0.3 + 0.15 * math.sin(2.0 * math.pi * 0.5 * t),
            0.2 * math.sin(2.0 * math.pi * 0.3 * t + 1.0),
            0.0,
        ]
    )
    moment = np.array(
        [
            0.002 * math.sin(2.0 * math.pi * 0.8 * t),
            0.0015 * math.sin(2.0 * math.pi * 0.6 * t + 0.5),
            0.0,
        ]
    )
    return force, moment


def _check_plausible(state: SimState, step_index: int, t: float) -> None:
    finite = (
        np.isfinite(state.angular_rate).all()
        and np.isfinite(state.velocity).all()
        and np.isfinite(state.position).all()
        and np.isfinite(state.quaternion).all()
    )
    if not finite or np.abs(state.angular_rate).max() > 1000.0 or np.abs(state.velocity).max() > 1000.0:
        raise DivergenceError(f"simulation diverged at step {step_index} (t={t:.3f} s)")


IDLE_ROTOR_SPEED = 350.0  # rad/s, below the default takeoff gate


def fly_scenario(
    scenario: str = "hover",
    duration: float = 10.0,
    fault: FaultEvent | None = None,
    params: VehicleParams | None = None,
    noise: SensorNoiseModel | None = None,
    sample_interval: float = 0.002,
) -> FlightLog:
    """Simulate a closed-loop flight and return the annotated sensor log.

    Scenarios: ``hover`` holds altitude and level attitude, ``step`` flies a
    repeating sequence of attitude steps, ``wind`` adds a constant-plus-gust
    external force and moment, ``ground_idle`` keeps the vehicle on the ground
    with rotors idling below the takeoff gate.
    """
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r} (expected one of {SCENARIOS})")
    if duration <= 0:
        raise ValueError("duration must be positive")
    if fault is not None and fault.time >= duration:
        raise ValueError("fault time must fall inside the flight duration")
    params = params or VehicleParams()
    noise = noise if noise is not None else SensorNoiseModel()
    noise.reset()

    n = round(duration / sample_interval)
    dt = sample_interval
    rows_gyro = np.empty((n, 3))
    rows_az = np.empty(n)
    rows_w = np.empty((n, 4))
    times = np.empty(n)

    if scenario == "ground_idle":
        idle = np.full(4, IDLE_ROTOR_SPEED)
        omega = np.zeros(3)
        for i in range(n):
            t = (i + 1) * dt
            raw = _measure(omega, -GRAVITY, idle, noise, t)
            times[i] = t
            rows_gyro[i] = raw.angular_rate
            rows_az[i] = raw.proper_accel_z
            rows_w[i] = raw.rotor_speeds
        return FlightLog(
            sample_rate_hz=1.0 / dt,
            t=times,
            gyro=rows_gyro,
            accel_z=rows_az,
            rotor_speeds=rows_w,
            vehicle="default",
        )

    controller = _Controller(params)
    state = hover_state(params)
    z_sp = state.position[2]
    fault_applied = fault is None

    for i in range(n):
        t_start = i * dt
        t_next = (i + 1) * dt
        if not fault_applied and t_next > fault.time:
            state = inject_fault(state, fault)
            fault_applied = True
        roll_sp, pitch_sp = _attitude_schedule(scenario, t_start)
        force, moment = _wind(scenario, t_start)
        setpoints = controller.setpoints(state, roll_sp, pitch_sp, z_sp)
        state = dynamics_step(state, setpoints, params, dt, force, moment)
        _check_plausible(state, i, t_next)
        raw = synthesize_sensors(state, params, noise, t_next, external_force=force)
        times[i] = t_next
        rows_gyro[i] = raw.angular_rate
        rows_az[i] = raw.proper_accel_z
        rows_w[i] = raw.rotor_speeds

    return FlightLog(
        sample_rate_hz=1.0 / dt,
        t=times,
        gyro=rows_gyro,
        accel_z=rows_az,
        rotor_speeds=rows_w,
        fault_actuator=fault.actuator_index if fault else None,
        fault_time_s=fault.time if fault else None,
        vehicle="default",
    )
