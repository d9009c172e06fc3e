"""Flight log container and its CSV schema.

A log file is a sequence of ``# key=value`` header lines, one column header
row, then one data row per sample:

    # sample_rate_hz=500.0
    # rpm_units=rad_s
    # vehicle=default
    # fault_actuator=3
    # fault_time_s=1.56
    t,p,q,r,az,w1,w2,w3,w4
    0.002,-0.0003,...

``fault_actuator``/``fault_time_s`` are present only for annotated failure
logs. ``rpm_units`` is ``rad_s`` or ``rpm``; rotor speed columns written in
RPM are converted to rad/s on load. Floats are written with ``repr`` so a
write/read cycle is lossless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .filters import RawSample

COLUMNS = ("t", "p", "q", "r", "az", "w1", "w2", "w3", "w4")

RPM_TO_RAD_S = 2.0 * math.pi / 60.0


class LogFormatError(ValueError):
    """Raised when a log file violates the schema; carries the first bad line."""


@dataclass
class FlightLog:
    """Time series of raw samples plus the optional ground-truth annotation."""

    sample_rate_hz: float
    t: np.ndarray  # (n,)
    gyro: np.ndarray  # (n, 3) p, q, r
    accel_z: np.ndarray  # (n,)
    rotor_speeds: np.ndarray  # (n, 4) rad/s
    fault_actuator: int | None = None
    fault_time_s: float | None = None
    vehicle: str = "default"

    def __len__(self) -> int:
        return len(self.t)

    def samples(self) -> Iterator[RawSample]:
        for i in range(len(self.t)):
            yield RawSample(
                timestamp=float(self.t[i]),
                angular_rate=self.gyro[i],
                proper_accel_z=float(self.accel_z[i]),
                rotor_speeds=self.rotor_speeds[i],
            )

    def ground_truth(self) -> tuple[int, float] | None:
        if self.fault_actuator is None or self.fault_time_s is None:
            return None
        return self.fault_actuator, self.fault_time_s

    def validate(self) -> None:
        n = len(self.t)
        if n == 0:
            raise LogFormatError("log contains no samples")
        if self.gyro.shape != (n, 3) or self.rotor_speeds.shape != (n, 4) or self.accel_z.shape != (n,):
            raise LogFormatError("log arrays have inconsistent shapes")
        dt = np.diff(self.t)
        if n > 1 and not np.all(dt > 0):
            bad = int(np.argmax(dt <= 0))
            raise LogFormatError(
                f"non-monotone timestamps at sample {bad + 1} "
                f"(t={self.t[bad]} -> {self.t[bad + 1]})"
            )
        if n > 1:
            median_dt = float(np.median(dt))
            if abs(median_dt * self.sample_rate_hz - 1.0) > 0.01:
                raise LogFormatError(
                    f"header sample_rate_hz={self.sample_rate_hz} does not match the "
                    f"median timestamp delta {median_dt:.6g} s within 1%"
                )
        for name, arr in (("gyro", self.gyro), ("az", self.accel_z), ("rotor speeds", self.rotor_speeds)):
            if np.isnan(arr).any():
                raise LogFormatError(f"NaN values in {name} columns")
        if np.any(self.rotor_speeds < 0):
            raise LogFormatError("negative rotor speeds")


def save_log(log: FlightLog, path) -> None:
    log.validate()
    lines = [
        f"# sample_rate_hz={log.sample_rate_hz!r}",
        "# rpm_units=rad_s",
        f"# vehicle={log.vehicle}",
    ]
    if log.ground_truth() is not None:
        lines.append(f"# fault_actuator={log.fault_actuator}")
        lines.append(f"# fault_time_s={log.fault_time_s!r}")
    lines.append(",".join(COLUMNS))
    for i in range(len(log)):
        row = (
            log.t[i],
            log.gyro[i, 0],
            log.gyro[i, 1],
            log.gyro[i, 2],
            log.accel_z[i],
            log.rotor_speeds[i, 0],
            log.rotor_speeds[i, 1],
            log.rotor_speeds[i, 2],
            log.rotor_speeds[i, 3],
        )
        lines.append(",".join(repr(float(v)) for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_header(lines: list[tuple[int, str]]) -> dict[str, str]:
    header: dict[str, str] = {}
    for lineno, line in lines:
        body = line[1:].strip()
        if "=" not in body:
            raise LogFormatError(f"line {lineno}: malformed header line {line!r}")
        key, _, value = body.partition("=")
        header[key.strip()] = value.strip()
    return header


def load_log(path) -> FlightLog:
    """Parse and validate a log file; schema violations name the first bad line."""
    with open(path, "r", encoding="utf-8") as fh:
        raw_lines = fh.read().splitlines()

    header_lines: list[tuple[int, str]] = []
    column_line: tuple[int, str] | None = None
    data_lines: list[tuple[int, str]] = []
    for lineno, line in enumerate(raw_lines, start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            if column_line is not None:
                raise LogFormatError(f"line {lineno}: header line after data began")
            header_lines.append((lineno, line))
        elif column_line is None:
            column_line = (lineno, line)
        else:
            data_lines.append((lineno, line))

    if column_line is None:
        raise LogFormatError(f"{path}: empty log file (no column header)")
    if tuple(c.strip() for c in column_line[1].split(",")) != COLUMNS:
        raise LogFormatError(
            f"line {column_line[0]}: expected columns {','.join(COLUMNS)}, got {column_line[1]!r}"
        )
    if not data_lines:
        raise LogFormatError(f"{path}: log contains no data rows")

    header = _parse_header(header_lines)
    if "sample_rate_hz" not in header:
        raise LogFormatError("missing required header sample_rate_hz")
    try:
        sample_rate = float(header["sample_rate_hz"])
    except ValueError as exc:
        raise LogFormatError(f"bad sample_rate_hz: {header['sample_rate_hz']!r}") from exc
    rpm_units = header.get("rpm_units", "rad_s")
    if rpm_units not in ("rad_s", "rpm"):
        raise LogFormatError(f"unknown rpm_units {rpm_units!r} (expected rad_s or rpm)")

    fault_actuator = None
    fault_time = None
    if "fault_actuator" in header:
        try:
            fault_actuator = int(header["fault_actuator"])
        except ValueError as exc:
            raise LogFormatError(f"bad fault_actuator: {header['fault_actuator']!r}") from exc
        if not 1 <= fault_actuator <= 4:
            raise LogFormatError(f"fault_actuator out of range: {fault_actuator}")
        if "fault_time_s" not in header:
            raise LogFormatError("fault_actuator given without fault_time_s")
        fault_time = float(header["fault_time_s"])

    n = len(data_lines)
    values = np.empty((n, len(COLUMNS)))
    for i, (lineno, line) in enumerate(data_lines):
        parts = line.split(",")
        if len(parts) != len(COLUMNS):
            raise LogFormatError(
                f"line {lineno}: expected {len(COLUMNS)} columns, got {len(parts)}"
            )
        try:
            values[i] = [float(p) for p in parts]
        except ValueError as exc:
            raise LogFormatError(f"line {lineno}: unparseable number in {line!r}") from exc
        if np.isnan(values[i]).any():
            raise LogFormatError(f"line {lineno}: NaN field")

    t = values[:, 0]
    deltas = np.diff(t)
    if n > 1 and not np.all(deltas > 0):
        bad = int(np.argmax(deltas <= 0))
        raise LogFormatError(
            f"line {data_lines[bad + 1][0]}: non-monotone timestamp "
            f"({t[bad]} -> {t[bad + 1]})"
        )

    speeds = values[:, 5:9]
    if rpm_units == "rpm":
        speeds = speeds * RPM_TO_RAD_S

    log = FlightLog(
        sample_rate_hz=sample_rate,
        t=t.copy(),
        gyro=values[:, 1:4].copy(),
        accel_z=values[:, 4].copy(),
        rotor_speeds=np.ascontiguousarray(speeds),
        fault_actuator=fault_actuator,
        fault_time_s=fault_time,
        vehicle=header.get("vehicle", "default"),
    )
    log.validate()
    return log
