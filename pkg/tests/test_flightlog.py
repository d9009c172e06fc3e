import math

import numpy as np
import pytest

from loedetect.flightlog import COLUMNS, FlightLog, LogFormatError, load_log, save_log


def synthetic_log(n=50, rate=500.0, fault=None):
    rng = np.random.default_rng(30)
    t = (np.arange(n) + 1) / rate
    log = FlightLog(
        sample_rate_hz=rate,
        t=t,
        gyro=rng.normal(0.0, 0.1, (n, 3)),
        accel_z=rng.normal(-9.81, 0.2, n),
        rotor_speeds=rng.uniform(300.0, 1200.0, (n, 4)),
        fault_actuator=fault[0] if fault else None,
        fault_time_s=fault[1] if fault else None,
    )
    return log


def test_round_trip_is_lossless(tmp_path):
    log = synthetic_log(fault=(3, 0.05))
    path = tmp_path / "flight.csv"
    save_log(log, path)
    loaded = load_log(path)
    assert np.array_equal(loaded.t, log.t)
    assert np.array_equal(loaded.gyro, log.gyro)
    assert np.array_equal(loaded.accel_z, log.accel_z)
    assert np.array_equal(loaded.rotor_speeds, log.rotor_speeds)
    assert loaded.ground_truth() == (3, 0.05)
    assert loaded.sample_rate_hz == log.sample_rate_hz


def test_samples_iterator_matches_arrays():
    log = synthetic_log(n=5)
    for i, raw in enumerate(log.samples()):
        assert raw.timestamp == log.t[i]
        assert np.array_equal(raw.angular_rate, log.gyro[i])
        assert raw.proper_accel_z == log.accel_z[i]
        assert np.array_equal(raw.rotor_speeds, log.rotor_speeds[i])


def _write(path, text):
    path.write_text(text)
    return path


def test_rpm_units_converted_on_load(tmp_path):
    path = _write(
        tmp_path / "rpm.csv",
        "# sample_rate_hz=500.0\n"
        "# rpm_units=rpm\n"
        + ",".join(COLUMNS)
        + "\n0.002,0,0,0,-9.81,3000,3000,3000,3000\n"
        "0.004,0,0,0,-9.81,3000,3000,3000,3000\n",
    )
    log = load_log(path)
    assert log.rotor_speeds[0, 0] == pytest.approx(3000.0 * 2.0 * math.pi / 60.0, rel=1e-12)


def test_empty_file_is_an_error(tmp_path):
    with pytest.raises(LogFormatError, match="empty"):
        load_log(_write(tmp_path / "empty.csv", ""))


def test_header_only_file_is_an_error(tmp_path):
    path = _write(
        tmp_path / "no_rows.csv",
        "# sample_rate_hz=500.0\n" + ",".join(COLUMNS) + "\n",
    )
    with pytest.raises(LogFormatError, match="no data rows"):
        load_log(path)


def test_wrong_columns_rejected(tmp_path):
    path = _write(
        tmp_path / "cols.csv",
        "# sample_rate_hz=500.0\nt,p,q,r,az,w1,w2,w3\n0.002,0,0,0,0,1,2,3\n",
    )
    with pytest.raises(LogFormatError, match="expected columns"):
        load_log(path)


def test_non_monotone_time_reports_line(tmp_path):
    path = _write(
        tmp_path / "time.csv",
        "# sample_rate_hz=500.0\n"
        + ",".join(COLUMNS)
        + "\n0.002,0,0,0,-9.81,500,500,500,500\n"
        "0.002,0,0,0,-9.81,500,500,500,500\n",
    )
    with pytest.raises(LogFormatError, match="line 4"):
        load_log(path)


def test_nan_field_reports_line(tmp_path):
    path = _write(
        tmp_path / "nan.csv",
        "# sample_rate_hz=500.0\n"
        + ",".join(COLUMNS)
        + "\n0.002,0,0,0,-9.81,500,500,500,500\n"
        "0.004,0,nan,0,-9.81,500,500,500,500\n",
    )
    with pytest.raises(LogFormatError, match="line 4"):
        load_log(path)


def test_short_row_reports_line(tmp_path):
    path = _write(
        tmp_path / "short.csv",
        "# sample_rate_hz=500.0\n"
        + ",".join(COLUMNS)
        + "\n0.002,0,0,0,-9.81,500,500\n",
    )
    with pytest.raises(LogFormatError, match="line 3"):
        load_log(path)


def test_sample_rate_must_match_timestamps(tmp_path):
    path = _write(
        tmp_path / "rate.csv",
        "# sample_rate_hz=100.0\n"
        + ",".join(COLUMNS)
        + "\n0.002,0,0,0,-9.81,500,500,500,500\n"
        "0.004,0,0,0,-9.81,500,500,500,500\n"
        "0.006,0,0,0,-9.81,500,500,500,500\n",
    )
    with pytest.raises(LogFormatError, match="sample_rate_hz"):
        load_log(path)


def test_fault_header_requires_time(tmp_path):
    path = _write(
        tmp_path / "fault.csv",
        "# sample_rate_hz=500.0\n# fault_actuator=3\n"
        + ",".join(COLUMNS)
        + "\n0.002,0,0,0,-9.81,500,500,500,500\n",
    )
    with pytest.raises(LogFormatError, match="fault_time_s"):
        load_log(path)


def test_fault_actuator_range_checked(tmp_path):
    path = _write(
        tmp_path / "fault5.csv",
        "# sample_rate_hz=500.0\n# fault_actuator=5\n# fault_time_s=1.0\n"
        + ",".join(COLUMNS)
        + "\n0.002,0,0,0,-9.81,500,500,500,500\n",
    )
    with pytest.raises(LogFormatError, match="out of range"):
        load_log(path)


def test_unknown_rpm_units_rejected(tmp_path):
    path = _write(
        tmp_path / "units.csv",
        "# sample_rate_hz=500.0\n# rpm_units=furlongs\n"
        + ",".join(COLUMNS)
        + "\n0.002,0,0,0,-9.81,500,500,500,500\n",
    )
    with pytest.raises(LogFormatError, match="rpm_units"):
        load_log(path)


def test_negative_rotor_speed_rejected(tmp_path):
    path = _write(
        tmp_path / "neg.csv",
        "# sample_rate_hz=500.0\n"
        + ",".join(COLUMNS)
        + "\n0.002,0,0,0,-9.81,500,-500,500,500\n",
    )
    with pytest.raises(LogFormatError, match="negative rotor"):
        load_log(path)
