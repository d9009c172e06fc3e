import time

import pytest

from loedetect import FaultEvent, SensorNoiseModel, fly_scenario

# Fault scenarios end shortly after the ejection: without the (out-of-scope)
# post-detection controller reconfiguration, the vehicle departs controlled
# flight roughly half a second after losing a propeller, and the in-flight
# model assumption behind the detector stops holding. 0.4 s is twice the
# acceptance ceiling on detection delay.
POST_FAULT_WINDOW = 0.4


def make_fault_log(
    seed=0,
    scenario="hover",
    actuator=3,
    fault_time=1.56,
    noise_scale=1.0,
    post_window=POST_FAULT_WINDOW,
):
    fault = FaultEvent(time=fault_time, actuator_index=actuator)
    noise = SensorNoiseModel(seed=seed).scaled(noise_scale)
    return fly_scenario(
        scenario=scenario,
        duration=fault_time + post_window,
        fault=fault,
        noise=noise,
    )


def build_corpus(n=26):
    """Ejection scenarios varying scenario type, actuator, fault time and noise."""
    logs = []
    for i in range(n):
        logs.append(
            make_fault_log(
                seed=200 + i,
                scenario=("hover", "step", "wind")[i % 3],
                actuator=(i % 4) + 1,
                fault_time=0.9 + 0.083 * i,
                noise_scale=(0.6, 1.0, 1.4, 1.8)[i % 4],
            )
        )
    return logs


@pytest.fixture(scope="session")
def ejection_corpus():
    """26 annotated ejection logs plus the wall time spent generating them."""
    t0 = time.monotonic()
    logs = build_corpus(26)
    return logs, time.monotonic() - t0


@pytest.fixture(scope="session")
def ejection_log():
    """One short hover ejection log (actuator 3 at t=1.56 s)."""
    return make_fault_log()
