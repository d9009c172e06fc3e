"""Per-actuator failure hypothesis test and latched decision.

Treats each effectiveness estimate as Gaussian with the estimator's variance
and computes the lower-tail probability that the true factor sits below the
failure threshold. A decision latches once that probability strictly exceeds
the probability threshold, and never unlatches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DecisionConfig:
    k_threshold: float = 0.25
    probability_threshold: float = 0.9

    def __post_init__(self) -> None:
        if not 0.0 < self.k_threshold < 1.0:
            raise ValueError("k_threshold must be in (0, 1)")
        if not 0.5 < self.probability_threshold < 1.0:
            raise ValueError("probability_threshold must be in (0.5, 1)")


@dataclass(frozen=True)
class DetectionStatus:
    """Latched per-actuator failure flags with their first detection times."""

    failed: tuple[bool, bool, bool, bool] = (False, False, False, False)
    first_detection_time: tuple[float | None, ...] = (None, None, None, None)

    def any_failed(self) -> bool:
        return any(self.failed)

    def failed_actuators(self) -> tuple[int, ...]:
        """1-based indices of latched actuators."""
        return tuple(i + 1 for i, f in enumerate(self.failed) if f)


def failure_probability(k_hat: float, variance: float, k_threshold: float) -> float:
    """P(k < k_threshold) for a Gaussian with mean ``k_hat`` and ``variance``.

    Zero variance degenerates to the indicator of ``k_hat < k_threshold``
    (0.5 at equality).
    """
    if variance < 0.0:
        raise ValueError("variance must be non-negative")
    if variance == 0.0:
        if k_hat < k_threshold:
            return 1.0
        if k_hat > k_threshold:
            return 0.0
        return 0.5
    return 0.5 * (1.0 + math.erf((k_threshold - k_hat) / math.sqrt(2.0 * variance)))


def failure_probabilities(
    k_hat: np.ndarray, variances: np.ndarray, k_threshold: float
) -> np.ndarray:
    """Vector form over the four actuators."""
    return np.array(
        [failure_probability(float(k_hat[i]), float(variances[i]), k_threshold) for i in range(4)]
    )


def decide(
    probs: np.ndarray, status: DetectionStatus, config: DecisionConfig, now: float
) -> DetectionStatus:
    """Latch actuators whose failure probability strictly exceeds the threshold.

    Already-latched actuators stay latched; if nothing changes the input
    status object is returned unchanged.
    """
    threshold = config.probability_threshold
    new_latch = [
        not status.failed[i] and float(probs[i]) > threshold for i in range(4)
    ]
    if not any(new_latch):
        return status
    failed = tuple(status.failed[i] or new_latch[i] for i in range(4))
    times = tuple(
        now if new_latch[i] else status.first_detection_time[i] for i in range(4)
    )
    return DetectionStatus(failed=failed, first_detection_time=times)
