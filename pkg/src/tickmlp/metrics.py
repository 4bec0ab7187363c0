"""Actionable-prediction accuracy, participation and confidence calibration."""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .ensemble import Decision
from .labeler import Label

N_BINS = 20


class NoActionable(ArithmeticError):
    pass


class EmptyInput(ValueError):
    pass


@dataclass
class MetricsTracker:
    total: int = 0
    actionable: int = 0
    correct: int = 0
    # rows: Decision, columns: Label
    confusion: np.ndarray = field(default_factory=lambda: np.zeros((4, 3), dtype=np.int64))
    # winning-score histogram over [0, 1] for scored (non-warmup) predictions
    hist: np.ndarray = field(default_factory=lambda: np.zeros(N_BINS, dtype=np.int64))

    def record(self, d: Decision, truth: Label, score: float | None = None) -> None:
        self.total += 1
        self.confusion[d, truth] += 1
        if d is Decision.UP or d is Decision.DOWN:
            self.actionable += 1
            if int(d) == int(truth):
                self.correct += 1
        if score is not None:
            self.hist[min(int(score * N_BINS), N_BINS - 1)] += 1

    def merge(self, other: MetricsTracker) -> MetricsTracker:
        return MetricsTracker(
            self.total + other.total,
            self.actionable + other.actionable,
            self.correct + other.correct,
            self.confusion + other.confusion,
            self.hist + other.hist,
        )

    def accuracy(self) -> float:
        if self.actionable == 0:
            raise NoActionable("no actionable predictions")
        return 100.0 * self.correct / self.actionable

    def participation(self) -> float:
        return 100.0 * self.actionable / self.total if self.total else 0.0

    def accuracy_or_nan(self) -> float:
        return self.accuracy() if self.actionable else math.nan

    def summary(self) -> dict:
        return {
            "total": self.total,
            "actionable": self.actionable,
            "correct": self.correct,
            "accuracy_pct": self.accuracy() if self.actionable else None,
            "participation_pct": self.participation(),
        }


def merge_all(trackers: Iterable[MetricsTracker]) -> MetricsTracker:
    out = MetricsTracker()
    for t in trackers:
        out = out.merge(t)
    return out


def calibrate_threshold(confidences: Sequence[float], total: int, target_participation: float) -> float:
    """Smallest confidence bound whose participation does not exceed the target.

    ``confidences`` are the winning scores of would-be-actionable predictions
    (directional argmax) among ``total`` predictions. A prediction is kept when
    its score is >= the returned bound, so bounds sit just above a sorted score.
    """
    if not len(confidences) or total <= 0:
        raise EmptyInput("nothing to calibrate on")
    if not 0.0 < target_participation <= 100.0:
        raise ValueError("target participation must be in (0, 100]")
    c = sorted(float(v) for v in confidences)
    allowed = math.floor(target_participation * total / 100.0 + 1e-9)
    if len(c) <= allowed:
        return 0.0
    # keep at most `allowed` scores: cut just above the (n - allowed)-th smallest
    thr = float(np.nextafter(c[len(c) - allowed - 1], np.inf))
    assert len(c) - bisect.bisect_left(c, thr) <= allowed
    return thr


def participation_at(confidences: Sequence[float], total: int, threshold: float) -> float:
    c = sorted(confidences)
    return 100.0 * (len(c) - bisect.bisect_left(c, threshold)) / total
