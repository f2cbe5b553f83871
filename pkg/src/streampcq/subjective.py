"""Raw subjective scores to MOS: standardization, screening, rescaling.

The processing chain for a rating campaign is

    zscore (per observer) -> screen_observers -> rescale_to_range -> compute_mos

Observer screening follows the BT.500 recipe: per-stimulus score
distributions define acceptance bands (2 sigma when the kurtosis looks
Gaussian, sqrt(20) sigma otherwise); observers whose scores fall outside
the bands too often and too one-sidedly are dropped.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import (
    DegenerateRange,
    EmptyStimulus,
    TooFewObservers,
    ZeroVariance,
)


@dataclass
class RatingMatrix:
    """Raw scores indexed (stimulus x observer); NaN marks a missing entry."""

    stimuli: list[str]
    observers: list[str]
    scores: np.ndarray

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=float)
        if self.scores.shape != (len(self.stimuli), len(self.observers)):
            raise ValueError(
                f"score table shape {self.scores.shape} does not match "
                f"{len(self.stimuli)} stimuli x {len(self.observers)} observers"
            )

    @classmethod
    def from_csv(cls, path: str | Path) -> "RatingMatrix":
        """Load from long-format CSV: stimulus_id, observer_id, score."""
        cells: dict[tuple[str, str], float] = {}
        stimuli: list[str] = []
        observers: list[str] = []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            required = {"stimulus_id", "observer_id", "score"}
            if not required.issubset(reader.fieldnames or []):
                raise ValueError(f"{path}: ratings CSV needs columns {sorted(required)}")
            for row in reader:
                s, o = row["stimulus_id"], row["observer_id"]
                if s not in stimuli:
                    stimuli.append(s)
                if o not in observers:
                    observers.append(o)
                key = (s, o)
                if key in cells:
                    raise ValueError(f"{path}: duplicate rating for {key}")
                cells[key] = float(row["score"])
        table = np.full((len(stimuli), len(observers)), np.nan)
        for (s, o), score in cells.items():
            table[stimuli.index(s), observers.index(o)] = score
        return cls(stimuli, observers, table)

    def drop_observers(self, rejected: list[str]) -> "RatingMatrix":
        keep = [i for i, o in enumerate(self.observers) if o not in rejected]
        return RatingMatrix(
            list(self.stimuli),
            [self.observers[i] for i in keep],
            self.scores[:, keep].copy(),
        )


@dataclass
class MosTable:
    """Per-stimulus mean opinion score with spread and panel size."""

    rows: list[tuple[str, float, float, int]]  # (stimulus, mos, std, n)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["stimulus_id", "mos", "std", "n"])
            writer.writerows(self.rows)


def zscore(matrix: RatingMatrix, axis: str = "observer") -> RatingMatrix:
    """Standardize scores to zero mean, unit spread along one axis.

    axis="observer" centers each observer's scale and spread (the
    conventional de-biasing); axis="stimulus" standardizes each stimulus
    over its panel instead.  Missing entries stay missing.  Spread is the
    sample (n-1) standard deviation.
    """
    if axis not in ("observer", "stimulus"):
        raise ValueError(f"axis must be 'observer' or 'stimulus', got {axis!r}")
    scores = matrix.scores.copy()
    along_observers = axis == "observer"
    labels = matrix.observers if along_observers else matrix.stimuli
    for i, label in enumerate(labels):
        column = scores[:, i] if along_observers else scores[i, :]
        present = ~np.isnan(column)
        n = int(present.sum())
        if n < 2:
            raise ZeroVariance(f"{axis} {label!r} has {n} score(s), need >= 2")
        mu = column[present].mean()
        sigma = column[present].std(ddof=1)
        if sigma == 0:
            raise ZeroVariance(f"{axis} {label!r} has zero score spread")
        column[present] = (column[present] - mu) / sigma
        if along_observers:
            scores[:, i] = column
        else:
            scores[i, :] = column
    return RatingMatrix(list(matrix.stimuli), list(matrix.observers), scores)


def _population_kurtosis(values: np.ndarray) -> float:
    m = values.mean()
    d = values - m
    m2 = np.mean(d * d)
    if m2 == 0:
        return float("nan")
    return float(np.mean(d ** 4) / (m2 * m2))


def screen_observers(matrix: RatingMatrix) -> tuple[RatingMatrix, list[str]]:
    """BT.500-style outlier rejection.

    Per stimulus, scores strictly beyond mean +/- 2*std (kurtosis in
    [2, 4]) or +/- sqrt(20)*std (otherwise) count against the observer as
    P (above) or Q (below).  An observer is rejected when
    (P+Q)/N > 0.05 and |P-Q|/(P+Q) < 0.3, N being the observer's rating
    count.  Returns the retained matrix and the rejected observer ids.
    """
    n_obs = len(matrix.observers)
    if n_obs < 3:
        raise TooFewObservers(f"screening needs >= 3 observers, got {n_obs}")

    p = np.zeros(n_obs)
    q = np.zeros(n_obs)
    rated = np.zeros(n_obs)
    for i in range(len(matrix.stimuli)):
        row = matrix.scores[i, :]
        present = ~np.isnan(row)
        rated += present
        values = row[present]
        if values.size < 2:
            continue
        mu = values.mean()
        sigma = values.std(ddof=1)
        beta2 = _population_kurtosis(values)
        factor = 2.0 if 2.0 <= beta2 <= 4.0 else math.sqrt(20.0)
        hi = mu + factor * sigma
        lo = mu - factor * sigma
        p += np.where(present, (row > hi), False)
        q += np.where(present, (row < lo), False)

    rejected = []
    for j, observer in enumerate(matrix.observers):
        total = p[j] + q[j]
        if rated[j] == 0 or total == 0:
            continue
        if total / rated[j] > 0.05 and abs(p[j] - q[j]) / total < 0.3:
            rejected.append(observer)
    return matrix.drop_observers(rejected), rejected


def rescale_to_range(matrix: RatingMatrix, lo: float = 1.0, hi: float = 100.0) -> RatingMatrix:
    """Affinely map the global score range onto [lo, hi]."""
    present = ~np.isnan(matrix.scores)
    if not present.any():
        raise DegenerateRange("no scores to rescale")
    vmin = matrix.scores[present].min()
    vmax = matrix.scores[present].max()
    if vmin == vmax:
        raise DegenerateRange("all scores identical; range map undefined")
    scaled = (matrix.scores - vmin) * ((hi - lo) / (vmax - vmin)) + lo
    return RatingMatrix(list(matrix.stimuli), list(matrix.observers), scaled)


def compute_mos(matrix: RatingMatrix) -> MosTable:
    """Per-stimulus mean and sample standard deviation over the panel.

    A single-observer stimulus gets std 0 by convention; its n column
    makes the thin evidence visible downstream.
    """
    rows = []
    for i, stimulus in enumerate(matrix.stimuli):
        row = matrix.scores[i, :]
        values = row[~np.isnan(row)]
        if values.size == 0:
            raise EmptyStimulus(f"stimulus {stimulus!r} has no retained scores")
        std = float(values.std(ddof=1)) if values.size > 1 else 0.0
        rows.append((stimulus, float(values.mean()), std, int(values.size)))
    return MosTable(rows)
