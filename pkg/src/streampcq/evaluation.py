"""Evaluation protocol: cross-validation, randomized trials, ablation and
statistical significance.

Model scores are compared to MOS with the raw (unmapped) model output; the
monotone regression mapping is applied only inside the significance
analysis, where residuals of different metrics must live on a common
scale before their variances are compared.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .calibration import CalibrationOptions, Dataset, calibrate_full
from .exceptions import (
    CalibrationError,
    EmptyTestSet,
    MismatchedStimuli,
    TooFewContents,
    TooFewSamples,
)
from .exceptions import ZeroVariance
from .metrics import plcc, rmse, srcc
from .model import ModelParams, predict_scores
from .rng import SplitMix64


@dataclass
class EvalReport:
    """Per-group metric triples plus their mean and standard deviation."""

    rows: list[tuple[str, float, float, float]]  # (group, plcc, srcc, rmse)
    metadata: dict = field(default_factory=dict)

    def _column(self, idx: int) -> np.ndarray:
        return np.array([row[idx] for row in self.rows])

    def mean(self) -> tuple[float, float, float]:
        return tuple(float(self._column(i).mean()) for i in (1, 2, 3))

    def std(self) -> tuple[float, float, float]:
        return tuple(float(self._column(i).std(ddof=1)) for i in (1, 2, 3))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["name", "plcc", "srcc", "rmse"])
            for row in self.rows:
                writer.writerow([row[0], f"{row[1]:.4f}", f"{row[2]:.4f}", f"{row[3]:.4f}"])
            if len(self.rows) > 1:
                writer.writerow(["mean"] + [f"{v:.4f}" for v in self.mean()])
                writer.writerow(["std"] + [f"{v:.4f}" for v in self.std()])


def _evaluate_records(records, params: ModelParams) -> tuple[float, float, float]:
    tqp = np.array([r.features.tqp for r in records])
    tbpp = np.array([r.features.tbpp for r in records])
    tnsl = np.array([r.features.tnsl for r in records])
    mos = np.array([r.mos for r in records])
    scores = predict_scores(tqp, tbpp, tnsl, params)
    return plcc(scores, mos), srcc(scores, mos), rmse(scores, mos)


def _default_calibrator(options: CalibrationOptions | None):
    def run(train: Dataset) -> ModelParams:
        return calibrate_full(train, options)[0]
    return run


def loocv(dataset: Dataset, calibrator=None,
          options: CalibrationOptions | None = None) -> EvalReport:
    """Content-sensitive leave-one-out cross-validation.

    Each source content is one fold: calibrate on the other contents,
    score the held-out content's records.  A fold whose calibration fails
    is reported as failed and excluded from the aggregate rows.
    """
    calibrator = calibrator or _default_calibrator(options)
    contents = dataset.contents()
    if len(contents) < 2:
        raise TooFewContents(f"LOOCV needs >= 2 contents, got {len(contents)}")
    rows = []
    failed = []
    for held_out in contents:
        train = dataset.subset([c for c in contents if c != held_out])
        test_records = dataset.records_of(held_out)
        try:
            params = calibrator(train)
            rows.append((held_out, *_evaluate_records(test_records, params)))
        except CalibrationError as exc:
            failed.append(held_out)
            warnings.warn(f"fold {held_out!r} failed: {exc}", RuntimeWarning, stacklevel=2)
    return EvalReport(rows, metadata={"protocol": "loocv", "failed_folds": failed})


def random_trials(dataset: Dataset, n_trials: int = 1000,
                  train_fraction: float = 0.5, seed: int = 0,
                  calibrator=None,
                  options: CalibrationOptions | None = None) -> EvalReport:
    """Repeated random content-level train/test partitions.

    Contents are shuffled (Fisher-Yates over the sorted content list,
    SplitMix64 seeded per run) and the first portion trains the model;
    the remainder is scored as one pool.  Fixed seed, fixed report.
    """
    calibrator = calibrator or _default_calibrator(options)
    contents = dataset.contents()
    if len(contents) < 2:
        raise TooFewContents(f"random trials need >= 2 contents, got {len(contents)}")
    n_train = int(round(train_fraction * len(contents)))
    if n_train >= len(contents):
        raise EmptyTestSet(f"train fraction {train_fraction} leaves no test contents")
    if n_train < 1:
        raise TooFewContents(f"train fraction {train_fraction} selects no training contents")

    rng = SplitMix64(seed)
    rows = []
    failed = []
    for trial in range(n_trials):
        order = list(contents)
        rng.shuffle(order)
        train = dataset.subset(order[:n_train])
        test_records = [r for c in order[n_train:] for r in dataset.records_of(c)]
        try:
            params = calibrator(train)
            rows.append((f"trial{trial:04d}", *_evaluate_records(test_records, params)))
        except CalibrationError as exc:
            failed.append(trial)
            warnings.warn(f"trial {trial} failed: {exc}", RuntimeWarning, stacklevel=2)
    return EvalReport(
        rows,
        metadata={
            "protocol": "random_trials",
            "seed": seed,
            "n_trials": n_trials,
            "train_fraction": train_fraction,
            "failed_trials": failed,
        },
    )


def ablation(dataset: Dataset, train_contents, test_contents,
             calibrator=None, options: CalibrationOptions | None = None) -> EvalReport:
    """Component contributions on a fixed content split.

    Three rows: the texture term alone, the geometry attenuation alone
    (rescaled to score units through the shared intercept), and the full
    product model.
    """
    calibrator = calibrator or _default_calibrator(options)
    overlap = set(train_contents) & set(test_contents)
    if overlap:
        raise ValueError(f"train and test contents overlap: {sorted(overlap)}")
    params = calibrator(dataset.subset(train_contents))
    records = [r for c in sorted(set(test_contents)) for r in dataset.records_of(c)]
    if not records:
        raise EmptyTestSet("no test records for the supplied contents")

    tqp = np.array([r.features.tqp for r in records])
    tbpp = np.array([r.features.tbpp for r in records])
    tnsl = np.array([r.features.tnsl for r in records])
    mos = np.array([r.mos for r in records])

    from .model import estimate_tc, geometry_attenuation, texture_mos

    texture_only = texture_mos(estimate_tc(tqp, tbpp, params), tqp, params)
    geometry_only = params.b * geometry_attenuation(tnsl, params)
    full = texture_only * geometry_attenuation(tnsl, params)

    def triple(scores):
        # a component may degenerate to a constant (e.g. a fitted flat
        # attenuation); correlation is then undefined, not an error
        try:
            correlations = (plcc(scores, mos), srcc(scores, mos))
        except ZeroVariance:
            correlations = (float("nan"), float("nan"))
        return (*correlations, rmse(scores, mos))

    rows = [
        ("texture_only", *triple(texture_only)),
        ("geometry_only", *triple(geometry_only)),
        ("full_model", *triple(full)),
    ]
    return EvalReport(
        rows,
        metadata={
            "protocol": "ablation",
            "train_contents": sorted(set(train_contents)),
            "test_contents": sorted(set(test_contents)),
        },
    )


# --- monotone regression mapping (objective score -> subjective scale) ---

def _map_basis(x: np.ndarray, b2: float, b3: float) -> np.ndarray:
    z = np.clip(b2 * (x - b3), -500.0, 500.0)
    logistic = 1.0 / (1.0 + np.exp(z))
    return np.column_stack([0.5 - logistic, x, np.ones_like(x)])


def _map_solve_linear(x: np.ndarray, y: np.ndarray, b2: float, b3: float):
    """Best (b1, b4, b5) for fixed logistic shape; returns (coefs, rss)."""
    design = _map_basis(x, b2, b3)
    coefs, *_ = np.linalg.lstsq(design, y, rcond=None)
    r = design @ coefs - y
    return coefs, float(np.dot(r, r))


def nonlinear_map(objective, mos, max_iter: int = 200, tol: float = 1e-10):
    """Fit the five-parameter logistic-plus-linear map from objective
    scores to the subjective scale and return the mapped scores,

        f(x) = b1 * (0.5 - 1 / (1 + exp(b2 * (x - b3)))) + b4 * x + b5.

    The model is linear in (b1, b4, b5), so those are re-solved exactly
    at every step while damped Gauss-Newton updates the logistic shape
    (b2, b3).  Falls back to the identity mapping (with a warning) if the
    fit fails to converge.
    """
    x = np.asarray(objective, dtype=float).ravel()
    y = np.asarray(mos, dtype=float).ravel()
    if x.size != y.size:
        raise MismatchedStimuli(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 5:
        raise TooFewSamples(f"mapping needs >= 5 points, got {x.size}")

    x_spread = x.std() if x.std() > 0 else 1.0
    centers = np.quantile(x, [0.25, 0.5, 0.75])
    scales = [s / x_spread for s in (0.25, 1.0, 4.0)]
    best = None
    for b3 in centers:
        for scale in scales:
            for b2 in (scale, -scale):
                coefs, rss = _map_solve_linear(x, y, b2, float(b3))
                if best is None or rss < best[3]:
                    best = (b2, float(b3), coefs, rss)
    b2, b3, coefs, rss = best

    lam = 1e-3
    converged = False
    for _ in range(max_iter):
        b1 = coefs[0]
        z = np.clip(b2 * (x - b3), -500.0, 500.0)
        logistic = 1.0 / (1.0 + np.exp(z))
        design = _map_basis(x, b2, b3)
        r = design @ coefs - y
        bump = b1 * logistic * (1.0 - logistic)
        # variable-projection (Kaufman) Jacobian: shape derivatives with the
        # components the linear resolve would absorb projected out
        q, _ = np.linalg.qr(design)
        raw = np.column_stack([bump * (x - b3), -bump * b2])
        jac = raw - q @ (q.T @ raw)
        gram = jac.T @ jac
        grad = jac.T @ r
        accepted = False
        for _ in range(30):
            damped = gram + lam * np.diag(np.maximum(np.diag(gram), 1e-12))
            try:
                step = np.linalg.solve(damped, -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            cand_b2, cand_b3 = b2 + step[0], b3 + step[1]
            cand_coefs, new_rss = _map_solve_linear(x, y, cand_b2, cand_b3)
            if new_rss <= rss:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            converged = True  # no shape change improves the projected fit
            break
        b2, b3, coefs = cand_b2, cand_b3, cand_coefs
        lam = max(lam / 10.0, 1e-12)
        if rss - new_rss <= tol * max(rss, 1e-300):
            rss = new_rss
            converged = True
            break
        rss = new_rss

    if not converged:
        warnings.warn(
            "monotone mapping did not converge; returning unmapped scores",
            RuntimeWarning,
            stacklevel=2,
        )
        return x.copy()
    return _map_basis(x, b2, b3) @ coefs


# --- F statistics on prediction residual variances ---

def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 400):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-14:
            return h
    raise RuntimeError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) with relative error well below 1e-10."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def f_cdf(x: float, d1: float, d2: float) -> float:
    """CDF of the F distribution with (d1, d2) degrees of freedom."""
    if x <= 0:
        return 0.0
    return regularized_incomplete_beta(d1 / 2.0, d2 / 2.0, d1 * x / (d1 * x + d2))


def f_quantile(p: float, d1: float, d2: float) -> float:
    """Inverse F CDF by bisection on the monotone CDF."""
    if not 0.0 < p < 1.0:
        raise ValueError("quantile level must be in (0, 1)")
    lo, hi = 0.0, 1.0
    while f_cdf(hi, d1, d2) < p:
        hi *= 2.0
        if hi > 1e300:
            raise RuntimeError("F quantile bracket failed")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f_cdf(mid, d1, d2) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class Comparison(Enum):
    A_BETTER = "a-better"
    B_BETTER = "b-better"
    INDISTINGUISHABLE = "indistinguishable"


def ftest_variance_ratio(residuals_a, residuals_b,
                         confidence: float = 0.95) -> Comparison:
    """Two-sided F test on residual variances.

    Lower residual variance wins when the ratio is significant at the
    given confidence level; otherwise the models are indistinguishable.
    """
    a = np.asarray(residuals_a, dtype=float).ravel()
    b = np.asarray(residuals_b, dtype=float).ravel()
    for name, v in (("a", a), ("b", b)):
        if v.size <= 30:
            raise TooFewSamples(
                f"residual vector {name} has {v.size} samples, need > 30"
            )
    var_a = float(a.var(ddof=1))
    var_b = float(b.var(ddof=1))
    if var_a == var_b:
        return Comparison.INDISTINGUISHABLE
    if var_b == 0:
        return Comparison.B_BETTER
    if var_a == 0:
        return Comparison.A_BETTER

    alpha = 1.0 - confidence
    ratio = var_a / var_b
    lo = f_quantile(alpha / 2.0, a.size - 1, b.size - 1)
    hi = f_quantile(1.0 - alpha / 2.0, a.size - 1, b.size - 1)
    if ratio < lo:
        return Comparison.A_BETTER
    if ratio > hi:
        return Comparison.B_BETTER
    return Comparison.INDISTINGUISHABLE


@dataclass
class SignificanceMatrix:
    """Pairwise comparison outcomes; diagonal is always indistinguishable."""

    model_ids: list[str]
    cells: list[list[Comparison]]
    confidence: float

    _LETTER = {
        Comparison.A_BETTER: "B",  # row model better: black cell
        Comparison.B_BETTER: "W",  # column model better: white cell
        Comparison.INDISTINGUISHABLE: "G",
    }

    def letter(self, i: int, j: int) -> str:
        return self._LETTER[self.cells[i][j]]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["model"] + self.model_ids)
            for i, model in enumerate(self.model_ids):
                writer.writerow([model] + [self.letter(i, j) for j in range(len(self.model_ids))])

    def render_text(self) -> str:
        width = max(len(m) for m in self.model_ids)
        lines = [" " * (width + 1) + " ".join(f"{m:>{width}}" for m in self.model_ids)]
        for i, model in enumerate(self.model_ids):
            cells = " ".join(f"{self.letter(i, j):>{width}}" for j in range(len(self.model_ids)))
            lines.append(f"{model:>{width}} {cells}")
        return "\n".join(lines)


def significance_matrix(residuals_by_model: dict[str, np.ndarray],
                        confidence: float = 0.95) -> SignificanceMatrix:
    """Pairwise variance-ratio tests over models evaluated on one
    stimulus set."""
    model_ids = list(residuals_by_model)
    lengths = {m: np.asarray(residuals_by_model[m]).size for m in model_ids}
    if len(set(lengths.values())) > 1:
        raise MismatchedStimuli(f"residual vectors differ in length: {lengths}")
    n = len(model_ids)
    cells = [[Comparison.INDISTINGUISHABLE] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            outcome = ftest_variance_ratio(
                residuals_by_model[model_ids[i]],
                residuals_by_model[model_ids[j]],
                confidence,
            )
            cells[i][j] = outcome
            if outcome == Comparison.A_BETTER:
                cells[j][i] = Comparison.B_BETTER
            elif outcome == Comparison.B_BETTER:
                cells[j][i] = Comparison.A_BETTER
    return SignificanceMatrix(model_ids, cells, confidence)


def significance_from_scores(scores_by_model: dict[str, np.ndarray], mos,
                             confidence: float = 0.95) -> SignificanceMatrix:
    """Map each model's scores onto the subjective scale, then compare
    residual variances pairwise."""
    mos = np.asarray(mos, dtype=float).ravel()
    residuals = {}
    for model, scores in scores_by_model.items():
        mapped = nonlinear_map(scores, mos)
        residuals[model] = mapped - mos
    return significance_matrix(residuals, confidence)
