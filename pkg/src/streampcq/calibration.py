"""Fitting the model constants from a labeled dataset.

The pipeline mirrors the model's structure, one stage per term:

1. per-QP lines relating reference texture complexity to bits per point,
   then a quadratic/linear fit of those slopes and intercepts over QP
   (yields a1..a3, b1, b2);
2. per-content lines relating score to QP on the minimal geometry
   distortion stratum, then a line relating the per-content slopes to
   texture complexity (yields alpha, beta and the shared intercept b);
3. a logistic fit of the mean score attenuation per trisoup node size
   (yields l1..l3).

Every stage is deterministic; records are brought into canonical order on
entry so permuting the input changes nothing.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bitstream.features import FeatureVector
from .exceptions import (
    DegenerateDesign,
    MissingReferenceTc,
    TooFewContents,
    TooFewTqpLevels,
    ZeroVariance,
)
from .metrics import plcc
from .model import ModelParams, estimate_tc, geometry_attenuation, texture_mos

CSV_COLUMNS = ("content_id", "tqp", "tbpp", "tnsl", "mos", "tc_ref")


@dataclass(frozen=True)
class DatasetRecord:
    """One labeled observation: features plus subjective score."""

    content_id: str
    features: FeatureVector
    mos: float
    tc_ref: float | None = None

    def __post_init__(self):
        if not math.isfinite(self.mos):
            raise ValueError(f"mos must be finite, got {self.mos}")

    def sort_key(self):
        f = self.features
        return (self.content_id, f.tqp, f.tnsl, f.tbpp, self.mos)


class Dataset:
    """An immutable, canonically ordered collection of records.

    At most one record may exist per (content_id, tqp, tnsl) triple.
    """

    def __init__(self, records):
        self.records = tuple(sorted(records, key=DatasetRecord.sort_key))
        seen = set()
        for r in self.records:
            key = (r.content_id, r.features.tqp, r.features.tnsl)
            if key in seen:
                raise ValueError(f"duplicate record for {key}")
            seen.add(key)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def contents(self) -> list[str]:
        return sorted({r.content_id for r in self.records})

    def tqp_levels(self) -> list[float]:
        return sorted({r.features.tqp for r in self.records})

    def tnsl_levels(self) -> list[float]:
        return sorted({r.features.tnsl for r in self.records})

    def subset(self, contents) -> "Dataset":
        wanted = set(contents)
        return Dataset(r for r in self.records if r.content_id in wanted)

    def records_of(self, content_id: str) -> list[DatasetRecord]:
        return [r for r in self.records if r.content_id == content_id]

    def at_tnsl(self, tnsl: float) -> list[DatasetRecord]:
        return [r for r in self.records if r.features.tnsl == tnsl]

    @classmethod
    def from_csv(cls, path: str | Path) -> "Dataset":
        records = []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            missing = [c for c in CSV_COLUMNS[:5] if c not in (reader.fieldnames or [])]
            if missing:
                raise ValueError(f"{path}: dataset CSV lacks columns {missing}")
            for row in reader:
                tc_raw = (row.get("tc_ref") or "").strip()
                records.append(
                    DatasetRecord(
                        content_id=row["content_id"],
                        features=FeatureVector(
                            tqp=float(row["tqp"]),
                            tbpp=float(row["tbpp"]),
                            tnsl=float(row["tnsl"]),
                            content_id=row["content_id"],
                        ),
                        mos=float(row["mos"]),
                        tc_ref=float(tc_raw) if tc_raw else None,
                    )
                )
        return cls(records)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for r in self.records:
                f = r.features
                writer.writerow(
                    [r.content_id, f.tqp, f.tbpp, f.tnsl, r.mos,
                     "" if r.tc_ref is None else r.tc_ref]
                )


@dataclass
class FitDiagnostics:
    """Residuals, correlations and iteration counts per fitted stage."""

    tc_stage: dict = field(default_factory=dict)
    texture_stage: dict = field(default_factory=dict)
    attenuation_stage: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "tc_stage": self.tc_stage,
            "texture_stage": self.texture_stage,
            "attenuation_stage": self.attenuation_stage,
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True)
class CalibrationOptions:
    """Knobs for the parts the training procedure leaves open.

    tc_source: feed the slope-vs-complexity fit reference complexity
        ("reference") or the stage-1 estimate from features ("estimated").
    b_mode: shared intercept b as the mean of per-content fitted
        intercepts ("intercept", self-consistent with the linear model) or
        as the mean observed score at the minimal distortion settings
        ("min_mos").
    tc_stage_stratum: fit stage 1 on the minimal-tnsl stratum only
        ("min_tnsl", matching the lossless-geometry premise) or on all
        records ("all").
    """

    tc_source: str = "reference"
    b_mode: str = "intercept"
    tc_stage_stratum: str = "min_tnsl"

    def __post_init__(self):
        if self.tc_source not in ("reference", "estimated"):
            raise ValueError(f"unknown tc_source {self.tc_source!r}")
        if self.b_mode not in ("intercept", "min_mos"):
            raise ValueError(f"unknown b_mode {self.b_mode!r}")
        if self.tc_stage_stratum not in ("min_tnsl", "all"):
            raise ValueError(f"unknown tc_stage_stratum {self.tc_stage_stratum!r}")


# --- elementary least squares ---

def fit_linear(xs, ys) -> tuple[float, float]:
    """Ordinary least squares line, closed form: returns (slope, intercept)."""
    x = np.asarray(xs, dtype=float).ravel()
    y = np.asarray(ys, dtype=float).ravel()
    if x.size != y.size:
        raise ValueError("xs and ys must have equal length")
    if x.size < 2 or np.unique(x).size < 2:
        raise DegenerateDesign("linear fit needs at least two distinct x values")
    dx = x - x.mean()
    slope = float(np.dot(dx, y - y.mean()) / np.dot(dx, dx))
    return slope, float(y.mean() - slope * x.mean())


def fit_quadratic(xs, ys) -> tuple[float, float, float]:
    """Least-squares parabola via normal equations: returns (a1, a2, a3)."""
    x = np.asarray(xs, dtype=float).ravel()
    y = np.asarray(ys, dtype=float).ravel()
    if x.size != y.size:
        raise ValueError("xs and ys must have equal length")
    if x.size < 3 or np.unique(x).size < 3:
        raise DegenerateDesign("quadratic fit needs at least three distinct x values")
    design = np.column_stack([x * x, x, np.ones_like(x)])
    gram = design.T @ design
    try:
        coef = np.linalg.solve(gram, design.T @ y)
    except np.linalg.LinAlgError as exc:
        raise DegenerateDesign(f"singular quadratic design: {exc}") from exc
    return float(coef[0]), float(coef[1]), float(coef[2])


def _rss(design: np.ndarray, y: np.ndarray, coef: np.ndarray) -> float:
    r = y - design @ coef
    return float(np.dot(r, r))


# --- stage 1: texture complexity from QP and bits per point ---

def fit_tc_model(records) -> tuple[float, float, float, float, float, dict]:
    """Fit the complexity-estimation coefficients from records with
    reference complexity, grouped by QP.

    Returns (a1, a2, a3, b1, b2, diagnostics).
    """
    labeled = [r for r in records if r.tc_ref is not None]
    if not labeled:
        raise MissingReferenceTc("no record carries a reference texture complexity")
    groups: dict[float, list[DatasetRecord]] = {}
    for r in labeled:
        groups.setdefault(r.features.tqp, []).append(r)
    tqps = sorted(groups)
    if len(tqps) < 3:
        raise DegenerateDesign(
            f"complexity stage needs >= 3 distinct QP groups, got {len(tqps)}"
        )

    slopes, intercepts, per_tqp_plcc, per_tqp_rss = [], [], {}, {}
    for q in tqps:
        tbpp = [r.features.tbpp for r in groups[q]]
        tc = [r.tc_ref for r in groups[q]]
        s_q, i_q = fit_linear(tbpp, tc)
        slopes.append(s_q)
        intercepts.append(i_q)
        try:
            per_tqp_plcc[q] = plcc(tc, tbpp)
        except ZeroVariance:
            per_tqp_plcc[q] = float("nan")
        resid = np.asarray(tc) - (s_q * np.asarray(tbpp) + i_q)
        per_tqp_rss[q] = float(np.dot(resid, resid))

    a1, a2, a3 = fit_quadratic(tqps, slopes)
    b1, b2 = fit_linear(tqps, intercepts)

    q = np.asarray(tqps, dtype=float)
    diagnostics = {
        "per_tqp_plcc": per_tqp_plcc,
        "per_tqp_rss": per_tqp_rss,
        "slope_fit_rss": _rss(
            np.column_stack([q * q, q, np.ones_like(q)]),
            np.asarray(slopes),
            np.array([a1, a2, a3]),
        ),
        "intercept_fit_rss": _rss(
            np.column_stack([q, np.ones_like(q)]),
            np.asarray(intercepts),
            np.array([b1, b2]),
        ),
        "group_sizes": {q_: len(groups[q_]) for q_ in tqps},
    }
    return a1, a2, a3, b1, b2, diagnostics


# --- stage 2: texture score model ---

def fit_texture_model(
    records,
    tc_by_content: dict[str, float],
    b_mode: str = "intercept",
) -> tuple[float, float, float, dict[str, float]]:
    """Fit (alpha, beta, b) from minimal-geometry-distortion records.

    ``records`` must already be restricted to the stratum standing in for
    distortion-free geometry.  Returns (alpha, beta, b, per_content_slope).
    """
    by_content: dict[str, list[DatasetRecord]] = {}
    for r in records:
        by_content.setdefault(r.content_id, []).append(r)
    if len(by_content) < 2:
        raise TooFewContents(
            f"slope-vs-complexity fit needs >= 2 contents, got {len(by_content)}"
        )

    per_content_a: dict[str, float] = {}
    per_content_intercept: dict[str, float] = {}
    for content in sorted(by_content):
        recs = by_content[content]
        tqps = [r.features.tqp for r in recs]
        if len(set(tqps)) < 2:
            raise TooFewTqpLevels(
                f"content {content!r} has {len(set(tqps))} QP level(s), need >= 2"
            )
        a_c, i_c = fit_linear(tqps, [r.mos for r in recs])
        per_content_a[content] = a_c
        per_content_intercept[content] = i_c

    if b_mode == "intercept":
        b = float(np.mean([per_content_intercept[c] for c in sorted(by_content)]))
    else:
        min_tqp = min(r.features.tqp for r in records)
        at_min = [r.mos for r in records if r.features.tqp == min_tqp]
        b = float(np.mean(at_min))

    contents = sorted(by_content)
    missing = [c for c in contents if c not in tc_by_content]
    if missing:
        raise MissingReferenceTc(f"no texture complexity for contents {missing}")
    alpha, beta = fit_linear(
        [tc_by_content[c] for c in contents], [per_content_a[c] for c in contents]
    )
    return alpha, beta, b, per_content_a


# --- stage 3: logistic attenuation ---

def _logistic_design(t: np.ndarray, l2: float) -> np.ndarray:
    z = np.clip(t + l2, -500.0, 500.0)
    return 1.0 / (1.0 + np.exp(z))


def _fit_logistic(t: np.ndarray, y: np.ndarray, max_iter: int = 200,
                  tol: float = 1e-10) -> tuple[np.ndarray, float, int, bool]:
    """Damped Gauss-Newton fit of y ~ l1/(1+exp(t+l2)) + l3.

    Initialized from a coarse grid over l2 with (l1, l3) solved linearly
    at each grid point.  Returns (params, rss, iterations, converged).
    """
    best = None
    for l2 in np.arange(-15.0, 5.0 + 1e-9, 0.25):
        g = _logistic_design(t, l2)
        design = np.column_stack([g, np.ones_like(g)])
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        rss = _rss(design, y, coef)
        if best is None or rss < best[1]:
            best = (np.array([coef[0], l2, coef[1]]), rss)
    theta, rss = best

    lam = 1e-3
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        l1, l2, l3 = theta
        z = np.clip(t + l2, -500.0, 500.0)
        e = np.exp(z)
        g = 1.0 / (1.0 + e)
        r = (l1 * g + l3) - y
        jac = np.column_stack([g, -l1 * e * g * g, np.ones_like(g)])
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
            candidate = theta + step
            cz = np.clip(t + candidate[1], -500.0, 500.0)
            cr = (candidate[0] / (1.0 + np.exp(cz)) + candidate[2]) - y
            new_rss = float(np.dot(cr, cr))
            if new_rss <= rss:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            converged = True  # no damping level improves: stationary point
            break
        theta = candidate
        lam = max(lam / 10.0, 1e-12)
        if rss - new_rss <= tol * max(rss, 1e-300):
            rss = new_rss
            converged = True
            break
        rss = new_rss
    return theta, rss, iterations, converged


def fit_geometry_attenuation(samples) -> tuple[float, float, float]:
    """Fit (l1, l2, l3) to (tnsl, attenuation) pairs.

    With few distinct tnsl levels the three parameters are weakly
    identified; judge the fit by curve values, not raw parameters.
    """
    pts = [(float(t), float(v)) for t, v in samples]
    t = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    if np.unique(t).size < 3:
        raise DegenerateDesign("attenuation fit needs >= 3 distinct tnsl values")
    theta, rss, iterations, converged = _fit_logistic(t, y)
    if not converged:
        warnings.warn(
            f"attenuation fit stopped after {iterations} iterations at RSS {rss:.3e}",
            RuntimeWarning,
            stacklevel=2,
        )
    return float(theta[0]), float(theta[1]), float(theta[2])


# --- full pipeline ---

def calibrate_full(
    dataset: Dataset, options: CalibrationOptions | None = None
) -> tuple[ModelParams, FitDiagnostics]:
    """Run all three fitting stages and assemble ModelParams."""
    options = options or CalibrationOptions()
    diag = FitDiagnostics()

    tnsl_levels = dataset.tnsl_levels()
    if not tnsl_levels:
        raise DegenerateDesign("empty dataset")
    min_tnsl = tnsl_levels[0]
    stratum = dataset.at_tnsl(min_tnsl)

    # stage 1: complexity coefficients
    tc_records = stratum if options.tc_stage_stratum == "min_tnsl" else dataset.records
    a1, a2, a3, b1, b2, diag.tc_stage = fit_tc_model(tc_records)
    stage1 = ModelParams(
        b=0.0, alpha=0.0, beta=0.0, a1=a1, a2=a2, a3=a3, b1=b1, b2=b2,
        l1=0.0, l2=0.0, l3=1.0,
    )

    # per-content complexity for stage 2
    tc_by_content: dict[str, float] = {}
    for content in dataset.contents():
        recs = [r for r in stratum if r.content_id == content]
        if options.tc_source == "reference":
            refs = [r.tc_ref for r in dataset.records_of(content) if r.tc_ref is not None]
            if refs:
                tc_by_content[content] = float(np.mean(refs))
        else:
            if recs:
                tc_by_content[content] = float(
                    np.mean([estimate_tc(r.features.tqp, r.features.tbpp, stage1)
                             for r in recs])
                )

    # stage 2: texture score coefficients
    alpha, beta, b, per_content_a = fit_texture_model(
        stratum, tc_by_content, b_mode=options.b_mode
    )
    slope_resid = np.array([
        per_content_a[c] - (alpha * tc_by_content[c] + beta)
        for c in sorted(per_content_a)
    ])
    diag.texture_stage = {
        "per_content_slope": per_content_a,
        "tc_by_content": tc_by_content,
        "b_mode": options.b_mode,
        "n_contents": len(per_content_a),
        "slope_vs_tc_rss": float(np.dot(slope_resid, slope_resid)),
    }

    # stage 3: attenuation of score with tnsl
    with_texture = ModelParams(
        b=b, alpha=alpha, beta=beta, a1=a1, a2=a2, a3=a3, b1=b1, b2=b2,
        l1=0.0, l2=0.0, l3=1.0,
    )
    ratios: dict[float, list[float]] = {}
    for r in dataset:
        tc = estimate_tc(r.features.tqp, r.features.tbpp, with_texture)
        mos_t = texture_mos(tc, r.features.tqp, with_texture)
        if mos_t == 0:
            raise DegenerateDesign(
                f"texture score is zero for {r.content_id} at tqp {r.features.tqp}"
            )
        ratios.setdefault(r.features.tnsl, []).append(r.mos / mos_t)
    texture_resid = np.array([
        r.mos - texture_mos(
            estimate_tc(r.features.tqp, r.features.tbpp, with_texture),
            r.features.tqp, with_texture,
        )
        for r in stratum
    ])
    diag.texture_stage["stratum_rss"] = float(np.dot(texture_resid, texture_resid))
    samples = [(t, float(np.mean(ratios[t]))) for t in sorted(ratios)]
    if len(samples) < 3:
        raise DegenerateDesign(
            f"attenuation fit needs >= 3 distinct tnsl levels, got {len(samples)}"
        )
    t_arr = np.array([s[0] for s in samples])
    y_arr = np.array([s[1] for s in samples])
    theta, rss, iterations, converged = _fit_logistic(t_arr, y_arr)
    if not converged:
        diag.warnings.append(
            f"attenuation fit stopped after {iterations} iterations at RSS {rss:.3e}"
        )
    l1, l2, l3 = (float(v) for v in theta)
    diag.attenuation_stage = {
        "samples": samples,
        "rss": rss,
        "iterations": iterations,
        "converged": converged,
    }

    params = ModelParams(
        b=b, alpha=alpha, beta=beta, a1=a1, a2=a2, a3=a3, b1=b1, b2=b2,
        l1=l1, l2=l2, l3=l3,
        metadata={
            "source": "calibrated from dataset",
            "n_records": len(dataset),
            "n_contents": len(dataset.contents()),
            "tqp_range": [dataset.tqp_levels()[0], dataset.tqp_levels()[-1]],
            "tnsl_range": [tnsl_levels[0], tnsl_levels[-1]],
            "texture_stratum_tnsl": min_tnsl,
            "tc_source": options.tc_source,
            "b_mode": options.b_mode,
            "attenuation_converged": converged,
        },
    )
    # smoke check: the assembled parameters must reproduce the staged math
    sanity = geometry_attenuation(t_arr, params)
    if not np.all(np.isfinite(sanity)):
        raise DegenerateDesign("attenuation parameters evaluate non-finite")
    return params, diag
