"""Closed-form quality model for trisoup-lifting coded point clouds.

Prediction decomposes into a texture term and a geometry attenuation
factor:

* texture complexity is estimated from the attribute QP and bits per
  point, ``tc = s(tqp) * tbpp + i(tqp)``, with a quadratic slope ``s`` and
  linear intercept ``i`` in the QP;
* the texture-only score is linear in the QP with a complexity-dependent
  slope, ``mos_t = (alpha * tc + beta) * tqp + b``;
* geometry coarseness attenuates it through a logistic factor of the
  trisoup node size, ``d_g = l1 / (1 + exp(tnsl + l2)) + l3``;
* the final score is the product ``mos_t * d_g``.

All functions accept scalars or numpy arrays and are pure; parameters are
immutable and safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .bitstream.features import FeatureVector
from .exceptions import DivisionByZeroMos

PARAM_NAMES = ("b", "alpha", "beta", "a1", "a2", "a3", "b1", "b2", "l1", "l2", "l3")

# exp() argument clip; beyond this the logistic saturates in float64 anyway
_EXP_CLIP = 500.0


@dataclass(frozen=True)
class ModelParams:
    """The eleven fitted constants of the model plus fit provenance."""

    b: float
    alpha: float
    beta: float
    a1: float
    a2: float
    a3: float
    b1: float
    b2: float
    l1: float
    l2: float
    l3: float
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in PARAM_NAMES:
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ValueError(f"parameter {name} must be finite, got {value}")

    def to_dict(self) -> dict:
        doc = {name: getattr(self, name) for name in PARAM_NAMES}
        doc["metadata"] = dict(self.metadata)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelParams":
        missing = [name for name in PARAM_NAMES if name not in doc]
        if missing:
            raise ValueError(f"parameter document missing {missing}")
        return cls(
            **{name: float(doc[name]) for name in PARAM_NAMES},
            metadata=doc.get("metadata", {}),
        )

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def from_json(cls, path: str | Path) -> "ModelParams":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def with_metadata(self, **entries) -> "ModelParams":
        return replace(self, metadata={**self.metadata, **entries})


def default_params() -> ModelParams:
    """The constants shipped with the package (WPC6.0 training fit)."""
    ref = resources.files("streampcq.data").joinpath("default_params.json")
    return ModelParams.from_dict(json.loads(ref.read_text(encoding="utf-8")))


def slope_of_tqp(tqp, p: ModelParams):
    """Slope of the tc-vs-tbpp line at a given QP: a1*tqp^2 + a2*tqp + a3."""
    tqp = np.asarray(tqp, dtype=float)[()]
    return p.a1 * tqp * tqp + p.a2 * tqp + p.a3


def intercept_of_tqp(tqp, p: ModelParams):
    """Intercept of the tc-vs-tbpp line at a given QP: b1*tqp + b2."""
    tqp = np.asarray(tqp, dtype=float)[()]
    return p.b1 * tqp + p.b2


def estimate_tc(tqp, tbpp, p: ModelParams):
    """Texture complexity estimated from QP and bits per point."""
    return slope_of_tqp(tqp, p) * np.asarray(tbpp, dtype=float)[()] + intercept_of_tqp(tqp, p)


def texture_mos(tc, tqp, p: ModelParams):
    """Texture-only quality score: (alpha*tc + beta)*tqp + b."""
    tc = np.asarray(tc, dtype=float)[()]
    tqp = np.asarray(tqp, dtype=float)[()]
    return (p.alpha * tc + p.beta) * tqp + p.b


def geometry_attenuation(tnsl, p: ModelParams):
    """Logistic attenuation of quality with trisoup node size."""
    tnsl = np.asarray(tnsl, dtype=float)[()]
    z = np.clip(tnsl + p.l2, -_EXP_CLIP, _EXP_CLIP)
    return p.l1 / (1.0 + np.exp(z)) + p.l3


def nmos(mos_at, mos_at_tqp_min):
    """Score normalized by the same stimulus' score at the minimum QP."""
    denom = np.asarray(mos_at_tqp_min, dtype=float)[()]
    if np.any(denom == 0):
        raise DivisionByZeroMos("normalizing score at minimum QP is zero")
    return np.asarray(mos_at, dtype=float)[()] / denom


@dataclass(frozen=True)
class Prediction:
    """One model evaluation, kept factored into its two components."""

    mos_est: float
    mos_texture: float
    attenuation: float
    tc_est: float
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "mos_est": self.mos_est,
            "mos_texture": self.mos_texture,
            "attenuation": self.attenuation,
            "tc_est": self.tc_est,
            "flags": list(self.flags),
        }


def _range_flags(f: FeatureVector, p: ModelParams) -> tuple[str, ...]:
    flags = []
    for key, value in (("tqp_range", f.tqp), ("tnsl_range", f.tnsl)):
        bounds = p.metadata.get(key)
        if bounds and not (bounds[0] <= value <= bounds[1]):
            flags.append(
                f"{key[:-6]} {value} outside training range [{bounds[0]}, {bounds[1]}]"
            )
    return tuple(flags)


def predict(f: FeatureVector, p: ModelParams) -> Prediction:
    """Full model evaluation on one feature vector.

    Total over all finite inputs; features outside the training range are
    flagged on the result, never rejected.
    """
    tc = estimate_tc(f.tqp, f.tbpp, p)
    mos_t = texture_mos(tc, f.tqp, p)
    d_g = geometry_attenuation(f.tnsl, p)
    return Prediction(
        mos_est=mos_t * d_g,
        mos_texture=mos_t,
        attenuation=d_g,
        tc_est=tc,
        flags=_range_flags(f, p),
    )


def predict_scores(tqp, tbpp, tnsl, p: ModelParams):
    """Vectorized prediction over parallel feature arrays.

    Same arithmetic as :func:`predict`, returned as a bare score array for
    the calibration and evaluation pipelines.
    """
    return texture_mos(estimate_tc(tqp, tbpp, p), tqp, p) * geometry_attenuation(tnsl, p)


def clamp_mos(values, lo: float = 1.0, hi: float = 100.0):
    """Optional display clamp; raw model output is not range limited."""
    return np.clip(values, lo, hi)[()]
