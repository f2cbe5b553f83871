"""Synthetic dataset generation for closed-loop validation and demos.

Generates a grid-shaped dataset whose features, reference complexities and
scores are exactly consistent with a given parameter set: per-content
complexity is chosen, bits per point are back-solved from the complexity
relation, and scores come from the forward model plus optional Gaussian
noise.  Refitting on the noiseless output must reproduce the generating
model's predictions.
"""

from __future__ import annotations

import numpy as np

from .bitstream.features import FeatureVector
from .calibration import Dataset, DatasetRecord
from .model import ModelParams, intercept_of_tqp, predict_scores, slope_of_tqp


def make_synthetic_dataset(
    params: ModelParams,
    n_contents: int = 20,
    tqps=(28, 34, 40, 46, 51),
    tnsls=(3, 4, 5, 6),
    tc_range: tuple[float, float] = (5.0, 25.0),
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> Dataset:
    rng = np.random.default_rng(seed)
    tc_values = np.linspace(tc_range[0], tc_range[1], n_contents)
    records = []
    for ci, tc_c in enumerate(tc_values):
        content = f"synth{ci:02d}"
        for q in tqps:
            s_q = slope_of_tqp(q, params)
            i_q = intercept_of_tqp(q, params)
            if s_q == 0:
                raise ValueError(f"zero complexity slope at tqp {q}")
            tbpp = (tc_c - i_q) / s_q
            if tbpp <= 0:
                raise ValueError(
                    f"generated non-positive tbpp at tqp {q}, tc {tc_c}; "
                    "widen tc_range"
                )
            for t in tnsls:
                mos = float(predict_scores(q, tbpp, t, params))
                if noise_sigma > 0:
                    mos += rng.normal(0.0, noise_sigma)
                records.append(
                    DatasetRecord(
                        content_id=content,
                        features=FeatureVector(
                            tqp=float(q), tbpp=float(tbpp), tnsl=float(t),
                            content_id=content,
                        ),
                        mos=mos,
                        tc_ref=float(tc_c),
                    )
                )
    return Dataset(records)
