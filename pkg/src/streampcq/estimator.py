"""Scikit-learn style wrapper around calibration and prediction.

``X`` is a (n, 3) array of [tqp, tbpp, tnsl] columns and ``y`` the MOS
vector, so the regressor slots into sklearn model selection and pipeline
tooling.  Content grouping and reference complexities, which the
calibration stages need, travel as fit keyword arguments, like
``sample_weight`` does elsewhere.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array

from .bitstream.features import FeatureVector
from .calibration import CalibrationOptions, Dataset, DatasetRecord, calibrate_full
from .model import ModelParams, clamp_mos, default_params, predict_scores

FEATURE_COLUMNS = ("tqp", "tbpp", "tnsl")


def check_feature_array(X) -> np.ndarray:
    """Validate a [tqp, tbpp, tnsl] feature matrix."""
    X = check_array(X, dtype=float, ensure_2d=True, ensure_all_finite=True)
    if X.shape[1] != 3:
        raise ValueError(
            f"expected 3 feature columns {FEATURE_COLUMNS}, got {X.shape[1]}"
        )
    return X


class TrisoupLiftingRegressor(RegressorMixin, BaseEstimator):
    """No-reference MOS regressor over bitstream features.

    Parameters
    ----------
    params : ModelParams or None
        Pre-fitted constants to predict with.  When None, predicting
        before ``fit`` falls back to the packaged defaults.
    tc_source : str
        Complexity source for the slope fit, "reference" or "estimated".
    b_mode : str
        Shared-intercept estimator, "intercept" or "min_mos".
    clamp : bool
        Clip predictions into [1, 100] for display pipelines.
    """

    def __init__(self, params: ModelParams | None = None,
                 tc_source: str = "reference", b_mode: str = "intercept",
                 clamp: bool = False):
        self.params = params
        self.tc_source = tc_source
        self.b_mode = b_mode
        self.clamp = clamp

    def fit(self, X, y, content_ids=None, tc_ref=None):
        """Calibrate all model constants from labeled features.

        content_ids groups rows by source content (required); tc_ref
        supplies per-row reference complexity for the stage-1 fit.
        """
        X = check_feature_array(X)
        y = np.asarray(y, dtype=float).ravel()
        if y.size != X.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but y has {y.size}")
        if content_ids is None:
            raise ValueError("content_ids is required to group rows for calibration")
        content_ids = [str(c) for c in content_ids]
        if len(content_ids) != X.shape[0]:
            raise ValueError("content_ids length does not match X")
        if tc_ref is None:
            tc_ref = [None] * X.shape[0]
        records = [
            DatasetRecord(
                content_id=content_ids[i],
                features=FeatureVector(tqp=X[i, 0], tbpp=X[i, 1], tnsl=X[i, 2]),
                mos=float(y[i]),
                tc_ref=None if tc_ref[i] is None or (
                    isinstance(tc_ref[i], float) and np.isnan(tc_ref[i])
                ) else float(tc_ref[i]),
            )
            for i in range(X.shape[0])
        ]
        options = CalibrationOptions(tc_source=self.tc_source, b_mode=self.b_mode)
        self.params_, self.diagnostics_ = calibrate_full(Dataset(records), options)
        return self

    def predict(self, X):
        X = check_feature_array(X)
        params = getattr(self, "params_", None) or self.params or default_params()
        scores = predict_scores(X[:, 0], X[:, 1], X[:, 2], params)
        return clamp_mos(scores) if self.clamp else scores


__all__ = ["TrisoupLiftingRegressor", "check_feature_array", "FEATURE_COLUMNS"]
