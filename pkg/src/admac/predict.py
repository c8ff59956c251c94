"""Apply the calibration model to countries without ground truth and emit
map-ready output."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .domain import CountryRef, Sex
from .errors import EmptyInput, UnfittedModel
from .fileio import atomic_write_text
from .groundtruth import GroundTruthRecord
from .indicators import MacEstimate
from .stats import CalibrationModel


@dataclass(frozen=True)
class Prediction:
    country: CountryRef
    sex: Sex
    mac_fb: float
    mac_predicted: float
    interval_low: float
    interval_high: float


def predict_missing(
    model: CalibrationModel | None,
    estimates: Sequence[MacEstimate],
    truth: Sequence[GroundTruthRecord],
) -> list[Prediction]:
    """Predictions for every eligible estimate whose (country, sex) has no
    truth record, with 95% prediction intervals.

    The point prediction is exactly intercept + slope * mac_fb; the
    interval uses the residual standard error, the leverage of mac_fb in
    the training sample, and the t(df_resid) quantile.
    """
    if model is None:
        raise UnfittedModel("predict_missing needs a fitted calibration model")
    covered = {(rec.country.iso2, rec.sex) for rec in truth}
    predictions = []
    for est in estimates:
        if not est.eligible:
            continue
        if (est.country.iso2, est.sex) in covered:
            continue
        low, high = model.prediction_interval(est.mac, level=0.95)
        predictions.append(
            Prediction(
                country=est.country,
                sex=est.sex,
                mac_fb=est.mac,
                mac_predicted=model.predict(est.mac),
                interval_low=low,
                interval_high=high,
            )
        )
    predictions.sort(key=lambda p: (p.country.iso2, p.sex.value))
    return predictions


def emit_choropleth(
    predictions: Sequence[Prediction],
    path: str | Path,
    truth: Sequence[GroundTruthRecord] = (),
    meta: dict[str, str] | None = None,
) -> None:
    """GeoJSON FeatureCollection keyed by iso2, geometry-free.

    Features carry only properties (mac value, interval, source); a static
    boundaries file supplies shapes at render time. Ground-truth countries
    can be merged in (source="ground_truth") for a gap-free map. All
    features must belong to one sex so iso2 keys stay unique.
    """
    if not predictions:
        raise EmptyInput("refusing to emit a choropleth with no predictions")
    sexes = {p.sex for p in predictions} | {t.sex for t in truth}
    if len(sexes) > 1:
        raise ValueError("choropleth features must all be for one sex")
    seen: set[str] = set()
    features = []
    for pred in predictions:
        if pred.country.iso2 in seen:
            raise ValueError(f"duplicate prediction for {pred.country.iso2}")
        seen.add(pred.country.iso2)
        features.append(
            {
                "type": "Feature",
                "id": pred.country.iso2,
                "geometry": None,
                "properties": {
                    "iso2": pred.country.iso2,
                    "sex": pred.sex.value,
                    "mac_predicted": pred.mac_predicted,
                    "interval_low": pred.interval_low,
                    "interval_high": pred.interval_high,
                    "source": "predicted",
                },
            }
        )
    for rec in truth:
        if rec.country.iso2 in seen:
            continue
        seen.add(rec.country.iso2)
        features.append(
            {
                "type": "Feature",
                "id": rec.country.iso2,
                "geometry": None,
                "properties": {
                    "iso2": rec.country.iso2,
                    "sex": rec.sex.value,
                    "mac_predicted": rec.mac,
                    "interval_low": None,
                    "interval_high": None,
                    "source": "ground_truth",
                },
            }
        )
    features.sort(key=lambda f: f["id"])
    collection = {
        "type": "FeatureCollection",
        "metadata": meta or {},
        "features": features,
    }
    atomic_write_text(path, json.dumps(collection, indent=2, sort_keys=True) + "\n")
