"""Stage orchestration: collect -> estimate -> validate -> calibrate ->
predict, with plain CSV/JSON artifacts between stages.

Every stage reads the previous stage's files from the output directory,
writes its own atomically, and stamps a metadata header (tool version,
seed, input digests) so any artifact can be traced to its inputs. No
timestamps are embedded: identical config + inputs = identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from importlib.resources import files
from pathlib import Path

from .domain import AudienceSnapshot, Continent, CountryRef, Sex
from .errors import (
    ConfigError,
    EmptyInput,
    MissingStageInput,
    ParseError,
    SnapshotIncomplete,
    TooFewPoints,
)
from .fileio import read_csv, sha256_file, standard_metadata, write_csv, write_json
from .groundtruth import load_continent_map, load_ground_truth, join_pairs
from .indicators import (
    IneligibilityReason,
    LowerBoundPolicy,
    MacEstimate,
    estimate_country,
)
from .ingest import (
    Collector,
    CollectorConfig,
    Mode,
    fixture_countries,
    read_cells_csv,
    write_cells_csv,
)
from .predict import emit_choropleth, predict_missing
from .stats import (
    CalibrationModel,
    GroupedMetrics,
    continent_label,
    cv_percent,
    grouped_metrics,
    loocv,
    ols_fit,
    random_split_validation,
    significance_stars,
)

logger = logging.getLogger(__name__)

ESTIMATE_COLUMNS = ["iso2", "sex", "mac", "eligible", "reason"]
METRICS_COLUMNS = [
    "continent",
    "metric_corr",
    "metric_mape",
    "loocv_corr",
    "loocv_mape",
    "n",
    "metric_corr_stars",
    "loocv_corr_stars",
]
PREDICTION_COLUMNS = ["iso2", "sex", "mac_fb", "mac_predicted", "pi_low", "pi_high"]

RANDOM_SPLIT_RUNS = 10
RANDOM_SPLIT_TEST_SIZE = 10


def packaged_data_path(*parts: str) -> Path:
    """Path of a bundled data file (continent map, demo fixtures, demo truth)."""
    return Path(str(files("admac").joinpath("data", *parts)))


@dataclass
class RunConfig:
    """One pipeline run, fully determined by these fields plus the fixtures."""

    output_dir: Path
    mode: Mode = Mode.FIXTURE
    fixture_dir: Path = field(default_factory=lambda: packaged_data_path("fixtures"))
    cache_dir: Path | None = None
    truth_path: Path = field(default_factory=lambda: packaged_data_path("ground_truth.csv"))
    continent_map_path: Path = field(default_factory=lambda: packaged_data_path("continents.csv"))
    sexes: tuple[Sex, ...] = (Sex.FEMALE, Sex.MALE)
    seed: int = 0
    lower_bound_policy: LowerBoundPolicy = LowerBoundPolicy.ANY
    loocv_scope: str = "global"
    countries: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        self.output_dir = Path(self.output_dir)
        self.fixture_dir = Path(self.fixture_dir)
        self.truth_path = Path(self.truth_path)
        self.continent_map_path = Path(self.continent_map_path)
        if self.cache_dir is None and self.mode is Mode.LIVE:
            self.cache_dir = self.output_dir / "cache"
        if not self.sexes:
            raise ConfigError("at least one sex must be requested")
        if self.loocv_scope not in ("global", "continent"):
            raise ConfigError(f"loocv_scope must be 'global' or 'continent', got {self.loocv_scope!r}")

    # stage artifact locations -------------------------------------------------
    @property
    def snapshots_dir(self) -> Path:
        return self.output_dir / "snapshots"

    @property
    def estimates_path(self) -> Path:
        return self.output_dir / "estimates.csv"

    def metrics_path(self, sex: Sex) -> Path:
        return self.output_dir / f"metrics_{sex.value}.csv"

    def model_path(self, sex: Sex) -> Path:
        return self.output_dir / f"model_{sex.value}.json"

    @property
    def predictions_path(self) -> Path:
        return self.output_dir / "predictions.csv"

    @property
    def map_path(self) -> Path:
        return self.output_dir / "map.geojson"


def _collector_config(cfg: RunConfig) -> CollectorConfig:
    return CollectorConfig(
        mode=cfg.mode,
        fixture_dir=cfg.fixture_dir if cfg.mode is Mode.FIXTURE else None,
        cache_dir=cfg.cache_dir,
    )


# --------------------------------------------------------------------------
# collect
# --------------------------------------------------------------------------

def stage_collect(cfg: RunConfig, collector: Collector | None = None) -> list[Path]:
    """Snapshot every requested country into output_dir/snapshots/.

    A country whose collection comes back incomplete is written with the
    cells that did arrive; the estimate stage will mark the affected sexes
    ineligible rather than this stage failing the whole run.
    """
    collector = collector or Collector(_collector_config(cfg))
    excluded = collector.config.excluded_countries
    if cfg.countries is not None:
        wanted = [c.upper() for c in cfg.countries]
    elif cfg.mode is Mode.FIXTURE:
        wanted = [c for c in fixture_countries(cfg.fixture_dir) if c not in excluded]
    else:
        raise ConfigError("live mode needs an explicit country list")

    written: list[Path] = []
    for iso2 in sorted(wanted):
        country = CountryRef(iso2=iso2)
        try:
            snapshot = collector.collect_snapshot(country)
            cells = snapshot.cells
        except SnapshotIncomplete as exc:
            logger.warning("%s: incomplete snapshot kept (%s)", iso2, exc)
            cells = exc.cells
        inputs = {}
        if cfg.mode is Mode.FIXTURE:
            fixture = cfg.fixture_dir / f"{iso2}.csv"
            if fixture.exists():
                inputs[f"fixture_{iso2}"] = sha256_file(fixture)
        path = cfg.snapshots_dir / f"{iso2}.csv"
        write_cells_csv(path, cells, meta=standard_metadata(seed=cfg.seed, inputs=inputs))
        written.append(path)
    if not written:
        raise ConfigError("no countries to collect")
    return written


# --------------------------------------------------------------------------
# estimate
# --------------------------------------------------------------------------

def _snapshots_digest(cfg: RunConfig) -> tuple[list[Path], str]:
    if not cfg.snapshots_dir.is_dir():
        raise MissingStageInput(f"{cfg.snapshots_dir} not found; run `collect` first")
    paths = sorted(cfg.snapshots_dir.glob("*.csv"))
    if not paths:
        raise MissingStageInput(f"no snapshots under {cfg.snapshots_dir}; run `collect` first")
    combined = hashlib.sha256()
    for path in paths:
        combined.update(path.name.encode())
        combined.update(bytes.fromhex(sha256_file(path)))
    return paths, combined.hexdigest()


def stage_estimate(cfg: RunConfig) -> Path:
    """MAC estimates (or ineligibility reasons) for every collected country."""
    paths, digest = _snapshots_digest(cfg)
    rows: list[list[str]] = []
    for path in paths:
        iso2 = path.stem.upper()
        country = CountryRef(iso2=iso2)
        cells = read_cells_csv(path, country)
        if cells:
            try:
                snapshot = AudienceSnapshot(
                    country=country,
                    cells=tuple(cells),
                    collected_at=max(c.collected_at for c in cells),
                )
            except ValueError as exc:
                raise ParseError(f"{path}: {exc}") from exc
        else:
            snapshot = None
        for sex in cfg.sexes:
            if snapshot is None:
                est = MacEstimate(
                    country=country, sex=sex, mac=None, eligible=False,
                    ineligibility_reason=IneligibilityReason.INCOMPLETE_SNAPSHOT,
                )
            else:
                est = estimate_country(snapshot, sex, cfg.lower_bound_policy)
            rows.append(
                [
                    iso2,
                    sex.value,
                    "" if est.mac is None else str(est.mac),
                    "true" if est.eligible else "false",
                    "" if est.ineligibility_reason is None else est.ineligibility_reason.value,
                ]
            )
    meta = standard_metadata(seed=cfg.seed, inputs={"snapshots": digest})
    meta["lower_bound_policy"] = cfg.lower_bound_policy.value
    write_csv(cfg.estimates_path, meta, ESTIMATE_COLUMNS, rows)
    return cfg.estimates_path


def load_estimates(path: Path) -> list[MacEstimate]:
    if not Path(path).exists():
        raise MissingStageInput(f"{path} not found; run `estimate` first")
    _, header, rows = read_csv(path)
    if header != ESTIMATE_COLUMNS:
        raise MissingStageInput(f"{path} is not an estimates file (header {header!r})")
    estimates = []
    for row in rows:
        iso2, sex, mac_raw, eligible, reason = row
        estimates.append(
            MacEstimate(
                country=CountryRef(iso2=iso2),
                sex=Sex(sex),
                mac=float(mac_raw) if mac_raw else None,
                eligible=eligible == "true",
                ineligibility_reason=IneligibilityReason(reason) if reason else None,
            )
        )
    return estimates


# --------------------------------------------------------------------------
# validate
# --------------------------------------------------------------------------

def _stage_inputs(cfg: RunConfig) -> dict[str, str]:
    for path, stage in ((cfg.estimates_path, "estimate"),):
        if not path.exists():
            raise MissingStageInput(f"{path} not found; run `{stage}` first")
    for path, what in ((cfg.truth_path, "ground truth"), (cfg.continent_map_path, "continent map")):
        if not Path(path).exists():
            raise MissingStageInput(f"{what} file {path} not found")
    return {
        "estimates": sha256_file(cfg.estimates_path),
        "truth": sha256_file(cfg.truth_path),
        "continents": sha256_file(cfg.continent_map_path),
    }


def _pairs_for_sex(cfg: RunConfig, sex: Sex, continent_map: dict[str, Continent]):
    estimates = load_estimates(cfg.estimates_path)
    truth = load_ground_truth(cfg.truth_path, continent_map)
    triples = [
        (CountryRef(iso2=e.country.iso2, continent=continent_map.get(e.country.iso2)), e.sex, e.mac)
        for e in estimates
        if e.eligible and e.sex == sex
    ]
    truth_for_sex = [t for t in truth if t.sex == sex]
    return join_pairs(triples, truth_for_sex)


def _metric_cell_fields(cell) -> tuple[str, str, str]:
    if cell is None:
        return "", "", ""
    rho = "" if cell.spearman_rho is None else str(cell.spearman_rho)
    stars = significance_stars(cell.spearman_p)
    return rho, str(cell.mape), stars


def _write_metrics(path: Path, meta: dict[str, str], direct: GroupedMetrics, cv: GroupedMetrics) -> None:
    rows = []
    for label in sorted(direct.per_continent):
        d = direct.per_continent[label]
        c = cv.per_continent.get(label)
        d_rho, d_mape, d_stars = _metric_cell_fields(d)
        c_rho, c_mape, c_stars = _metric_cell_fields(c)
        rows.append([label, d_rho, d_mape, c_rho, c_mape, str(d.n), d_stars, c_stars])
    d_rho, d_mape, d_stars = _metric_cell_fields(direct.overall)
    c_rho, c_mape, c_stars = _metric_cell_fields(cv.overall)
    rows.append(["Overall", d_rho, d_mape, c_rho, c_mape, str(direct.overall.n), d_stars, c_stars])
    write_csv(path, meta, METRICS_COLUMNS, rows)


def stage_validate(cfg: RunConfig) -> list[Path]:
    """Spearman/MAPE of platform vs truth, direct and under LOOCV, by continent."""
    inputs = _stage_inputs(cfg)
    continent_map = load_continent_map(cfg.continent_map_path)
    written = []
    for sex in cfg.sexes:
        join = _pairs_for_sex(cfg, sex, continent_map)
        pairs = join.pairs
        if len(pairs) < 4:
            raise TooFewPoints(
                f"validate/{sex.value}: LOOCV needs at least 4 matched pairs, got {len(pairs)}"
            )
        labels = {p.country.iso2: continent_label(p.country.continent) for p in pairs}
        direct = grouped_metrics(
            (labels[p.country.iso2], p.mac_fb, p.mac_truth) for p in pairs
        )
        continent_of = {p.country.iso2: p.country.continent for p in pairs}
        _, cv = loocv(pairs, continent_of, scope=cfg.loocv_scope)
        meta = standard_metadata(seed=cfg.seed, inputs=inputs)
        meta["sex"] = sex.value
        meta["loocv_scope"] = cfg.loocv_scope
        meta["n_pairs"] = str(len(pairs))
        meta["n_unmatched_estimates"] = str(len(join.unmatched_estimates))
        meta["n_unmatched_truth"] = str(len(join.unmatched_truth))
        path = cfg.metrics_path(sex)
        _write_metrics(path, meta, direct, cv)
        written.append(path)
    return written


# --------------------------------------------------------------------------
# calibrate
# --------------------------------------------------------------------------

def _model_payload(model: CalibrationModel) -> dict:
    return {
        "intercept": model.intercept,
        "slope": model.slope,
        "se_intercept": model.se_intercept,
        "se_slope": model.se_slope,
        "r2": model.r2,
        "adj_r2": model.adj_r2,
        "residual_se": model.residual_se,
        "f_stat": model.f_stat,
        "df_model": model.df_model,
        "df_resid": model.df_resid,
        "n": model.n,
        "p_slope": model.p_slope,
        "p_intercept": model.p_intercept,
        "p_f": model.p_f,
        "residuals": list(model.residuals),
        "x_mean": model.x_mean,
        "s_xx": model.s_xx,
        "stars": {
            "intercept": significance_stars(model.p_intercept),
            "slope": significance_stars(model.p_slope),
            "f": significance_stars(model.p_f),
        },
    }


def stage_calibrate(cfg: RunConfig) -> list[Path]:
    """Fit mac_truth = b0 + b1 * mac_fb per sex; report inference and the
    seeded random-split out-of-sample exercise."""
    inputs = _stage_inputs(cfg)
    continent_map = load_continent_map(cfg.continent_map_path)
    written = []
    for sex in cfg.sexes:
        join = _pairs_for_sex(cfg, sex, continent_map)
        pairs = join.pairs
        if len(pairs) < 3:
            raise TooFewPoints(
                f"calibrate/{sex.value}: regression needs at least 3 matched pairs, got {len(pairs)}"
            )
        model = ols_fit(pairs)
        payload: dict = {
            "model": _model_payload(model),
            "sample": {
                "n_pairs": len(pairs),
                "countries": [p.country.iso2 for p in pairs],
                "cv_mac_truth_pct": cv_percent([p.mac_truth for p in pairs]),
            },
        }
        if len(pairs) >= RANDOM_SPLIT_TEST_SIZE + 3:
            split = random_split_validation(
                pairs, runs=RANDOM_SPLIT_RUNS, test_size=RANDOM_SPLIT_TEST_SIZE, seed=cfg.seed
            )
            payload["out_of_sample"] = {
                "runs": RANDOM_SPLIT_RUNS,
                "test_size": RANDOM_SPLIT_TEST_SIZE,
                "mean_mape_pct": split.mean_mape,
                "per_run_mape_pct": list(split.per_run),
                "cv_run_mape_pct": cv_percent(split.per_run),
            }
        else:
            payload["out_of_sample"] = None
            logger.warning(
                "calibrate/%s: %d pairs are too few for the %d/%d split exercise",
                sex.value, len(pairs), RANDOM_SPLIT_RUNS, RANDOM_SPLIT_TEST_SIZE,
            )
        meta = standard_metadata(seed=cfg.seed, inputs=inputs)
        meta["sex"] = sex.value
        path = cfg.model_path(sex)
        write_json(path, meta, payload)
        written.append(path)
    return written


def load_model(path: Path) -> CalibrationModel:
    if not Path(path).exists():
        raise MissingStageInput(f"{path} not found; run `calibrate` first")
    with open(path, encoding="utf-8") as handle:
        document = json.load(handle)
    m = document["model"]
    return CalibrationModel(
        intercept=m["intercept"],
        slope=m["slope"],
        se_intercept=m["se_intercept"],
        se_slope=m["se_slope"],
        r2=m["r2"],
        adj_r2=m["adj_r2"],
        residual_se=m["residual_se"],
        f_stat=m["f_stat"],
        df_model=m["df_model"],
        df_resid=m["df_resid"],
        n=m["n"],
        p_slope=m["p_slope"],
        p_intercept=m["p_intercept"],
        p_f=m["p_f"],
        residuals=tuple(m["residuals"]),
        x_mean=m["x_mean"],
        s_xx=m["s_xx"],
    )


# --------------------------------------------------------------------------
# predict
# --------------------------------------------------------------------------

def stage_predict(cfg: RunConfig) -> list[Path]:
    """Fill the gaps: predicted MAC for eligible countries without truth."""
    inputs = _stage_inputs(cfg)
    continent_map = load_continent_map(cfg.continent_map_path)
    estimates = load_estimates(cfg.estimates_path)
    truth = load_ground_truth(cfg.truth_path, continent_map)

    all_rows = []
    by_sex = {}
    for sex in cfg.sexes:
        model_file = cfg.model_path(sex)
        model = load_model(model_file)
        inputs[f"model_{sex.value}"] = sha256_file(model_file)
        sex_estimates = [e for e in estimates if e.sex == sex]
        sex_truth = [t for t in truth if t.sex == sex]
        predictions = predict_missing(model, sex_estimates, sex_truth)
        by_sex[sex] = (predictions, sex_truth)
        for p in predictions:
            all_rows.append(
                [
                    p.country.iso2,
                    p.sex.value,
                    str(p.mac_fb),
                    str(p.mac_predicted),
                    str(p.interval_low),
                    str(p.interval_high),
                ]
            )
    all_rows.sort(key=lambda r: (r[0], r[1]))
    meta = standard_metadata(seed=cfg.seed, inputs=inputs)
    meta["n_predictions"] = str(len(all_rows))
    write_csv(cfg.predictions_path, meta, PREDICTION_COLUMNS, all_rows)
    written = [cfg.predictions_path]

    # the map carries one sex so iso2 keys stay unique; male is the
    # data-gap use case when both sexes were run
    map_sex = Sex.MALE if Sex.MALE in by_sex else cfg.sexes[0]
    predictions, sex_truth = by_sex[map_sex]
    map_meta = standard_metadata(seed=cfg.seed, inputs=inputs)
    map_meta["sex"] = map_sex.value
    try:
        emit_choropleth(predictions, cfg.map_path, truth=sex_truth, meta=map_meta)
        written.append(cfg.map_path)
    except EmptyInput:
        logger.warning("no %s predictions; map not emitted", map_sex.value)
    return written


# --------------------------------------------------------------------------
# all
# --------------------------------------------------------------------------

def run_all(cfg: RunConfig, collector: Collector | None = None) -> list[Path]:
    written = list(stage_collect(cfg, collector))
    written.append(stage_estimate(cfg))
    written.extend(stage_validate(cfg))
    written.extend(stage_calibrate(cfg))
    written.extend(stage_predict(cfg))
    return written
