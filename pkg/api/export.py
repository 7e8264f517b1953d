# /api/export.py
# Result files: per-trial rows, the regime-pair and control Wilcoxon tables, the neighbourhood
# characteristics table, regime/composition distributions, the tau scatter files and the sweep
# table. Every file is a list of pydantic rows (api/schemas.py) written as CSV or JSON.
from __future__ import annotations

import csv
import logging
from collections import defaultdict
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence, TypeVar

from pydantic import BaseModel, TypeAdapter, ValidationError

from api.schemas import (
    CharacteristicRow,
    DistributionRow,
    PairTestRow,
    ScatterRow,
    SweepRow,
    TrialRow,
)
from services.evaluation import NeighbourhoodStats
from services.experiment import (
    CHARACTERISTICS,
    SCATTER_CHARACTERISTICS,
    CharacteristicComparison,
    Distribution,
    ExperimentResult,
    PairComparison,
    Regime,
    SweepPoint,
    TrialOutcome,
)
from utils.errors import data_error, io_error, usage_error
from utils.text import format_number

log = logging.getLogger(__name__)

RowT = TypeVar("RowT", bound=BaseModel)


class ExportFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


TRIALS = "trials"
PAIR_TESTS = "pair_tests"
CONTROL_TESTS = "control_tests"
CHARACTERISTICS_FILE = "characteristics"
REGIME_SUMMARY = "regime_summary"
COMPOSITION = "composition"
SWEEP = "sweep"


def scatter_name(characteristic: str) -> str:
    return f"scatter_{characteristic}"


def file_for(out_dir: str | Path, name: str, fmt: ExportFormat) -> Path:
    return Path(out_dir) / f"{name}.{fmt.value}"


def coerce_format(fmt: str | ExportFormat) -> ExportFormat:
    try:
        return ExportFormat(fmt)
    except ValueError:
        raise usage_error(f"unknown export format: {fmt} (expected csv or json)") from None


# --- row builders --------------------------------------------------------------------------------


def trial_rows(outcomes: Iterable[TrialOutcome]) -> list[TrialRow]:
    rows = []
    for o in outcomes:
        for regime, r in o.results.items():
            s = r.stats
            rows.append(
                TrialRow(
                    target=o.target,
                    regime=regime.value,
                    n_visible=o.n_visible,
                    n_hidden=o.n_hidden,
                    n_predictions=r.n_predictions,
                    mae=r.mae,
                    tau=None if r.tau is None else r.tau.tau,
                    tau_items=None if r.tau is None else r.tau.n_overlap,
                    tau_discordant=None if r.tau is None else r.tau.n_discordant,
                    size=s.size,
                    overlap=s.overlap,
                    correlation=s.mean_target_correlation,
                    neighbour_correlation=s.mean_inter_neighbour_correlation,
                    raw_correlation=s.mean_target_raw_correlation,
                    raw_neighbour_correlation=s.mean_inter_neighbour_raw_correlation,
                    reviewers_examined=r.reviewers_examined,
                    members=" ".join(str(u) for u in r.members),
                    common=o.common,
                    unique_sp=o.unique_sp,
                    unique_ais=o.unique_ais,
                )
            )
    return rows


def pair_rows(comparisons: Iterable[PairComparison]) -> list[PairTestRow]:
    return [
        PairTestRow(
            metric=c.metric,
            first=c.first.value,
            second=c.second.value,
            median_first=c.median_first,
            median_second=c.median_second,
            n_compared=c.n_compared,
            n_dropped=c.n_dropped,
            n_unequal=c.n_unequal,
            first_better=c.first_better,
            second_better=c.second_better,
            p_upper_bound=c.p_upper_bound,
        )
        for c in comparisons
    ]


def characteristic_rows(comparisons: Iterable[CharacteristicComparison]) -> list[CharacteristicRow]:
    return [
        CharacteristicRow(
            characteristic=c.characteristic,
            mean_sp=c.mean_first,
            mean_ais=c.mean_second,
            n_compared=c.n_compared,
            n_unequal=c.n_unequal,
            sp_higher=c.first_higher,
            ais_higher=c.second_higher,
            p_upper_bound=c.p_upper_bound,
        )
        for c in comparisons
    ]


def _distribution_row(name: str, quantity: str, d: Distribution) -> DistributionRow:
    return DistributionRow(name=name, quantity=quantity, n=d.n, mean=d.mean, sd=d.sd, median=d.median)


def regime_summary_rows(result: ExperimentResult) -> list[DistributionRow]:
    rows = []
    for s in result.summary.regimes:
        for quantity, d in (("mae", s.mae), ("tau", s.tau), ("size", s.size), ("reviewers_examined", s.reviewers_examined)):
            rows.append(_distribution_row(s.regime.value, quantity, d))
    return rows


def composition_rows(result: ExperimentResult) -> list[DistributionRow]:
    s = result.summary
    return [
        _distribution_row("neighbours", "common", s.common),
        _distribution_row("neighbours", "unique_sp", s.unique_sp),
        _distribution_row("neighbours", "unique_ais", s.unique_ais),
    ]


def scatter_rows(characteristic: str, outcomes: Iterable[TrialOutcome]) -> list[ScatterRow]:
    """One row per trial whose AIS-on-AIS recommendation list has a tau."""
    getter = CHARACTERISTICS[characteristic]
    rows = []
    for o in outcomes:
        r = o.results.get(Regime.AIS_AIS)
        if r is None or r.tau is None:
            continue
        rows.append(ScatterRow(target=o.target, value=getter(r.stats), tau=r.tau.tau))
    return rows


def sweep_rows(points: Iterable[SweepPoint]) -> list[SweepRow]:
    return [
        SweepRow(
            rate=p.rate,
            n=p.size.n,
            mean_size=p.size.mean,
            sd_size=p.size.sd,
            mean_reviewers_examined=p.reviewers_examined.mean,
            sd_reviewers_examined=p.reviewers_examined.sd,
        )
        for p in points
    ]


def trial_stats(rows: Iterable[TrialRow]) -> list[tuple[NeighbourhoodStats, NeighbourhoodStats]]:
    """(Simple Pearson, AIS) neighbourhood stats per target, in first-seen target order."""
    by_target: dict[int, dict[str, TrialRow]] = defaultdict(dict)
    for row in rows:
        by_target[row.target][row.regime] = row

    def stats_of(row: TrialRow) -> NeighbourhoodStats:
        return NeighbourhoodStats(
            size=row.size,
            overlap=row.overlap,
            mean_target_correlation=row.correlation,
            mean_inter_neighbour_correlation=row.neighbour_correlation,
            mean_target_raw_correlation=row.raw_correlation,
            mean_inter_neighbour_raw_correlation=row.raw_neighbour_correlation,
        )

    paired = []
    for target, regimes in by_target.items():
        sp, ais = regimes.get(Regime.SP_SP.value), regimes.get(Regime.AIS_AIS.value)
        if sp is None or ais is None:
            raise data_error(f"trial {target} is missing its {Regime.SP_SP.value} or {Regime.AIS_AIS.value} row")
        paired.append((stats_of(sp), stats_of(ais)))
    return paired


# --- file I/O ------------------------------------------------------------------------------------


def _cell(value: object) -> str:
    if value is None or isinstance(value, (int, float)):
        return format_number(value)
    return str(value)


def write_rows(path: str | Path, model: type[RowT], rows: Sequence[RowT], fmt: str | ExportFormat = ExportFormat.CSV) -> Path:
    fmt = coerce_format(fmt)
    path = Path(path)
    columns = list(model.model_fields)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if fmt is ExportFormat.JSON:
            path.write_bytes(TypeAdapter(list[model]).dump_json(list(rows), indent=2) + b"\n")
        else:
            with path.open("w", encoding="utf-8", newline="") as f:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(columns)
                for row in rows:
                    writer.writerow([_cell(getattr(row, c)) for c in columns])
    except OSError as e:
        raise io_error(f"cannot write {path}: {e}") from e
    log.debug("wrote %d rows to %s", len(rows), path)
    return path


def read_rows(path: str | Path, model: type[RowT]) -> list[RowT]:
    """Read a file written by write_rows; the format follows the file suffix."""
    path = Path(path)
    fmt = coerce_format(path.suffix.lstrip("."))
    try:
        if fmt is ExportFormat.JSON:
            return TypeAdapter(list[model]).validate_json(path.read_bytes())
        with path.open("r", encoding="utf-8", newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header != list(model.model_fields):
                raise data_error(f"{path}: unexpected columns {header}")
            rows = []
            for lineno, record in enumerate(reader, start=2):
                if len(record) != len(header):
                    raise data_error(f"{path} line {lineno}: expected {len(header)} fields, got {len(record)}")
                # empty cells fall back to the field default (None for optional numbers)
                rows.append(model.model_validate({k: v for k, v in zip(header, record) if v != ""}))
            return rows
    except OSError as e:
        raise io_error(f"cannot read {path}: {e}") from e
    except ValidationError as e:
        raise data_error(f"{path}: {e.errors()[0].get('msg')}") from e


# --- whole-result exports ------------------------------------------------------------------------


def export_results(result: ExperimentResult, out_dir: str | Path, fmt: str | ExportFormat = ExportFormat.CSV) -> list[Path]:
    fmt = coerce_format(fmt)
    s = result.summary
    files = [
        write_rows(file_for(out_dir, TRIALS, fmt), TrialRow, trial_rows(result.outcomes), fmt),
        write_rows(file_for(out_dir, PAIR_TESTS, fmt), PairTestRow, pair_rows(s.pair_tests), fmt),
        write_rows(file_for(out_dir, CONTROL_TESTS, fmt), PairTestRow, pair_rows(s.control_tests), fmt),
        write_rows(file_for(out_dir, CHARACTERISTICS_FILE, fmt), CharacteristicRow, characteristic_rows(s.characteristics), fmt),
        write_rows(file_for(out_dir, REGIME_SUMMARY, fmt), DistributionRow, regime_summary_rows(result), fmt),
        write_rows(file_for(out_dir, COMPOSITION, fmt), DistributionRow, composition_rows(result), fmt),
    ]
    for characteristic in SCATTER_CHARACTERISTICS:
        rows = scatter_rows(characteristic, result.outcomes)
        files.append(write_rows(file_for(out_dir, scatter_name(characteristic), fmt), ScatterRow, rows, fmt))
    log.info("exported %d files to %s", len(files), out_dir)
    return files


def export_sweep(points: Sequence[SweepPoint], out_dir: str | Path, fmt: str | ExportFormat = ExportFormat.CSV) -> Path:
    fmt = coerce_format(fmt)
    return write_rows(file_for(out_dir, SWEEP, fmt), SweepRow, sweep_rows(points), fmt)


def find_trials_file(out_dir: str | Path) -> Path:
    for fmt in ExportFormat:
        path = file_for(out_dir, TRIALS, fmt)
        if path.is_file():
            return path
    raise io_error(f"no {TRIALS}.csv or {TRIALS}.json in {out_dir}")
