"""Turn raw run counters into comparison metrics and write them out."""

from __future__ import annotations

import csv
import io
import os
from dataclasses import astuple, dataclass, fields
from typing import Iterable, List, Optional, Sequence

from .sim_engine import ExperimentConfig, RunStats

METRIC_NAMES = (
    "avg_rdv_per_slot",
    "avg_rdv_per_quorum",
    "avg_ttr_slots",
    "avg_ttr_ms",
    "energy_per_rdv",
    "forced_blocking_ratio",
)

METRIC_LABELS = {
    "avg_rdv_per_slot": "Average successful rendezvous per slot",
    "avg_rdv_per_quorum": "Successful rendezvous per quorum opportunity",
    "avg_ttr_slots": "Average TTR (slots)",
    "avg_ttr_ms": "Average TTR (ms)",
    "energy_per_rdv": "Energy per successful rendezvous (units)",
    "forced_blocking_ratio": "Forced blocking ratio",
}


@dataclass(frozen=True)
class MetricRow:
    scheme: str
    n: int
    N: int
    p_idle: float
    num_pairs: int
    seed: int
    avg_rdv_per_slot: float
    avg_rdv_per_quorum: Optional[float]
    avg_ttr_slots: Optional[float]
    avg_ttr_ms: Optional[float]
    energy_per_rdv: Optional[float]
    forced_blocking_ratio: Optional[float]


CSV_HEADER = tuple(f.name for f in fields(MetricRow))


def derive_metrics(stats: RunStats, config: ExperimentConfig) -> MetricRow:
    """Compute per-run metrics.

    ``avg_rdv_per_quorum`` is successes over meeting opportunities (slots
    where both ends of a pair were active), so it stays within [0, 1].
    Ratios with a zero denominator are reported as None.
    """
    if stats.slots_run <= 0:
        raise ValueError("cannot derive metrics from a run with no slots")
    avg_ttr = float(stats.ttr_samples.mean()) if len(stats.ttr_samples) else None
    return MetricRow(
        scheme=config.scheme.value,
        n=config.grid.grid_side,
        N=config.num_channels,
        p_idle=config.mean_p_idle,
        num_pairs=config.num_pairs,
        seed=config.seed,
        avg_rdv_per_slot=stats.successes / stats.slots_run,
        avg_rdv_per_quorum=stats.successes / stats.meetings if stats.meetings else None,
        avg_ttr_slots=avg_ttr,
        avg_ttr_ms=avg_ttr * config.slot_duration_ms if avg_ttr is not None else None,
        energy_per_rdv=stats.active_slot_count / stats.successes if stats.successes else None,
        forced_blocking_ratio=stats.forced_blocks / stats.successes if stats.successes else None,
    )


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def render_csv(rows: Iterable[MetricRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow([format_value(v) for v in astuple(row)])
    return buf.getvalue()


def write_csv(rows: Sequence[MetricRow], destination: str) -> None:
    text = render_csv(rows)
    try:
        with open(destination, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write metrics CSV to {destination}: {exc.strerror}") from exc


def _parse_cell(name: str, text: str):
    if text == "":
        return None
    if name in ("scheme",):
        return text
    if name in ("n", "N", "num_pairs", "seed"):
        return int(text)
    return float(text)


def read_csv(path: str) -> List[MetricRow]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        return [MetricRow(**{k: _parse_cell(k, v) for k, v in rec.items()}) for rec in reader]


def _sweep_axis(rows: Sequence[MetricRow]) -> str:
    if len({r.p_idle for r in rows}) > 1 or len({r.num_pairs for r in rows}) <= 1:
        return "p_idle"
    return "num_pairs"


def emit_plot_script(rows: Sequence[MetricRow], metric: str, destination: str,
                     csv_name: str = "results.csv", x_axis: Optional[str] = None) -> None:
    """Write a gnuplot script drawing ``metric`` with one series per scheme.

    Repeated x values (seeds, grid sizes) are averaged by ``smooth unique``.
    The CSV is referenced by its path relative to the script.
    """
    if metric not in METRIC_NAMES:
        raise ValueError(f"unknown metric {metric!r}; choose one of {', '.join(METRIC_NAMES)}")
    axis = x_axis or _sweep_axis(rows)
    if axis not in ("p_idle", "num_pairs"):
        raise ValueError(f"x axis must be p_idle or num_pairs, got {axis!r}")
    x_col = CSV_HEADER.index(axis) + 1
    y_col = CSV_HEADER.index(metric) + 1
    s_col = CSV_HEADER.index("scheme") + 1
    schemes = sorted({r.scheme for r in rows})
    xs = [getattr(r, axis) for r in rows]

    lines = [
        "# gnuplot script; run from this directory: gnuplot " + os.path.basename(destination),
        'set datafile separator ","',
        "set datafile missing NaN",
        "set terminal pngcairo size 800,600",
        f"set output '{metric}_vs_{axis}.png'",
        f"set xlabel '{'P_I (idle probability)' if axis == 'p_idle' else 'number of SU pairs'}'",
        f"set ylabel '{METRIC_LABELS[metric]}'",
        "set key outside right",
        "set grid",
    ]
    if xs:
        lines.append(f"set xrange [{format_value(float(min(xs)))}:{format_value(float(max(xs)))}]")
    series = []
    for scheme in schemes:
        series.append(
            f"'{csv_name}' every ::1 using {x_col}:(strcol({s_col}) eq '{scheme}' && "
            f"strlen(strcol({y_col})) > 0 ? column({y_col}) : NaN) "
            f"smooth unique with linespoints title '{scheme}'"
        )
    if series:
        lines.append("plot " + ", \\\n     ".join(series))
    with open(destination, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
