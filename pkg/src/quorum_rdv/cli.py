"""Command-line driver for experiment matrices and formula validation.

Example::

    python -m quorum_rdv --grid 4 --scheme 2x2 --p-idle 0.5 --pairs 26 \\
        --slots 800000 --seed 1 --out results/
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

from .adaptive_policy import LoadThresholds
from .metrics_report import METRIC_NAMES, MetricRow, derive_metrics, emit_plot_script, write_csv
from .pu_activity import DEFAULT_MEAN_IDLE, PuMode
from .quorum_core import Scheme, brute_force_intersection_stats, guaranteed_rdv_count
from .sim_engine import DEFAULT_SLOTS, ExperimentConfig, ReselectPolicy, run

log = logging.getLogger("quorum_rdv")

DEFAULT_P_IDLE = tuple(round(0.1 * i, 1) for i in range(1, 11))
DEFAULT_PAIRS = (26,)
PAIRS_SWEEP = tuple(range(4, 51))
PAIRS_SWEEP_P_IDLE = (0.1, 0.5, 0.9)
ALL_SCHEMES = (Scheme.ONE_BY_ONE, Scheme.TWO_BY_ONE, Scheme.TWO_BY_TWO, Scheme.ADAPTIVE)


@dataclass
class SweepSpec:
    grid_sides: Tuple[int, ...] = (3, 4, 5)
    channels: Optional[Tuple[int, ...]] = None
    p_idle: Tuple[float, ...] = DEFAULT_P_IDLE
    pairs: Tuple[int, ...] = DEFAULT_PAIRS
    schemes: Tuple[Scheme, ...] = ALL_SCHEMES
    seeds: Tuple[int, ...] = (1,)
    slots: int = DEFAULT_SLOTS
    base: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("p_idle", "pairs", "schemes", "seeds"):
            if not getattr(self, name):
                raise ValueError(f"sweep axis {name} is empty")
        if not (self.channels or self.grid_sides):
            raise ValueError("sweep needs at least one grid side or channel count")
        if any(not 0.0 <= p <= 1.0 for p in self.p_idle):
            raise ValueError(f"p_idle values must lie in [0, 1], got {self.p_idle}")
        if self.channels is None and any(n < 2 for n in self.grid_sides):
            raise ValueError(f"grid sides must be >= 2, got {self.grid_sides}")

    def channel_counts(self) -> Tuple[int, ...]:
        if self.channels:
            return self.channels
        return tuple(n * n for n in self.grid_sides)

    def cells(self) -> List[Tuple[ExperimentConfig, int]]:
        """``(config, base_seed)`` in matrix order: scheme, N, p_idle, pairs, seed."""
        out = []
        for scheme, n_ch, p, pairs, seed in itertools.product(
            self.schemes, self.channel_counts(), self.p_idle, self.pairs, self.seeds
        ):
            cfg = ExperimentConfig(
                num_channels=n_ch, num_pairs=pairs, scheme=scheme, p_idle=p,
                total_slots=self.slots, seed=cell_seed(seed, n_ch, p, pairs), **self.base,
            )
            out.append((cfg, seed))
        return out


def cell_seed(base_seed: int, num_channels: int, p_idle: float, num_pairs: int) -> int:
    """Stable 63-bit seed for one matrix cell.

    Derived from coordinate values rather than positions, so extending an
    axis leaves existing cells untouched. The scheme is left out on purpose:
    schemes compared in one sweep share PU and selection streams.
    """
    key = f"{base_seed}|N={num_channels}|p={p_idle:.6g}|pairs={num_pairs}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "big") >> 1


def run_cell(cell: Tuple[ExperimentConfig, int]) -> MetricRow:
    config, base_seed = cell
    # rows echo the base seed the user passed, not the derived stream seed
    return replace(derive_metrics(run(config), config), seed=base_seed)


def run_matrix(spec: SweepSpec, jobs: int = 1) -> List[MetricRow]:
    """Run every cell; rows come back in matrix order whatever ``jobs`` is."""
    cells = spec.cells()
    for cfg, _ in cells:
        cfg.validate()
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(run_cell, cells))
    rows = []
    for i, (cfg, seed) in enumerate(cells, 1):
        log.info("cell %d/%d: %s N=%d p=%.3g pairs=%d", i, len(cells),
                 cfg.scheme.value, cfg.num_channels, cfg.mean_p_idle, cfg.num_pairs)
        rows.append(run_cell((cfg, seed)))
    return rows


VALIDATION_PAIRS = (
    (Scheme.ONE_BY_ONE, Scheme.ONE_BY_ONE),
    (Scheme.TWO_BY_ONE, Scheme.TWO_BY_ONE),
    (Scheme.TWO_BY_TWO, Scheme.TWO_BY_TWO),
)


def validate_formulas(grid_sides: Sequence[int], out=None) -> bool:
    """Compare exhaustive intersection counts with the closed-form counts."""
    out = out or sys.stdout
    ok = True
    for n in grid_sides:
        for scheme_a, scheme_b in VALIDATION_PAIRS:
            try:
                stats = brute_force_intersection_stats(n, scheme_a, scheme_b)
            except ValueError as exc:
                print(f"n={n} {scheme_a.value}: skipped ({exc})", file=out)
                continue
            for case, mm in stats.items():
                expected = guaranteed_rdv_count(case, n)
                passed = mm["min"] == mm["max"] == expected
                ok &= passed
                label = f"case {case.label}" if case.label is not None else "unnumbered"
                print(
                    f"n={n} {scheme_a.value} vs {scheme_b.value} {label:<10} "
                    f"rows_shared={case.row_overlap} cols_shared={case.col_overlap} "
                    f"oracle=[{mm['min']},{mm['max']}] formula={expected} "
                    f"{'PASS' if passed else 'FAIL'}",
                    file=out,
                )
    return ok


def _csv_list(kind):
    def parse(text: str):
        try:
            return tuple(kind(item) for item in text.split(",") if item.strip())
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid list {text!r}") from None
    return parse


def _schemes(text: str) -> Tuple[Scheme, ...]:
    if text == "all":
        return ALL_SCHEMES
    try:
        out = tuple(Scheme(item.strip()) for item in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"unknown scheme in {text!r}; use 1x1, 2x1, 2x2, adaptive or all") from None
    if Scheme.CUSTOM in out:
        raise argparse.ArgumentTypeError("custom selections are not available from the CLI")
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="quorum-rdv",
        description="Grid-quorum channel-hopping rendezvous simulator.",
    )
    ap.add_argument("--grid", type=_csv_list(int), default=None,
                    help="grid side(s), comma separated (default 3,4,5); N = n*n")
    ap.add_argument("--channels", type=_csv_list(int), default=None,
                    help="channel count(s) N; overrides --grid (n = ceil(sqrt(N)))")
    ap.add_argument("--scheme", type=_schemes, default=ALL_SCHEMES,
                    help="1x1, 2x1, 2x2, adaptive, comma list or 'all' (default all)")
    ap.add_argument("--p-idle", type=_csv_list(float), default=None,
                    help="channel idle probability value(s)")
    ap.add_argument("--pairs", type=_csv_list(int), default=None,
                    help="number of SU pairs, value(s)")
    ap.add_argument("--sweep", choices=("p-idle", "pairs"), default=None,
                    help="fill that axis with its default range (0.1..1.0 or 4..50)")
    ap.add_argument("--slots", type=int, default=DEFAULT_SLOTS)
    ap.add_argument("--seed", "--seeds", dest="seeds", type=_csv_list(int), default=(1,),
                    help="base seed(s); one row per seed")
    ap.add_argument("--pu-mode", choices=[m.value for m in PuMode], default=PuMode.IID.value)
    ap.add_argument("--mean-idle", type=float, default=DEFAULT_MEAN_IDLE,
                    help="mean idle period in slots (markov mode)")
    ap.add_argument("--contention", action="store_true",
                    help="allow one success per channel per slot")
    ap.add_argument("--reselect", choices=[p.value for p in ReselectPolicy],
                    default=ReselectPolicy.PER_CYCLE.value)
    ap.add_argument("--two-cols", action="store_true",
                    help="2x1 picks one row and two columns instead of two rows and one column")
    ap.add_argument("--low-max", type=int, default=LoadThresholds.low_max)
    ap.add_argument("--high-min", type=int, default=LoadThresholds.high_min)
    ap.add_argument("--out", default="results", help="output directory")
    ap.add_argument("--name", default="results", help="CSV base name inside --out")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes")
    ap.add_argument("--validate", action="store_true",
                    help="check closed-form case counts against exhaustive enumeration")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def spec_from_args(args: argparse.Namespace) -> SweepSpec:
    if args.sweep == "pairs":
        pairs = args.pairs or PAIRS_SWEEP
        p_idle = args.p_idle or PAIRS_SWEEP_P_IDLE
    else:
        pairs = args.pairs or DEFAULT_PAIRS
        p_idle = args.p_idle or DEFAULT_P_IDLE
    base = dict(
        pu_mode=PuMode(args.pu_mode),
        mean_idle=args.mean_idle,
        contention_enabled=args.contention,
        reselect_policy=ReselectPolicy(args.reselect),
        thresholds=LoadThresholds(args.low_max, args.high_min),
        two_cols=args.two_cols,
    )
    return SweepSpec(
        grid_sides=args.grid or (3, 4, 5),
        channels=args.channels,
        p_idle=p_idle,
        pairs=pairs,
        schemes=args.scheme,
        seeds=args.seeds,
        slots=args.slots,
        base=base,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")

    if args.validate:
        sides = args.grid or (3, 4, 5)
        ok = validate_formulas(sides)
        print("ALL PASS" if ok else "SOME CASES FAILED")
        return 0 if ok else 1

    try:
        spec = spec_from_args(args)
        rows = run_matrix(spec, jobs=args.jobs)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    try:
        os.makedirs(args.out, exist_ok=True)
        csv_name = f"{args.name}.csv"
        write_csv(rows, os.path.join(args.out, csv_name))
        axis = "num_pairs" if args.sweep == "pairs" else None
        for metric in METRIC_NAMES:
            emit_plot_script(rows, metric, os.path.join(args.out, f"{args.name}_{metric}.gp"),
                             csv_name=csv_name, x_axis=axis)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {len(rows)} rows to {os.path.join(args.out, csv_name)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
