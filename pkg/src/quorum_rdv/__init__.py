"""Grid-quorum channel-hopping rendezvous for cognitive radio networks."""

from .adaptive_policy import AdaptivePolicy, LoadRegion, LoadThresholds, classify_load, scheme_for_region
from .metrics_report import MetricRow, derive_metrics, emit_plot_script, read_csv, write_csv
from .pu_activity import PuChannelProcess, PuMode, from_idle_probability
from .quorum_core import (
    AnalyticCase,
    GridQuorum,
    QuorumSelection,
    Scheme,
    brute_force_intersection_stats,
    build_grid,
    classify_case,
    expected_rdv_per_slot,
    guaranteed_rdv_count,
    intersect,
    quorum_slots,
    random_selection,
)
from .sim_engine import ExperimentConfig, ReselectPolicy, RunStats, World, run, run_reference

__version__ = "0.1.0"
