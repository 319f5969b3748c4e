"""Swept-volume labeling of motion abstractions and safety-constrained planning."""

from .abstraction import (
    AbstractionConfig,
    ControlInput,
    FootprintSpec,
    State5,
    Trajectory,
    TransitionSystem,
    build_abstraction,
    integrate_bicycle,
    sweep_system,
    sweep_voxelize,
    translate_system,
)
from .buchi import BuchiAutomaton, MonitorNfa, Verdict, build_monitor, run_monitor
from .labeling import (
    CsrBoolMatrix,
    DensePropMatrix,
    LabeledGraph,
    LabelMatrix,
    SweptVolumeEncoder,
    SweptVolumeLabeler,
    apply_labels,
    label_all,
    label_edge_counting,
    to_csr,
)
from .ltl import Alphabet, parse_ltl, satisfies_lasso, to_text
from .planner import Path, build_product, check_trace, shortest_safe_path
from .workspace import GridSpec, OccupancyBitset, rasterize_box, z_index

__version__ = "0.1.0"
