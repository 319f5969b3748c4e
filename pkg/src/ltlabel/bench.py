"""Circular-loop driving scenarios and the labeling benchmark.

Two propositions are generated per query on the time-augmented workspace:

``moving_vehicle``
    per-slab bounding boxes of agents driving around the loop at constant
    speed and a fixed lateral offset (sparse and dynamic);
``not_nominal_lane``
    every cell not entirely inside the lane annulus (dense and static).
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from ._validation import check_positive_int, check_probability
from .abstraction import AbstractionConfig, TransitionSystem, build_abstraction, sweep_system
from .labeling import CsrBoolMatrix, DensePropMatrix, _kernels, _threads, label_all
from .workspace import GridMismatchError, GridSpec, OccupancyBitset, box_cells, morton_encode

__all__ = [
    "ScenarioConfig",
    "BenchRow",
    "BenchReport",
    "ScalingFit",
    "BernoulliResult",
    "default_grid",
    "bench_config",
    "build_presets",
    "generate_scenario",
    "run_benchmark",
    "fit_scaling",
    "bernoulli_experiment",
    "PROPOSITIONS",
]

PROPOSITIONS = ("moving_vehicle", "not_nominal_lane")
CSV_COLUMNS = ("size", "proposition", "mean_ms", "var_ms", "occupancy_transition", "occupancy_prop", "throughput")


def default_grid(depth: int = 21) -> GridSpec:
    """128 m x 128 m x 8 s workspace centred on the loop."""
    return GridSpec(((-64.0, 64.0), (-64.0, 64.0), (0.0, 8.0)), depth)


@dataclass(frozen=True)
class ScenarioConfig:
    loop_radius: float = 40.0
    lane_width: float = 8.0
    n_agents: int = 5
    speed_range: tuple[float, float] = (5.0, 15.0)
    agent_length: float = 4.5
    agent_width: float = 2.0
    horizon: float = 8.0
    seed: int = 0

    def validate(self, grid: GridSpec) -> None:
        if self.loop_radius <= 0 or self.lane_width <= 0 or self.agent_length <= 0 or self.agent_width <= 0:
            raise ValueError("scenario geometry must be positive")
        if self.n_agents < 0:
            raise ValueError("agent count must be nonnegative")
        if grid.k != 3:
            raise GridMismatchError("scenarios live on an (x, y, t) grid")
        t0, t1 = grid.bounds[2]
        if self.horizon <= 0 or self.horizon > t1 - t0:
            raise ValueError(f"horizon {self.horizon} does not fit the grid's time extent {t1 - t0}")
        reach = self.loop_radius + self.lane_width / 2 + math.hypot(self.agent_length, self.agent_width) / 2
        (x0, x1), (y0, y1) = grid.bounds[:2]
        if -reach < x0 or reach > x1 or -reach < y0 or reach > y1:
            raise ValueError("agents would leave the workspace")


@lru_cache(maxsize=8)
def _lane_bitset(grid: GridSpec, radius: float, width: float) -> OccupancyBitset:
    nx, ny, nt = (int(n) for n in grid.cells_per_axis)
    xe = grid.edge(0, np.arange(nx + 1))
    ye = grid.edge(1, np.arange(ny + 1))
    x0, x1 = xe[:-1, None], xe[1:, None]
    y0, y1 = ye[None, :-1], ye[None, 1:]
    far = np.maximum(x0**2, x1**2) + np.maximum(y0**2, y1**2)
    near = np.clip(0.0, x0, x1) ** 2 + np.clip(0.0, y0, y1) ** 2
    inner, outer = radius - width / 2, radius + width / 2
    in_lane = (far <= outer**2) & (near >= max(inner, 0.0) ** 2)
    i, j = np.nonzero(~in_lane)
    coords = np.empty((i.size * nt, 3), dtype=np.int64)
    coords[:, 0] = np.repeat(i, nt)
    coords[:, 1] = np.repeat(j, nt)
    coords[:, 2] = np.tile(np.arange(nt), i.size)
    return OccupancyBitset.from_indices(grid, morton_encode(coords, grid))


def _agent_boxes(cfg: ScenarioConfig, grid: GridSpec, rng: np.random.Generator) -> np.ndarray:
    """``(n_agents * n_slabs, 3, 2)`` boxes covering each agent during each time slab."""
    nt = int(grid.cells_per_axis[2])
    t_edges = grid.edge(2, np.arange(nt + 1))
    t_edges = t_edges[t_edges < grid.bounds[2][0] + cfg.horizon + 1e-12]
    n = cfg.n_agents
    phi0 = rng.uniform(-np.pi, np.pi, n)
    speed = rng.uniform(*cfg.speed_range, n)
    half_lane = max(cfg.lane_width / 2 - cfg.agent_width / 2, 0.0)
    radius = cfg.loop_radius + rng.uniform(-half_lane, half_lane, n)
    pad = math.hypot(cfg.agent_length, cfg.agent_width) / 2
    t = t_edges - grid.bounds[2][0]
    # positions at the slab boundaries and midpoints bound each short arc
    ts = np.sort(np.concatenate([t, 0.5 * (t[1:] + t[:-1])]))
    ang = phi0[:, None] + speed[:, None] / radius[:, None] * ts[None, :]
    px = radius[:, None] * np.cos(ang)
    py = radius[:, None] * np.sin(ang)
    boxes = []
    for s in range(len(t) - 1):
        seg = slice(2 * s, 2 * s + 3)
        lo = np.stack([px[:, seg].min(1) - pad, py[:, seg].min(1) - pad], axis=1)
        hi = np.stack([px[:, seg].max(1) + pad, py[:, seg].max(1) + pad], axis=1)
        b = np.empty((n, 3, 2))
        b[:, :2, 0], b[:, :2, 1] = lo, hi
        b[:, 2] = (t_edges[s], t_edges[s + 1])
        boxes.append(b)
    return np.concatenate(boxes) if boxes else np.empty((0, 3, 2))


def generate_scenario(cfg: ScenarioConfig, grid: GridSpec, query: int = 0) -> dict[str, OccupancyBitset]:
    """Proposition occupancy for one query; deterministic in ``(cfg.seed, query)``."""
    cfg.validate(grid)
    rng = np.random.default_rng([cfg.seed, query])
    boxes = _agent_boxes(cfg, grid, rng)
    idx = [box_cells(b, grid) for b in boxes]
    cells = np.concatenate(idx) if idx else np.empty(0, dtype=np.uint64)
    return {
        "moving_vehicle": OccupancyBitset.from_indices(grid, cells),
        "not_nominal_lane": _lane_bitset(grid, cfg.loop_radius, cfg.lane_width),
    }


# --------------------------------------------------------------------------
# presets


def bench_config(n_edges: int, scenario: ScenarioConfig | None = None, grid: GridSpec | None = None) -> AbstractionConfig:
    """Roadmap configuration for a benchmark preset of ``n_edges`` transitions.

    Roots are spread around the loop so that part of the roadmap stays inside
    the lane, as a lane-following planner's would.
    """
    scenario = scenario or ScenarioConfig()
    grid = grid or default_grid()
    return AbstractionConfig(
        n_vertices=2 * n_edges + 1000,
        n_neighbors=4,
        steer_grid=(-0.1, -0.03, 0.0, 0.03, 0.1),
        accel_grid=(-1.0, 0.0, 1.0),
        primitive_duration=0.5,
        h=0.025,
        bounds=grid.bounds,
        v_range=(0.0, 15.0),
        v_init=(6.0, 12.0),
        n_roots=max(16, n_edges // 200),
        max_edges=n_edges,
        loop_radius=scenario.loop_radius,
        loop_sigma=scenario.lane_width / 8,
    )


def build_presets(sizes, seed: int, scenario: ScenarioConfig | None = None, grid: GridSpec | None = None) -> list[TransitionSystem]:
    return [build_abstraction(bench_config(int(n), scenario, grid), seed=seed + i) for i, n in enumerate(sizes)]


# --------------------------------------------------------------------------
# benchmark


@dataclass(frozen=True)
class BenchRow:
    size: int
    proposition: str
    mean_ms: float
    var_ms: float
    occupancy_transition: float
    occupancy_prop: float
    throughput: float


@dataclass
class BenchReport:
    rows: list[BenchRow]
    queries: int
    # bytes of CSR indices streamed per second, an upper estimate that is not
    # comparable to device memory bandwidth figures
    bandwidth_estimate: dict[tuple[int, str], float] = field(default_factory=dict)
    times_ms: dict[tuple[int, str], np.ndarray] = field(default_factory=dict, repr=False)

    def row(self, size: int, proposition: str) -> BenchRow:
        for r in self.rows:
            if r.size == size and r.proposition == proposition:
                return r
        raise KeyError((size, proposition))

    @property
    def sizes(self) -> list[int]:
        return sorted({r.size for r in self.rows})

    @property
    def propositions(self) -> list[str]:
        return list(dict.fromkeys(r.proposition for r in self.rows))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow(asdict(r))
        return buf.getvalue()

    def time_ratio(self, slow: str = "moving_vehicle", fast: str = "not_nominal_lane") -> dict[int, float]:
        return {n: self.row(n, slow).mean_ms / self.row(n, fast).mean_ms for n in self.sizes}


def run_benchmark(
    presets: list[TransitionSystem] | list[CsrBoolMatrix],
    cfg: ScenarioConfig,
    grid: GridSpec,
    *,
    queries: int = 150,
    workers: int | None = None,
    propositions=PROPOSITIONS,
) -> BenchReport:
    """Time :func:`label_all` per preset and proposition over ``queries`` scenarios."""
    check_positive_int(queries, "queries")
    cfg.validate(grid)
    mats = []
    for p in presets:
        m = p if isinstance(p, CsrBoolMatrix) else sweep_system(p, None, grid)
        if m.n_cols != grid.n_cells:
            raise GridMismatchError(f"preset has {m.n_cols} columns, grid has {grid.n_cells} cells")
        mats.append(m)
    scenes = [generate_scenario(cfg, grid, q) for q in range(queries)]
    cols = {name: [DensePropMatrix.from_bitsets([s[name]], [name]) for s in scenes] for name in propositions}
    cells = [(k, name) for k in range(len(mats)) for name in propositions]
    t = np.empty((len(cells), queries))
    with _threads(workers):
        for k, name in cells:
            label_all(mats[k], cols[name][0])  # warm-up
        # queries outermost, so slow drift of the machine hits every cell alike
        for q in range(queries):
            for c, (k, name) in enumerate(cells):
                t0 = time.perf_counter()
                label_all(mats[k], cols[name][q])
                t[c, q] = time.perf_counter() - t0
    rows, bw, raw = [], {}, {}
    for c, (k, name) in enumerate(cells):
        M = mats[k]
        ms = t[c] * 1e3
        mean_s = float(t[c].mean())
        occ_p = float(np.mean([s[name].occupancy() for s in scenes]))
        rows.append(
            BenchRow(
                M.n_rows, name, float(ms.mean()), float(ms.var(ddof=1)) if queries > 1 else 0.0,
                float(M.row_nnz().mean() / M.n_cols) if M.n_rows else 0.0, occ_p, M.n_rows / mean_s,
            )
        )
        bw[(M.n_rows, name)] = M.nnz * M.col_indices.itemsize / mean_s
        raw[(M.n_rows, name)] = ms
    return BenchReport(rows, queries, bw, raw)


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    sizes: np.ndarray
    residuals: np.ndarray  # relative to the measured value

    @property
    def max_residual(self) -> float:
        return float(np.abs(self.residuals).max())


def fit_scaling(report: BenchReport) -> dict[str, ScalingFit]:
    """Least-squares line of mean time against transition count, per proposition."""
    sizes = report.sizes
    if len(sizes) < 3:
        raise ValueError(f"at least 3 sizes are needed for a fit, got {len(sizes)}")
    out = {}
    for name in report.propositions:
        x = np.array(sizes, dtype=np.float64)
        y = np.array([report.row(n, name).mean_ms for n in sizes])
        slope, intercept = np.polyfit(x, y, 1)
        fit = slope * x + intercept
        out[name] = ScalingFit(float(slope), float(intercept), x, (y - fit) / y)
    return out


# --------------------------------------------------------------------------
# early-termination statistics


@dataclass(frozen=True)
class BernoulliResult:
    mean: float
    prediction: float
    trials: int
    row_length: int
    truncated: int

    @property
    def relative_error(self) -> float:
        return abs(self.mean - self.prediction) / self.prediction


def bernoulli_experiment(
    p_mot: float,
    p_pred: float,
    trials: int = 100_000,
    n: int | None = None,
    seed: int = 0,
    *,
    chunk: int = 4096,
) -> BernoulliResult:
    """Mean number of cells scanned until a row and a column are both occupied.

    Each trial draws a row (occupied with probability ``p_mot``) and a
    proposition column (probability ``p_pred``) over ``n`` cells, stores the
    row in CSR form and finds the first shared cell with the labeling
    kernel.  The count is the witness position plus one, or ``n`` without a
    witness.  Rows and columns come from separate streams thresholded
    against the same uniforms, so the result is monotone in either
    probability for a fixed seed.
    """
    p_mot = check_probability(p_mot, "p_mot")
    p_pred = check_probability(p_pred, "p_pred")
    trials = check_positive_int(trials, "trials")
    prediction = 1.0 / (p_mot * p_pred)
    if n is None:
        n = max(64, int(math.ceil(20 * prediction)))
    n = check_positive_int(n, "n")
    row_rng = np.random.default_rng([seed, 0])
    col_rng = np.random.default_rng([seed, 1])
    total = 0
    truncated = 0
    done = 0
    chunk = max(1, min(chunk, max(1, 2**26 // n)))
    while done < trials:
        b = min(chunk, trials - done)
        rows = row_rng.random((b, n)) < p_mot
        col = col_rng.random(b * n) < p_pred
        r, c = np.nonzero(rows)
        offsets = np.zeros(b + 1, dtype=np.int64)
        np.cumsum(np.bincount(r, minlength=b), out=offsets[1:])
        M = CsrBoolMatrix(offsets, r * n + c, b * n)
        P = DensePropMatrix.from_dense(col[:, None])
        hit = np.zeros((b, 1), dtype=np.bool_)
        read = np.zeros((b, 1), dtype=np.int64)
        _kernels.label_rows_counting(M.row_offsets, M.col_indices, P.words, hit, read)
        pos = np.full(b, n, dtype=np.int64)
        ok = hit[:, 0]
        witness = M.col_indices[offsets[:-1][ok] + read[ok, 0] - 1]
        pos[ok] = witness - np.flatnonzero(ok) * n + 1
        total += int(pos.sum())
        truncated += int((~ok).sum())
        done += b
    return BernoulliResult(total / trials, prediction, trials, n, truncated)
