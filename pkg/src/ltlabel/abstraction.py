"""Discrete abstractions of single-track vehicle mobility.

States are ``(p_x, p_y, theta, v, tau)`` with ``tau`` the clock, so that a
trajectory traces a path through the time-augmented workspace ``(x, y, t)``.
Edges are forward-integrated motion primitives; each carries its sampled
trajectory, constant control and cost.
"""

from __future__ import annotations

import json
import math
import struct
import warnings
from collections.abc import Callable, Sequence
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from . import _kernels
from .workspace import GridSpec, OccupancyBitset

__all__ = [
    "State5",
    "ControlInput",
    "FootprintSpec",
    "Trajectory",
    "TransitionSystem",
    "AbstractionConfig",
    "InfeasibleConfigError",
    "wrap_angle",
    "integrate_bicycle",
    "footprint_polygon",
    "sweep_voxelize",
    "sweep_samples",
    "sweep_system",
    "build_abstraction",
    "translate_system",
    "edge_cost",
    "reintegration_error",
]

PX, PY, TH, V, TAU = range(5)


def wrap_angle(theta):
    """Map angles into ``(-pi, pi]``."""
    return np.pi - np.mod(np.pi - np.asarray(theta, dtype=np.float64), 2 * np.pi)


@dataclass(frozen=True)
class State5:
    px: float
    py: float
    theta: float
    v: float
    tau: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.px, self.py, self.theta, self.v, self.tau], dtype=np.float64)

    @classmethod
    def from_array(cls, a) -> "State5":
        a = np.asarray(a, dtype=np.float64)
        return cls(*(float(x) for x in a[:5]))


@dataclass(frozen=True)
class ControlInput:
    delta: float
    accel: float = 0.0


@dataclass(frozen=True)
class FootprintSpec:
    """Rectangle of ``length`` x ``width`` whose centre sits ``offset`` ahead of the reference point."""

    length: float = 4.5
    width: float = 2.0
    offset: float = 0.0

    def __post_init__(self):
        if not (self.length > 0 and self.width > 0):
            raise ValueError("footprint dimensions must be positive")

    @property
    def radius(self) -> float:
        return math.hypot(self.length / 2, self.width / 2) + abs(self.offset)


@dataclass
class Trajectory:
    samples: np.ndarray  # (n, 5)
    h: float

    @property
    def duration(self) -> float:
        return (len(self.samples) - 1) * self.h

    @property
    def start(self) -> State5:
        return State5.from_array(self.samples[0])

    @property
    def end(self) -> State5:
        return State5.from_array(self.samples[-1])

    def __len__(self) -> int:
        return len(self.samples)


class InfeasibleConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# dynamics


def _rhs(x, u, wheelbase):
    th, v = x[:, TH], x[:, V]
    delta, a = u[:, 0], u[:, 1]
    out = np.empty_like(x)
    out[:, PX] = v * np.cos(th + delta)
    out[:, PY] = v * np.sin(th + delta)
    out[:, TH] = v / wheelbase * np.sin(delta)
    out[:, V] = a
    out[:, TAU] = 1.0
    return out


def _rk4_batch(x0, u, h, n_steps, wheelbase):
    """Integrate ``B`` states under constant controls; returns ``(B, n_steps + 1, 5)``."""
    x0 = np.asarray(x0, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    out = np.empty((x0.shape[0], n_steps + 1, 5))
    x = x0.copy()
    out[:, 0] = x
    for i in range(n_steps):
        k1 = _rhs(x, u, wheelbase)
        k2 = _rhs(x + 0.5 * h * k1, u, wheelbase)
        k3 = _rhs(x + 0.5 * h * k2, u, wheelbase)
        k4 = _rhs(x + h * k3, u, wheelbase)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[:, i + 1] = x
    # the clock is exact, headings are reported wrapped
    out[:, :, TAU] = x0[:, None, TAU] + h * np.arange(n_steps + 1)
    out[:, :, TH] = wrap_angle(out[:, :, TH])
    return out


def _n_steps(T: float, h: float) -> int:
    n = round(T / h)
    if n < 0 or not math.isclose(n * h, T, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError(f"duration {T} is not a multiple of the step {h}")
    return int(n)


def integrate_bicycle(
    x0,
    u,
    h: float,
    T: float | None = None,
    *,
    wheelbase: float = 2.7,
    delta_max: float = 0.7,
    a_max: float = 8.0,
) -> Trajectory:
    """Classical RK4 integration of the kinematic single-track model.

    ``u`` is a single :class:`ControlInput` held for ``T`` seconds, or a
    schedule of ``(ControlInput, duration)`` pairs (``T`` then defaults to
    their total).
    """
    if not h > 0:
        raise ValueError("step h must be positive")
    if not wheelbase > 0:
        raise ValueError("wheelbase must be positive")
    schedule = [(u, T)] if isinstance(u, ControlInput) else list(u)
    if T is not None and not isinstance(u, ControlInput):
        total = sum(d for _, d in schedule)
        if not math.isclose(total, T, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError(f"schedule lasts {total} s, expected {T}")
    if any(d is None for _, d in schedule):
        raise ValueError("a duration is required")
    x = State5.from_array(x0).as_array() if not isinstance(x0, State5) else x0.as_array()
    pieces = [x[None, :]]
    tau0 = x[TAU]
    k = 0
    for ctrl, dur in schedule:
        if abs(ctrl.delta) > delta_max or abs(ctrl.accel) > a_max:
            raise ValueError(f"control {ctrl} exceeds bounds (|delta| <= {delta_max}, |a| <= {a_max})")
        n = _n_steps(dur, h)
        if n == 0:
            continue
        seg = _rk4_batch(x[None, :], [[ctrl.delta, ctrl.accel]], h, n, wheelbase)[0]
        k += n
        seg[:, TAU] = tau0 + h * np.arange(k - n, k + 1)
        pieces.append(seg[1:])
        x = seg[-1]
    return Trajectory(np.concatenate(pieces), float(h))


def edge_cost(tr: Trajectory, g: Callable[[np.ndarray], np.ndarray] | None = None) -> float:
    """Integral of the running cost ``g`` along ``tr``; ``g = None`` means duration."""
    if g is None:
        return tr.duration
    vals = np.asarray(g(tr.samples), dtype=np.float64)
    return float(np.trapezoid(vals, dx=tr.h))


# --------------------------------------------------------------------------
# footprints and sweeping


def footprint_polygon(x, f: FootprintSpec) -> np.ndarray:
    """Corners ``(4, 2)`` of the footprint, counter-clockwise from rear-right."""
    s = x.as_array() if isinstance(x, State5) else np.asarray(x, dtype=np.float64)
    c, sn = math.cos(s[TH]), math.sin(s[TH])
    cx, cy = s[PX] + f.offset * c, s[PY] + f.offset * sn
    local = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], dtype=np.float64)
    local *= [f.length / 2, f.width / 2]
    rot = np.array([[c, -sn], [sn, c]])
    return local @ rot.T + [cx, cy]


def _footprint_aabb(samples: np.ndarray, f: FootprintSpec) -> tuple[np.ndarray, np.ndarray]:
    c, s = np.cos(samples[..., TH]), np.sin(samples[..., TH])
    cx = samples[..., PX] + f.offset * c
    cy = samples[..., PY] + f.offset * s
    ex = np.abs(c) * f.length / 2 + np.abs(s) * f.width / 2
    ey = np.abs(s) * f.length / 2 + np.abs(c) * f.width / 2
    lo = np.stack([cx - ex, cy - ey], axis=-1)
    hi = np.stack([cx + ex, cy + ey], axis=-1)
    return lo, hi


def _inside(samples: np.ndarray, f: FootprintSpec, bounds) -> np.ndarray:
    """Per-trajectory flag: every footprint and clock value lies in the workspace."""
    (x0, x1), (y0, y1), (t0, t1) = bounds
    lo, hi = _footprint_aabb(samples, f)
    ok = (lo[..., 0] >= x0) & (hi[..., 0] <= x1) & (lo[..., 1] >= y0) & (hi[..., 1] <= y1)
    tau = samples[..., TAU]
    ok &= (tau >= t0) & (tau < t1)
    return ok.all(axis=-1)


def _grid_args(g: GridSpec):
    if g.k != 3:
        raise ValueError(f"sweeping needs a 3-axis (x, y, t) grid, got k={g.k}")
    axis, abit = g._level_axis
    return (
        np.ascontiguousarray(g.lower),
        np.ascontiguousarray(g.upper),
        np.asarray(g.axis_bits, dtype=np.int64),
        axis,
        abit,
        g.depth,
    )


def _sweep(samples: np.ndarray, f: FootprintSpec, g: GridSpec):
    samples = np.ascontiguousarray(samples, dtype=np.float64)
    if samples.ndim != 3 or samples.shape[2] != 5:
        raise ValueError(f"samples must have shape (E, n, 5), got {samples.shape}")
    if samples.shape[0] and not _inside(samples, f, g.bounds).all():
        raise ValueError("trajectory exits the workspace")
    return _kernels.sweep_csr(samples, float(f.offset), f.length / 2, f.width / 2, *_grid_args(g))


def sweep_voxelize(tr: Trajectory, f: FootprintSpec, g: GridSpec) -> OccupancyBitset:
    """Cells met by the footprint at some sample, each in the time slab of that sample."""
    _, idx = _sweep(tr.samples[None], f, g)
    return OccupancyBitset.from_indices(g, idx)


def sweep_samples(samples: np.ndarray, f: FootprintSpec, g: GridSpec):
    """Swept volumes of a batch ``(E, n, 5)`` of sampled trajectories, one CSR row each."""
    from .labeling import CsrBoolMatrix

    offsets, idx = _sweep(samples, f, g)
    return CsrBoolMatrix(offsets, idx.astype(np.int64), g.n_cells)


def sweep_system(system: "TransitionSystem", f: FootprintSpec | None, g: GridSpec):
    """Swept volumes of every edge as a :class:`~ltlabel.labeling.CsrBoolMatrix`."""
    return sweep_samples(system.samples, f or system.footprint, g)


# --------------------------------------------------------------------------
# transition systems


@dataclass
class TransitionSystem:
    states: np.ndarray  # (V, 5)
    edges: np.ndarray  # (E, 2) int64
    controls: np.ndarray  # (E, 2): steering, acceleration
    costs: np.ndarray  # (E,)
    samples: np.ndarray  # (E, n, 5)
    h: float
    wheelbase: float = 2.7
    footprint: FootprintSpec = field(default_factory=FootprintSpec)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.float64).reshape(-1, 5)
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        E = len(self.edges)
        self.controls = np.asarray(self.controls, dtype=np.float64).reshape(E, 2)
        self.costs = np.asarray(self.costs, dtype=np.float64).reshape(E)
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if E == 0:
            self.samples = self.samples.reshape(0, max(1, self.samples.shape[1] if self.samples.ndim == 3 else 1), 5)
        if self.samples.ndim != 3 or self.samples.shape[0] != E or self.samples.shape[2] != 5:
            raise ValueError(f"samples must have shape ({E}, n, 5), got {self.samples.shape}")
        if E and (self.edges.min() < 0 or self.edges.max() >= len(self.states)):
            raise ValueError("edge endpoint out of range")
        if np.any(self.costs < 0):
            raise ValueError("edge costs must be nonnegative")

    @property
    def n_vertices(self) -> int:
        return len(self.states)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def trajectory(self, e: int) -> Trajectory:
        return Trajectory(self.samples[e], self.h)

    def control(self, e: int) -> ControlInput:
        return ControlInput(*self.controls[e])

    def endpoint_error(self) -> np.ndarray:
        """Per-edge max-norm gap between trajectory ends and the stored endpoint states."""
        if not self.n_edges:
            return np.zeros(0)
        a = self.samples[:, 0] - self.states[self.edges[:, 0]]
        b = self.samples[:, -1] - self.states[self.edges[:, 1]]
        for d in (a, b):
            d[:, TH] = wrap_angle(d[:, TH])
        return np.maximum(np.abs(a).max(axis=1), np.abs(b).max(axis=1))

    def __eq__(self, other) -> bool:
        if not isinstance(other, TransitionSystem):
            return NotImplemented
        return (
            self.h == other.h
            and self.wheelbase == other.wheelbase
            and self.footprint == other.footprint
            and all(
                np.array_equal(getattr(self, k), getattr(other, k))
                for k in ("states", "edges", "controls", "costs", "samples")
            )
        )

    # --- file format: magic, version, JSON header, little-endian blocks
    MAGIC = b"LTTS"
    VERSION = 1

    def to_bytes(self) -> bytes:
        header = {
            "n_vertices": self.n_vertices,
            "n_edges": self.n_edges,
            "n_samples": int(self.samples.shape[1]),
            "h": self.h,
            "wheelbase": self.wheelbase,
            "footprint": asdict(self.footprint),
            "meta": self.meta,
        }
        raw = json.dumps(header, sort_keys=True).encode()
        parts = [self.MAGIC, struct.pack("<II", self.VERSION, len(raw)), raw]
        parts.append(self.states.astype("<f8").tobytes())
        parts.append(self.edges.astype("<i8").tobytes())
        parts.append(self.controls.astype("<f8").tobytes())
        parts.append(self.costs.astype("<f8").tobytes())
        parts.append(self.samples.astype("<f8").tobytes())
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "TransitionSystem":
        if data[:4] != cls.MAGIC:
            raise ValueError("not a transition system file")
        version, hlen = struct.unpack_from("<II", data, 4)
        if version != cls.VERSION:
            raise ValueError(f"unsupported transition system version {version}")
        head = json.loads(data[12 : 12 + hlen])
        off = 12 + hlen
        V, E, n = head["n_vertices"], head["n_edges"], head["n_samples"]

        def take(dtype, count, shape):
            nonlocal off
            arr = np.frombuffer(data, dtype=dtype, count=count, offset=off).reshape(shape)
            off += arr.nbytes
            return arr.astype(dtype[1:])

        states = take("<f8", V * 5, (V, 5))
        edges = take("<i8", E * 2, (E, 2))
        controls = take("<f8", E * 2, (E, 2))
        costs = take("<f8", E, (E,))
        samples = take("<f8", E * n * 5, (E, n, 5))
        return cls(
            states, edges, controls, costs, samples, head["h"], head["wheelbase"],
            FootprintSpec(**head["footprint"]), head["meta"],
        )

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "TransitionSystem":
        return cls.from_bytes(Path(path).read_bytes())


# --------------------------------------------------------------------------
# construction


@dataclass(frozen=True)
class AbstractionConfig:
    """Parameters of the primitive-fan roadmap.

    ``n_neighbors`` controls are drawn (without replacement) from the
    steering x acceleration grid at every expanded vertex.  When
    ``loop_radius`` is set, roots are placed near a counter-clockwise circle
    centred on the origin, and the steering that tracks the circle is added
    to the grid.
    """

    n_vertices: int = 1000
    n_neighbors: int = 4
    steer_grid: tuple[float, ...] = (-0.3, -0.1, 0.0, 0.1, 0.3)
    accel_grid: tuple[float, ...] = (-2.0, 0.0, 2.0)
    primitive_duration: float = 0.5
    h: float = 0.025
    bounds: tuple[tuple[float, float], ...] = ((-64.0, 64.0), (-64.0, 64.0), (0.0, 8.0))
    v_range: tuple[float, float] = (0.0, 15.0)
    v_init: tuple[float, float] = (5.0, 12.0)
    wheelbase: float = 2.7
    footprint: FootprintSpec = FootprintSpec()
    eps_end: float = 1e-3
    n_roots: int = 1
    max_edges: int | None = None
    loop_radius: float | None = None
    loop_sigma: float = 1.0
    delta_max: float = 0.7
    a_max: float = 8.0

    def validate(self) -> None:
        if self.n_vertices < 1 or self.n_neighbors < 1 or self.n_roots < 1:
            raise InfeasibleConfigError("vertex, neighbor and root counts must be positive")
        if not self.steer_grid or not self.accel_grid:
            raise InfeasibleConfigError("control grids must be nonempty")
        if any(abs(d) > self.delta_max for d in self.steer_grid):
            raise InfeasibleConfigError("steering grid exceeds delta_max")
        if any(abs(a) > self.a_max for a in self.accel_grid):
            raise InfeasibleConfigError("acceleration grid exceeds a_max")
        if len(self.bounds) != 3:
            raise InfeasibleConfigError("bounds must give x, y and time intervals")
        _n_steps(self.primitive_duration, self.h)
        if self.primitive_duration <= 0:
            raise InfeasibleConfigError("primitive duration must be positive")
        r = self.footprint.radius
        if any(hi - lo <= 2 * r for lo, hi in self.bounds[:2]):
            raise InfeasibleConfigError("workspace is too small for the footprint")
        (t0, t1) = self.bounds[2]
        if t1 - t0 <= self.primitive_duration:
            raise InfeasibleConfigError("time horizon shorter than one primitive")

    def controls(self) -> np.ndarray:
        steer = list(self.steer_grid)
        if self.loop_radius:
            track = math.asin(min(1.0, self.wheelbase / self.loop_radius))
            if track <= self.delta_max and not any(math.isclose(track, s) for s in steer):
                steer.append(track)
        return np.array([(d, a) for d in sorted(steer) for a in self.accel_grid], dtype=np.float64)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["bounds"] = [list(b) for b in self.bounds]
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "AbstractionConfig":
        doc = dict(doc)
        if "footprint" in doc and isinstance(doc["footprint"], dict):
            doc["footprint"] = FootprintSpec(**doc["footprint"])
        for key in ("steer_grid", "accel_grid", "v_range", "v_init"):
            if key in doc:
                doc[key] = tuple(doc[key])
        if "bounds" in doc:
            doc["bounds"] = tuple(tuple(b) for b in doc["bounds"])
        return cls(**doc)


def _sample_roots(cfg: AbstractionConfig, rng: np.random.Generator, n: int) -> np.ndarray:
    (x0, x1), (y0, y1), (t0, t1) = cfg.bounds
    roots = np.empty((n, 5))
    margin = cfg.footprint.radius
    if cfg.loop_radius:
        phi = rng.uniform(-np.pi, np.pi, n)
        r = cfg.loop_radius + cfg.loop_sigma * rng.standard_normal(n)
        roots[:, PX] = r * np.cos(phi)
        roots[:, PY] = r * np.sin(phi)
        roots[:, TH] = wrap_angle(phi + np.pi / 2)
    else:
        roots[:, PX] = rng.uniform(x0 + margin, x1 - margin, n)
        roots[:, PY] = rng.uniform(y0 + margin, y1 - margin, n)
        roots[:, TH] = wrap_angle(rng.uniform(-np.pi, np.pi, n))
    roots[:, V] = rng.uniform(*cfg.v_init, n)
    last = int(np.floor((t1 - t0 - cfg.primitive_duration) / cfg.h - 1e-9))
    roots[:, TAU] = t0 + cfg.h * rng.integers(0, max(last, 0) + 1, n)
    return roots


def build_abstraction(cfg: AbstractionConfig, seed: int) -> TransitionSystem:
    """Grow a roadmap by breadth-first expansion of motion-primitive fans.

    Endpoints within ``eps_end`` (max norm, raw units) of an existing vertex
    are merged into it; otherwise they become new vertices.  Primitives whose
    swept footprint leaves the workspace, or whose speed leaves ``v_range``,
    are discarded.  The result is a deterministic function of ``(cfg, seed)``.
    """
    cfg.validate()
    rng = np.random.default_rng(seed)
    ctrl = cfg.controls()
    n_steps = _n_steps(cfg.primitive_duration, cfg.h)
    k = min(cfg.n_neighbors, len(ctrl))
    edge_cap = cfg.max_edges if cfg.max_edges is not None else np.iinfo(np.int64).max

    states: list[np.ndarray] = []
    edges: list[tuple[int, int]] = []
    ctrls: list[int] = []
    samples: list[np.ndarray] = []

    def full() -> bool:
        return len(edges) >= edge_cap

    stalls = 0
    while not full() and (len(states) < cfg.n_vertices or cfg.max_edges is not None):
        room = cfg.n_vertices - len(states)
        if room <= 0:
            break
        roots = _sample_roots(cfg, rng, min(cfg.n_roots, room))
        roots = roots[_inside(roots[:, None, :], cfg.footprint, cfg.bounds)]
        frontier = list(range(len(states), len(states) + len(roots)))
        states.extend(roots)
        grown = 0
        while frontier and not full():
            picks = np.stack([rng.choice(len(ctrl), size=k, replace=False) for _ in frontier])
            src = np.repeat(np.asarray(frontier), k)
            u = ctrl[picks.ravel()]
            traj = _rk4_batch(np.asarray(states)[src], u, cfg.h, n_steps, cfg.wheelbase)
            ok = _inside(traj, cfg.footprint, cfg.bounds)
            ok &= (traj[:, :, V] >= cfg.v_range[0]).all(axis=1) & (traj[:, :, V] <= cfg.v_range[1]).all(axis=1)
            ends = traj[:, -1]
            tree = cKDTree(np.asarray(states))
            dist, near = tree.query(ends, k=1, p=np.inf)
            frontier = []
            for i in np.flatnonzero(ok):
                if full():
                    break
                if dist[i] <= cfg.eps_end:
                    dst = int(near[i])
                elif len(states) < cfg.n_vertices:
                    dst = len(states)
                    states.append(ends[i])
                    frontier.append(dst)
                else:
                    continue
                edges.append((int(src[i]), dst))
                ctrls.append(int(picks.ravel()[i]))
                samples.append(traj[i])
                grown += 1
        stalls = 0 if grown else stalls + 1
        if stalls >= 10 or (cfg.max_edges is None and len(states) >= cfg.n_vertices):
            break
    if not edges:
        raise InfeasibleConfigError("no primitive could be connected; check bounds, speeds and control grids")

    E = len(edges)
    samp = np.stack(samples)
    costs = np.full(E, n_steps * cfg.h)
    return TransitionSystem(
        np.asarray(states), np.asarray(edges), ctrl[np.asarray(ctrls)], costs, samp, cfg.h,
        cfg.wheelbase, cfg.footprint, {"config": cfg.to_dict(), "seed": int(seed)},
    )


def translate_system(system: TransitionSystem, delta: Sequence[float], bounds=None) -> TransitionSystem:
    """Apply the planar rigid motion ``(dx, dy, dtheta)`` and clock shift ``dt``.

    Positions rotate by ``dtheta`` about the origin before translating, so
    headings and displacements stay consistent and every edge remains a
    solution of the dynamics.  Costs and connectivity are unchanged.
    """
    dx, dy, dth, dt = (float(x) for x in delta)
    c, s = math.cos(dth), math.sin(dth)

    def move(a: np.ndarray) -> np.ndarray:
        out = a.copy()
        x, y = a[..., PX], a[..., PY]
        out[..., PX] = c * x - s * y + dx
        out[..., PY] = s * x + c * y + dy
        out[..., TH] = wrap_angle(a[..., TH] + dth)
        out[..., TAU] = a[..., TAU] + dt
        return out

    moved = replace(system, states=move(system.states), samples=move(system.samples), meta=dict(system.meta))
    if bounds is not None and moved.n_edges and not _inside(moved.samples, moved.footprint, bounds).all():
        warnings.warn("translated system leaves the workspace bounds", RuntimeWarning, stacklevel=2)
    return moved


def reintegration_error(system: TransitionSystem, edges: Sequence[int] | None = None) -> np.ndarray:
    """Re-integrate edges from their source states; max-norm gap to the stored target states."""
    idx = np.arange(system.n_edges) if edges is None else np.asarray(edges, dtype=np.int64)
    if idx.size == 0:
        return np.zeros(0)
    n = system.samples.shape[1] - 1
    x0 = system.states[system.edges[idx, 0]]
    traj = _rk4_batch(x0, system.controls[idx], system.h, n, system.wheelbase)
    d = traj[:, -1] - system.states[system.edges[idx, 1]]
    d[:, TH] = wrap_angle(d[:, TH])
    return np.abs(d).max(axis=1)
