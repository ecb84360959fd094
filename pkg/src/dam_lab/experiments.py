"""Random bipolar datasets, the recall metric and hyperparameter sweeps."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .core import Family, Formulation, InteractionSpec, NetworkConfig, Precision, as_states
from .dynamics import relax
from .training import TrainConfig, train

log = logging.getLogger(__name__)

DEFAULT_MAX_SWEEPS = 50

COARSE_LEARNING_RATES = tuple(float(v) for v in np.logspace(-2, 1, 7))
COARSE_INVERSE_TEMPERATURES = tuple(float(v) for v in np.logspace(-4, 1, 11))
FINE_LEARNING_RATES = (0.1, 0.2, 0.5, 1.0, 2.0)
FINE_INVERSE_TEMPERATURES = {
    Formulation.ORIGINAL: (0.005, 0.0075, 0.01, 0.0125, 0.015),
    Formulation.MODIFIED: (0.6, 0.75, 0.9, 1.05, 1.2),
}
PAPER_VERTICES = (2, 5, 10, 20)


def generate_bipolar_dataset(count: int, dim: int, seed: int) -> np.ndarray:
    """``count`` i.i.d. uniform bipolar vectors of length ``dim``."""
    if count < 1 or dim < 1:
        raise ValueError("count and dim must be >= 1")
    rng = np.random.default_rng(seed)
    return (2 * rng.integers(0, 2, size=(count, dim)) - 1).astype(np.int8)


def recall_distance(memories, learned_states, network: NetworkConfig,
                    max_sweeps: int = DEFAULT_MAX_SWEEPS, order_seed: int = 0,
                    details: bool = False):
    """Mean Euclidean distance between each learned state and its relaxed image.

    Each learned state is used as its own probe. With ``details=True`` the
    list of :class:`~dam_lab.dynamics.RelaxResult` is returned as well.
    """
    states = as_states(learned_states, network.dim)
    results = []
    total = 0.0
    for k, state in enumerate(states):
        res = relax(memories, state, network, max_sweeps,
                    order_seed=_mix(order_seed, k))
        diff = res.final_state.astype(np.float64) - state
        total += math.sqrt(float(diff @ diff))
        results.append(res)
    mean = total / len(states)
    return (mean, results) if details else mean


def _mix(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


@dataclass(frozen=True)
class SweepGrid:
    formulation: Formulation
    family: Family
    vertices: Tuple[int, ...]
    learning_rates: Tuple[float, ...]
    inverse_temperatures: Tuple[float, ...]
    repeats: int = 5
    base_seed: int = 0
    patterns: int = 20
    dim: int = 100
    leak: float = 0.01
    precision: Precision = Precision.DOUBLE
    max_sweeps: int = DEFAULT_MAX_SWEEPS
    train: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "formulation", Formulation(self.formulation))
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "precision", Precision(self.precision))
        for name in ("vertices", "learning_rates", "inverse_temperatures"):
            values = tuple(getattr(self, name))
            if not values:
                raise ValueError(f"{name} must be non-empty")
            object.__setattr__(self, name, values)
        object.__setattr__(self, "vertices", tuple(int(v) for v in self.vertices))
        if any(not (v > 0 and math.isfinite(v)) for v in self.inverse_temperatures):
            raise ValueError("inverse_temperatures must all be > 0")
        if any(not (v > 0 and math.isfinite(v)) for v in self.learning_rates):
            raise ValueError("learning_rates must all be > 0")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.patterns < 1 or self.dim < 1:
            raise ValueError("patterns and dim must be >= 1")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        known = {f.name for f in fields(TrainConfig)} - {"initial_lr", "seed"}
        extra = set(self.train) - known
        if extra:
            raise ValueError(f"unknown train overrides: {sorted(extra)}")

    @property
    def size(self) -> int:
        return (len(self.vertices) * len(self.learning_rates)
                * len(self.inverse_temperatures) * self.repeats)

    def cells(self) -> List["Cell"]:
        """Valid cells in canonical ``(n, lr, 1/T, repeat)`` order."""
        out = []
        for n in sorted(set(self.vertices)):
            if self.family is not Family.EXPONENTIAL and n < 2:
                log.warning("skipping vertex %d: must be >= 2", n)
                continue
            for li in range(len(self.learning_rates)):
                for ti in range(len(self.inverse_temperatures)):
                    for r in range(self.repeats):
                        out.append(Cell(n, li, ti, r))
        if not out:
            raise ValueError("sweep grid has no valid cells")
        return out


@dataclass(frozen=True, order=True)
class Cell:
    vertex: int
    lr_index: int
    inv_t_index: int
    repeat: int


@dataclass(frozen=True)
class SweepResultRow:
    n: int
    initial_lr: float
    inv_T: float
    repeat: int
    seed: int
    mean_recall_distance: float
    fraction_converged: float
    final_loss: float
    overflow_nonfinite_count: int

    def sort_key(self):
        return (self.n, self.initial_lr, self.inv_T, self.repeat)


CSV_FIELDS = tuple(f.name for f in fields(SweepResultRow))


def cell_seed(grid: SweepGrid, cell: Cell) -> int:
    return _mix(grid.base_seed, cell.vertex, cell.lr_index, cell.inv_t_index, cell.repeat)


def cell_configs(cell: Cell, grid: SweepGrid) -> Tuple[NetworkConfig, TrainConfig, int]:
    seed = cell_seed(grid, cell)
    network = NetworkConfig(
        grid.formulation, grid.dim,
        InteractionSpec(grid.family, cell.vertex, grid.leak),
        temperature=1.0 / grid.inverse_temperatures[cell.inv_t_index],
        precision=grid.precision,
    )
    cfg = TrainConfig(initial_lr=grid.learning_rates[cell.lr_index],
                      seed=_mix(seed, 1), **grid.train)
    return network, cfg, seed


def run_cell(cell: Cell, grid: SweepGrid) -> SweepResultRow:
    """Train and evaluate one grid cell on its own freshly drawn dataset."""
    network, cfg, seed = cell_configs(cell, grid)
    lr = grid.learning_rates[cell.lr_index]
    inv_t = grid.inverse_temperatures[cell.inv_t_index]
    try:
        states = generate_bipolar_dataset(grid.patterns, grid.dim, _mix(seed, 0))
        memories, trace = train(states, cfg, network)
        distance, results = recall_distance(memories, states, network, grid.max_sweeps,
                                            order_seed=_mix(seed, 2), details=True)
        nonfinite = trace.overflow.nonfinite_count + sum(r.overflow.nonfinite_count
                                                         for r in results)
        converged = sum(r.converged for r in results) / len(results)
        return SweepResultRow(cell.vertex, lr, inv_t, cell.repeat, seed, distance,
                              converged, trace.final_loss, nonfinite)
    except Exception:  # one bad cell must not poison the sweep
        log.exception("cell %s failed", cell)
        return SweepResultRow(cell.vertex, lr, inv_t, cell.repeat, seed, float("nan"),
                              0.0, float("nan"), -1)


def _run_cells(args):
    grid, cells = args
    return [run_cell(c, grid) for c in cells]


def run_sweep(grid: SweepGrid, parallelism: int = 1,
              cells: Optional[Sequence[Cell]] = None) -> List[SweepResultRow]:
    """Run every cell and return rows sorted by ``(n, lr, 1/T, repeat)``.

    Rows depend only on the grid, never on ``parallelism``.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    todo = list(cells) if cells is not None else grid.cells()
    if not todo:
        raise ValueError("sweep grid has no valid cells")
    if parallelism == 1 or len(todo) == 1:
        rows = [run_cell(c, grid) for c in todo]
    else:
        chunks = [todo[i::parallelism] for i in range(parallelism)]
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            rows = [r for part in pool.map(_run_cells, [(grid, ch) for ch in chunks if ch])
                    for r in part]
    return sorted(rows, key=SweepResultRow.sort_key)


def default_jobs() -> int:
    return os.cpu_count() or 1


def coarse_grid(formulation, family=Family.POLYNOMIAL, vertices=PAPER_VERTICES, **kw) -> SweepGrid:
    return SweepGrid(formulation, family, tuple(vertices), COARSE_LEARNING_RATES,
                     COARSE_INVERSE_TEMPERATURES, **kw)


def fine_grid(formulation, family=Family.POLYNOMIAL, vertices=PAPER_VERTICES, **kw) -> SweepGrid:
    formulation = Formulation(formulation)
    return SweepGrid(formulation, family, tuple(vertices), FINE_LEARNING_RATES,
                     FINE_INVERSE_TEMPERATURES[formulation], **kw)


def aggregate(rows: Iterable[SweepResultRow], vertex: int, how: str = "mean"):
    """Average ``mean_recall_distance`` over repeats for one vertex.

    Returns ``(learning_rates, inverse_temperatures, table)`` with
    ``table[t, l]`` for inverse temperature ``t`` and learning rate ``l``.
    """
    reducers = {"mean": np.mean, "median": np.median, "min": np.min, "max": np.max}
    if how not in reducers:
        raise ValueError(f"aggregation must be one of {sorted(reducers)}")
    sel = [r for r in rows if r.n == vertex]
    if not sel:
        raise ValueError(f"no rows for vertex {vertex}")
    lrs = sorted({r.initial_lr for r in sel})
    its = sorted({r.inv_T for r in sel})
    buckets = {}
    for r in sel:
        buckets.setdefault((r.inv_T, r.initial_lr), []).append(r.mean_recall_distance)
    table = np.full((len(its), len(lrs)), np.nan)
    for (t, l), vals in buckets.items():
        table[its.index(t), lrs.index(l)] = reducers[how](vals)
    return lrs, its, table


def optimal_cell(rows: Iterable[SweepResultRow], vertex: int) -> Tuple[int, int]:
    """Grid indices ``(lr_index, inv_t_index)`` of the best averaged cell.

    Ties are broken towards the centre of the tied set, so a flat optimal
    region reports its middle rather than an edge.
    """
    lrs, its, table = aggregate(rows, vertex)
    best = np.nanmin(table)
    tied = np.argwhere(np.isclose(table, best, rtol=0, atol=1e-12))
    centre = tied.mean(axis=0)
    t, l = min(tied.tolist(), key=lambda ij: (float(np.sum((np.array(ij) - centre) ** 2)), ij))
    return l, t
