"""Classical and modern Hopfield update rules with overflow instrumentation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    Family,
    Formulation,
    InteractionSpec,
    NetworkConfig,
    Precision,
    as_memories,
    as_state,
    as_states,
)


@dataclass
class OverflowStats:
    """Running record of intermediate magnitudes seen by a kernel.

    ``nonfinite_count`` counts neuron evaluations (or training terms) in which
    some intermediate was ``inf`` or ``nan``. ``max_abs_argument`` tracks the
    scaled similarity scores fed into ``F``; ``max_abs_intermediate`` tracks
    both those and ``F``'s outputs.
    """

    nonfinite_count: int = 0
    max_abs_intermediate: float = 0.0
    max_abs_argument: float = 0.0

    def observe(self, nonfinite: int, max_abs: float, max_arg: float | None = None):
        self.nonfinite_count += int(nonfinite)
        self.max_abs_intermediate = max(self.max_abs_intermediate, float(max_abs))
        if max_arg is not None:
            self.max_abs_argument = max(self.max_abs_argument, float(max_arg))
            self.max_abs_intermediate = max(self.max_abs_intermediate, float(max_arg))

    def merge(self, other: "OverflowStats") -> "OverflowStats":
        self.observe(other.nonfinite_count, other.max_abs_intermediate, other.max_abs_argument)
        return self

    def to_dict(self) -> dict:
        return {
            "nonfinite_count": self.nonfinite_count,
            "max_abs_intermediate": self.max_abs_intermediate,
            "max_abs_argument": self.max_abs_argument,
        }


def _magnitude(arr: np.ndarray, axis=None):
    # nan counts as unbounded
    mag = np.abs(arr)
    mag = np.where(np.isnan(mag), np.inf, mag)
    return mag.max(axis=axis)


def sign(x):
    """Hard limiter with ``Sign(0) = +1``."""
    return np.where(np.asarray(x) >= 0, 1, -1).astype(np.int8)


# -- classical network -------------------------------------------------------

def hebbian_weights(states) -> np.ndarray:
    """Hebbian weight matrix ``W[j, i] = sum_mu xi_j xi_i`` (diagonal kept)."""
    if len(states) == 0:
        raise ValueError("need at least one state")
    dims = {len(s) for s in states}
    if len(dims) != 1:
        raise ValueError(f"states have mismatched dimensions {sorted(dims)}")
    xs = as_states(states).astype(np.float64)
    return xs.T @ xs


def classical_update(W, state, i: int, zero_diagonal: bool = False) -> int:
    z = as_state(state).astype(np.float64)
    W = np.asarray(W, dtype=np.float64)
    col = W[:, i].copy()
    if zero_diagonal:
        col[i] = 0.0
    return int(sign(col @ z))


# -- modern network ----------------------------------------------------------

def clamped_overlap(memory, state, i: int, clamp_sign: int,
                    precision: Precision = Precision.DOUBLE) -> float:
    """Similarity of ``memory`` with ``state`` whose neuron ``i`` is clamped."""
    dt = Precision(precision).dtype
    xi = np.asarray(memory, dtype=dt)
    z = np.asarray(state, dtype=dt)
    if xi.shape != z.shape:
        raise ValueError("memory and state dimensions differ")
    mask = np.ones(z.shape, dtype=bool)
    mask[i] = False
    rest = (xi[mask] * z[mask]).sum(dtype=dt)
    return float(dt.type(clamp_sign) * xi[i] + rest)


def _differences(memories: np.ndarray, state: np.ndarray, spec: InteractionSpec,
                 scale, dtype):
    """Per-memory, per-neuron ``F(clamped on) - F(clamped off)``.

    Returns ``(diff, arg_mag, val_mag)`` where ``diff`` has shape ``(K, N)``
    and the magnitudes are per-neuron maxima over memories.

    Clamping neuron ``i`` to its current value gives the plain overlap;
    clamping it the other way subtracts ``2 * xi_i * zeta_i``.
    """
    xi = memories.astype(dtype, copy=False)
    z = state.astype(dtype)
    s = dtype.type(scale)
    with np.errstate(over="ignore", invalid="ignore"):
        overlap = xi @ z
        flipped = overlap[:, None] - dtype.type(2) * xi * z[None, :]
        arg_same = s * overlap
        arg_flip = s * flipped
        f_same = spec(arg_same)
        f_flip = spec(arg_flip)
        diff = z[None, :] * (f_same[:, None] - f_flip)
    arg_mag = np.maximum(_magnitude(arg_same), _magnitude(arg_flip, axis=0))
    val_mag = np.maximum(_magnitude(f_same), _magnitude(f_flip, axis=0))
    return diff, arg_mag, val_mag


def _evaluate_all(memories: np.ndarray, state: np.ndarray, config: NetworkConfig):
    """Energy differences for every neuron plus per-neuron overflow data."""
    diff, arg_mag, val_mag = _differences(memories, state, config.interaction,
                                          config.alpha, config.dtype)
    with np.errstate(over="ignore", invalid="ignore"):
        energy = diff.sum(axis=0)
    bad = ~np.isfinite(energy) | ~np.isfinite(arg_mag) | ~np.isfinite(val_mag)
    return energy, bad, arg_mag, np.maximum(val_mag, _magnitude(energy[None, :], axis=0))


def energy_differences(memories, state, config: NetworkConfig, stats: OverflowStats | None = None):
    """Vector of energy differences, one per neuron, for the current state."""
    memories = as_memories(memories, config.dim)
    state = as_state(state, config.dim)
    energy, bad, arg_mag, val_mag = _evaluate_all(memories, state, config)
    if stats is not None:
        stats.observe(int(bad.sum()), float(val_mag.max()), float(arg_mag.max()))
    return energy


def energy_difference(memories, state, i: int, config: NetworkConfig):
    """Energy difference for neuron ``i`` and the overflow record of that evaluation.

    The original formulation is the ``alpha = 1`` case of the same kernel.
    """
    memories = as_memories(memories, config.dim)
    state = as_state(state, config.dim)
    energy, bad, arg_mag, val_mag = _evaluate_all(memories, state, config)
    stats = OverflowStats()
    stats.observe(int(bad[i]), float(val_mag[i]), float(arg_mag[i]))
    return float(energy[i]), stats


def _decide(energy: np.ndarray, bad: np.ndarray, state: np.ndarray) -> np.ndarray:
    # non-finite energy: neuron keeps its value
    return np.where(bad, state, sign(np.where(bad, 0.0, energy))).astype(np.int8)


def update_neuron(memories, state, i: int, config: NetworkConfig,
                  stats: OverflowStats | None = None) -> int:
    memories = as_memories(memories, config.dim)
    state = as_state(state, config.dim)
    energy, bad, arg_mag, val_mag = _evaluate_all(memories, state, config)
    if stats is not None:
        stats.observe(int(bad[i]), float(val_mag[i]), float(arg_mag[i]))
    return int(_decide(energy[i:i + 1], bad[i:i + 1], state[i:i + 1])[0])


@dataclass
class RelaxResult:
    final_state: np.ndarray
    sweeps_used: int
    converged: bool
    flips_total: int
    overflow: OverflowStats = field(default_factory=OverflowStats)

    def to_dict(self) -> dict:
        return {
            "final_state": [int(v) for v in self.final_state],
            "sweeps_used": self.sweeps_used,
            "converged": self.converged,
            "flips_total": self.flips_total,
            "overflow": self.overflow.to_dict(),
        }


def relax(memories, probe, config: NetworkConfig, max_sweeps: int = 50,
          order_seed: int = 0) -> RelaxResult:
    """Asynchronous relaxation in random-permutation sweeps.

    Each sweep visits every neuron once in a fresh permutation and uses the
    partially updated state. Between flips the state is constant, so all
    neurons are evaluated at once and the sweep jumps to the next neuron in
    the permutation that would change; this is equivalent to visiting them
    one by one.
    """
    if max_sweeps < 1:
        raise ValueError("max_sweeps must be >= 1")
    memories = as_memories(memories, config.dim)
    state = as_state(probe, config.dim).copy()
    rng = np.random.default_rng(order_seed)
    stats = OverflowStats()
    n = config.dim
    flips_total = 0
    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        order = rng.permutation(n)
        flips = 0
        pos = 0
        while pos < n:
            energy, bad, arg_mag, val_mag = _evaluate_all(memories, state, config)
            desired = _decide(energy, bad, state)
            rest = order[pos:]
            hits = np.flatnonzero(desired[rest] != state[rest])
            stop = rest.size if hits.size == 0 else hits[0] + 1
            visited = rest[:stop]
            stats.observe(int(bad[visited].sum()), float(val_mag[visited].max()),
                          float(arg_mag[visited].max()))
            if hits.size:
                j = rest[hits[0]]
                state[j] = desired[j]
                flips += 1
            pos += stop
        flips_total += flips
        if flips == 0:
            converged = True
            break
    return RelaxResult(state, sweeps, converged, flips_total, stats)


@dataclass(frozen=True)
class OverflowReport:
    dim: int
    vertex: int
    precision: str
    formulation: str
    max_similarity: float
    powered_value_log10: float
    overflows: bool
    nonfinite_count: int
    max_abs_intermediate: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def probe_overflow(dim: int, vertex: int, precision: Precision = Precision.SINGLE,
                   formulation: Formulation = Formulation.ORIGINAL,
                   family: Family = Family.POLYNOMIAL) -> OverflowReport:
    """Worst case of a memory identical to the probe.

    The powered similarity is reported in log10 analytically, then the real
    kernel is run at ``precision`` to see whether anything overflows.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if vertex < 2:
        raise ValueError("vertex must be >= 2")
    config = NetworkConfig(formulation, dim, InteractionSpec(family, vertex),
                           temperature=1.0, precision=precision)
    similarity = config.alpha * dim
    if Family(family) is Family.EXPONENTIAL:
        log10_value = similarity * math.log10(math.e)
    else:
        log10_value = vertex * math.log10(similarity)
    state = np.ones(dim, dtype=np.int8)
    memories = np.ones((1, dim))
    _, stats = energy_difference(memories, state, 0, config)
    return OverflowReport(
        dim=dim,
        vertex=vertex,
        precision=config.precision.value,
        formulation=config.formulation.value,
        max_similarity=stats.max_abs_argument,
        powered_value_log10=log10_value,
        overflows=stats.nonfinite_count > 0,
        nonfinite_count=stats.nonfinite_count,
        max_abs_intermediate=stats.max_abs_intermediate,
    )
