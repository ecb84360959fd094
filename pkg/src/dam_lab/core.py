"""Domain types, interaction functions and the derived scaling factors.

States are bipolar numpy vectors, memories are real ``(K, N)`` arrays with
entries in ``[-1, 1]``. Everything numeric is parameterised by a
:class:`Precision` so the same kernels can be run in single precision for the
overflow study.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

DEFAULT_LEAK = 0.01


class Family(str, enum.Enum):
    POLYNOMIAL = "polynomial"
    RECTIFIED = "rectified"
    LEAKY = "leaky"
    EXPONENTIAL = "exponential"


class Formulation(str, enum.Enum):
    ORIGINAL = "original"
    MODIFIED = "modified"


class Precision(str, enum.Enum):
    SINGLE = "single"
    DOUBLE = "double"

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(np.float32 if self is Precision.SINGLE else np.float64)


def int_power(x, n: int):
    """Raise ``x`` to a non-negative integer power by repeated squaring.

    Works elementwise on arrays and keeps the dtype of ``x``, so float32
    inputs overflow to ``inf`` exactly where float32 arithmetic would.
    """
    if n < 0:
        raise ValueError("exponent must be non-negative")
    x = np.asarray(x)
    result = np.ones_like(x)
    base = x
    first = True
    with np.errstate(over="ignore", invalid="ignore"):
        while n:
            if n & 1:
                result = base.copy() if first else result * base
                first = False
            n >>= 1
            if n:
                base = base * base
    return result


@dataclass(frozen=True)
class InteractionSpec:
    """Interaction function family with its vertex ``n`` and leak ``epsilon``."""

    family: Family
    vertex: int = 2
    leak: float = DEFAULT_LEAK

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if isinstance(self.vertex, bool) or int(self.vertex) != self.vertex:
            raise ValueError(f"vertex must be an integer, got {self.vertex!r}")
        object.__setattr__(self, "vertex", int(self.vertex))
        if self.family is not Family.EXPONENTIAL and self.vertex < 2:
            raise ValueError(f"vertex must be >= 2, got {self.vertex}")
        if not self.leak >= 0:
            raise ValueError(f"leak must be >= 0, got {self.leak}")

    def __call__(self, x):
        return evaluate(self, x)

    def derivative(self, x):
        return derivative(self, x)


def evaluate(spec: InteractionSpec, x):
    """Elementwise interaction function; dtype of ``x`` is preserved."""
    x = np.asarray(x)
    if not np.issubdtype(x.dtype, np.floating):
        x = x.astype(np.float64)
    fam = spec.family
    if fam is Family.EXPONENTIAL:
        with np.errstate(over="ignore", invalid="ignore"):
            return np.exp(x)
    powered = int_power(x, spec.vertex)
    if fam is Family.POLYNOMIAL:
        return powered
    zero = x.dtype.type(0)
    if fam is Family.RECTIFIED:
        return np.where(x < zero, zero, powered)
    with np.errstate(over="ignore", invalid="ignore"):
        leaked = x.dtype.type(-spec.leak) * x
    return np.where(x < zero, leaked, powered)


def derivative(spec: InteractionSpec, x):
    """Elementwise derivative. Rectified families use 0 at the kink."""
    x = np.asarray(x)
    if not np.issubdtype(x.dtype, np.floating):
        x = x.astype(np.float64)
    fam = spec.family
    if fam is Family.EXPONENTIAL:
        with np.errstate(over="ignore", invalid="ignore"):
            return np.exp(x)
    n = spec.vertex
    with np.errstate(over="ignore", invalid="ignore"):
        slope = x.dtype.type(n) * int_power(x, n - 1)
    if fam is Family.POLYNOMIAL:
        return slope
    zero = x.dtype.type(0)
    if fam is Family.RECTIFIED:
        return np.where(x > zero, slope, zero)
    return np.where(x > zero, slope, np.where(x < zero, x.dtype.type(-spec.leak), zero))


def interaction_eval(spec: InteractionSpec, x, precision: Precision = Precision.DOUBLE):
    """Evaluate ``F(x)`` for a scalar or array at the requested precision."""
    arr = np.asarray(x, dtype=Precision(precision).dtype)
    out = evaluate(spec, arr)
    return out[()] if out.ndim == 0 else out


def homogeneity_degree(spec: InteractionSpec) -> Optional[int]:
    """Degree ``k`` with ``F(a x) = a**k F(x)`` for all ``a > 0``, if any."""
    if spec.family in (Family.POLYNOMIAL, Family.RECTIFIED):
        return spec.vertex
    return None


@dataclass(frozen=True)
class NetworkConfig:
    formulation: Formulation
    dim: int
    interaction: InteractionSpec
    temperature: float = 1.0
    precision: Precision = Precision.DOUBLE
    _scales: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "formulation", Formulation(self.formulation))
        object.__setattr__(self, "precision", Precision(self.precision))
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim!r}")
        object.__setattr__(self, "dim", int(self.dim))
        if not (math.isfinite(self.temperature) and self.temperature > 0):
            raise ValueError(f"temperature must be > 0, got {self.temperature!r}")
        object.__setattr__(self, "_scales", _scales(self.formulation, self.dim,
                                                    self.temperature, self.interaction.vertex))

    @property
    def alpha(self) -> float:
        return self._scales[0]

    @property
    def beta(self) -> float:
        return self._scales[1]

    @property
    def dtype(self) -> np.dtype:
        return self.precision.dtype


def _scales(formulation: Formulation, dim: int, temperature: float, vertex: int):
    if temperature <= 0:
        raise ValueError("temperature must be > 0")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if formulation is Formulation.ORIGINAL:
        return 1.0, temperature ** (-vertex)
    return 1.0 / dim, 1.0 / (dim * temperature)


def derive_alpha(config: NetworkConfig) -> float:
    """Scaling applied to similarity scores inside ``F`` during updates."""
    return _scales(config.formulation, config.dim, config.temperature,
                   config.interaction.vertex)[0]


def derive_beta(config: NetworkConfig) -> float:
    """Learning scale: outside ``F`` (original) or inside it (modified)."""
    return _scales(config.formulation, config.dim, config.temperature,
                   config.interaction.vertex)[1]


def as_state(values, dim: Optional[int] = None) -> np.ndarray:
    """Validate a bipolar state and return it as an int8 vector."""
    arr = np.asarray(values)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("state must be a non-empty 1-D sequence")
    if not np.all((arr == 1) | (arr == -1)):
        raise ValueError("state entries must be exactly -1 or +1")
    if dim is not None and arr.size != dim:
        raise ValueError(f"state has dimension {arr.size}, expected {dim}")
    return arr.astype(np.int8)


def as_states(values, dim: Optional[int] = None) -> np.ndarray:
    """Validate a non-empty stack of bipolar states, shape ``(P, N)``."""
    arr = np.asarray(values)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError("states must be a non-empty (P, N) array")
    if not np.all((arr == 1) | (arr == -1)):
        raise ValueError("state entries must be exactly -1 or +1")
    if dim is not None and arr.shape[1] != dim:
        raise ValueError(f"states have dimension {arr.shape[1]}, expected {dim}")
    return arr.astype(np.int8)


def as_memories(values, dim: Optional[int] = None) -> np.ndarray:
    """Validate a ``(K, N)`` memory matrix with entries in ``[-1, 1]``."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError("memories must be a non-empty (K, N) array")
    if not np.all(np.isfinite(arr)) or np.abs(arr).max() > 1.0:
        raise ValueError("memory entries must be finite and within [-1, 1]")
    if dim is not None and arr.shape[1] != dim:
        raise ValueError(f"memories have dimension {arr.shape[1]}, expected {dim}")
    return arr
