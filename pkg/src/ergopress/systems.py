"""Dynamical systems materialized on finite scaffolds.

Continuous spaces are represented by finite epsilon-dense point lists
("scaffolds"); all covers, separated sets and measures live on scaffold
indices.  Symbolic systems use periodic words of a fixed length, so shift
orbits stay inside the scaffold exactly and cylinder combinatorics are
exact.  Sampled systems carry explicit coordinates, a metric and a map
table; whenever the true image of a point falls off the scaffold it is
projected to the nearest scaffold point and the worst projection error is
recorded on the system.

Non-compact systems additionally declare ``infinity_distance``, the
distance from each scaffold point to the point at infinity of the
one-point compactification; the metric is then the restriction of a
metric on that compactification.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ContractError, DomainError

Word = tuple[int, ...]

#: points closer than this to the scaffold's minimal infinity distance are
#: treated as the near-infinity fringe (float-equality slack only).
_FRINGE_SLACK = 1e-12


class System:
    """A dynamical system on a finite scaffold.

    Points are indices ``0..size-1``.  ``apply_table[i]`` is the image of
    point ``i`` under the map.  Instances are immutable after
    construction; every operation in the package is a pure function of
    its inputs, so systems are safe to share across workers.
    """

    def __init__(
        self,
        name: str,
        kind: str,
        apply_table: Sequence[int],
        *,
        words: Optional[Sequence[Word]] = None,
        alphabet: int = 0,
        transitions: Optional[np.ndarray] = None,
        coords: Optional[np.ndarray] = None,
        metric_matrix: Optional[np.ndarray] = None,
        metric_fn: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
        infinity_distance: Optional[np.ndarray] = None,
        projection_error: float = 0.0,
        shift_per_apply: int = 1,
        one_point_metric: bool = True,
    ):
        if kind not in ("symbolic", "sampled"):
            raise DomainError(f"unknown system kind {kind!r}")
        self.name = name
        self.kind = kind
        self.apply_table = np.asarray(apply_table, dtype=np.int64)
        self.size = int(self.apply_table.shape[0])
        if self.size == 0:
            raise DomainError("empty scaffold")
        if self.apply_table.min() < 0 or self.apply_table.max() >= self.size:
            raise DomainError("apply_table must map scaffold indices to scaffold indices")
        self.projection_error = float(projection_error)
        self.shift_per_apply = int(shift_per_apply)
        self.one_point_metric = bool(one_point_metric)

        if kind == "symbolic":
            if not words:
                raise DomainError("symbolic system requires its word list")
            self.words: Optional[tuple[Word, ...]] = tuple(tuple(w) for w in words)
            self.word_length = len(self.words[0])
            if any(len(w) != self.word_length for w in self.words):
                raise DomainError("all scaffold words must share one length")
            self.alphabet = int(alphabet)
            self.transitions = (
                None if transitions is None else np.asarray(transitions, dtype=np.int8)
            )
            self.coords = None
            self.metric_matrix = None
            self.metric_fn = None
        else:
            if coords is None:
                raise DomainError("sampled system requires point coordinates")
            self.coords = np.asarray(coords, dtype=float)
            self.words = None
            self.word_length = 0
            self.alphabet = 0
            self.transitions = None
            self.metric_matrix = (
                None if metric_matrix is None else np.asarray(metric_matrix, dtype=float)
            )
            self.metric_fn = metric_fn
            if self.metric_matrix is None and self.metric_fn is None:
                raise DomainError("sampled system requires a metric matrix or function")

        if infinity_distance is None:
            self.infinity_distance = None
        else:
            self.infinity_distance = np.asarray(infinity_distance, dtype=float)
            if self.infinity_distance.shape != (self.size,):
                raise DomainError("infinity_distance must have one entry per point")
            if self.infinity_distance.min() <= 0:
                raise DomainError("infinity_distance must be strictly positive on the scaffold")

        self._orbit_cache: dict[int, np.ndarray] = {}

    # -- basic structure ------------------------------------------------

    @property
    def is_compact(self) -> bool:
        return self.infinity_distance is None

    @cached_property
    def word_array(self) -> np.ndarray:
        if self.words is None:
            raise DomainError("not a symbolic system")
        return np.asarray(self.words, dtype=np.int16)

    @cached_property
    def fringe_indices(self) -> np.ndarray:
        """Indices of the near-infinity fringe (empty when compact).

        A scaffold subset stands in for a compact set exactly when it
        avoids the fringe, i.e. excludes a nonempty neighborhood of the
        point at infinity.
        """
        if self.infinity_distance is None:
            return np.empty(0, dtype=np.int64)
        dmin = float(self.infinity_distance.min())
        return np.nonzero(self.infinity_distance <= dmin + _FRINGE_SLACK)[0]

    def validate_point(self, i: int) -> int:
        i = int(i)
        if not 0 <= i < self.size:
            raise DomainError(f"point id {i} outside scaffold of size {self.size}")
        return i

    # -- metric ---------------------------------------------------------

    def first_disagreement(self, i: int, j: int, rotation: int = 0) -> Optional[int]:
        """First index where the periodic continuations of words i and j
        (both rotated left by ``rotation``) disagree; None if equal."""
        w, v = self.words[i], self.words[j]
        L = self.word_length
        for t in range(L):
            if w[(rotation + t) % L] != v[(rotation + t) % L]:
                return t
        return None

    def metric(self, i: int, j: int) -> float:
        i, j = self.validate_point(i), self.validate_point(j)
        if i == j:
            return 0.0
        if self.kind == "symbolic":
            k = self.first_disagreement(i, j)
            return 0.0 if k is None else 2.0 ** (-k)
        if self.metric_matrix is not None:
            return float(self.metric_matrix[i, j])
        return float(self.metric_fn(self.coords[i : i + 1], self.coords[j : j + 1])[0])

    def metric_block(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        """Pairwise distances between two index arrays (sampled systems)."""
        if self.kind == "symbolic":
            raise DomainError("metric_block is for sampled systems; use prefix structure")
        if self.metric_matrix is not None:
            return self.metric_matrix[np.ix_(rows, cols)]
        return self.metric_fn(self.coords[rows][:, None], self.coords[cols][None, :])

    @cached_property
    def diameter(self) -> float:
        if self.kind == "symbolic":
            return 1.0 if self.size > 1 else 0.0
        best = 0.0
        block = 2048
        for start in range(0, self.size, block):
            rows = np.arange(start, min(start + block, self.size))
            best = max(best, float(self.metric_block(rows, np.arange(self.size)).max()))
        return best

    def distance_grid(self, max_points: int = 1500) -> list[float]:
        """Sorted distinct positive distances realized on the scaffold
        (subsampled on very large sampled scaffolds)."""
        if self.kind == "symbolic":
            return sorted({2.0 ** (-k) for k in range(self.word_length)})
        if self.size <= max_points:
            idx = np.arange(self.size)
        else:
            step = max(1, self.size // max_points)
            idx = np.arange(0, self.size, step)
        d = np.unique(self.metric_block(idx, idx))
        return [float(x) for x in d if x > 0]

    # -- dynamics ---------------------------------------------------------

    def orbit_table(self, n: int) -> np.ndarray:
        """Array of shape (n, size): row j holds the indices of T^j."""
        if n < 1:
            raise DomainError("orbit length must be >= 1")
        if n not in self._orbit_cache:
            rows = np.empty((n, self.size), dtype=np.int64)
            rows[0] = np.arange(self.size)
            for j in range(1, n):
                rows[j] = self.apply_table[rows[j - 1]]
            self._orbit_cache[n] = rows
        return self._orbit_cache[n]

    def power(self, k: int) -> "System":
        """The iterated system T^k on the same scaffold."""
        if k < 1:
            raise DomainError("power must be >= 1")
        if k == 1:
            return self
        table = np.arange(self.size)
        for _ in range(k):
            table = self.apply_table[table]
        sysk = System.__new__(System)
        sysk.__dict__.update(
            {kk: vv for kk, vv in self.__dict__.items() if kk != "_orbit_cache"}
        )
        sysk.name = f"{self.name}^({k})"
        sysk.apply_table = table
        sysk.shift_per_apply = self.shift_per_apply * k
        sysk._orbit_cache = {}
        return sysk

    def describe(self) -> dict:
        out = {
            "name": self.name,
            "kind": self.kind,
            "size": self.size,
            "compact": self.is_compact,
            "projection_error": self.projection_error,
        }
        if self.kind == "symbolic":
            out["alphabet"] = self.alphabet
            out["word_length"] = self.word_length
        return out


# -- constructors ---------------------------------------------------------


def _cyclic_admissible(word: Word, transitions: Optional[np.ndarray]) -> bool:
    if transitions is None:
        return True
    L = len(word)
    return all(transitions[word[t], word[(t + 1) % L]] for t in range(L))


def _rotate_left(word: Word) -> Word:
    return word[1:] + word[:1]


def primitivity_pad(transitions: np.ndarray) -> int:
    """Smallest p with all entries of M^p positive (0 for the full shift).

    Guarantees that every admissible word of length m extends to a cyclic
    word of length m+p, so depth-(m) cylinder prefixes are all realized on
    a scaffold of length m+p.
    """
    M = np.asarray(transitions, dtype=np.int64)
    k = M.shape[0]
    if (M > 0).all():
        return 0
    power = np.eye(k, dtype=np.int64)
    bound = (k - 1) ** 2 + 1
    for p in range(1, bound + 1):
        power = np.minimum(power @ M, 1)
        if (power > 0).all():
            return p
    raise DomainError("transition matrix is not primitive; scaffold construction unsupported")


def shift_space(
    transitions: Optional[Sequence[Sequence[int]]],
    alphabet: int,
    depth: int,
    name: str = "shift",
) -> System:
    """Shift system on the periodic words of length ``depth``.

    ``transitions`` is a 0/1 matrix of allowed letter successions (None
    for the full shift).  The shift acts by left rotation, which is exact
    on periodic words.
    """
    if depth < 1:
        raise DomainError("scaffold depth must be >= 1")
    M = None if transitions is None else np.asarray(transitions, dtype=np.int8)
    words = [
        w
        for w in itertools.product(range(alphabet), repeat=depth)
        if _cyclic_admissible(w, M)
    ]
    if not words:
        raise DomainError("no admissible periodic words at this depth")
    index = {w: i for i, w in enumerate(words)}
    apply_table = [index[_rotate_left(w)] for w in words]
    return System(
        name,
        "symbolic",
        apply_table,
        words=words,
        alphabet=alphabet,
        transitions=M if M is not None else np.ones((alphabet, alphabet), dtype=np.int8),
    )


def ball_depth(epsilon: float) -> int:
    """Smallest k with 2^-k < epsilon: prefix depth of symbolic eps-balls."""
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    k = 0
    while 2.0 ** (-k) >= epsilon:
        k += 1
    return k


def scaffold_depth_for(
    epsilon: float,
    horizon: int,
    potential_depth: int = 1,
    transitions: Optional[np.ndarray] = None,
) -> int:
    """Word length so that all depth-(horizon-1+max(k, r)) prefixes are
    realized and n-step Bowen combinatorics up to ``horizon`` are exact."""
    need = max(horizon - 1 + max(ball_depth(epsilon), potential_depth), 1)
    pad = 0 if transitions is None else primitivity_pad(transitions)
    return need + pad


def sampled_system(
    name: str,
    coords: Sequence[float],
    apply_table: Sequence[int],
    *,
    metric_matrix: Optional[np.ndarray] = None,
    metric_fn: Optional[Callable] = None,
    infinity_distance: Optional[Sequence[float]] = None,
    projection_error: float = 0.0,
) -> System:
    return System(
        name,
        "sampled",
        apply_table,
        coords=np.asarray(coords, dtype=float),
        metric_matrix=metric_matrix,
        metric_fn=metric_fn,
        infinity_distance=None
        if infinity_distance is None
        else np.asarray(infinity_distance, dtype=float),
        projection_error=projection_error,
    )


# -- potentials -----------------------------------------------------------


class ZeroCore:
    depth = 0

    def values(self, sys: System) -> np.ndarray:
        return np.zeros(sys.size)

    def describe(self):
        return {"kind": "zero"}


class CylinderCore:
    """Locally constant core on a symbolic system: the value depends on
    the first ``depth`` coordinates."""

    def __init__(self, depth: int, table: dict[Word, float]):
        if depth < 1:
            raise DomainError("cylinder depth must be >= 1")
        self.depth = depth
        self.table = {tuple(w): float(v) for w, v in table.items()}

    def values(self, sys: System) -> np.ndarray:
        if sys.kind != "symbolic":
            raise DomainError("cylinder potential needs a symbolic system")
        if sys.word_length < self.depth:
            raise DomainError("scaffold words shorter than the potential depth")
        return np.array([self.table.get(w[: self.depth], 0.0) for w in sys.words])

    def describe(self):
        return {"kind": "cylinder", "depth": self.depth}


class CoordCore:
    """Core evaluated from sampled coordinates through a function."""

    depth = 1

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], label: str = "coord"):
        self.fn = fn
        self.label = label

    def values(self, sys: System) -> np.ndarray:
        if sys.coords is None:
            raise DomainError("coordinate potential needs a sampled system")
        return np.asarray(self.fn(sys.coords), dtype=float)

    def describe(self):
        return {"kind": "coord", "label": self.label}


class CodingCore:
    """Locally constant core on the doubling map: value from the first
    ``depth`` binary digits of the coordinate."""

    def __init__(self, depth: int, table: dict[Word, float]):
        self.depth = depth
        self.table = {tuple(w): float(v) for w, v in table.items()}

    def values(self, sys: System) -> np.ndarray:
        if sys.coords is None:
            raise DomainError("coding potential needs a sampled system")
        out = np.zeros(sys.size)
        for i, x in enumerate(sys.coords):
            digits = []
            y = x % 1.0
            for _ in range(self.depth):
                digits.append(int(y * 2) % 2)
                y = (y * 2) % 1.0
            out[i] = self.table.get(tuple(digits), 0.0)
        return out

    def describe(self):
        return {"kind": "coding", "depth": self.depth}


class TableCore:
    """Raw per-index values, tied to one scaffold size."""

    depth = 1

    def __init__(self, values: Sequence[float]):
        self.table = np.asarray(values, dtype=float)

    def values(self, sys: System) -> np.ndarray:
        if sys.size != self.table.shape[0]:
            raise DomainError("table potential sized for a different scaffold")
        return self.table.copy()

    def describe(self):
        return {"kind": "table"}


@dataclass(frozen=True)
class Potential:
    """A potential f = c + f0 with f0 vanishing at infinity.

    ``constant`` is the value at infinity; ``core`` evaluates f0 on a
    scaffold.  Evaluation is always f(x) = constant + core(x).
    """

    core: object
    constant: float = 0.0

    def values(self, sys: System) -> np.ndarray:
        return self.constant + self.core.values(sys)

    def core_values(self, sys: System) -> np.ndarray:
        return self.core.values(sys)

    def shifted(self, c: float) -> "Potential":
        return Potential(self.core, self.constant + c)

    @property
    def depth(self) -> int:
        return max(1, getattr(self.core, "depth", 1))

    def modulus(self, sys: System, delta: float) -> float:
        """Sup oscillation of f over scaffold pairs at distance < delta."""
        vals = self.values(sys)
        worst = 0.0
        if sys.kind == "symbolic":
            k = ball_depth(delta)
            groups: dict[Word, list[float]] = {}
            for i, w in enumerate(sys.words):
                groups.setdefault(w[:k], []).append(vals[i])
            for g in groups.values():
                worst = max(worst, max(g) - min(g))
            return worst
        block = 1024
        for start in range(0, sys.size, block):
            rows = np.arange(start, min(start + block, sys.size))
            d = sys.metric_block(rows, np.arange(sys.size))
            close = d < delta
            for r in range(len(rows)):
                sel = vals[close[r]]
                if sel.size:
                    worst = max(worst, float(sel.max() - sel.min()))
        return worst


def zero_potential() -> Potential:
    return Potential(ZeroCore(), 0.0)


def constant_potential(c: float) -> Potential:
    return Potential(ZeroCore(), c)


def indicator_potential(word: Sequence[int], scale: float = 1.0, constant: float = 0.0) -> Potential:
    """scale * (indicator of the cylinder [word]) + constant."""
    w = tuple(int(a) for a in word)
    return Potential(CylinderCore(len(w), {w: scale}), constant)


def infinity_decay_profile(sys: System, f: Potential, levels: int = 6) -> list[tuple[float, float]]:
    """(delta, sup |f0| over {infinity_distance < delta}) on a delta grid.

    For a one-point uniformly continuous potential the sup must decay to 0
    as delta does; testable on scaffolds.
    """
    if sys.infinity_distance is None:
        raise DomainError("system has no infinity data")
    core = np.abs(f.core_values(sys))
    dists = np.sort(np.unique(sys.infinity_distance))
    grid = np.geomspace(dists[0] * 1.01, dists[-1] * 1.5, levels)
    out = []
    for delta in grid[::-1]:
        sel = core[sys.infinity_distance < delta]
        out.append((float(delta), float(sel.max()) if sel.size else 0.0))
    return out


def check_one_point_potential(sys: System, f: Potential, tol: float = 0.25) -> None:
    """Raise ContractError unless f looks one-point uniformly continuous:
    on non-compact systems the core must decay near infinity."""
    if sys.infinity_distance is None:
        return
    profile = infinity_decay_profile(sys, f)
    smallest_delta_sup = profile[-1][1]
    largest = max(abs(v) for _, v in profile) or 1.0
    if smallest_delta_sup > tol * max(1.0, largest):
        raise ContractError(
            "potential core does not vanish at infinity "
            f"(sup |f0| = {smallest_delta_sup:.3g} on the innermost fringe); "
            "the one-point uniform continuity hypothesis is violated"
        )


def check_one_point_metric(sys: System) -> None:
    """Raise ContractError unless the metric qualifies as a one-point
    metric (restriction from a metrizable one-point compactification).
    Compact scaffolds qualify trivially; non-compact ones must declare
    infinity distances and not disclaim the property."""
    if not sys.one_point_metric:
        raise ContractError(
            "the system's metric is declared not to extend to a one-point "
            "compactification; the one-point metric hypothesis is violated"
        )


# -- pointwise operations ---------------------------------------------------


def bowen_distance(sys: System, x: int, y: int, n: int) -> float:
    """max_{0<=j<n} d(T^j x, T^j y), the dynamic distance over n steps."""
    if n < 1:
        raise DomainError("n must be >= 1")
    x, y = sys.validate_point(x), sys.validate_point(y)
    if x == y:
        return 0.0
    best = 0.0
    cx, cy = x, y
    for _ in range(n):
        best = max(best, sys.metric(cx, cy))
        cx, cy = int(sys.apply_table[cx]), int(sys.apply_table[cy])
    return best


def birkhoff_sum(sys: System, f: Potential, x: int, n: int) -> float:
    """f(x) + f(Tx) + ... + f(T^{n-1} x)."""
    if n < 1:
        raise DomainError("n must be >= 1")
    x = sys.validate_point(x)
    vals = f.values(sys)
    total = 0.0
    c = x
    for _ in range(n):
        total += float(vals[c])
        c = int(sys.apply_table[c])
    return total


def birkhoff_matrix(sys: System, f: Potential, n_max: int) -> np.ndarray:
    """Rows 0..n_max of Birkhoff sums: row n holds f_n over the scaffold
    (row 0 is zero)."""
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    vals = f.values(sys)
    out = np.zeros((n_max + 1, sys.size))
    idx = np.arange(sys.size)
    for n in range(1, n_max + 1):
        out[n] = out[n - 1] + vals[idx]
        idx = sys.apply_table[idx]
    return out
