"""Entropy and pressure with respect to invariant measures.

Two measure representations carry exact entropy paths:

* ``FiniteMeasure``: nonnegative weights on scaffold points with total
  mass at most 1; partition masses are bitmask sums.
* ``MarkovMeasure``: a stationary Markov chain on the letters (or on
  sliding blocks of letters) of a symbolic system; partition masses come
  from exact cylinder-constraint probabilities, so entropy sequences of
  labeled partitions are exact regardless of scaffold depth.

The convention 0*log(1/0) = 0 is applied uniformly.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .covers import (
    Label,
    Partition,
    depth_partition,
    is_admissible_partition,
    join_partitions,
    mask_from_indices,
    mask_to_bool,
    merge_labels,
    preimage_partition,
)
from .errors import ContractError, DomainError
from .systems import CylinderCore, Potential, System, ZeroCore, birkhoff_matrix

INVARIANCE_TOL = 1e-9


def _xlog_recip(m: float) -> float:
    return 0.0 if m <= 0.0 else -m * math.log(m)


# -- finite measures ----------------------------------------------------------


class FiniteMeasure:
    """A finitely supported measure on scaffold points, total mass <= 1."""

    def __init__(self, size: int, weights: Sequence[float]):
        self.size = int(size)
        self.weights = np.asarray(weights, dtype=float)
        if self.weights.shape != (self.size,):
            raise DomainError("one weight per scaffold point required")
        if self.weights.min() < -1e-15:
            raise DomainError("measure weights must be nonnegative")
        self.weights = np.maximum(self.weights, 0.0)
        if self.weights.sum() > 1 + 1e-12:
            raise DomainError("total mass must not exceed 1")

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def is_probability(self, tol: float = 1e-9) -> bool:
        return abs(self.total_mass - 1.0) <= tol

    def mass_of_mask(self, mask: int) -> float:
        return float(self.weights[mask_to_bool(mask, self.size)].sum())

    def scale(self, alpha: float) -> "FiniteMeasure":
        if alpha < 0:
            raise DomainError("scale factor must be nonnegative")
        return FiniteMeasure(self.size, self.weights * alpha)

    def invariance_defect(self, sys: System) -> float:
        """sum_x |mu(x) - mu(T^{-1}{x})|."""
        if sys.size != self.size:
            raise DomainError("measure lives on a different scaffold")
        pre = np.bincount(sys.apply_table, weights=self.weights, minlength=self.size)
        return float(np.abs(self.weights - pre).sum())

    def pushforward(self, sys: System, steps: int = 1) -> "FiniteMeasure":
        """The image measure mu o T^{-steps} (mass moves along orbits)."""
        w = self.weights
        for _ in range(steps):
            w = np.bincount(sys.apply_table, weights=w, minlength=self.size)
        return FiniteMeasure(self.size, w)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["point_id", "weight"])
        for i, w in enumerate(self.weights):
            if w > 0:
                writer.writerow([i, format(float(w), ".17g")])
        return buf.getvalue()

    @staticmethod
    def from_csv(text: str, size: int) -> "FiniteMeasure":
        weights = np.zeros(size)
        reader = csv.DictReader(io.StringIO(text))
        for row in reader:
            weights[int(row["point_id"])] = float(row["weight"])
        return FiniteMeasure(size, weights)


def zero_measure(size: int) -> FiniteMeasure:
    return FiniteMeasure(size, np.zeros(size))


def point_mass(size: int, index: int, mass: float = 1.0) -> FiniteMeasure:
    w = np.zeros(size)
    w[index] = mass
    return FiniteMeasure(size, w)


def uniform_measure(size: int, mask: Optional[int] = None) -> FiniteMeasure:
    w = np.zeros(size)
    if mask is None:
        w[:] = 1.0 / size
    else:
        sel = mask_to_bool(mask, size)
        w[sel] = 1.0 / sel.sum()
    return FiniteMeasure(size, w)


# -- Markov measures ----------------------------------------------------------


class MarkovMeasure:
    """A stationary Markov chain over sliding blocks of letters.

    ``states`` are words of one fixed length b >= 1 over the letter
    alphabet; row-stochastic ``P`` moves between overlap-compatible
    blocks; ``pi`` is the stationary vector.  Cylinder masses (and hence
    partition entropies of labeled partitions) are exact.
    """

    def __init__(
        self,
        P: Sequence[Sequence[float]],
        pi: Sequence[float],
        *,
        states: Optional[Sequence[tuple[int, ...]]] = None,
        alphabet: Optional[int] = None,
    ):
        self.P = np.asarray(P, dtype=float)
        self.pi = np.asarray(pi, dtype=float)
        m = self.P.shape[0]
        if self.P.shape != (m, m) or self.pi.shape != (m,):
            raise DomainError("P must be square with a matching stationary vector")
        if self.P.min() < 0 or self.pi.min() < -1e-15:
            raise DomainError("Markov data must be nonnegative")
        rows = self.P.sum(axis=1)
        if np.abs(rows - 1).max() > 1e-9:
            raise DomainError("P rows must sum to 1")
        if abs(self.pi.sum() - 1) > 1e-9:
            raise DomainError("pi must sum to 1")
        if np.abs(self.pi @ self.P - self.pi).max() > 1e-12:
            raise DomainError("pi is not stationary for P (tolerance 1e-12)")
        if states is None:
            if alphabet is not None and alphabet != m:
                raise DomainError("alphabet size must match the state count")
            states = [(a,) for a in range(m)]
            alphabet = m
        self.states = [tuple(s) for s in states]
        self.block = len(self.states[0])
        if any(len(s) != self.block for s in self.states):
            raise DomainError("all block states must share one length")
        if alphabet is None:
            alphabet = 1 + max(max(s) for s in self.states)
        self.alphabet = int(alphabet)
        if self.block > 1:
            for i, u in enumerate(self.states):
                for j, v in enumerate(self.states):
                    if self.P[i, j] > 0 and u[1:] != v[:-1]:
                        raise DomainError("P is supported outside block overlaps")
        self._state_index = {s: i for i, s in enumerate(self.states)}

    @property
    def total_mass(self) -> float:
        return 1.0

    def stationarity_defect(self) -> float:
        return float(np.abs(self.pi @ self.P - self.pi).max())

    def mass_of_constraints(self, constraints: Label) -> float:
        """Exact probability of {x : x_p = s for all (p, s) in constraints}."""
        if not constraints:
            return 1.0
        wanted = dict(constraints)
        positions = sorted(wanted)
        p_min, p_max = positions[0], positions[-1]
        b = self.block

        def state_ok(state: tuple[int, ...], start: int) -> bool:
            for t, sym in enumerate(state):
                if wanted.get(start + t, sym) != sym:
                    return False
            return True

        alpha = np.array(
            [self.pi[i] if state_ok(s, p_min) else 0.0 for i, s in enumerate(self.states)]
        )
        t1 = p_min
        last_start = max(p_min, p_max - b + 1)
        while t1 < last_start:
            t1 += 1
            alpha = alpha @ self.P
            new_pos = t1 + b - 1
            if new_pos in wanted:
                sym = wanted[new_pos]
                keep = np.array([1.0 if s[-1] == sym else 0.0 for s in self.states])
                alpha = alpha * keep
        return float(alpha.sum())

    def word_mass(self, word: Sequence[int]) -> float:
        return self.mass_of_constraints(tuple(enumerate(int(a) for a in word)))

    def to_json(self) -> str:
        return json.dumps(
            {
                "P": [[format(float(x), ".17g") for x in row] for row in self.P],
                "pi": [format(float(x), ".17g") for x in self.pi],
                "states": [list(s) for s in self.states],
                "alphabet": self.alphabet,
            },
            sort_keys=True,
        )

    @staticmethod
    def from_json(text: str) -> "MarkovMeasure":
        doc = json.loads(text)
        return MarkovMeasure(
            [[float(x) for x in row] for row in doc["P"]],
            [float(x) for x in doc["pi"]],
            states=[tuple(s) for s in doc.get("states", [])] or None,
            alphabet=doc.get("alphabet"),
        )


Measure = Union[FiniteMeasure, MarkovMeasure]


def bernoulli_measure(probs: Sequence[float]) -> MarkovMeasure:
    p = np.asarray(probs, dtype=float)
    P = np.tile(p, (len(p), 1))
    return MarkovMeasure(P, p)


# -- masses, integrals, entropies ---------------------------------------------


def member_mass(mu: Measure, member: int, label: Optional[Label]) -> float:
    if isinstance(mu, MarkovMeasure):
        if label is None:
            raise DomainError(
                "Markov masses need labeled (cylinder) partition members"
            )
        return mu.mass_of_constraints(label)
    return mu.mass_of_mask(member)


def partition_masses(mu: Measure, C: Partition) -> list[float]:
    return [member_mass(mu, m, C.label_of(i)) for i, m in enumerate(C.members)]


def integral(sys: System, f: Potential, mu: Measure) -> float:
    """The integral of f against mu; linear in f, exact for both measure
    representations."""
    if isinstance(mu, MarkovMeasure):
        if isinstance(f.core, ZeroCore):
            return f.constant
        if isinstance(f.core, CylinderCore):
            r = f.core.depth
            total = 0.0
            for word in itertools.product(range(mu.alphabet), repeat=r):
                m = mu.word_mass(word)
                if m > 0:
                    total += m * f.core.table.get(word, 0.0)
            return f.constant + total
        raise DomainError("Markov integrals need a locally constant symbolic potential")
    vals = f.values(sys)
    return float(vals @ mu.weights)


def partition_entropy(mu: Measure, C: Partition) -> float:
    """H_mu(C) = sum_C mu(C) log(1/mu(C)); at most log|C| for probabilities."""
    return float(sum(_xlog_recip(m) for m in partition_masses(mu, C)))


def conditional_entropy(mu: Measure, C: Partition, D: Partition) -> float:
    """Expected partition entropy of C under the conditionals of D;
    cells with mu(D) = 0 contribute 0."""
    if isinstance(mu, FiniteMeasure) and not mu.is_probability():
        raise ContractError("conditional entropy requires a probability measure")
    total = 0.0
    for j, d in enumerate(D.members):
        md = member_mass(mu, d, D.label_of(j))
        if md <= 0:
            continue
        h = 0.0
        for i, c in enumerate(C.members):
            if isinstance(mu, MarkovMeasure):
                li, lj = C.label_of(i), D.label_of(j)
                if li is None or lj is None:
                    raise DomainError("Markov masses need labeled partition members")
                mcd = mu.mass_of_constraints(merge_labels(li, lj))
            else:
                mcd = mu.mass_of_mask(c & d)
            if mcd > 0:
                h += _xlog_recip(mcd / md)
        total += md * h
    return float(total)


@dataclass
class EntropySequence:
    """(1/n) H_mu(C^n) for n = 1..n_max with extrapolations.

    ``extrapolated`` is the tail estimate from successive differences
    H_{n+1} - H_n (exact for Markov chains); ``upper_bound`` is the
    running minimum of (1/n) H_n, a valid upper bound of the limit by
    subadditivity for invariant measures.
    """

    n_values: list[int]
    h_values: list[float]
    values: list[float]
    extrapolated: float
    upper_bound: float
    invariance_defect: float = 0.0

    @staticmethod
    def from_h(n_values, h_values, defect=0.0) -> "EntropySequence":
        values = [h / n for n, h in zip(n_values, h_values)]
        if len(h_values) >= 2:
            diffs = [
                (h_values[t + 1] - h_values[t]) / (n_values[t + 1] - n_values[t])
                for t in range(len(h_values) - 1)
            ]
            tail = max(1, math.ceil(len(diffs) / 3))
            extrapolated = min(diffs[-tail:])
        else:
            extrapolated = values[-1]
        upper = min(values)
        return EntropySequence(
            list(n_values), list(h_values), values, extrapolated, upper, defect
        )


def dynamic_partition_entropy(
    sys: System,
    mu: Measure,
    C: Partition,
    n_max: int,
    *,
    defect_tol: float = INVARIANCE_TOL,
) -> EntropySequence:
    """The sequence (1/n) H_mu(C^n); requires mu invariant within
    ``defect_tol`` (the limit statement needs invariance)."""
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    if isinstance(mu, FiniteMeasure):
        defect = mu.invariance_defect(sys)
        if defect > defect_tol:
            raise ContractError(
                f"measure is not invariant (defect {defect:.3g} > {defect_tol:.1g})"
            )
    else:
        defect = mu.stationarity_defect()
    n_values, h_values = [], []
    current = C
    pre = C
    for n in range(1, n_max + 1):
        if n > 1:
            pre = preimage_partition(sys, pre)
            current = join_partitions(current, pre)
        n_values.append(n)
        h_values.append(partition_entropy(mu, current))
    return EntropySequence.from_h(n_values, h_values, defect)


def admissible_shrink(
    sys: System, mu: FiniteMeasure, C: Partition, delta: float = 1e-3
) -> Partition:
    """Shrink each nondistinguished cell to a compact core, dumping the
    removed fringe into cell 0, so the result is admissible.

    Mirrors the constructive recipe behind computing entropy through
    admissible partitions: compact K_j inside C_j with
    mu(C_j - K_j) <= delta / (n log n).
    """
    if sys.infinity_distance is None:
        return C
    fringe = mask_from_indices(sys.fringe_indices, sys.size)
    n_cells = max(1, len(C.members) - 1)
    budget = math.inf if n_cells <= 1 else delta / (n_cells * math.log(n_cells))
    k0 = C.members[0] | 0
    new_members = []
    moved = 0.0
    for m in C.members[1:]:
        keep = m & ~fringe
        lost = m & fringe
        moved_here = mu.mass_of_mask(lost)
        if moved_here > budget:
            raise DomainError(
                "support mass sits on the near-infinity fringe; cannot shrink "
                f"within the {budget:.3g} budget"
            )
        moved += moved_here
        k0 |= lost
        if keep:
            new_members.append(keep)
    # the fringe is nonempty on non-compact systems, so k0 is nonempty
    return Partition(sys.size, tuple([k0] + new_members))


def ks_entropy(
    sys: System,
    mu: Measure,
    family: Sequence[Partition],
    *,
    n_max: int = 8,
    defect_tol: float = INVARIANCE_TOL,
    shrink_delta: float = 1e-3,
) -> float:
    """Max over the declared partition family of the dynamic entropy
    extrapolations: a lower bound of the true supremum over all finite
    partitions.

    On non-compact systems non-admissible family members are first
    shrunk to admissible ones (sufficiency of admissible partitions).
    """
    if not family:
        raise DomainError("partition family must be nonempty")
    best = 0.0
    for C in family:
        if (
            sys.infinity_distance is not None
            and isinstance(mu, FiniteMeasure)
            and not is_admissible_partition(sys, C)
        ):
            C = admissible_shrink(sys, mu, C, shrink_delta)
        seq = dynamic_partition_entropy(sys, mu, C, n_max, defect_tol=defect_tol)
        best = max(best, seq.extrapolated)
    return best


def measure_pressure(
    sys: System,
    mu: Measure,
    f: Potential,
    family: Sequence[Partition],
    *,
    n_max: int = 8,
    defect_tol: float = INVARIANCE_TOL,
) -> float:
    """h_mu + integral of f: the pressure of the system with respect to mu."""
    if isinstance(mu, FiniteMeasure) and mu.total_mass == 0.0:
        return 0.0
    h = ks_entropy(sys, mu, family, n_max=n_max, defect_tol=defect_tol)
    return h + integral(sys, f, mu)


def iterated_measure_pressure_check(
    sys: System,
    mu: Measure,
    f: Potential,
    k: int,
    *,
    n_max: int = 6,
) -> dict:
    """Verify P_mu(T^k, f_k) = k P_mu(T, f) using exact entropy paths."""
    if k < 1:
        raise DomainError("k must be >= 1")
    if sys.kind != "symbolic":
        raise DomainError("the iterated check uses symbolic exact paths")
    if sys.word_length < k:
        raise DomainError("scaffold words shorter than the requested power")
    base_family = [depth_partition(sys, 1)]
    p_base = measure_pressure(sys, mu, f, base_family, n_max=n_max)
    sysk = sys.power(k)
    pow_family = [depth_partition(sys, k)]
    h_pow = ks_entropy(sysk, mu, pow_family, n_max=max(2, n_max // max(1, k) + 1))
    int_pow = k * integral(sys, f, mu)  # invariance: integral of f_k is k * integral of f
    lhs = h_pow + int_pow
    rhs = k * p_base
    return {
        "k": k,
        "lhs": lhs,
        "rhs": rhs,
        "residual": abs(lhs - rhs),
        "ok": abs(lhs - rhs) <= 1e-6 * max(1.0, abs(rhs)),
    }


def upper_bound_inequality_check(
    sys: System,
    mu: Measure,
    f: Potential,
    C: Partition,
    n_max: int = 6,
) -> dict:
    """Verify integral(f) + (1/n) H_mu(C^n) <= (1/n) log sum_{C^n} sup e^{f_n}
    for every n up to n_max."""
    if isinstance(mu, FiniteMeasure) and not mu.is_probability():
        raise ContractError("the upper bound check requires a probability measure")
    fmat = birkhoff_matrix(sys, f, n_max)
    int_f = integral(sys, f, mu)
    rows = []
    current = C
    pre = C
    ok = True
    for n in range(1, n_max + 1):
        if n > 1:
            pre = preimage_partition(sys, pre)
            current = join_partitions(current, pre)
        h = partition_entropy(mu, current)
        total = 0.0
        for m in current.members:
            sel = mask_to_bool(m, sys.size)
            if sel.any():
                total += math.exp(fmat[n][sel].max())
        lhs = int_f + h / n
        rhs = math.log(total) / n
        rows.append({"n": n, "lhs": lhs, "rhs": rhs, "ok": lhs <= rhs + 1e-12})
        ok = ok and rows[-1]["ok"]
    return {"rows": rows, "ok": ok}
