"""Topological pressure quantities on a scaffold.

Five level-n quantities are computed exactly (or greedily, with flagged
bound directions):

* ``q_value`` / ``p_value``: minimum over subcovers of the n-step
  iterated cover of the sum of inf (resp. sup) exponential Birkhoff
  weights.
* ``max_separated_weight`` / ``min_generating_weight``: the extremal
  weighted (n, eps)-separated and (n, eps)-generating sets in the Bowen
  dynamic metric.

Level sequences are summarized by ``PressureEstimate`` records.  Growth
rates are extrapolated from tails of successive log-differences, which
reproduces exact exponential counts to float precision; the submultiplicative
sup-weight sequence additionally reports its running minimum, a valid
upper bound of its limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .covers import (
    Cover,
    ball_cover,
    bool_to_mask,
    full_mask,
    iterate_cover,
    join,
    mask_to_bool,
    preimage_cover,
)
from .errors import ContractError, DomainError, ScaffoldResolutionError
from .solvers import (
    DEFAULT_BUDGET,
    max_weight_independent_set,
    min_weight_set_cover,
)
from .systems import (
    Potential,
    System,
    TableCore,
    ball_depth,
    birkhoff_matrix,
    check_one_point_metric,
    check_one_point_potential,
)


@dataclass
class PressureEstimate:
    """A (kind, eps, n-sequence, values, extrapolation, directions) record.

    ``values`` holds (1/n) log of the level-n quantity; ``extrapolated``
    is the tail growth-rate estimate; ``bound_direction`` flags whether
    each level is exact or a one-sided solver bound.
    """

    kind: str
    epsilon: Optional[float]
    n_values: list[int]
    raw_values: list[float]
    values: list[float]
    bound_direction: list[str]
    extrapolated: float
    upper_bound: Optional[float] = None

    @property
    def exact(self) -> bool:
        return all(d == "exact" for d in self.bound_direction)


def _log_diffs(n_values: Sequence[int], raw_values: Sequence[float]) -> list[float]:
    logs = [math.log(v) if v > 0 else -math.inf for v in raw_values]
    return [
        (logs[t + 1] - logs[t]) / (n_values[t + 1] - n_values[t])
        for t in range(len(logs) - 1)
    ]


def _tail(seq: Sequence[float]) -> Sequence[float]:
    k = max(1, math.ceil(len(seq) / 3))
    return seq[-k:]


def make_estimate(
    kind: str,
    epsilon: Optional[float],
    n_values: list[int],
    raw_values: list[float],
    directions: list[str],
) -> PressureEstimate:
    values = [
        (math.log(v) / n if v > 0 else -math.inf)
        for n, v in zip(n_values, raw_values)
    ]
    if len(raw_values) >= 2:
        diffs = _log_diffs(n_values, raw_values)
        if kind == "Qminus":
            extrapolated = min(_tail(diffs))
        else:
            extrapolated = max(_tail(diffs))
    else:
        extrapolated = values[-1]
    upper = None
    if kind == "Pcover":
        # Fekete: (1/n) log P_n dominates the limit, so the running
        # minimum is a certified upper bound and is the reported value
        upper = min(values)
        extrapolated = upper
    return PressureEstimate(
        kind, epsilon, n_values, raw_values, values, directions, extrapolated, upper
    )


# -- Bowen-ball structures ----------------------------------------------------


def bowen_prefix_depth(epsilon: float, n: int) -> int:
    """Prefix agreement depth equivalent to Bowen (n, eps)-closeness on a
    symbolic scaffold; 0 means everything is close."""
    k = ball_depth(epsilon)
    return (n - 1 + k) if k >= 1 else 0


def symbolic_bowen_classes(sys: System, epsilon: float, n: int) -> list[list[int]]:
    """Partition of the scaffold into Bowen (n, eps)-closeness classes.

    On the prefix metric, closeness over n steps is agreement on a prefix,
    hence an equivalence; classes are listed in lexicographic key order.
    """
    depth = bowen_prefix_depth(epsilon, n)
    if depth > sys.word_length:
        raise ScaffoldResolutionError(
            f"Bowen depth {depth} exceeds scaffold words of length {sys.word_length}"
        )
    groups: dict[tuple, list[int]] = {}
    for i, w in enumerate(sys.words):
        groups.setdefault(w[:depth], []).append(i)
    return [groups[k] for k in sorted(groups)]


def bowen_ball_masks(sys: System, epsilon: float, n: int) -> list[int]:
    """Bitmask of the Bowen (n, eps)-ball around every scaffold point."""
    if n < 1:
        raise DomainError("n must be >= 1")
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    if sys.kind == "symbolic":
        masks = [0] * sys.size
        for cls in symbolic_bowen_classes(sys, epsilon, n):
            m = 0
            for i in cls:
                m |= 1 << i
            for i in cls:
                masks[i] = m
        return masks
    orbit = sys.orbit_table(n)
    size = sys.size
    masks = []
    row_block = max(1, min(size, 4_000_000 // max(size, 1)))
    cols = np.arange(size)
    for start in range(0, size, row_block):
        rows = np.arange(start, min(start + row_block, size))
        close = np.ones((len(rows), size), dtype=bool)
        for j in range(n):
            d = sys.metric_block(orbit[j][rows], orbit[j][cols])
            close &= d < epsilon
        for r in range(close.shape[0]):
            masks.append(bool_to_mask(close[r]))
    return masks


# -- separated / generating level quantities -----------------------------------


def max_separated_weight(
    sys: System,
    f: Potential,
    epsilon: float,
    n: int,
    *,
    mode: str = "exact",
    budget: int = DEFAULT_BUDGET,
    fmat: Optional[np.ndarray] = None,
):
    """sup over (n, eps)-separated sets E of sum_{x in E} e^{f_n(x)}.

    Returns (value, direction, chosen-point tuple).  Exact mode solves a
    maximum-weight independent set on the Bowen-closeness graph; greedy
    mode returns a maximal separated set, hence a lower bound.
    """
    if fmat is None:
        fmat = birkhoff_matrix(sys, f, n)
    weights = np.exp(fmat[n])
    if sys.kind == "symbolic" and mode == "exact":
        # closeness classes are cliques with no cross edges: take the
        # heaviest representative of each class
        total = 0.0
        chosen = []
        for cls in symbolic_bowen_classes(sys, epsilon, n):
            best = max(cls, key=lambda i: (weights[i], -i))
            total += float(weights[best])
            chosen.append(best)
        return total, "exact", tuple(sorted(chosen))
    masks = bowen_ball_masks(sys, epsilon, n)
    neighbors = [m & ~(1 << i) for i, m in enumerate(masks)]
    res = max_weight_independent_set(
        neighbors, [float(w) for w in weights], mode=mode, budget=budget
    )
    direction = "exact" if res.exact else "lower"
    return res.value, direction, res.chosen


def min_generating_weight(
    sys: System,
    f: Potential,
    epsilon: float,
    n: int,
    *,
    mode: str = "exact",
    budget: int = DEFAULT_BUDGET,
    fmat: Optional[np.ndarray] = None,
):
    """inf over (n, eps)-generating sets E of sum_{x in E} e^{f_n(x)}.

    A set generates when its Bowen balls cover the scaffold; greedy mode
    returns an upper bound.
    """
    if fmat is None:
        fmat = birkhoff_matrix(sys, f, n)
    weights = np.exp(fmat[n])
    if sys.kind == "symbolic" and mode == "exact":
        total = 0.0
        chosen = []
        for cls in symbolic_bowen_classes(sys, epsilon, n):
            best = min(cls, key=lambda i: (weights[i], i))
            total += float(weights[best])
            chosen.append(best)
        return total, "exact", tuple(sorted(chosen))
    masks = bowen_ball_masks(sys, epsilon, n)
    res = min_weight_set_cover(
        full_mask(sys.size),
        masks,
        [float(w) for w in weights],
        mode=mode,
        budget=budget,
    )
    direction = "exact" if res.exact else "upper"
    return res.value, direction, res.chosen


def maximal_separated_set(sys: System, epsilon: float, n: int) -> tuple[int, ...]:
    """A maximal (n, eps)-separated set grown greedily in index order;
    maximality makes it (n, eps)-generating."""
    masks = (
        None if sys.kind == "symbolic" else bowen_ball_masks(sys, epsilon, n)
    )
    if sys.kind == "symbolic":
        return tuple(min(cls) for cls in symbolic_bowen_classes(sys, epsilon, n))
    chosen: list[int] = []
    blocked = 0
    for i in range(sys.size):
        if not (blocked >> i) & 1:
            chosen.append(i)
            blocked |= masks[i]
    return tuple(chosen)


def is_generating(sys: System, points: Sequence[int], epsilon: float, n: int) -> bool:
    masks = bowen_ball_masks(sys, epsilon, n)
    covered = 0
    for i in points:
        covered |= masks[i]
    return covered == full_mask(sys.size)


def is_separated(sys: System, points: Sequence[int], epsilon: float, n: int) -> bool:
    from .systems import bowen_distance

    pts = list(points)
    for a in range(len(pts)):
        for b in range(a + 1, len(pts)):
            if bowen_distance(sys, pts[a], pts[b], n) < epsilon:
                return False
    return True


# -- cover level quantities -----------------------------------------------------


def _member_weights(
    An: Cover, fmat_row: np.ndarray, size: int, kind: str
) -> list[float]:
    out = []
    for m in An.members:
        sel = mask_to_bool(m, size)
        vals = fmat_row[sel]
        out.append(math.exp(vals.min() if kind == "inf" else vals.max()))
    return out


def q_value(
    sys: System,
    f: Potential,
    A: Cover,
    n: int,
    *,
    mode: str = "exact",
    budget: int = DEFAULT_BUDGET,
    fmat: Optional[np.ndarray] = None,
    _iterated: Optional[Cover] = None,
):
    """Q_n: min over subcovers of A^n of the sum of inf e^{f_n} weights.

    Returns (value, direction).  Monotone under refinement: A < B implies
    Q_n(A) <= Q_n(B).
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    if fmat is None:
        fmat = birkhoff_matrix(sys, f, n)
    An = _iterated if _iterated is not None else iterate_cover(sys, A, n)
    weights = _member_weights(An, fmat[n], sys.size, "inf")
    res = min_weight_set_cover(
        full_mask(sys.size), list(An.members), weights, mode=mode, budget=budget
    )
    return res.value, ("exact" if res.exact else "upper")


def p_value(
    sys: System,
    f: Potential,
    A: Cover,
    n: int,
    *,
    mode: str = "exact",
    budget: int = DEFAULT_BUDGET,
    fmat: Optional[np.ndarray] = None,
    _iterated: Optional[Cover] = None,
):
    """P_n: as Q_n with sup e^{f_n} weights; Q_n <= P_n, and the sequence
    is submultiplicative."""
    if n < 1:
        raise DomainError("n must be >= 1")
    if fmat is None:
        fmat = birkhoff_matrix(sys, f, n)
    An = _iterated if _iterated is not None else iterate_cover(sys, A, n)
    weights = _member_weights(An, fmat[n], sys.size, "sup")
    res = min_weight_set_cover(
        full_mask(sys.size), list(An.members), weights, mode=mode, budget=budget
    )
    return res.value, ("exact" if res.exact else "upper")


def cover_pressure(
    sys: System,
    f: Potential,
    A: Cover,
    n_max: int,
    *,
    mode: str = "exact",
    budget: int = DEFAULT_BUDGET,
    epsilon: Optional[float] = None,
):
    """The three cover-pressure sequences over n = 1..n_max.

    Returns (Qminus, Qplus, Pcover) estimates: liminf and limsup style
    tails of (1/n) log Q_n, and the running-minimum (Fekete) summary of
    (1/n) log P_n.
    """
    if n_max < 2:
        raise DomainError("n_max must be >= 2")
    fmat = birkhoff_matrix(sys, f, n_max)
    q_raw, p_raw, q_dir, p_dir = [], [], [], []
    current = A
    pre = A
    for n in range(1, n_max + 1):
        if n > 1:
            pre = preimage_cover(sys, pre)
            current = join(current, pre)
        qv, qd = q_value(sys, f, A, n, mode=mode, budget=budget, fmat=fmat, _iterated=current)
        pv, pd = p_value(sys, f, A, n, mode=mode, budget=budget, fmat=fmat, _iterated=current)
        q_raw.append(qv)
        p_raw.append(pv)
        q_dir.append(qd)
        p_dir.append(pd)
    ns = list(range(1, n_max + 1))
    return (
        make_estimate("Qminus", epsilon, ns, q_raw, q_dir),
        make_estimate("Qplus", epsilon, ns, q_raw, q_dir),
        make_estimate("Pcover", epsilon, ns, p_raw, p_dir),
    )


def separated_pressure(
    sys: System,
    f: Potential,
    epsilon: float,
    n_max: int,
    *,
    mode: str = "exact",
    budget: int = DEFAULT_BUDGET,
) -> PressureEstimate:
    """limsup-style tail of (1/n) log of the separated sums."""
    fmat = birkhoff_matrix(sys, f, n_max)
    raw, dirs = [], []
    for n in range(1, n_max + 1):
        v, d, _ = max_separated_weight(
            sys, f, epsilon, n, mode=mode, budget=budget, fmat=fmat
        )
        raw.append(v)
        dirs.append(d)
    return make_estimate("Separated", epsilon, list(range(1, n_max + 1)), raw, dirs)


def generating_pressure(
    sys: System,
    f: Potential,
    epsilon: float,
    n_max: int,
    *,
    mode: str = "exact",
    budget: int = DEFAULT_BUDGET,
) -> PressureEstimate:
    fmat = birkhoff_matrix(sys, f, n_max)
    raw, dirs = [], []
    for n in range(1, n_max + 1):
        v, d, _ = min_generating_weight(
            sys, f, epsilon, n, mode=mode, budget=budget, fmat=fmat
        )
        raw.append(v)
        dirs.append(d)
    return make_estimate("Generating", epsilon, list(range(1, n_max + 1)), raw, dirs)


@dataclass
class TopologicalPressureReport:
    consolidated: float
    chosen_epsilon: float
    estimates: list[PressureEstimate]
    flags: list[str] = field(default_factory=list)

    def rows(self) -> list[dict]:
        out = []
        for est in self.estimates:
            for t, n in enumerate(est.n_values):
                out.append(
                    {
                        "kind": est.kind,
                        "epsilon": est.epsilon,
                        "n": n,
                        "raw_value": est.raw_values[t],
                        "log_over_n": est.values[t],
                        "bound_direction": est.bound_direction[t],
                    }
                )
        return out


def topological_pressure(
    sys: System,
    f: Potential,
    eps_grid: Sequence[float],
    n_max: int,
    *,
    mode: str = "exact",
    budget: int = DEFAULT_BUDGET,
    cover_n_max: Optional[int] = None,
    generating_n_max: Optional[int] = None,
    consolidation_tol: float = 0.02,
) -> TopologicalPressureReport:
    """Separated, generating and ball-cover pressures across an eps grid,
    consolidated to one number.

    The consolidated value is the separated-pressure extrapolation at the
    smallest eps whose delta against the previous (coarser) eps falls
    below ``consolidation_tol``; with a single grid point that point is
    used directly.  The full matrix of estimates is kept for audit.
    """
    check_one_point_metric(sys)
    check_one_point_potential(sys, f)
    if not eps_grid:
        raise DomainError("epsilon grid must be nonempty")
    eps_sorted = sorted(set(float(e) for e in eps_grid), reverse=True)
    if cover_n_max is None:
        cover_n_max = min(n_max, 12)
    if generating_n_max is None:
        generating_n_max = min(n_max, 24)
    estimates: list[PressureEstimate] = []
    flags: list[str] = []
    sep_by_eps: list[tuple[float, PressureEstimate]] = []
    for eps in eps_sorted:
        sep = separated_pressure(sys, f, eps, n_max, mode=mode, budget=budget)
        gen = generating_pressure(
            sys, f, eps, max(2, generating_n_max), mode=mode, budget=budget
        )
        qm, qp, pc = cover_pressure(
            sys,
            f,
            ball_cover(sys, eps),
            max(2, cover_n_max),
            mode=mode,
            budget=budget,
            epsilon=eps,
        )
        estimates.extend([sep, gen, qm, qp, pc])
        sep_by_eps.append((eps, sep))
        if not sep.exact:
            flags.append(f"separated values at eps={eps} carry solver bounds")
    if len(sep_by_eps) == 1:
        chosen_eps, chosen = sep_by_eps[0]
    else:
        chosen_eps, chosen = sep_by_eps[-1]
        found = False
        for t in range(1, len(sep_by_eps)):
            delta = abs(sep_by_eps[t][1].extrapolated - sep_by_eps[t - 1][1].extrapolated)
            if delta < consolidation_tol:
                chosen_eps, chosen = sep_by_eps[t]
                found = True
        if not found:
            flags.append(
                "no epsilon level met the consolidation tolerance; "
                "reporting the finest level"
            )
    return TopologicalPressureReport(chosen.extrapolated, chosen_eps, estimates, flags)


def iterated_system_inequality_check(
    sys: System,
    f: Potential,
    A: Cover,
    k: int,
    n_max: int = 4,
    *,
    tol: float = 1e-9,
    seq_tol: float = 0.05,
) -> dict:
    """Finite-level checks for the iterated system: Q/P values of
    (T^k, f_k, A^k) over n steps equal those of (T, f, A) over kn steps,
    and the cover pressures of (T^k, f_k, A) stay below k times the base
    ones within a sequence tolerance."""
    if k < 1:
        raise DomainError("k must be >= 1")
    sysk = sys.power(k)
    fk = Potential(TableCore(birkhoff_matrix(sys, f, k)[k]), 0.0)
    Ak = iterate_cover(sys, A, k)
    rows = []
    ok = True
    for n in range(1, n_max + 1):
        q_pow, _ = q_value(sysk, fk, Ak, n)
        q_base, _ = q_value(sys, f, A, k * n)
        p_pow, _ = p_value(sysk, fk, Ak, n)
        p_base, _ = p_value(sys, f, A, k * n)
        row_ok = (
            abs(q_pow - q_base) <= tol * max(1.0, abs(q_base))
            and abs(p_pow - p_base) <= tol * max(1.0, abs(p_base))
        )
        rows.append(
            {"n": n, "q_pow": q_pow, "q_base": q_base, "p_pow": p_pow, "p_base": p_base, "ok": row_ok}
        )
        ok = ok and row_ok
    n_cov = max(2, n_max)
    qmk, qpk, _ = cover_pressure(sysk, fk, A, n_cov)
    qmb, qpb, _ = cover_pressure(sys, f, A, k * n_cov)
    ineq_minus = qmk.extrapolated <= k * qmb.extrapolated + seq_tol
    ineq_plus = qpk.extrapolated <= k * qpb.extrapolated + seq_tol
    return {
        "k": k,
        "levels": rows,
        "pminus_pow": qmk.extrapolated,
        "pminus_base": qmb.extrapolated,
        "pplus_pow": qpk.extrapolated,
        "pplus_base": qpb.extrapolated,
        "inequality_ok": bool(ineq_minus and ineq_plus),
        "ok": bool(ok and ineq_minus and ineq_plus),
    }
