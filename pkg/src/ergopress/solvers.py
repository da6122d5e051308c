"""Exact and greedy solvers for the two embedded subproblems.

Minimum-weight set cover backs the subcover infima (Q_n, P_n, generating
sums); maximum-weight independent set backs the separated suprema.  Both
exact solvers are deterministic branch-and-bound searches with a node
budget; the greedy fallbacks break ties lexicographically on member index
and are labeled with the direction of the bound they produce.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, SolverBudgetError

DEFAULT_BUDGET = 1 << 24


@dataclass(frozen=True)
class SolveResult:
    value: float
    chosen: tuple[int, ...]
    exact: bool
    nodes: int

    @property
    def direction(self) -> str:
        # meaningful only in the owning context (upper for greedy cover,
        # lower for greedy independent set); exact solves report "exact"
        return "exact" if self.exact else "bound"


def _popcount(x: int) -> int:
    return x.bit_count()


# -- minimum-weight set cover -------------------------------------------------


def greedy_set_cover(universe: int, sets: list[int], weights: list[float]) -> SolveResult:
    """Weighted greedy: repeatedly take the set minimizing weight per newly
    covered element; deterministic lexicographic tie-breaking."""
    covered = 0
    chosen: list[int] = []
    total = 0.0
    while covered != universe:
        best_idx, best_ratio, best_gain = -1, math.inf, 0
        for i, s in enumerate(sets):
            gain = _popcount(s & ~covered & universe)
            if gain == 0:
                continue
            ratio = weights[i] / gain
            if ratio < best_ratio - 1e-15 or (
                abs(ratio - best_ratio) <= 1e-15 and i < best_idx
            ):
                best_idx, best_ratio, best_gain = i, ratio, gain
        if best_idx < 0:
            raise DomainError("sets do not cover the universe")
        chosen.append(best_idx)
        covered |= sets[best_idx]
        total += weights[best_idx]
    return SolveResult(total, tuple(chosen), False, 0)


def min_weight_set_cover(
    universe: int,
    sets: list[int],
    weights: list[float],
    *,
    mode: str = "exact",
    budget: int = DEFAULT_BUDGET,
) -> SolveResult:
    """Minimum total weight of a subfamily covering ``universe``.

    Exact mode is branch-and-bound on the least-covered element with a
    fractional-charge lower bound; it raises SolverBudgetError past the
    node budget.  Greedy mode returns the (upper bound) greedy cover.
    """
    if any(w < 0 for w in weights):
        raise DomainError("set weights must be nonnegative")
    reachable = 0
    for s in sets:
        reachable |= s
    if universe & ~reachable:
        raise DomainError("sets do not cover the universe")
    if mode == "greedy":
        return greedy_set_cover(universe, sets, weights)
    if mode != "exact":
        raise DomainError(f"unknown solver mode {mode!r}")

    # drop dominated sets (s_i inside s_j with no cheaper weight); the
    # quadratic scan is only worth it on smallish families
    if len(sets) <= 512:
        order = sorted(
            range(len(sets)), key=lambda i: (-_popcount(sets[i]), weights[i], i)
        )
        kept: list[int] = []
        for i in order:
            dominated = False
            for j in kept:
                if sets[i] | sets[j] == sets[j] and weights[j] <= weights[i]:
                    dominated = True
                    break
            if not dominated:
                kept.append(i)
        kept.sort()
    else:
        kept = list(range(len(sets)))
    sub_sets = [sets[i] & universe for i in kept]
    sub_w = [weights[i] for i in kept]

    coverers: dict[int, list[int]] = {}
    u = universe
    while u:
        e = (u & -u).bit_length() - 1
        coverers[e] = []
        u &= u - 1
    for i, s in enumerate(sub_sets):
        m = s
        while m:
            e = (m & -m).bit_length() - 1
            coverers[e].append(i)
            m &= m - 1

    # disjoint families (iterated cylinder covers) are fully forced
    if all(len(idxs) == 1 for idxs in coverers.values()):
        forced = sorted({idxs[0] for idxs in coverers.values()})
        value = sum(sub_w[i] for i in forced)
        return SolveResult(value, tuple(kept[i] for i in forced), True, 1)

    best = greedy_set_cover(universe, sub_sets, sub_w)
    best_value = best.value
    best_chosen = list(best.chosen)
    nodes = 0

    # static fractional charge per element: admissible lower bound because
    # a chosen set of weight w and size s pays at least w/s per element
    charge: dict[int, float] = {}
    for e, idxs in coverers.items():
        charge[e] = min(sub_w[i] / max(1, _popcount(sub_sets[i])) for i in idxs)
    # branch on scarce elements first (static coverer count)
    element_order = sorted(coverers, key=lambda e: (len(coverers[e]), e))

    def lower_bound(remaining: int) -> float:
        lb = 0.0
        r = remaining
        while r:
            e = (r & -r).bit_length() - 1
            lb += charge[e]
            r &= r - 1
        return lb

    stack: list[tuple[int, float, tuple[int, ...]]] = [(0, 0.0, ())]
    while stack:
        covered, cost, chosen = stack.pop()
        nodes += 1
        if nodes > budget:
            raise SolverBudgetError(
                "set-cover search exceeded its node budget; rerun in greedy mode"
            )
        remaining = universe & ~covered
        if not remaining:
            if cost < best_value - 1e-15:
                best_value = cost
                best_chosen = list(chosen)
            continue
        if cost + lower_bound(remaining) >= best_value - 1e-12:
            continue
        pick = -1
        for e in element_order:
            if (remaining >> e) & 1:
                pick = e
                break
        cands = [i for i in coverers[pick] if sub_sets[i] & remaining]
        cands.sort(key=lambda i: (sub_w[i] / _popcount(sub_sets[i] & remaining), i))
        for i in reversed(cands):
            stack.append((covered | sub_sets[i], cost + sub_w[i], chosen + (i,)))

    return SolveResult(best_value, tuple(kept[i] for i in best_chosen), True, nodes)


# -- maximum-weight independent set -------------------------------------------


def greedy_independent_set(neighbors: list[int], weights: list[float]) -> SolveResult:
    """Take vertices in descending weight (ties: ascending index); result
    is maximal, hence a lower bound on the optimum."""
    order = sorted(range(len(weights)), key=lambda i: (-weights[i], i))
    blocked = 0
    chosen: list[int] = []
    total = 0.0
    for i in order:
        if (blocked >> i) & 1:
            continue
        chosen.append(i)
        total += weights[i]
        blocked |= neighbors[i] | (1 << i)
    return SolveResult(total, tuple(sorted(chosen)), False, 0)


def _components(neighbors: list[int]) -> list[list[int]]:
    n = len(neighbors)
    seen = [False] * n
    comps = []
    for s in range(n):
        if seen[s]:
            continue
        stack, comp = [s], []
        seen[s] = True
        while stack:
            v = stack.pop()
            comp.append(v)
            nb = neighbors[v]
            while nb:
                u = (nb & -nb).bit_length() - 1
                nb &= nb - 1
                if not seen[u]:
                    seen[u] = True
                    stack.append(u)
        comps.append(sorted(comp))
    return comps


def max_weight_independent_set(
    neighbors: list[int],
    weights: list[float],
    *,
    mode: str = "exact",
    budget: int = DEFAULT_BUDGET,
) -> SolveResult:
    """Maximum total weight of a pairwise non-adjacent vertex set.

    The graph decomposes into connected components that are solved
    independently; cliques (the typical shape of Bowen-closeness classes)
    resolve without search.
    """
    n = len(weights)
    if any(w < 0 for w in weights):
        raise DomainError("vertex weights must be nonnegative")
    if mode == "greedy":
        return greedy_independent_set(neighbors, weights)
    if mode != "exact":
        raise DomainError(f"unknown solver mode {mode!r}")

    total_value = 0.0
    total_chosen: list[int] = []
    total_nodes = 0

    for comp in _components(neighbors):
        comp_mask = 0
        for v in comp:
            comp_mask |= 1 << v
        # clique shortcut: all pairs adjacent -> take the single best vertex
        if all((neighbors[v] | (1 << v)) & comp_mask == comp_mask for v in comp):
            best_v = max(comp, key=lambda v: (weights[v], -v))
            total_value += weights[best_v]
            total_chosen.append(best_v)
            continue

        def mask_sum(mask: int) -> float:
            s = 0.0
            while mask:
                v = (mask & -mask).bit_length() - 1
                s += weights[v]
                mask &= mask - 1
            return s

        def best_available(mask: int) -> int:
            best_v, best_w = -1, -1.0
            m = mask
            while m:
                v = (m & -m).bit_length() - 1
                if weights[v] > best_w + 1e-15:
                    best_v, best_w = v, weights[v]
                m &= m - 1
            return best_v

        # greedy seed for the incumbent, restricted to the component
        best_val = 0.0
        best_set: list[int] = []
        blocked = 0
        for v in sorted(comp, key=lambda u: (-weights[u], u)):
            if not (blocked >> v) & 1:
                best_set.append(v)
                best_val += weights[v]
                blocked |= neighbors[v] | (1 << v)
        nodes = 0

        # iterative branch on the heaviest available vertex: include first
        stack: list[tuple[int, float, tuple[int, ...]]] = [(comp_mask, 0.0, ())]
        while stack:
            avail, acc, acc_set = stack.pop()
            nodes += 1
            if nodes > budget:
                raise SolverBudgetError(
                    "independent-set search exceeded its node budget; "
                    "rerun in greedy mode"
                )
            if acc > best_val + 1e-15:
                best_val = acc
                best_set = list(acc_set)
            if not avail:
                continue
            if acc + mask_sum(avail) <= best_val + 1e-15:
                continue
            v = best_available(avail)
            bit = 1 << v
            stack.append((avail & ~bit, acc, acc_set))
            stack.append(
                (avail & ~bit & ~neighbors[v], acc + weights[v], acc_set + (v,))
            )

        total_value += best_val
        total_chosen.extend(best_set)
        total_nodes += nodes

    return SolveResult(total_value, tuple(sorted(total_chosen)), True, total_nodes)
