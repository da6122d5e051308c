"""One-point compactification data: extensions, the projection
pseudometric, potential lifts and measure restriction.

A non-compact system (X, T) is studied through a compact extension
(Z, S) with S equal to T on X.  The projection pi sends Z points to X or
to the single point at infinity, and induces the pseudometric
dtilde(z, z') = d(pi z, pi z'); the complement of X has dtilde-diameter
zero, so dtilde-balls either contain it or miss it.  Only registered
explicit extensions are constructed (identity for compact systems, the
one-point and two-point-fiber recipes for the translation system); the
general existence statement is out of scope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .covers import (
    Cover,
    Partition,
    _dedupe,
    bool_to_mask,
    iterate_cover,
    mask_from_indices,
    mask_to_bool,
)
from .errors import ContractError, DomainError
from .measures import (
    EntropySequence,
    FiniteMeasure,
    dynamic_partition_entropy,
    integral,
    ks_entropy,
    partition_entropy,
)
from .systems import Potential, System, TableCore, sampled_system


@dataclass
class ExtendedSystem:
    """An extension (Z, S) of (X, T) with the natural projection.

    ``x_of_z[z]`` is the base index of z, or -1 for fiber points (the
    preimage of infinity); ``z_of_x[x]`` embeds the base scaffold in Z.
    """

    base: System
    total: System
    x_of_z: np.ndarray
    z_of_x: np.ndarray

    def __post_init__(self):
        # S must restrict to T on X (exhaustive check)
        for x in range(self.base.size):
            z = int(self.z_of_x[x])
            sz = int(self.total.apply_table[z])
            if self.x_of_z[sz] != self.base.apply_table[x]:
                raise DomainError("the extension does not restrict to the base map")
        fiber = np.nonzero(self.x_of_z < 0)[0]
        for zf in fiber:
            if self.x_of_z[self.total.apply_table[zf]] >= 0:
                raise DomainError("the fiber must be forward invariant")

    @property
    def fiber_indices(self) -> np.ndarray:
        return np.nonzero(self.x_of_z < 0)[0]

    @property
    def fiber_mask(self) -> int:
        return mask_from_indices(self.fiber_indices, self.total.size)

    def infinity_distance_of_z(self, z: int) -> float:
        x = int(self.x_of_z[z])
        if x < 0:
            return 0.0
        if self.base.infinity_distance is None:
            raise DomainError("compact base has no distance to infinity")
        return float(self.base.infinity_distance[x])

    def pseudometric(self, i: int, j: int) -> float:
        """dtilde(i, j) = d(pi i, pi j), with d(infinity, x) read from the
        base infinity distances."""
        xi, xj = int(self.x_of_z[i]), int(self.x_of_z[j])
        if xi < 0 and xj < 0:
            return 0.0
        if xi < 0:
            return float(self.base.infinity_distance[xj])
        if xj < 0:
            return float(self.base.infinity_distance[xi])
        return self.base.metric(xi, xj)

    def pseudometric_row(self, i: int) -> np.ndarray:
        out = np.empty(self.total.size)
        for j in range(self.total.size):
            out[j] = self.pseudometric(i, j)
        return out

    def restrict_mask(self, mask_z: int) -> int:
        sel = mask_to_bool(mask_z, self.total.size)
        out = np.zeros(self.base.size, dtype=bool)
        for z in np.nonzero(sel)[0]:
            x = int(self.x_of_z[z])
            if x >= 0:
                out[x] = True
        return bool_to_mask(out)

    def extend_mask(self, mask_x: int) -> int:
        sel = mask_to_bool(mask_x, self.base.size)
        out = np.zeros(self.total.size, dtype=bool)
        for x in np.nonzero(sel)[0]:
            out[int(self.z_of_x[x])] = True
        return bool_to_mask(out)


def identity_extension(sys: System) -> ExtendedSystem:
    idx = np.arange(sys.size)
    return ExtendedSystem(sys, sys, idx.copy(), idx.copy())


def one_point_extension(sys: System, fiber_points: int = 1, fiber_swap: bool = False) -> ExtendedSystem:
    """Adjoin ``fiber_points`` points over infinity; the map fixes the
    fiber (or swaps a two-point fiber when ``fiber_swap``).

    The total system carries the projection pseudometric as its metric,
    which is all the pressure machinery ever uses on Z.
    """
    if sys.infinity_distance is None:
        raise DomainError("one-point extension needs a non-compact base")
    if fiber_points < 1:
        raise DomainError("need at least one fiber point")
    n, m = sys.size, sys.size + fiber_points
    x_of_z = np.concatenate([np.arange(n), -np.ones(fiber_points, dtype=np.int64)])
    z_of_x = np.arange(n)
    apply_z = np.concatenate([sys.apply_table, np.zeros(fiber_points, dtype=np.int64)])
    for t in range(fiber_points):
        if fiber_swap and fiber_points == 2:
            apply_z[n + t] = n + (1 - t)
        else:
            apply_z[n + t] = n + t
    # pseudometric matrix over Z
    D = np.zeros((m, m))
    if sys.metric_matrix is not None:
        D[:n, :n] = sys.metric_matrix
    else:
        cols = np.arange(n)
        for i in range(n):
            D[i, :n] = [sys.metric(i, j) for j in cols]
    for t in range(fiber_points):
        D[n + t, :n] = sys.infinity_distance
        D[:n, n + t] = sys.infinity_distance
    coords = np.concatenate([sys.coords, np.full(fiber_points, np.nan)]) if sys.coords is not None else np.full(m, np.nan)
    total = sampled_system(
        f"{sys.name}+infinity",
        coords,
        apply_z,
        metric_matrix=D,
        projection_error=sys.projection_error,
    )
    return ExtendedSystem(sys, total, x_of_z, z_of_x)


def extend_system(sys: System, recipe: str = "auto") -> ExtendedSystem:
    """Build the registered extension of a system.

    Compact systems extend by themselves; non-compact ones use the
    one-point recipe (single fixed fiber point) or the two-point-fiber
    fixture that exercises a non-injective projection.
    """
    if recipe == "auto":
        recipe = "identity" if sys.is_compact else "one-point"
    if recipe == "identity":
        if not sys.is_compact:
            raise DomainError("identity extension needs a compact system")
        return identity_extension(sys)
    if recipe == "one-point":
        return one_point_extension(sys, 1)
    if recipe == "two-point-fiber":
        return one_point_extension(sys, 2, fiber_swap=True)
    raise DomainError(f"no registered extension recipe named {recipe!r}")


def lift_potential(f: Potential, ext: ExtendedSystem) -> Potential:
    """g = f o pi on Z: the core transported to X indices, the constant
    (the value at infinity) on the fiber."""
    core_x = f.core_values(ext.base)
    core_z = np.zeros(ext.total.size)
    for x in range(ext.base.size):
        core_z[int(ext.z_of_x[x])] = core_x[x]
    return Potential(TableCore(core_z), f.constant)


def restrict_measure(mu: FiniteMeasure, ext: ExtendedSystem) -> FiniteMeasure:
    """Drop the fiber mass; the total mass of the restriction may fall
    below 1."""
    if mu.size != ext.total.size:
        raise DomainError("measure lives on a different scaffold")
    w = np.zeros(ext.base.size)
    for z in range(ext.total.size):
        x = int(ext.x_of_z[z])
        if x >= 0:
            w[x] = mu.weights[z]
    return FiniteMeasure(ext.base.size, w)


def extend_measure(mu: FiniteMeasure, ext: ExtendedSystem) -> FiniteMeasure:
    """Assign zero mass to the fiber; inverse of restriction on
    X-supported measures."""
    if mu.size != ext.base.size:
        raise DomainError("measure lives on a different scaffold")
    w = np.zeros(ext.total.size)
    for x in range(ext.base.size):
        w[int(ext.z_of_x[x])] = mu.weights[x]
    return FiniteMeasure(ext.total.size, w)


def restrict_partition(ext: ExtendedSystem, Zpart: Partition) -> Partition:
    """X intersected with a Z-partition; the distinguished cell stays
    first (it may restrict to the empty set)."""
    head = ext.restrict_mask(Zpart.members[0])
    rest = [m for m in (ext.restrict_mask(z) for z in Zpart.members[1:]) if m]
    return Partition(ext.base.size, tuple([head] + rest))


def restrict_cover(ext: ExtendedSystem, Zcover: Cover) -> Cover:
    members = [ext.restrict_mask(m) for m in Zcover.members]
    members, _ = _dedupe(members, None)
    return Cover(ext.base.size, tuple(members))


def restriction_commutes(ext: ExtendedSystem, Zcover: Cover, n: int) -> bool:
    """Restricting the n-step iterate of a Z-cover to X gives the same
    member family as iterating the restricted cover on X."""
    lhs = {
        m
        for m in (ext.restrict_mask(z) for z in iterate_cover(ext.total, Zcover, n).members)
        if m
    }
    rhs = set(iterate_cover(ext.base, restrict_cover(ext, Zcover), n).members)
    return lhs == rhs


def compactified_bound_check(
    ext: ExtendedSystem,
    mu: FiniteMeasure,
    Zpart: Partition,
    f: Potential,
    n_max: int = 6,
    *,
    defect_tol: float = 1e-9,
) -> dict:
    """The entropy-through-the-compactification inequality at finite level.

    Verifies that (i) the restriction of an S-invariant measure is
    T-invariant, (ii) the (S, Zpart) entropy sequence stays below the
    base Kolmogorov-Sinai entropy over the induced family, and (iii) the
    pressure form with the lifted potential matches (integrals agree
    exactly for cores vanishing at infinity).
    """
    if ext.fiber_mask & ~Zpart.members[0]:
        raise DomainError("partition member 0 must contain the fiber")
    defect_z = mu.invariance_defect(ext.total)
    if defect_z > defect_tol:
        raise ContractError(f"measure not S-invariant (defect {defect_z:.3g})")
    mu_x = restrict_measure(mu, ext)
    defect_x = mu_x.invariance_defect(ext.base)
    fiber_mass = mu.total_mass - mu_x.total_mass

    g = lift_potential(f, ext)
    int_g = integral(ext.total, g, mu)
    int_f_x = integral(ext.base, f, mu_x)
    # the fiber contributes exactly f(infinity) = the stored constant;
    # for a vanishing core the two integrals agree on the nose
    integrals_match = abs(int_g - (int_f_x + f.constant * fiber_mass)) <= 1e-12

    seq_z = dynamic_partition_entropy(ext.total, mu, Zpart, n_max, defect_tol=defect_tol)
    if mu_x.total_mass <= 1e-15:
        h_x = 0.0
    else:
        family = [restrict_partition(ext, Zpart)]
        h_x = ks_entropy(
            ext.base,
            mu_x,
            family,
            n_max=n_max,
            defect_tol=max(defect_tol, defect_x * 1.01 + 1e-15),
        )
    entropy_ok = seq_z.extrapolated <= h_x + 1e-9
    pressure_ok = seq_z.extrapolated + int_g <= h_x + int_f_x + f.constant * fiber_mass + 1e-9
    return {
        "restriction_defect": defect_x,
        "restriction_invariant": defect_x <= defect_tol,
        "z_entropy": seq_z.extrapolated,
        "x_entropy": h_x,
        "entropy_ok": bool(entropy_ok),
        "integral_g": int_g,
        "integral_f_x": int_f_x,
        "fiber_mass": fiber_mass,
        "integrals_match": bool(integrals_match),
        "pressure_ok": bool(pressure_ok),
        "ok": bool(entropy_ok and integrals_match and pressure_ok),
    }
