"""Covers and partitions of a scaffold, their join and dynamical iteration.

Members are stored as bitmasks over scaffold indices (Python ints), which
makes membership, intersection and refinement tests exact and fast.
Symbolic members may additionally carry a label: a tuple of
(coordinate offset, symbol) constraints describing the cylinder the
member came from.  Labels survive joins and preimages, which is what lets
Markov measures assign exact masses to iterated partition members.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DomainError, ScaffoldResolutionError
from .systems import System, ball_depth

Label = tuple[tuple[int, int], ...]  # sorted ((offset, symbol), ...)


# -- bitmask helpers --------------------------------------------------------


def mask_from_indices(indices: Iterable[int], size: int) -> int:
    m = 0
    for i in indices:
        if not 0 <= i < size:
            raise DomainError(f"index {i} outside scaffold of size {size}")
        m |= 1 << i
    return m


def mask_to_bool(mask: int, size: int) -> np.ndarray:
    nbytes = (size + 7) // 8
    raw = mask.to_bytes(nbytes, "little")
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")
    return bits[:size].astype(bool)

def bool_to_mask(arr: np.ndarray) -> int:
    packed = np.packbits(arr.astype(np.uint8), bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")


def indices_from_mask(mask: int, size: int) -> list[int]:
    return [i for i in range(size) if (mask >> i) & 1]


def full_mask(size: int) -> int:
    return (1 << size) - 1


def preimage_mask(sys: System, mask: int) -> int:
    sel = mask_to_bool(mask, sys.size)
    return bool_to_mask(sel[sys.apply_table])


#: canonical impossible constraint marking contradictory label merges;
#: no letter is negative, so its cylinder mass is always 0.
CONFLICT_LABEL: Label = ((-(10**9), -1),)


def merge_labels(a: Optional[Label], b: Optional[Label]) -> Optional[Label]:
    """Union of two constraint sets; None when either side is unlabeled,
    CONFLICT_LABEL when they contradict (empty cylinder)."""
    if a is None or b is None:
        return None
    merged = dict(a)
    for off, sym in b:
        if merged.get(off, sym) != sym:
            return CONFLICT_LABEL
        merged[off] = sym
    return tuple(sorted(merged.items()))


def shift_label(label: Optional[Label], k: int) -> Optional[Label]:
    if label is None:
        return None
    return tuple(sorted((off + k, sym) for off, sym in label))


# -- covers -----------------------------------------------------------------


@dataclass(frozen=True)
class Cover:
    """A finite cover of the scaffold by nonempty subsets."""

    size: int
    members: tuple[int, ...]
    labels: Optional[tuple[Optional[Label], ...]] = None

    def __post_init__(self):
        if not self.members:
            raise DomainError("a cover needs at least one member")
        if any(m == 0 for m in self.members):
            raise DomainError("cover members must be nonempty")
        union = 0
        for m in self.members:
            union |= m
        if union != full_mask(self.size):
            raise DomainError("cover members must cover the scaffold")
        if self.labels is not None and len(self.labels) != len(self.members):
            raise DomainError("one label per member required")

    def __len__(self):
        return len(self.members)

    def label_of(self, i: int) -> Optional[Label]:
        return None if self.labels is None else self.labels[i]

    def to_json(self) -> str:
        return json.dumps(
            {"members": [indices_from_mask(m, self.size) for m in self.members]},
            sort_keys=True,
        )

    @staticmethod
    def from_json(text: str, size: int) -> "Cover":
        doc = json.loads(text)
        return Cover(size, tuple(mask_from_indices(ids, size) for ids in doc["members"]))


@dataclass(frozen=True)
class Partition:
    """A finite partition; member 0 is the distinguished (possibly
    non-compact) cell."""

    size: int
    members: tuple[int, ...]
    labels: Optional[tuple[Optional[Label], ...]] = None

    def __post_init__(self):
        if not self.members:
            raise DomainError("a partition needs at least one member")
        # only the distinguished cell may be empty (degenerate compact case)
        if any(m == 0 for m in self.members[1:]):
            raise DomainError("partition members past index 0 must be nonempty")
        union = 0
        for m in self.members:
            if union & m:
                raise DomainError("partition members must be disjoint")
            union |= m
        if union != full_mask(self.size):
            raise DomainError("partition members must cover the scaffold")
        if self.labels is not None and len(self.labels) != len(self.members):
            raise DomainError("one label per member required")

    def __len__(self):
        return len(self.members)

    def label_of(self, i: int) -> Optional[Label]:
        return None if self.labels is None else self.labels[i]

    def as_cover(self) -> Cover:
        keep = [i for i, m in enumerate(self.members) if m]
        labels = None if self.labels is None else tuple(self.labels[i] for i in keep)
        return Cover(self.size, tuple(self.members[i] for i in keep), labels)

    def to_json(self) -> str:
        return json.dumps(
            {
                "members": [indices_from_mask(m, self.size) for m in self.members],
                "distinguished": 0,
            },
            sort_keys=True,
        )

    @staticmethod
    def from_json(text: str, size: int) -> "Partition":
        doc = json.loads(text)
        return Partition(size, tuple(mask_from_indices(ids, size) for ids in doc["members"]))


# -- admissibility ----------------------------------------------------------


def is_compact_subset(sys: System, mask: int) -> bool:
    """A scaffold subset stands in for a compact set iff it excludes a
    nonempty neighborhood of infinity (always true on compact systems)."""
    if sys.infinity_distance is None:
        return True
    fringe = mask_from_indices(sys.fringe_indices, sys.size)
    return (mask & fringe) == 0


def member_is_co_compact(sys: System, mask: int) -> bool:
    return is_compact_subset(sys, full_mask(sys.size) & ~mask)


def is_admissible_cover(sys: System, cover: Cover) -> bool:
    return any(member_is_co_compact(sys, m) for m in cover.members)


def is_strongly_admissible_cover(sys: System, cover: Cover) -> bool:
    return all(member_is_co_compact(sys, m) for m in cover.members)


def is_admissible_partition(sys: System, part: Partition) -> bool:
    """Every element but (at most) one must be compact."""
    non_compact = sum(0 if is_compact_subset(sys, m) else 1 for m in part.members)
    return non_compact <= 1


# -- cover operations ---------------------------------------------------------


def _dedupe(members: list[int], labels: Optional[list[Optional[Label]]]):
    seen: dict[int, int] = {}
    out_m: list[int] = []
    out_l: list[Optional[Label]] = []
    for i, m in enumerate(members):
        if m == 0:
            continue
        if m in seen:
            continue
        seen[m] = len(out_m)
        out_m.append(m)
        out_l.append(None if labels is None else labels[i])
    return out_m, (None if labels is None else out_l)


def join(A: Cover, B: Cover) -> Cover:
    """A v B: all nonempty pairwise intersections; refines both inputs."""
    if A.size != B.size:
        raise DomainError("covers live on different scaffolds")
    members: list[int] = []
    labels: Optional[list] = [] if (A.labels is not None and B.labels is not None) else None
    for i, a in enumerate(A.members):
        for j, b in enumerate(B.members):
            m = a & b
            if m:
                members.append(m)
                if labels is not None:
                    labels.append(merge_labels(A.labels[i], B.labels[j]))
    members, labels = _dedupe(members, labels)
    return Cover(A.size, tuple(members), None if labels is None else tuple(labels))


def join_partitions(A: Partition, B: Partition) -> Partition:
    """Join of partitions, keeping the 0-cell intersection first so the
    distinguished member stays at index 0 when nonempty."""
    if A.size != B.size:
        raise DomainError("partitions live on different scaffolds")
    members: list[int] = []
    labels: Optional[list] = [] if (A.labels is not None and B.labels is not None) else None
    for i, a in enumerate(A.members):
        for j, b in enumerate(B.members):
            m = a & b
            if m:
                members.append(m)
                if labels is not None:
                    labels.append(merge_labels(A.labels[i], B.labels[j]))
    members, labels = _dedupe(members, labels)
    return Partition(A.size, tuple(members), None if labels is None else tuple(labels))


def preimage_cover(sys: System, A: Cover) -> Cover:
    members = []
    for m in A.members:
        members.append(preimage_mask(sys, m))
    labels = None
    if A.labels is not None:
        labels = tuple(shift_label(l, sys.shift_per_apply) for l in A.labels)
    members, labels2 = _dedupe(members, list(labels) if labels is not None else None)
    return Cover(A.size, tuple(members), None if labels2 is None else tuple(labels2))


def preimage_partition(sys: System, A: Partition) -> Partition:
    members = [preimage_mask(sys, m) for m in A.members]
    labels = None
    if A.labels is not None:
        labels = [shift_label(l, sys.shift_per_apply) for l in A.labels]
    members, labels = _dedupe(members, labels)
    return Partition(A.size, tuple(members), None if labels is None else tuple(labels))


def iterate_cover(sys: System, A: Cover, n: int) -> Cover:
    """A v T^{-1}A v ... v T^{-(n-1)}A."""
    if n < 1:
        raise DomainError("iteration depth must be >= 1")
    result = A
    pre = A
    for _ in range(1, n):
        pre = preimage_cover(sys, pre)
        result = join(result, pre)
    return result


def iterate_partition(sys: System, A: Partition, n: int) -> Partition:
    if n < 1:
        raise DomainError("iteration depth must be >= 1")
    result = A
    pre = A
    for _ in range(1, n):
        pre = preimage_partition(sys, pre)
        result = join_partitions(result, pre)
    return result


def refines(B: Cover, A: Cover) -> bool:
    """True iff every member of B sits inside some member of A (A < B)."""
    if A.size != B.size:
        raise DomainError("covers live on different scaffolds")
    for b in B.members:
        if not any((b & a) == b for a in A.members):
            return False
    return True


def ball_cover(sys: System, epsilon: float, centers: Optional[Sequence[int]] = None) -> Cover:
    """The cover of the scaffold by open metric balls of radius epsilon.

    One member per center (deduplicated); on symbolic systems the balls
    are prefix cylinders and carry cylinder labels.
    """
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    if centers is None:
        centers = range(sys.size)
    centers = [sys.validate_point(c) for c in centers]
    if not centers:
        raise DomainError("empty scaffold")
    if sys.kind == "symbolic":
        depth = ball_depth(epsilon)
        if depth > sys.word_length:
            raise ScaffoldResolutionError(
                f"ball depth {depth} exceeds scaffold word length {sys.word_length}"
            )
        groups: dict[tuple, list[int]] = {}
        for i, w in enumerate(sys.words):
            groups.setdefault(w[:depth], []).append(i)
        members, labels = [], []
        seen = set()
        for c in centers:
            key = sys.words[c][:depth]
            if key in seen:
                continue
            seen.add(key)
            members.append(mask_from_indices(groups[key], sys.size))
            labels.append(tuple((t, key[t]) for t in range(depth)))
        return Cover(sys.size, tuple(members), tuple(labels))
    members = []
    block = 2048
    all_cols = np.arange(sys.size)
    center_arr = np.asarray(centers)
    masks: list[int] = []
    for start in range(0, len(centers), block):
        rows = center_arr[start : start + block]
        d = sys.metric_block(rows, all_cols)
        close = d < epsilon
        for r in range(len(rows)):
            masks.append(bool_to_mask(close[r]))
    masks, _ = _dedupe(masks, None)
    return Cover(sys.size, tuple(masks))


def cover_from_admissible_partition(sys: System, K: Partition) -> Cover:
    """{K_0 u K_1, ..., K_0 u K_n} for an admissible partition whose
    cells K_1.. are compact; the result is strongly admissible."""
    if not is_admissible_partition(sys, K):
        raise DomainError("partition is not admissible")
    if len(K.members) < 2:
        raise DomainError("need at least one compact cell besides the distinguished one")
    for m in K.members[1:]:
        if not is_compact_subset(sys, m):
            raise DomainError("cells K_1..K_n must all be compact")
    k0 = K.members[0]
    members, _ = _dedupe([k0 | m for m in K.members[1:]], None)
    return Cover(sys.size, tuple(members))


def lebesgue_number(sys: System, A: Cover) -> float:
    """Largest grid epsilon with ball_cover(eps) refining A.

    The grid is the set of distances realized on the scaffold; on a
    one-point metric an admissible cover always admits one (the scaffold
    analogue of the Lebesgue number lemma).
    """
    if not is_admissible_cover(sys, A):
        raise DomainError("cover is not admissible")
    grid = sorted(set(sys.distance_grid()), reverse=True)
    grid = [g for g in grid if g > 0]
    grid.append(grid[-1] / 2 if grid else 0.5)
    for eps in grid:
        balls = ball_cover(sys, eps)
        if refines(balls, A):
            return float(eps)
    raise ScaffoldResolutionError(
        "no grid epsilon passes; the scaffold is too coarse for this cover"
    )


def intersection_count(sys: System, K: Partition, B: Cover, k: int) -> int:
    """Max over members b of B^k of the number of K^k cells meeting b.

    Requires B to refine the cover built from K; the count is then
    guaranteed to be at most 2^k.
    """
    if k < 1:
        raise DomainError("k must be >= 1")
    derived = cover_from_admissible_partition(sys, K)
    if not refines(B, derived):
        raise DomainError("B must refine the cover derived from the partition")
    Bk = iterate_cover(sys, B, k)
    Kk = iterate_partition(sys, K, k)
    worst = 0
    for b in Bk.members:
        hits = sum(1 for c in Kk.members if b & c)
        worst = max(worst, hits)
    return worst


def min_subcover_cardinality(A: Cover, *, mode: str = "exact", budget: int = 1 << 24) -> int:
    """Cardinality of a minimum subcover (exact search by default).

    In greedy mode the result is an upper bound; exact mode raises
    SolverBudgetError when the search exceeds its node budget.
    """
    from .solvers import min_weight_set_cover

    res = min_weight_set_cover(
        full_mask(A.size),
        list(A.members),
        [1.0] * len(A.members),
        mode=mode,
        budget=budget,
    )
    return int(round(res.value))


def depth_partition(sys: System, depth: int) -> Partition:
    """The partition of a symbolic scaffold into depth-``depth`` cylinders,
    labeled with their word constraints."""
    if sys.kind != "symbolic":
        raise DomainError("depth partitions need a symbolic system")
    if depth < 1 or depth > sys.word_length:
        raise DomainError("cylinder depth outside scaffold word length")
    groups: dict[tuple, list[int]] = {}
    for i, w in enumerate(sys.words):
        groups.setdefault(w[:depth], []).append(i)
    keys = sorted(groups)
    members = tuple(mask_from_indices(groups[k], sys.size) for k in keys)
    labels = tuple(tuple((t, k[t]) for t in range(depth)) for k in keys)
    return Partition(sys.size, members, labels)


def depth_cover(sys: System, depth: int) -> Cover:
    return depth_partition(sys, depth).as_cover()
