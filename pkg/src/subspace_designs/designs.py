"""
Subspace design verification and orbit-based design search.

``verify_design`` is the brute-force check on an explicit block set. The
Kramer-Mesner path (``km_profile``, ``orbit_is_design``, ``km_search``)
works on orbit censuses instead and never materializes a block orbit.
"""
import concurrent.futures
import logging
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd

from config.settings import CENSUS_PARALLELISM, FULL_SCAN_LIMIT, SEARCH_NODE_BUDGET
from subspace_designs.census import OrbitCensus
from subspace_designs.errors import BudgetExceeded, InvalidParameters, QDesignError
from subspace_designs.gflinalg import (
    Subspace, encode, enumerate_subspaces, orthogonal_complement, subspaces_of,
)
from subspace_designs.matgroup import MatGroup, orbit
from subspace_designs.qarith import DesignParams, NonIntegral, block_count, gaussian_binomial

logger = logging.getLogger(__name__)


def _text(s: Subspace) -> str:
    return encode(s).decode("utf-8")


@dataclass(frozen=True)
class BlockSet:
    """Distinct k-subspaces of F_p^d."""

    d: int
    p: int
    k: int
    blocks: FrozenSet[Subspace] = field(default_factory=frozenset)

    def __post_init__(self):
        for b in self.blocks:
            if (b.d, b.p, b.k) != (self.d, self.p, self.k):
                raise InvalidParameters(
                    f"block {b} is not a {self.k}-subspace of F_{self.p}^{self.d}"
                )

    @classmethod
    def of(cls, blocks: Iterable[Subspace], d: int, p: int, k: int) -> "BlockSet":
        return cls(d, p, k, frozenset(blocks))

    def sorted(self) -> List[Subspace]:
        return sorted(self.blocks, key=lambda b: b.lex_key)

    def __len__(self) -> int:
        return len(self.blocks)


@dataclass(frozen=True)
class DesignWitness:
    """Two t-subspaces (or t-orbit representatives) covered a different number of times.

    ``second`` is None when every count agrees but differs from the requested lambda.
    """

    first: Subspace
    first_count: int
    second: Optional[Subspace] = None
    second_count: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "first": _text(self.first),
            "first_count": self.first_count,
            "second": None if self.second is None else _text(self.second),
            "second_count": self.second_count,
        }


@dataclass(frozen=True)
class DesignVerdict:
    t: int
    lam: Optional[int] = None
    witness: Optional[DesignWitness] = None

    @property
    def is_design(self) -> bool:
        return self.lam is not None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "t": self.t,
            "is_design": self.is_design,
            "lambda": self.lam,
            "witness": None if self.witness is None else self.witness.to_dict(),
        }


def verify_design(blocks: BlockSet, t: int, budget: int = FULL_SCAN_LIMIT) -> DesignVerdict:
    """Count the blocks through every t-subspace; lambda if constant, else a witness pair."""
    if not 0 <= t < blocks.k:
        raise InvalidParameters(f"need 0 <= t < k={blocks.k}, got t={t}")
    total = gaussian_binomial(blocks.d, t, blocks.p)
    if total > budget:
        raise BudgetExceeded(f"{total:,} {t}-subspaces exceed the verification budget {budget:,}", limit=budget)
    if not blocks.blocks:
        return DesignVerdict(t, lam=0)

    counts: Counter = Counter()
    for b in blocks.blocks:
        counts.update(subspaces_of(b, t))

    first = None
    first_count = 0
    for s in enumerate_subspaces(blocks.d, t, blocks.p):
        c = counts.get(s, 0)
        if first is None:
            first, first_count = s, c
        elif c != first_count:
            logger.debug(f"Not a {t}-design: {first} in {first_count} blocks, {s} in {c}")
            return DesignVerdict(t, witness=DesignWitness(first, first_count, s, c))
    return DesignVerdict(t, lam=first_count)


def dual_blocks(blocks: BlockSet) -> BlockSet:
    """Every block replaced by its orthogonal complement."""
    return BlockSet(
        blocks.d, blocks.p, blocks.d - blocks.k,
        frozenset(orthogonal_complement(b) for b in blocks.blocks),
    )


def materialize_orbit(group: MatGroup, rep: Subspace) -> BlockSet:
    return BlockSet(rep.d, rep.p, rep.k, frozenset(orbit(group, rep)))


@dataclass(frozen=True)
class OrbitLookup:
    """Every t-subspace mapped to the index of its t-orbit in a complete census."""

    census: OrbitCensus
    index: Dict[Subspace, int]

    def __getitem__(self, s: Subspace) -> int:
        return self.index[s]


def build_orbit_lookup(group: MatGroup, t_census: OrbitCensus) -> OrbitLookup:
    t_census.require_complete()
    _check_compatible(group, t_census)
    start = time.time()
    index: Dict[Subspace, int] = {}
    for i, entry in enumerate(t_census.entries):
        for member in orbit(group, entry.representative):
            index[member] = i
    logger.info(f"Orbit lookup for {len(t_census):,} {t_census.k}-orbits built in {time.time() - start:.2f} seconds")
    return OrbitLookup(t_census, index)


def _check_compatible(group: MatGroup, census: OrbitCensus):
    if census.group != group.name or (census.d, census.p) != (group.d, group.p):
        raise InvalidParameters(
            f"census of {census.group} on F_{census.p}^{census.d} used with {group.name} on F_{group.p}^{group.d}"
        )


@dataclass(frozen=True)
class KMProfile:
    """Incidence counts of one block orbit against every t-orbit of a census."""

    block_rep: Subspace
    block_orbit_size: int
    t: int
    t_reps: Tuple[Subspace, ...]
    t_sizes: Tuple[int, ...]
    counts: Tuple[int, ...]

    def is_design(self, lam: int) -> bool:
        return all(c == lam for c in self.counts)

    def witness(self, lam: int) -> Optional[DesignWitness]:
        """Two t-orbit representatives with distinct counts, or None when the orbit is a lambda-design."""
        if self.is_design(lam):
            return None
        for i, c in enumerate(self.counts[1:], start=1):
            if c != self.counts[0]:
                return DesignWitness(self.t_reps[0], self.counts[0], self.t_reps[i], c)
        return DesignWitness(self.t_reps[0], self.counts[0])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "block": _text(self.block_rep),
            "orbit_size": self.block_orbit_size,
            "counts": list(self.counts),
        }


def km_profile(
    group: MatGroup,
    block_rep: Subspace,
    block_orbit_size: int,
    t_census: OrbitCensus,
    lookup: Optional[OrbitLookup] = None,
) -> KMProfile:
    t_census.require_complete()
    if lookup is None:
        lookup = build_orbit_lookup(group, t_census)
    t = t_census.k
    if (block_rep.d, block_rep.p) != (t_census.d, t_census.p) or not t < block_rep.k:
        raise InvalidParameters(f"block {block_rep} does not fit a census of {t}-spaces of F_{t_census.p}^{t_census.d}")

    tallies = np.zeros(len(t_census), dtype=np.int64)
    for sub in subspaces_of(block_rep, t):
        tallies[lookup[sub]] += 1

    counts = []
    for n_i, entry in zip(tallies.tolist(), t_census.entries):
        c, rem = divmod(block_orbit_size * n_i, entry.size)
        if rem:
            raise QDesignError(
                f"non-integral incidence {block_orbit_size}*{n_i}/{entry.size} for {block_rep}; orbit data inconsistent"
            )
        counts.append(c)

    incidences = sum(c * e.size for c, e in zip(counts, t_census.entries))
    expected = block_orbit_size * gaussian_binomial(block_rep.k, t, block_rep.p)
    if incidences != expected:
        raise QDesignError(f"incidence count {incidences} != {expected} for {block_rep}")

    return KMProfile(
        block_rep, block_orbit_size, t,
        tuple(t_census.representatives), tuple(e.size for e in t_census.entries), tuple(counts),
    )


def orbit_is_design(
    group: MatGroup,
    block_rep: Subspace,
    block_orbit_size: int,
    t_census: OrbitCensus,
    lam: int,
    lookup: Optional[OrbitLookup] = None,
) -> bool:
    return km_profile(group, block_rep, block_orbit_size, t_census, lookup).is_design(lam)


@dataclass(frozen=True)
class OrbitVerdict:
    representative: Subspace
    size: int
    is_design: bool
    reason: str
    witness: Optional[DesignWitness] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "representative": _text(self.representative),
            "size": self.size,
            "is_design": self.is_design,
            "reason": self.reason,
            "witness": None if self.witness is None else self.witness.to_dict(),
        }


_worker_lookup: Optional[OrbitLookup] = None


def _init_screen_worker(lookup: OrbitLookup):
    global _worker_lookup
    _worker_lookup = lookup


def _orbit_verdict(
    group: Optional[MatGroup],
    rep: Subspace,
    size: int,
    lam: int,
    rejected_by: Optional[str],
    lookup: OrbitLookup,
) -> OrbitVerdict:
    # orbits rejected on size still get the profile witness
    witness = km_profile(group, rep, size, lookup.census, lookup).witness(lam)
    if rejected_by is not None:
        return OrbitVerdict(rep, size, False, rejected_by, witness)
    return OrbitVerdict(rep, size, witness is None, "profile", witness)


def _screen_one(rep: Subspace, size: int, lam: int, rejected_by: Optional[str]) -> OrbitVerdict:
    return _orbit_verdict(None, rep, size, lam, rejected_by, _worker_lookup)


def screen_orbits(
    group: MatGroup,
    block_census: OrbitCensus,
    t_census: OrbitCensus,
    lam: int,
    parallelism: int = CENSUS_PARALLELISM,
    lookup: Optional[OrbitLookup] = None,
) -> List[OrbitVerdict]:
    """Decide for every block orbit whether it alone is a t-(d,k,lam) design.

    Orbits whose size differs from the block count are rejected by size; every
    rejected orbit carries a witness from its incidence profile.
    """
    block_census.require_complete()
    _check_compatible(group, block_census)
    params = DesignParams(t_census.k, block_census.d, block_census.k, lam, block_census.p)
    needed = block_count(params)
    if lookup is None:
        lookup = build_orbit_lookup(group, t_census)

    entries = block_census.entries
    rejections: List[Optional[str]] = [
        f"size {e.size} != block count {needed}"
        if isinstance(needed, NonIntegral) or e.size != needed else None
        for e in entries
    ]
    kept = sum(1 for r in rejections if r is None)
    logger.info(f"Size filter kept {kept:,} of {len(block_census):,} block orbits for {params}")

    if parallelism > 1 and len(entries) > 1:
        with concurrent.futures.ProcessPoolExecutor(
            max_workers=parallelism, initializer=_init_screen_worker, initargs=(lookup,)
        ) as executor:
            verdicts = list(executor.map(
                _screen_one,
                [e.representative for e in entries],
                [e.size for e in entries],
                [lam] * len(entries),
                rejections,
                chunksize=max(1, len(entries) // (4 * parallelism)),
            ))
    else:
        verdicts = [
            _orbit_verdict(group, e.representative, e.size, lam, rejected_by, lookup)
            for e, rejected_by in zip(entries, rejections)
        ]
    return verdicts


def km_matrix(
    group: MatGroup,
    block_census: OrbitCensus,
    t_census: OrbitCensus,
    lookup: Optional[OrbitLookup] = None,
) -> pd.DataFrame:
    """Kramer-Mesner matrix: rows are block orbits, columns are t-orbits."""
    if lookup is None:
        lookup = build_orbit_lookup(group, t_census)
    rows = [
        km_profile(group, e.representative, e.size, t_census, lookup).counts
        for e in block_census.entries
    ]
    return pd.DataFrame(
        rows,
        index=[_text(r) for r in block_census.representatives],
        columns=[_text(r) for r in t_census.representatives],
    )


def km_search(
    group: MatGroup,
    block_census: OrbitCensus,
    t_census: OrbitCensus,
    lam: int,
    node_budget: int = SEARCH_NODE_BUDGET,
    max_size: Optional[int] = None,
    lookup: Optional[OrbitLookup] = None,
) -> List[Tuple[Subspace, ...]]:
    """Every union of block orbits whose summed profile equals lam on every t-orbit.

    Solutions are tuples of block-orbit representatives in census order, and
    the list is sorted. ``max_size`` bounds the number of orbits per solution.
    """
    block_census.require_complete()
    t_census.require_complete()
    if lam < 1:
        raise InvalidParameters(f"lambda must be positive, got {lam}")
    matrix = km_matrix(group, block_census, t_census, lookup).to_numpy(dtype=np.int64)
    n_rows, n_cols = matrix.shape
    limit = n_rows if max_size is None else max_size

    solutions: List[Tuple[int, ...]] = []
    chosen: List[int] = []
    nodes = 0

    def search(remaining: np.ndarray, allowed: np.ndarray):
        nonlocal nodes
        nodes += 1
        if nodes > node_budget:
            raise BudgetExceeded(f"search visited more than {node_budget:,} nodes", limit=node_budget,
                                 partial=_as_reps(solutions))
        open_cols = np.nonzero(remaining)[0]
        if open_cols.size == 0:
            solutions.append(tuple(sorted(chosen)))
            return
        if len(chosen) == limit:
            return
        usable = allowed & (matrix <= remaining).all(axis=1)
        reach = matrix[usable][:, open_cols].sum(axis=0)
        if (reach < remaining[open_cols]).any():
            return
        # branch on the open column with the fewest usable rows
        covering = (matrix[:, open_cols] > 0) & usable[:, None]
        col = int(np.argmin(covering.sum(axis=0)))
        candidates = np.nonzero(covering[:, col])[0]
        branch_allowed = usable.copy()
        for row in candidates.tolist():
            branch_allowed[row] = False
            chosen.append(row)
            search(remaining - matrix[row], branch_allowed.copy())
            chosen.pop()

    def _as_reps(found: List[Tuple[int, ...]]) -> List[Tuple[Subspace, ...]]:
        reps = block_census.representatives
        return [tuple(reps[i] for i in sol) for sol in sorted(found)]

    if n_cols:
        search(np.full(n_cols, lam, dtype=np.int64), np.ones(n_rows, dtype=bool))
    logger.info(f"Search for lambda={lam} visited {nodes:,} nodes, found {len(solutions)} solutions")
    return _as_reps(solutions)
