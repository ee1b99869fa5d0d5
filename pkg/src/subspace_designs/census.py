"""
Orbit censuses of matrix groups on Grassmannians.

A census lists one lex-least representative per orbit together with the
orbit size. It is complete exactly when the sizes add up to the Gaussian
binomial, which is checked rather than assumed.

Two strategies produce the same census:

- ``full-scan`` walks every k-subspace in lex order and expands an orbit for
  each one not yet seen.
- ``sampled`` draws uniformly random k-subspaces until the certificate is
  reached. With ``parallelism > 1`` the draws run in worker processes, each
  on its own seeded stream, and a single merger in the parent owns the
  representative set.
"""
import concurrent.futures
import logging
import time
from collections import Counter
from dataclasses import dataclass, replace
from typing import Callable, Dict, Iterable, List, Optional, Set, Tuple

import numpy as np
from tqdm import tqdm

from config.settings import (
    CENSUS_CHECKPOINT_EVERY, CENSUS_PARALLELISM, CENSUS_SAMPLE_BATCH,
    DEFAULT_SEED, FULL_SCAN_LIMIT, MEMBER_CACHE_LIMIT, SHOW_PROGRESS,
)
from subspace_designs.errors import BudgetExceeded, IncompleteCensus, InvalidParameters, QDesignError
from subspace_designs.gflinalg import Subspace, enumerate_subspaces, random_subspace
from subspace_designs.matgroup import MatGroup, orbit
from subspace_designs.qarith import gaussian_binomial

logger = logging.getLogger(__name__)

STRATEGIES = ("full-scan", "sampled")


@dataclass(frozen=True)
class CensusEntry:
    representative: Subspace
    size: int


@dataclass(frozen=True)
class OrbitCensus:
    """Orbit representatives of ``group`` on the k-subspaces of F_p^d, sorted by lex order."""

    d: int
    k: int
    p: int
    group: str
    order: Optional[int]
    entries: Tuple[CensusEntry, ...]

    @classmethod
    def from_entries(cls, d: int, k: int, p: int, group: str, order: Optional[int],
                     entries: Iterable[CensusEntry]) -> "OrbitCensus":
        ordered = tuple(sorted(entries, key=lambda e: e.representative.lex_key))
        return cls(d, k, p, group, order, ordered)

    @property
    def expected(self) -> int:
        return gaussian_binomial(self.d, self.k, self.p)

    @property
    def certificate(self) -> int:
        return sum(e.size for e in self.entries)

    @property
    def complete(self) -> bool:
        return self.certificate == self.expected

    @property
    def representatives(self) -> List[Subspace]:
        return [e.representative for e in self.entries]

    @property
    def size_multiset(self) -> Dict[int, int]:
        """orbit size -> number of orbits of that size, ascending by size."""
        counts = Counter(e.size for e in self.entries)
        return dict(sorted(counts.items()))

    def __len__(self) -> int:
        return len(self.entries)

    def require_complete(self):
        if not self.complete:
            raise IncompleteCensus(
                f"census of {self.group} on {self.k}-spaces of F_{self.p}^{self.d} "
                f"covers {self.certificate:,} of {self.expected:,} subspaces"
            )


class CensusMerger:
    """Owns the representative set and the certificate accumulator of one census run."""

    def __init__(self, group: MatGroup, d: int, k: int, on_flush: Optional[Callable[[OrbitCensus], None]] = None,
                 flush_every: int = CENSUS_CHECKPOINT_EVERY):
        self.group = group
        self.d, self.k, self.p = d, k, group.p
        self.expected = gaussian_binomial(d, k, group.p)
        self.sizes: Dict[Subspace, int] = {}
        self.certificate = 0
        self.on_flush = on_flush
        self.flush_every = flush_every
        self._since_flush = 0

    @property
    def complete(self) -> bool:
        return self.certificate == self.expected

    def add(self, rep: Subspace, size: int) -> bool:
        """Insert one orbit; returns False when the representative is already known."""
        if rep in self.sizes:
            return False
        self.sizes[rep] = size
        self.certificate += size
        if self.certificate > self.expected:
            raise QDesignError(
                f"orbit sizes sum to {self.certificate:,} > {self.expected:,}; representatives are not canonical"
            )
        self._since_flush += 1
        if self.on_flush is not None and self._since_flush >= self.flush_every:
            self.flush()
        return True

    def merge(self, census: OrbitCensus):
        """Set-union a previously saved census into this run."""
        if (census.d, census.k, census.p) != (self.d, self.k, self.p) or census.group != self.group.name:
            raise InvalidParameters(
                f"cannot resume {census.group} ({census.d},{census.k},{census.p}) "
                f"into {self.group.name} ({self.d},{self.k},{self.p})"
            )
        for entry in census.entries:
            self.add(entry.representative, entry.size)
        logger.info(f"Resumed {len(census):,} orbits, certificate {self.certificate:,}/{self.expected:,}")

    def snapshot(self) -> OrbitCensus:
        return OrbitCensus.from_entries(
            self.d, self.k, self.p, self.group.name, self.group.order,
            (CensusEntry(rep, size) for rep, size in self.sizes.items()),
        )

    def flush(self):
        if self.on_flush is not None:
            self.on_flush(self.snapshot())
        self._since_flush = 0


def orbit_census(
    group: MatGroup,
    d: int,
    k: int,
    strategy: str = "sampled",
    seed: int = DEFAULT_SEED,
    parallelism: int = CENSUS_PARALLELISM,
    budget_seconds: Optional[float] = None,
    resume: Optional[OrbitCensus] = None,
    on_flush: Optional[Callable[[OrbitCensus], None]] = None,
    flush_every: int = CENSUS_CHECKPOINT_EVERY,
    force: bool = False,
) -> OrbitCensus:
    """Complete census of the orbits of ``group`` on k-subspaces of F_p^d.

    Raises BudgetExceeded carrying the partial census when ``budget_seconds``
    runs out; ``on_flush`` receives the partial census then as well.
    """
    if strategy not in STRATEGIES:
        raise InvalidParameters(f"unknown census strategy {strategy!r}; choose one of {STRATEGIES}")
    if group.d != d:
        raise InvalidParameters(f"group acts on F_{group.p}^{group.d}, census asked for d={d}")
    if not 1 <= k <= d - 1:
        raise InvalidParameters(f"need 1 <= k <= d-1, got k={k}, d={d}")

    merger = CensusMerger(group, d, k, on_flush, flush_every)
    if resume is not None:
        merger.merge(resume)
    deadline = None if budget_seconds is None else time.monotonic() + budget_seconds
    logger.info(
        f"Census of {group.name} on {k}-spaces of F_{group.p}^{d}: {strategy}, "
        f"{merger.expected:,} subspaces"
    )
    start = time.time()

    try:
        if strategy == "full-scan":
            if merger.expected > FULL_SCAN_LIMIT and not force:
                raise BudgetExceeded(
                    f"full scan of {merger.expected:,} subspaces exceeds the limit {FULL_SCAN_LIMIT:,}; pass force",
                    limit=FULL_SCAN_LIMIT,
                )
            _full_scan(merger, deadline)
        else:
            if group.order is None:
                raise InvalidParameters(f"sampled census of {group.name} needs a known group order")
            if parallelism > 1:
                _sample_parallel(merger, seed, parallelism, deadline)
            else:
                _sample_sequential(merger, seed, deadline)
    except BudgetExceeded as e:
        merger.flush()
        e.partial = merger.snapshot()
        logger.error(f"Census stopped early with {len(merger.sizes):,} orbits: {e}")
        raise

    census = merger.snapshot()
    merger.flush()
    logger.info(
        f"Census complete: {len(census):,} orbits, certificate {census.certificate:,} "
        f"in {time.time() - start:.2f} seconds"
    )
    return census


def _check_deadline(deadline: Optional[float]):
    if deadline is not None and time.monotonic() > deadline:
        raise BudgetExceeded("census time budget exhausted")


def _progress(merger: CensusMerger) -> tqdm:
    return tqdm(total=merger.expected, initial=merger.certificate, unit="subspace",
                disable=not SHOW_PROGRESS, leave=False)


def _full_scan(merger: CensusMerger, deadline: Optional[float]):
    visited: Set[Subspace] = set()
    for rep in merger.sizes:
        visited |= orbit(merger.group, rep)
    with _progress(merger) as bar:
        for s in enumerate_subspaces(merger.d, merger.k, merger.p):
            if merger.complete:
                break
            if s in visited:
                continue
            _check_deadline(deadline)
            members = orbit(merger.group, s)
            visited |= members
            # enumeration is ascending, so the first unseen member is the orbit minimum
            merger.add(s, len(members))
            bar.update(len(members))


def _sample_sequential(merger: CensusMerger, seed: int, deadline: Optional[float]):
    rng = np.random.default_rng(seed)
    seen: Set[Subspace] = set()
    draws = 0
    with _progress(merger) as bar:
        while not merger.complete:
            s = random_subspace(merger.d, merger.k, merger.p, rng)
            draws += 1
            if s in seen:
                continue
            _check_deadline(deadline)
            members = orbit(merger.group, s)
            rep = min(members, key=lambda x: x.lex_key)
            if merger.add(rep, len(members)):
                bar.update(len(members))
            if len(seen) + len(members) <= MEMBER_CACHE_LIMIT:
                seen |= members
    logger.info(f"Sequential sampler finished after {draws:,} draws")


_worker_group: Optional[MatGroup] = None
_worker_seen: Set[Tuple[int, ...]] = set()


def _init_worker(group: MatGroup):
    global _worker_group, _worker_seen
    _worker_group = group
    _worker_seen = set()


def _sample_batch(seed: int, task: int, d: int, k: int, batch: int) -> List[Tuple[Tuple[int, ...], int]]:
    """Draw ``batch`` subspaces from stream ``task`` and return orbits this worker has not reported."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(task,)))
    found = []
    for _ in range(batch):
        s = random_subspace(d, k, _worker_group.p, rng)
        if s.rows in _worker_seen:
            continue
        members = orbit(_worker_group, s)
        rep = min(members, key=lambda x: x.lex_key)
        if len(_worker_seen) + len(members) <= MEMBER_CACHE_LIMIT:
            _worker_seen.update(m.rows for m in members)
        found.append((rep.rows, len(members)))
    return found


def _sample_parallel(merger: CensusMerger, seed: int, parallelism: int, deadline: Optional[float]):
    # workers rebuild nothing but the generator list
    shipped = replace(merger.group, elements=None)
    d, k, p = merger.d, merger.k, merger.p
    task = 0
    with _progress(merger) as bar, concurrent.futures.ProcessPoolExecutor(
        max_workers=parallelism, initializer=_init_worker, initargs=(shipped,)
    ) as executor:
        pending = set()
        while not merger.complete:
            while len(pending) < 2 * parallelism:
                pending.add(executor.submit(_sample_batch, seed, task, d, k, CENSUS_SAMPLE_BATCH))
                task += 1
            done, pending = concurrent.futures.wait(pending, return_when=concurrent.futures.FIRST_COMPLETED)
            for future in done:
                for rows, size in future.result():
                    if merger.add(Subspace(d, p, rows), size):
                        bar.update(size)
                    if merger.complete:
                        break
                if merger.complete:
                    break
            if not merger.complete:
                try:
                    _check_deadline(deadline)
                except BudgetExceeded:
                    executor.shutdown(wait=False, cancel_futures=True)
                    raise
        executor.shutdown(wait=False, cancel_futures=True)
    logger.info(f"Parallel sampler finished after {task:,} batches of {CENSUS_SAMPLE_BATCH}")
