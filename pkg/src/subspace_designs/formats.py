"""
Text file formats for censuses and block sets, and the checkpoint lock.

Census file::

    qdesign-census v1
    d=<int> k=<int> p=<int>
    group=<spec> order=<int>
    expected=<int> lexorder=<tag>
    <hex rows, space-separated> <orbit size>
    ...

Block file::

    qdesign-blocks v1
    d=<int> k=<int> p=<int>
    <hex rows, space-separated>
    ...

Body lines are sorted ascending in lex order, separated by ``\\n``, UTF-8,
with no trailing whitespace. ``order=0`` records an unknown group order.
"""
import logging
import os
import re
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import psutil

from config.settings import BLOCK_FILE_MAGIC, CENSUS_FILE_MAGIC, LEX_ORDER_TAG
from subspace_designs.census import CensusEntry, OrbitCensus
from subspace_designs.designs import BlockSet
from subspace_designs.errors import (
    CheckpointLocked, CorruptCheckpoint, InvalidParameters, MalformedEncoding, NotCanonical,
)
from subspace_designs.gflinalg import decode, encode
from subspace_designs.qarith import gaussian_binomial

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

_AMBIENT = re.compile(r"d=(\d+) k=(\d+) p=(\d+)")
_GROUP = re.compile(r"group=(\S+) order=(\d+)")
_EXPECTED = re.compile(r"expected=(\d+) lexorder=(\S+)")


def _atomic_write(path: Path, lines: List[str]):
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def _read_lines(path: Path) -> List[str]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            text = f.read()
    except UnicodeDecodeError as e:
        raise CorruptCheckpoint(f"{path}: not UTF-8: {e}") from e
    if not text.endswith("\n"):
        raise CorruptCheckpoint(f"{path}: truncated (no final newline)")
    return text[:-1].split("\n")


def _header(pattern: re.Pattern, line: str, path: Path, what: str) -> Tuple[str, ...]:
    match = pattern.fullmatch(line)
    if match is None:
        raise CorruptCheckpoint(f"{path}: bad {what} line {line!r}")
    return match.groups()


def _encoded(s) -> str:
    return encode(s).decode("utf-8")


def write_census(census: OrbitCensus, path: PathLike):
    """Write a census (complete or partial) in lex order, replacing ``path`` atomically."""
    path = Path(path)
    if re.search(r"\s", census.group):
        raise InvalidParameters(f"group spec {census.group!r} contains whitespace")
    lines = [
        CENSUS_FILE_MAGIC,
        f"d={census.d} k={census.k} p={census.p}",
        f"group={census.group} order={census.order or 0}",
        f"expected={census.expected} lexorder={LEX_ORDER_TAG}",
    ]
    lines.extend(f"{_encoded(e.representative)} {e.size}" for e in census.entries)
    _atomic_write(path, lines)
    logger.debug(f"Wrote {len(census):,} orbits to {path}")


def read_census(path: PathLike) -> OrbitCensus:
    """Load and re-certify a census file; any inconsistency raises CorruptCheckpoint."""
    path = Path(path)
    lines = _read_lines(path)
    if len(lines) < 4 or lines[0] != CENSUS_FILE_MAGIC:
        raise CorruptCheckpoint(f"{path}: not a {CENSUS_FILE_MAGIC!r} file")
    d, k, p = (int(x) for x in _header(_AMBIENT, lines[1], path, "ambient"))
    group, order = _header(_GROUP, lines[2], path, "group")
    expected, tag = _header(_EXPECTED, lines[3], path, "expected")
    if tag != LEX_ORDER_TAG:
        raise CorruptCheckpoint(f"{path}: lex order {tag!r}, this toolkit uses {LEX_ORDER_TAG!r}")
    if int(expected) != gaussian_binomial(d, k, p):
        raise CorruptCheckpoint(f"{path}: expected={expected} but there are {gaussian_binomial(d, k, p)} subspaces")

    entries = []
    for number, line in enumerate(lines[4:], start=5):
        rows, _, size = line.rpartition(" ")
        try:
            rep = decode(rows.encode("utf-8"), d, k, p)
        except (MalformedEncoding, NotCanonical) as e:
            raise CorruptCheckpoint(f"{path}:{number}: {e}") from e
        if not size.isdigit() or int(size) < 1:
            raise CorruptCheckpoint(f"{path}:{number}: bad orbit size {size!r}")
        if entries and not entries[-1].representative.lex_key < rep.lex_key:
            raise CorruptCheckpoint(f"{path}:{number}: body is not strictly ascending")
        entries.append(CensusEntry(rep, int(size)))

    census = OrbitCensus(d, k, p, group, int(order) or None, tuple(entries))
    if census.certificate > census.expected:
        raise CorruptCheckpoint(f"{path}: orbit sizes sum to {census.certificate} > {census.expected}")
    logger.info(f"Loaded {len(census):,} orbits from {path} ({'complete' if census.complete else 'partial'})")
    return census


def checkpoint_writer(path: PathLike) -> Callable[[OrbitCensus], None]:
    def flush(census: OrbitCensus):
        write_census(census, path)
        logger.info(f"Checkpoint: {len(census):,} orbits, {census.certificate:,}/{census.expected:,} covered")
    return flush


def write_blocks(blocks: BlockSet, path: PathLike):
    lines = [BLOCK_FILE_MAGIC, f"d={blocks.d} k={blocks.k} p={blocks.p}"]
    lines.extend(_encoded(b) for b in blocks.sorted())
    _atomic_write(Path(path), lines)


def read_blocks(path: PathLike) -> BlockSet:
    path = Path(path)
    lines = _read_lines(path)
    if len(lines) < 2 or lines[0] != BLOCK_FILE_MAGIC:
        raise CorruptCheckpoint(f"{path}: not a {BLOCK_FILE_MAGIC!r} file")
    d, k, p = (int(x) for x in _header(_AMBIENT, lines[1], path, "ambient"))
    blocks = []
    for number, line in enumerate(lines[2:], start=3):
        try:
            blocks.append(decode(line.encode("utf-8"), d, k, p))
        except (MalformedEncoding, NotCanonical) as e:
            raise CorruptCheckpoint(f"{path}:{number}: {e}") from e
    unique = frozenset(blocks)
    if len(unique) != len(blocks):
        raise CorruptCheckpoint(f"{path}: repeated blocks")
    return BlockSet(d, p, k, unique)


def sniff(path: PathLike) -> str:
    """'census' or 'blocks', from the first line of the file."""
    with open(path, "r", encoding="utf-8") as f:
        first = f.readline().rstrip("\n")
    kinds: Dict[str, str] = {CENSUS_FILE_MAGIC: "census", BLOCK_FILE_MAGIC: "blocks"}
    if first not in kinds:
        raise CorruptCheckpoint(f"{path}: unknown file type {first!r}")
    return kinds[first]


class CheckpointLock:
    """Exclusive ownership of a checkpoint path through ``<path>.lock`` holding the owner pid.

    The lock file appears with its pid already written. A lock whose pid names a
    process that no longer exists is taken over; an empty or unreadable lock is
    treated as held.
    """

    def __init__(self, path: PathLike):
        self.lock_path = Path(str(path) + ".lock")
        self._held = False

    def acquire(self):
        tmp = self.lock_path.with_name(f"{self.lock_path.name}.{os.getpid()}.tmp")
        tmp.write_text(str(os.getpid()))
        try:
            while True:
                try:
                    os.link(tmp, self.lock_path)
                except FileExistsError:
                    if not self.lock_path.exists():
                        continue
                    owner = self._owner()
                    if owner is None:
                        raise CheckpointLocked(f"{self.lock_path} exists without a readable owner") from None
                    if psutil.pid_exists(owner):
                        raise CheckpointLocked(f"{self.lock_path} is held by process {owner}") from None
                    logger.warning(f"Removing stale lock {self.lock_path} (owner {owner})")
                    self.lock_path.unlink(missing_ok=True)
                    continue
                self._held = True
                return
        finally:
            tmp.unlink(missing_ok=True)

    def _owner(self) -> Optional[int]:
        try:
            return int(self.lock_path.read_text().strip())
        except (OSError, ValueError):
            return None

    def release(self):
        if self._held:
            self.lock_path.unlink(missing_ok=True)
            self._held = False

    def __enter__(self) -> "CheckpointLock":
        self.acquire()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.release()
