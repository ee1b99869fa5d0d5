"""
Linear algebra over prime fields and canonical subspaces of F_p^d.

A vector of F_p^d is kept as a row integer: its coordinates are base-p digits
with coordinate 0 the most significant. Over F_2 that is a bit-packed row and
elimination runs on plain ints with XOR; other primes go through numpy.

Subspaces are identified by the reduced row echelon form of a basis, so two
``Subspace`` values are equal exactly when they span the same space.
"""
import logging
import re
from dataclasses import dataclass
from functools import lru_cache, total_ordering
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt

from subspace_designs.errors import AmbientMismatch, InvalidParameters, MalformedEncoding, NotCanonical

logger = logging.getLogger(__name__)

Vec = npt.NDArray[np.int64]
Mat = npt.NDArray[np.int64]

_HEX_TOKEN = re.compile(r"[0-9a-f]+")


@lru_cache(maxsize=None)
def _weights(d: int, p: int) -> Tuple[int, ...]:
    """Place values p^(d-1-j) of coordinate j."""
    return tuple(p ** (d - 1 - j) for j in range(d))


def vec_to_int(vec: Sequence[int], p: int) -> int:
    value = 0
    for x in vec:
        value = value * p + int(x) % p
    return value


def int_to_vec(value: int, d: int, p: int) -> Vec:
    digits = np.zeros(d, dtype=np.int64)
    for j in range(d - 1, -1, -1):
        value, digits[j] = divmod(value, p)
    return digits


def digit(value: int, j: int, d: int, p: int) -> int:
    """Coordinate j of a row integer."""
    if p == 2:
        return (value >> (d - 1 - j)) & 1
    return (value // _weights(d, p)[j]) % p


def pivot_column(value: int, d: int, p: int) -> int:
    """Index of the leading non-zero coordinate (d for the zero vector)."""
    if value == 0:
        return d
    if p == 2:
        return d - value.bit_length()
    for j, weight in enumerate(_weights(d, p)):
        if value >= weight:
            return j
    return d


def combine_rows(coefficients: int, rows: Sequence[int], d: int, p: int) -> int:
    """The vector coefficients * M, where M has the given row integers.

    ``coefficients`` is itself a row integer of length len(rows).
    """
    n = len(rows)
    if p == 2:
        acc = 0
        while coefficients:
            top = coefficients.bit_length() - 1
            acc ^= rows[n - 1 - top]
            coefficients ^= 1 << top
        return acc
    acc = np.zeros(d, dtype=np.int64)
    for c, row in zip(int_to_vec(coefficients, n, p), rows):
        if c:
            acc += c * int_to_vec(row, d, p)
    return vec_to_int(acc % p, p)


def rref(m: Union[Mat, Sequence[Sequence[int]]], p: int) -> Tuple[Mat, int]:
    """Reduced row echelon form over F_p and the rank; the shape is preserved."""
    a = np.array(m, dtype=np.int64) % p
    if a.ndim != 2:
        raise InvalidParameters(f"rref expects a 2-d matrix, got shape {a.shape}")
    n_rows, n_cols = a.shape
    rank = 0
    for col in range(n_cols):
        if rank == n_rows:
            break
        nonzero = np.nonzero(a[rank:, col])[0]
        if nonzero.size == 0:
            continue
        pivot = rank + int(nonzero[0])
        if pivot != rank:
            a[[rank, pivot]] = a[[pivot, rank]]
        a[rank] = (a[rank] * pow(int(a[rank, col]), -1, p)) % p
        factors = a[:, col].copy()
        factors[rank] = 0
        a = (a - np.outer(factors, a[rank])) % p
        rank += 1
    return a, rank


def _rref_gf2(rows: Sequence[int]) -> Tuple[int, ...]:
    # basis rows keep zeros in every other basis row's pivot bit
    basis: List[int] = []
    for row in rows:
        for b in basis:
            if row & (1 << (b.bit_length() - 1)):
                row ^= b
        if row:
            top = 1 << (row.bit_length() - 1)
            basis = [b ^ row if b & top else b for b in basis]
            basis.append(row)
    return tuple(sorted(basis, reverse=True))


def canonical_rows(rows: Sequence[int], d: int, p: int) -> Tuple[int, ...]:
    """RREF basis, as row integers, of the span of the given row integers."""
    if p == 2:
        return _rref_gf2(rows)
    if not rows:
        return ()
    reduced, rank = rref(np.array([int_to_vec(r, d, p) for r in rows]), p)
    return tuple(vec_to_int(reduced[i], p) for i in range(rank))


@total_ordering
@dataclass(frozen=True)
class Subspace:
    """A subspace of F_p^d given by its RREF basis rows (row integers, pivots increasing)."""

    d: int
    p: int
    rows: Tuple[int, ...]

    @property
    def k(self) -> int:
        return len(self.rows)

    @property
    def basis(self) -> Mat:
        return np.array([int_to_vec(r, self.d, self.p) for r in self.rows], dtype=np.int64).reshape(self.k, self.d)

    @property
    def pivots(self) -> Tuple[int, ...]:
        return tuple(pivot_column(r, self.d, self.p) for r in self.rows)

    @property
    def lex_key(self) -> Tuple[Tuple[int, int], ...]:
        # each row keyed by (pivot column, row integer), first row first
        return tuple((pivot_column(r, self.d, self.p), r) for r in self.rows)

    def is_canonical(self) -> bool:
        return canonical_rows(self.rows, self.d, self.p) == self.rows

    def __lt__(self, other: "Subspace") -> bool:
        _check_ambient(self, other)
        return self.lex_key < other.lex_key

    def __str__(self) -> str:
        rendered = ["".join(str(x) for x in int_to_vec(r, self.d, self.p)) for r in self.rows]
        return "<" + ", ".join(rendered) + ">"


def _check_ambient(a: Subspace, b: Subspace):
    if (a.d, a.p) != (b.d, b.p):
        raise AmbientMismatch(f"F_{a.p}^{a.d} vs F_{b.p}^{b.d}")


def span(rows: Sequence[int], d: int, p: int) -> Subspace:
    """Subspace spanned by row integers."""
    return Subspace(d, p, canonical_rows(list(rows), d, p))


def subspace_from_rows(rows: Union[Mat, Sequence[Sequence[int]]], p: int, d: Optional[int] = None) -> Subspace:
    """Canonical subspace spanned by the rows of a matrix over F_p."""
    m = np.asarray(rows, dtype=np.int64)
    if m.size == 0:
        if d is None:
            d = m.shape[1] if m.ndim == 2 else 0
        return zero_space(d, p)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if d is not None and m.shape[1] != d:
        raise AmbientMismatch(f"rows have {m.shape[1]} columns, expected {d}")
    d = m.shape[1]
    return span([vec_to_int(row, p) for row in m], d, p)


def zero_space(d: int, p: int) -> Subspace:
    return Subspace(d, p, ())


def full_space(d: int, p: int) -> Subspace:
    return Subspace(d, p, _weights(d, p))


def contains(sup: Subspace, sub: Subspace) -> bool:
    """True iff sub is a subspace of sup."""
    _check_ambient(sup, sub)
    if sub.k > sup.k:
        return False
    if sup.p == 2:
        pivots = [(1 << (b.bit_length() - 1), b) for b in sup.rows]
        for row in sub.rows:
            for bit, b in pivots:
                if row & bit:
                    row ^= b
            if row:
                return False
        return True
    # rank of the stacked matrix equals dim(sup)
    _, rank = rref(np.vstack([sup.basis, sub.basis]), sup.p)
    return rank == sup.k


def _free_columns(rows: Sequence[int], after: int, d: int, p: int) -> int:
    """Columns j > after on which every row vanishes."""
    if p == 2:
        width = d - 1 - after
        mask = 0
        for r in rows:
            mask |= r
        return width - bin(mask & ((1 << width) - 1)).count("1")
    return sum(1 for j in range(after + 1, d) if all(digit(r, j, d, p) == 0 for r in rows))


def enumerate_subspaces(d: int, k: int, p: int) -> Iterator[Subspace]:
    """Every k-subspace of F_p^d exactly once, ascending in lex order."""
    if not 0 <= k <= d:
        raise InvalidParameters(f"need 0 <= k <= d, got k={k}, d={d}")
    weights = _weights(d, p)
    chosen: List[int] = []

    def extend(last_pivot: int) -> Iterator[Subspace]:
        if len(chosen) == k:
            yield Subspace(d, p, tuple(chosen))
            return
        still_needed = k - len(chosen) - 1
        for col in range(last_pivot + 1, d - still_needed):
            if any(digit(r, col, d, p) for r in chosen):
                continue
            for tail in range(weights[col]):
                row = weights[col] + tail
                chosen.append(row)
                if _free_columns(chosen, col, d, p) >= still_needed:
                    yield from extend(col)
                chosen.pop()

    yield from extend(-1)


def subspaces_of(s: Subspace, t: int) -> Iterator[Subspace]:
    """Every t-subspace of s, as subspaces of the ambient space."""
    if not 0 <= t <= s.k:
        raise InvalidParameters(f"need 0 <= t <= {s.k}, got t={t}")
    for coords in enumerate_subspaces(s.k, t, s.p):
        images = [combine_rows(c, s.rows, s.d, s.p) for c in coords.rows]
        yield span(images, s.d, s.p)


def lex_compare(a: Subspace, b: Subspace) -> int:
    """-1, 0 or 1 as a sorts before, equal to, or after b."""
    _check_ambient(a, b)
    if a.k != b.k:
        raise AmbientMismatch(f"cannot order a {a.k}-space against a {b.k}-space")
    key_a, key_b = a.lex_key, b.lex_key
    return (key_a > key_b) - (key_a < key_b)


def encode(s: Subspace) -> bytes:
    """Basis rows as lowercase hex row integers joined by single spaces."""
    return " ".join(format(r, "x") for r in s.rows).encode("utf-8")


def decode(data: Union[bytes, str], d: int, k: int, p: int) -> Subspace:
    """Inverse of encode; rejects anything that is not already canonical."""
    try:
        text = data.decode("utf-8") if isinstance(data, bytes) else data
    except UnicodeDecodeError as e:
        raise MalformedEncoding(f"not UTF-8: {e}") from e
    tokens = text.split(" ") if text else []
    if len(tokens) != k or not all(_HEX_TOKEN.fullmatch(tok) for tok in tokens):
        raise MalformedEncoding(f"expected {k} hex rows, got {text!r}")
    rows = tuple(int(tok, 16) for tok in tokens)
    limit = p**d
    if any(r >= limit for r in rows):
        raise MalformedEncoding(f"row out of range for F_{p}^{d}: {text!r}")
    canonical = canonical_rows(rows, d, p)
    if canonical != rows:
        raise NotCanonical(f"{text!r} is not a reduced row echelon basis of rank {k}")
    return Subspace(d, p, rows)


def orthogonal_complement(s: Subspace) -> Subspace:
    """U^perp under the standard dot product sum u_i v_i."""
    d, p = s.d, s.p
    basis = s.basis
    pivots = s.pivots
    vectors = []
    for free in (j for j in range(d) if j not in pivots):
        v = np.zeros(d, dtype=np.int64)
        v[free] = 1
        for i, col in enumerate(pivots):
            v[col] = (-basis[i, free]) % p
        vectors.append(v)
    return subspace_from_rows(vectors, p, d)


def random_subspace(d: int, k: int, p: int, rng: np.random.Generator) -> Subspace:
    """Uniformly random k-subspace: draw k x d matrices until one has rank k."""
    while True:
        m = rng.integers(0, p, size=(k, d))
        rows = canonical_rows([vec_to_int(row, p) for row in m], d, p)
        if len(rows) == k:
            return Subspace(d, p, rows)
