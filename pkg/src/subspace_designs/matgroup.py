"""
Matrix groups over F_p acting on subspaces.

Group elements act on the right of row vectors: a subspace with basis B is
sent to the span of B*g, so act(act(s, g), h) == act(s, g*h).
"""
import json
import logging
from dataclasses import dataclass, field
from typing import FrozenSet, List, Optional, Sequence, Tuple

import numpy as np
import sympy
from sympy.parsing.sympy_parser import implicit_multiplication_application, parse_expr, standard_transformations

from config.settings import DEFAULT_PRIMITIVE_POLYNOMIALS
from subspace_designs.errors import (
    AmbientMismatch,
    BudgetExceeded,
    InvalidParameters,
    NotInvertible,
    NotPrimitive,
    OrbitBudgetExceeded,
)
from subspace_designs.gflinalg import (
    Mat,
    Subspace,
    _weights,
    canonical_rows,
    combine_rows,
    int_to_vec,
    rref,
    vec_to_int,
)
from subspace_designs.qarith import special_linear_order

logger = logging.getLogger(__name__)

_TRANSFORMS = standard_transformations + (implicit_multiplication_application,)

Polynomial = Tuple[int, ...]


@dataclass(frozen=True)
class GroupElement:
    """An invertible d x d matrix over F_p, stored as row integers."""

    d: int
    p: int
    rows: Tuple[int, ...]

    @classmethod
    def from_matrix(cls, matrix: Sequence[Sequence[int]], p: int) -> "GroupElement":
        m = np.array(matrix, dtype=np.int64) % p
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidParameters(f"group elements are square matrices, got shape {m.shape}")
        d = m.shape[0]
        rows = tuple(vec_to_int(row, p) for row in m)
        if len(canonical_rows(rows, d, p)) != d:
            raise NotInvertible(f"singular {d}x{d} matrix over F_{p}")
        return cls(d, p, rows)

    @classmethod
    def identity(cls, d: int, p: int) -> "GroupElement":
        return cls(d, p, _weights(d, p))

    @property
    def matrix(self) -> Mat:
        return np.array([int_to_vec(r, self.d, self.p) for r in self.rows], dtype=np.int64)

    def apply(self, vector: int) -> int:
        """Row vector (as a row integer) times this matrix."""
        return combine_rows(vector, self.rows, self.d, self.p)

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        if (self.d, self.p) != (other.d, other.p):
            raise AmbientMismatch(f"GL_{self.d}({self.p}) vs GL_{other.d}({other.p})")
        return GroupElement(self.d, self.p, tuple(other.apply(r) for r in self.rows))

    def inverse(self) -> "GroupElement":
        augmented = np.hstack([self.matrix, np.eye(self.d, dtype=np.int64)])
        reduced, _ = rref(augmented, self.p)
        return GroupElement.from_matrix(reduced[:, self.d:], self.p)

    def __pow__(self, exponent: int) -> "GroupElement":
        base = self if exponent >= 0 else self.inverse()
        exponent = abs(exponent)
        result = GroupElement.identity(self.d, self.p)
        while exponent:
            if exponent & 1:
                result = result * base
            base = base * base
            exponent >>= 1
        return result

    def is_identity(self) -> bool:
        return self.rows == _weights(self.d, self.p)

    def determinant(self) -> int:
        return int(round(sympy.Matrix(self.matrix.tolist()).det())) % self.p


@dataclass
class MatGroup:
    """A matrix group given by generators, with an optional cache of all its elements."""

    generators: Tuple[GroupElement, ...]
    name: str = "custom"
    order: Optional[int] = None
    elements: Optional[Tuple[GroupElement, ...]] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.generators:
            raise InvalidParameters("a group needs at least one generator")
        ambient = {(g.d, g.p) for g in self.generators}
        if len(ambient) != 1:
            raise AmbientMismatch(f"generators live in different spaces: {sorted(ambient)}")

    @property
    def d(self) -> int:
        return self.generators[0].d

    @property
    def p(self) -> int:
        return self.generators[0].p


def act(s: Subspace, g: GroupElement) -> Subspace:
    """The subspace spanned by (basis of s) * g."""
    if (s.d, s.p) != (g.d, g.p):
        raise AmbientMismatch(f"F_{s.p}^{s.d} acted on by GL_{g.d}({g.p})")
    return Subspace(s.d, s.p, canonical_rows([g.apply(r) for r in s.rows], s.d, s.p))


def element_order(g: GroupElement, limit: Optional[int] = None) -> int:
    """Least n >= 1 with g^n = 1."""
    power = g
    n = 1
    while not power.is_identity():
        power = power * g
        n += 1
        if limit is not None and n > limit:
            raise BudgetExceeded(f"element order exceeds {limit:,}", limit=limit)
    return n


def _check_polynomial(p: int, d: int, poly: Sequence[int]) -> Polynomial:
    if not sympy.isprime(p):
        raise InvalidParameters(f"p={p} is not prime")
    coeffs = tuple(int(c) % p for c in poly)
    if len(coeffs) != d + 1 or coeffs[-1] != 1:
        raise InvalidParameters(f"expected a monic degree-{d} polynomial, got {format_polynomial(coeffs)}")
    if coeffs[0] == 0:
        raise NotPrimitive(f"{format_polynomial(coeffs)} is divisible by x")
    return coeffs


def companion_matrix(p: int, d: int, poly: Sequence[int]) -> GroupElement:
    """Multiplication by x on F_p[x]/(poly) in the basis 1, x, ..., x^(d-1)."""
    coeffs = _check_polynomial(p, d, poly)
    m = np.zeros((d, d), dtype=np.int64)
    for i in range(d - 1):
        m[i, i + 1] = 1
    m[d - 1] = [(-c) % p for c in coeffs[:d]]
    return GroupElement.from_matrix(m, p)


def singer_element(p: int, d: int, poly: Sequence[int]) -> GroupElement:
    """Companion matrix of a primitive polynomial: an element of order p^d - 1."""
    g = companion_matrix(p, d, poly)
    n = p**d - 1
    # primitive-root test: g^n = 1 and g^(n/r) != 1 for every prime r | n
    if not (g**n).is_identity() or any((g ** (n // r)).is_identity() for r in sympy.factorint(n)):
        raise NotPrimitive(
            f"{format_polynomial(poly)} is not primitive over F_{p}; "
            f"supply another primitive polynomial of degree {d}"
        )
    return g


def frobenius_element(p: int, d: int, poly: Sequence[int]) -> GroupElement:
    """The map x -> x^p on F_p[x]/(poly) in the power basis."""
    s = companion_matrix(p, d, poly)
    # row i is the coordinate vector of x^(i p), i.e. row 0 of S^(i p)
    rows = tuple((s ** (i * p)).rows[0] for i in range(d))
    return GroupElement.from_matrix([int_to_vec(r, d, p) for r in rows], p)


def gamma_l1(p: int, d: int, poly: Optional[Sequence[int]] = None) -> MatGroup:
    """GammaL_1(p^d) = <Singer cycle, Frobenius>, of order d (p^d - 1)."""
    poly = _check_polynomial(p, d, default_polynomial(p, d) if poly is None else poly)
    singer = singer_element(p, d, poly)
    frobenius = frobenius_element(p, d, poly)
    return MatGroup(
        generators=(singer, frobenius),
        name=f"gamma-l1:{format_polynomial(poly)}",
        order=d * (p**d - 1),
    )


def trivial_group(d: int, p: int) -> MatGroup:
    return MatGroup(generators=(GroupElement.identity(d, p),), name="trivial", order=1)


def sl_generators(m: int, p: int) -> List[GroupElement]:
    """A transvection and a signed m-cycle, which together generate SL_m(p)."""
    if m < 2:
        raise InvalidParameters(f"sl_generators needs m >= 2, got {m}")
    transvection = np.eye(m, dtype=np.int64)
    transvection[0, 1] = 1
    cycle = np.zeros((m, m), dtype=np.int64)
    for i in range(m - 1):
        cycle[i, i + 1] = 1
    cycle[m - 1, 0] = (-1) ** (m - 1) % p
    return [GroupElement.from_matrix(transvection, p), GroupElement.from_matrix(cycle, p)]


def _embed(a: GroupElement, dd: int) -> GroupElement:
    m = np.eye(dd, dtype=np.int64)
    m[1:, 1:] = a.matrix
    return GroupElement.from_matrix(m, a.p)


def hyperplane_levi(dd: int, p: int) -> Tuple[MatGroup, MatGroup]:
    """K = diag(1, SL_(dd-1)(p)) and H = N x| K, both stabilizing W = <v_2, ..., v_dd>."""
    if dd < 3:
        raise InvalidParameters(f"hyperplane_levi needs dd >= 3, got {dd}")
    levi = tuple(_embed(a, dd) for a in sl_generators(dd - 1, p))
    eta = np.eye(dd, dtype=np.int64)
    eta[0, 1] = 1  # v_1 -> v_1 + v_2
    k_order = special_linear_order(dd - 1, p)
    k_group = MatGroup(generators=levi, name="hyperplane-levi:K", order=k_order)
    h_group = MatGroup(
        generators=levi + (GroupElement.from_matrix(eta, p),),
        name="hyperplane-levi:H",
        order=p ** (dd - 1) * k_order,
    )
    return k_group, h_group


def enumerate_elements(group: MatGroup, budget: int) -> List[GroupElement]:
    """All elements by closure under right multiplication by the generators."""
    if budget < 1:
        raise InvalidParameters(f"budget must be positive, got {budget}")
    if group.elements is not None:
        return list(group.elements)
    identity = GroupElement.identity(group.d, group.p)
    seen = {identity}
    found = [identity]
    frontier = [identity]
    while frontier:
        next_frontier = []
        for x in frontier:
            for g in group.generators:
                y = x * g
                if y not in seen:
                    seen.add(y)
                    found.append(y)
                    next_frontier.append(y)
                    if len(found) > budget:
                        raise BudgetExceeded(f"{group.name} has more than {budget:,} elements", limit=budget)
        frontier = next_frontier
    if group.order is not None and group.order != len(found):
        raise InvalidParameters(f"{group.name}: closure gave {len(found):,} elements, expected {group.order:,}")
    group.elements = tuple(found)
    group.order = len(found)
    logger.info(f"Enumerated {len(found):,} elements of {group.name}")
    return found


def orbit(group: MatGroup, s: Subspace, limit: Optional[int] = None) -> FrozenSet[Subspace]:
    """Orbit of s by breadth-first closure under the generators."""
    seen = {s}
    frontier = [s]
    while frontier:
        next_frontier = []
        for x in frontier:
            for g in group.generators:
                y = act(x, g)
                if y not in seen:
                    seen.add(y)
                    next_frontier.append(y)
                    if limit is not None and len(seen) > limit:
                        raise OrbitBudgetExceeded(limit)
        frontier = next_frontier
    if group.order is not None and group.order % len(seen):
        raise InvalidParameters(
            f"orbit of size {len(seen):,} does not divide |{group.name}| = {group.order:,}"
        )
    return frozenset(seen)


def orbit_min(group: MatGroup, s: Subspace, limit: Optional[int] = None) -> Tuple[Subspace, int]:
    """Lex-least member of the orbit of s, and the orbit size."""
    members = orbit(group, s, limit)
    return min(members, key=lambda x: x.lex_key), len(members)


def default_polynomial(p: int, d: int) -> Polynomial:
    try:
        return DEFAULT_PRIMITIVE_POLYNOMIALS[(p, d)]
    except KeyError:
        raise InvalidParameters(
            f"no default primitive polynomial for (p={p}, d={d}); pass one explicitly"
        ) from None


def parse_polynomial(text: str, p: int) -> Polynomial:
    """'x^11+x^2+1' -> low-to-high coefficients reduced mod p."""
    x = sympy.Symbol("x")
    try:
        expr = parse_expr(text.replace("^", "**"), local_dict={"x": x}, transformations=_TRANSFORMS)
        coeffs = sympy.Poly(expr, x).all_coeffs()
    except (sympy.SympifyError, sympy.PolynomialError, SyntaxError, TypeError) as e:
        raise InvalidParameters(f"cannot parse polynomial {text!r}: {e}") from e
    return tuple(int(c) % p for c in reversed(coeffs))


def format_polynomial(coeffs: Sequence[int]) -> str:
    terms = []
    for i in range(len(coeffs) - 1, -1, -1):
        c = coeffs[i]
        if not c:
            continue
        power = "" if i == 0 else ("x" if i == 1 else f"x^{i}")
        if i == 0:
            terms.append(str(c))
        else:
            terms.append(power if c == 1 else f"{c}{power}")
    return "+".join(terms) or "0"


def load_generators(path: str) -> MatGroup:
    """Read a custom group: {"p": int, "generators": [[[...]]], "order": optional int}."""
    try:
        with open(path, "r") as f:
            spec = json.load(f)
        p = int(spec["p"])
        generators = tuple(GroupElement.from_matrix(m, p) for m in spec["generators"])
    except (OSError, KeyError, ValueError, TypeError) as e:
        logger.error(f"Failed to load generator file {path}: {str(e)}")
        raise
    return MatGroup(generators=generators, name=f"custom:{path}", order=spec.get("order"))
