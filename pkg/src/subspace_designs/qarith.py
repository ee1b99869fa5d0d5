"""
Exact integer arithmetic for subspace design parameters.

Everything here is a pure function of Python integers. Quotients that are
not integral come back as ``NonIntegral`` values rather than exceptions so
that scans can keep them as data.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from typing import Any, Dict, List, Optional, Tuple, Union

import sympy

from subspace_designs.errors import InvalidParameters

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NonIntegral:
    """A quotient numerator/denominator that is not an integer."""

    numerator: int
    denominator: int

    @property
    def reduced(self) -> Fraction:
        return Fraction(self.numerator, self.denominator)

    def __str__(self) -> str:
        return f"{self.numerator}/{self.denominator}"


IntOrNonIntegral = Union[int, NonIntegral]


def _exact_quotient(numerator: int, denominator: int) -> IntOrNonIntegral:
    if numerator % denominator:
        return NonIntegral(numerator, denominator)
    return numerator // denominator


def split_prime_power(q: int) -> Tuple[int, int]:
    """Return (p, f) with q = p**f, or raise InvalidParameters."""
    if q < 2:
        raise InvalidParameters(f"q={q} is not a prime power")
    factors = sympy.factorint(q)
    if len(factors) != 1:
        raise InvalidParameters(f"q={q} is not a prime power")
    ((p, f),) = factors.items()
    return int(p), int(f)


@dataclass(frozen=True)
class DesignParams:
    """The parameters t-(d,k,lam)_q of a subspace design, with q = p**f."""

    t: int
    d: int
    k: int
    lam: int
    p: int
    f: int = 1
    blocks: Optional[int] = field(default=None, compare=False)

    def __post_init__(self):
        if not 1 <= self.t < self.k <= self.d - 1:
            raise InvalidParameters(
                f"need 1 <= t < k <= d-1, got t={self.t}, k={self.k}, d={self.d}"
            )
        if self.lam < 1:
            raise InvalidParameters(f"lambda must be positive, got {self.lam}")
        if self.f < 1 or not sympy.isprime(self.p):
            raise InvalidParameters(f"q={self.p}^{self.f} is not a prime power")
        if self.blocks is not None and block_count(replace(self, blocks=None)) != self.blocks:
            raise InvalidParameters(f"block count {self.blocks} does not match {self}")

    @classmethod
    def from_q(cls, t: int, d: int, k: int, lam: int, q: int) -> "DesignParams":
        p, f = split_prime_power(q)
        return cls(t, d, k, lam, p, f)

    @property
    def q(self) -> int:
        return self.p**self.f

    def with_block_count(self) -> "DesignParams":
        """Return a copy carrying its block count, when the count is integral."""
        blocks = block_count(self)
        if isinstance(blocks, NonIntegral):
            return self
        return replace(self, blocks=blocks)

    def to_dict(self) -> Dict[str, int]:
        return {"t": self.t, "d": self.d, "k": self.k, "lambda": self.lam, "q": self.q}

    def __str__(self) -> str:
        return f"{self.t}-({self.d},{self.k},{self.lam})_{self.q}"


@lru_cache(maxsize=4096)
def gaussian_binomial(d: int, k: int, q: int) -> int:
    """Number of k-dimensional subspaces of F_q^d (zero outside 0 <= k <= d)."""
    if k < 0 or k > d:
        return 0
    numerator = 1
    denominator = 1
    for i in range(k):
        numerator *= q ** (d - i) - 1
        denominator *= q ** (k - i) - 1
    return numerator // denominator


def general_linear_order(d: int, q: int) -> int:
    return math.prod(q**d - q**i for i in range(d))


def special_linear_order(d: int, q: int) -> int:
    return general_linear_order(d, q) // (q - 1)


def block_count(params: DesignParams) -> IntOrNonIntegral:
    """|B| = lam * prod_{i<t} (q^(d-i) - 1) / (q^(k-i) - 1)."""
    q = params.q
    numerator = params.lam
    denominator = 1
    for i in range(params.t):
        numerator *= q ** (params.d - i) - 1
        denominator *= q ** (params.k - i) - 1
    return _exact_quotient(numerator, denominator)


def lambda_s(params: DesignParams, s: int) -> IntOrNonIntegral:
    """Number of blocks through a fixed s-subspace, for 0 <= s <= t."""
    if not 0 <= s <= params.t:
        raise InvalidParameters(f"s={s} outside 0..{params.t}")
    q = params.q
    numerator = params.lam * gaussian_binomial(params.d - s, params.t - s, q)
    denominator = gaussian_binomial(params.k - s, params.t - s, q)
    return _exact_quotient(numerator, denominator)


def lambda_two(params: DesignParams) -> IntOrNonIntegral:
    """The lambda of the 2-design a t-design with t >= 2 also is."""
    if params.t < 2:
        raise InvalidParameters(f"lambda_two needs t >= 2, got t={params.t}")
    return lambda_s(params, 2)


def dual_params(params: DesignParams) -> Union[DesignParams, NonIntegral]:
    """Parameters t-(d, d-k, lam')_q of the dual design."""
    t, d, k, q = params.t, params.d, params.k, params.q
    if d - k <= t:
        raise InvalidParameters(f"dual of {params} has block dimension {d - k} <= t")
    lam_dual = _exact_quotient(
        params.lam * gaussian_binomial(d - t, k, q),
        gaussian_binomial(d - t, k - t, q),
    )
    if isinstance(lam_dual, NonIntegral):
        return lam_dual
    return DesignParams(t, d, d - k, lam_dual, params.p, params.f)


def derived_params(params: DesignParams) -> DesignParams:
    """Parameters (t-1)-(d-1, k-1, lam)_q of the derived design."""
    if params.t < 2:
        raise InvalidParameters(f"derived design needs t >= 2, got t={params.t}")
    return DesignParams(params.t - 1, params.d - 1, params.k - 1, params.lam, params.p, params.f)


def primitive_part(q: int, e: int) -> int:
    """Largest divisor of q^e - 1 coprime to every q^i - 1 with i < e."""
    if e < 1 or q < 2:
        raise InvalidParameters(f"primitive part needs e >= 1 and q >= 2, got q={q}, e={e}")
    n = q**e - 1
    for i in range(1, e):
        shared = math.gcd(n, q**i - 1)
        while shared > 1:
            n //= shared
            shared = math.gcd(n, q**i - 1)
    return n


def divisibility_filter(params: DesignParams, group_order: int) -> bool:
    """True iff Phi*_d(q) * Phi*_(d-1)(q) divides 2 * group_order."""
    if params.t != 2 or 2 * params.k > params.d:
        raise InvalidParameters(f"divisibility filter needs t = 2 and k <= d/2, got {params}")
    product = primitive_part(params.q, params.d) * primitive_part(params.q, params.d - 1)
    return (2 * group_order) % product == 0


def singer_feasibility_scan(p: int, d: int) -> List[Tuple[int, int]]:
    """Block dimensions k for which a GammaL_1(p^d)-invariant 2-design is arithmetically possible.

    For each 3 <= k <= d/2 evaluates
    E = d (p^k - 1)(p^(k-1) - 1) / ((p^(d-1) - 1)(p - 1))
    and keeps the k where E is a positive integer. Admissible lambda divide E.
    """
    if d < 6:
        raise InvalidParameters(f"singer scan needs d >= 6, got d={d}")
    if not sympy.isprime(p):
        raise InvalidParameters(f"p={p} is not prime")
    feasible = []
    for k in range(3, d // 2 + 1):
        value = Fraction(
            d * (p**k - 1) * (p ** (k - 1) - 1),
            (p ** (d - 1) - 1) * (p - 1),
        )
        if value.denominator == 1 and value > 0:
            feasible.append((k, int(value)))
    return feasible


def spread_admissible(d: int, k: int) -> bool:
    """A 1-(d,k,1)_q design (a spread) can only exist when k divides d."""
    if not 1 <= k <= d:
        raise InvalidParameters(f"need 1 <= k <= d, got k={k}, d={d}")
    return d % k == 0


@dataclass(frozen=True)
class FilterResult:
    name: str
    passed: bool
    witness: Optional[Tuple[int, int]] = None
    detail: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "filter": self.name,
            "passed": self.passed,
            "witness": list(self.witness) if self.witness else None,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class AdmissibilityVerdict:
    params: DesignParams
    filters: Tuple[FilterResult, ...]
    group_order: Optional[int] = None

    @property
    def admissible(self) -> bool:
        return all(result.passed for result in self.filters)

    @property
    def refuted_by(self) -> List[str]:
        return [result.name for result in self.filters if not result.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "params": self.params.to_dict(),
            "group_order": self.group_order,
            "admissible": self.admissible,
            "refuted_by": self.refuted_by,
            "filters": [result.to_dict() for result in self.filters],
        }


def _integrality(name: str, value: Any) -> FilterResult:
    if isinstance(value, NonIntegral):
        return FilterResult(name, False, (value.numerator, value.denominator), f"{value} is not an integer")
    return FilterResult(name, True, detail=str(value))


def _two_design_reduction(params: DesignParams) -> Optional[DesignParams]:
    """2-design parameters with k <= d/2 that the divisibility lemma applies to."""
    reduced = params
    if reduced.t > 2:
        lam2 = lambda_two(reduced)
        if isinstance(lam2, NonIntegral):
            return None
        reduced = DesignParams(2, reduced.d, reduced.k, lam2, reduced.p, reduced.f)
    if 2 * reduced.k > reduced.d:
        dual = dual_params(reduced)
        if isinstance(dual, NonIntegral):
            return None
        reduced = dual
    if reduced.k < 3:
        return None
    return reduced


def admissibility_report(params: DesignParams, group_order: Optional[int] = None) -> AdmissibilityVerdict:
    """Run every arithmetic necessary condition and collect the verdicts."""
    results = []
    blocks = block_count(params)
    results.append(_integrality("block_count", blocks))

    for s in range(1, params.t):
        if s != 2:
            results.append(_integrality(f"lambda_{s}", lambda_s(params, s)))
    if params.t >= 2:
        results.append(_integrality("lambda_two", lambda_two(params)))

    if params.d - params.k > params.t:
        results.append(_integrality("dual_params", dual_params(params)))

    if params.lam == 1:
        derived = params
        while derived.t > 1:
            derived = derived_params(derived)
        passed = spread_admissible(derived.d, derived.k)
        results.append(FilterResult(
            "derived_spread",
            passed,
            None if passed else (derived.d, derived.k),
            f"derived {derived}: k={derived.k} {'divides' if passed else 'does not divide'} d={derived.d}",
        ))

    if group_order is not None:
        reduced = _two_design_reduction(params)
        if reduced is None:
            logger.debug(f"Divisibility filter not applicable to {params}")
        else:
            product = primitive_part(reduced.q, reduced.d) * primitive_part(reduced.q, reduced.d - 1)
            passed = divisibility_filter(reduced, group_order)
            results.append(FilterResult(
                "primitive_divisibility",
                passed,
                None if passed else (2 * group_order, product),
                f"Phi*_{reduced.d} * Phi*_{reduced.d - 1} = {product} vs 2|G| = {2 * group_order}",
            ))
        if not isinstance(blocks, NonIntegral):
            passed = (2 * group_order) % blocks == 0
            results.append(FilterResult(
                "block_orbit_divisibility",
                passed,
                None if passed else (2 * group_order, blocks),
                f"|B| = {blocks} vs 2|G| = {2 * group_order}",
            ))

    verdict = AdmissibilityVerdict(params, tuple(results), group_order)
    logger.debug(f"Admissibility of {params}: {'pass' if verdict.admissible else 'refuted'}")
    return verdict
