"""
Named pipelines behind the command line: parameter checks, censuses,
verification, and the reproduction runs for the small-case lemmas.

Every pipeline returns a ``PipelineReport``; ``report.holds`` is False when
the run refutes what it checks.
"""
import logging
import os
from typing import Dict, List, Optional, Sequence, Tuple

import sympy

from config.settings import (
    CENSUS_CHECKPOINT_EVERY, CENSUS_PARALLELISM, DEFAULT_SEED, ELEMENT_BUDGET,
    FULL_SCAN_LIMIT, REPORT_DIR, SINGER_SCAN_FIELDS, ZSIGMONDY_MAX_E,
)
from subspace_designs.census import OrbitCensus, orbit_census
from subspace_designs.designs import build_orbit_lookup, screen_orbits, verify_design
from subspace_designs.errors import InvalidParameters
from subspace_designs.formats import CheckpointLock, checkpoint_writer, read_blocks, read_census, sniff
from subspace_designs.matgroup import (
    MatGroup, enumerate_elements, gamma_l1, hyperplane_levi, load_generators, parse_polynomial, trivial_group,
)
from subspace_designs.qarith import (
    DesignParams, NonIntegral, admissibility_report, block_count, derived_params,
    gaussian_binomial, primitive_part, singer_feasibility_scan, spread_admissible,
)
from subspace_designs.reports import PipelineReport
from utils.helpers import resident_memory_mb

logger = logging.getLogger(__name__)

GROUP_KINDS = ("trivial", "gamma-l1", "hyperplane-levi:K", "hyperplane-levi:H", "custom:<path>")


def parse_group_spec(spec: str, d: int, p: int = 2, poly: Optional[str] = None) -> MatGroup:
    """Build the group named by a spec string; the group's ``name`` is the canonical spec."""
    if spec == "trivial":
        return trivial_group(d, p)
    if spec == "gamma-l1" or spec.startswith("gamma-l1:"):
        text = spec.partition(":")[2] or poly
        return gamma_l1(p, d, parse_polynomial(text, p) if text else None)
    if spec in ("hyperplane-levi:K", "hyperplane-levi:H"):
        k_group, h_group = hyperplane_levi(d, p)
        return k_group if spec.endswith("K") else h_group
    if spec.startswith("custom:"):
        group = load_generators(spec.partition(":")[2])
        if (group.d, group.p) != (d, p):
            raise InvalidParameters(f"{spec} acts on F_{group.p}^{group.d}, not F_{p}^{d}")
        return group
    raise InvalidParameters(f"unknown group spec {spec!r}; expected one of {GROUP_KINDS}")


def ensure_order(group: MatGroup, budget: int = ELEMENT_BUDGET) -> int:
    if group.order is None:
        enumerate_elements(group, budget)
    return group.order


def _auto_strategy(d: int, k: int, p: int) -> str:
    return "full-scan" if gaussian_binomial(d, k, p) <= FULL_SCAN_LIMIT else "sampled"


def _census_outputs(census: OrbitCensus) -> Dict[str, object]:
    return {
        "orbits": len(census),
        # JSON object keys are strings
        "size_multiset": {str(size): count for size, count in census.size_multiset.items()},
    }


def _census_certificates(census: OrbitCensus) -> Dict[str, object]:
    return {"sum_of_orbit_sizes": census.certificate, "expected": census.expected, "complete": census.complete}


def _log_memory(pipeline: str):
    logger.info(f"{pipeline}: resident memory {resident_memory_mb():.1f} MB")


def run_params(params: DesignParams, group_order: Optional[int] = None) -> PipelineReport:
    report = PipelineReport("params", inputs={**params.to_dict(), "group_order": group_order})
    verdict = admissibility_report(params, group_order)
    report.outputs = {**verdict.to_dict(), "holds": verdict.admissible}
    blocks = block_count(params)
    report.certificates = {"block_count": str(blocks) if isinstance(blocks, NonIntegral) else blocks}
    return report.finish()


def run_census(
    group: MatGroup,
    d: int,
    k: int,
    strategy: str = "sampled",
    seed: int = DEFAULT_SEED,
    parallelism: int = CENSUS_PARALLELISM,
    budget_seconds: Optional[float] = None,
    checkpoint: Optional[str] = None,
    checkpoint_every: int = CENSUS_CHECKPOINT_EVERY,
    force: bool = False,
) -> Tuple[OrbitCensus, PipelineReport]:
    """Census with optional checkpoint; an existing checkpoint is resumed by set union."""
    report = PipelineReport("census", inputs={
        "group": group.name, "d": d, "k": k, "p": group.p, "strategy": strategy,
        "seed": seed, "parallelism": parallelism, "checkpoint": checkpoint,
    })
    if strategy == "sampled":
        ensure_order(group)

    if checkpoint is None:
        census = orbit_census(group, d, k, strategy, seed, parallelism, budget_seconds, force=force)
    else:
        with CheckpointLock(checkpoint):
            resume = read_census(checkpoint) if os.path.exists(checkpoint) else None
            census = orbit_census(
                group, d, k, strategy, seed, parallelism, budget_seconds,
                resume=resume, on_flush=checkpoint_writer(checkpoint),
                flush_every=checkpoint_every, force=force,
            )
    report.inputs["order"] = group.order
    report.outputs = _census_outputs(census)
    report.certificates = _census_certificates(census)
    _log_memory("census")
    return census, report.finish()


def group_of_census(census: OrbitCensus) -> MatGroup:
    group = parse_group_spec(census.group, census.d, census.p)
    if census.order is not None and group.order is not None and census.order != group.order:
        raise InvalidParameters(f"census records |G| = {census.order}, {census.group} has order {group.order}")
    return group


def run_verify(
    path: str,
    t: int,
    lam: Optional[int] = None,
    seed: int = DEFAULT_SEED,
    parallelism: int = CENSUS_PARALLELISM,
    budget_seconds: Optional[float] = None,
) -> PipelineReport:
    """Verify a block file as one design, or every orbit of a census file as a design on its own."""
    report = PipelineReport("verify", inputs={"path": str(path), "t": t, "lambda": lam})
    if sniff(path) == "blocks":
        blocks = read_blocks(path)
        verdict = verify_design(blocks, t)
        holds = verdict.is_design and (lam is None or verdict.lam == lam)
        report.inputs.update({"d": blocks.d, "k": blocks.k, "p": blocks.p})
        report.outputs = {"blocks": len(blocks), **verdict.to_dict(), "holds": holds}
        report.certificates = {"t_subspaces_checked": gaussian_binomial(blocks.d, t, blocks.p)}
        return report.finish()

    if lam is None:
        raise InvalidParameters("verifying a census needs --lambda")
    block_census = read_census(path)
    block_census.require_complete()
    group = group_of_census(block_census)
    ensure_order(group)
    report.inputs.update({"group": group.name, "d": block_census.d, "k": block_census.k, "p": block_census.p})

    t_census = orbit_census(group, block_census.d, t, _auto_strategy(block_census.d, t, block_census.p),
                            seed, parallelism, budget_seconds)
    verdicts = screen_orbits(group, block_census, t_census, lam, parallelism, build_orbit_lookup(group, t_census))
    profiled = [v for v in verdicts if v.reason == "profile"]
    designs = [v for v in verdicts if v.is_design]
    report.outputs = {
        "orbits": len(verdicts),
        "size_filtered": len(verdicts) - len(profiled),
        "profiled": len(profiled),
        "designs": [v.to_dict() for v in designs],
        "verdicts": [v.to_dict() for v in verdicts],
        "holds": bool(designs),
    }
    report.certificates = {
        "block_census": _census_certificates(block_census),
        "t_census": _census_certificates(t_census),
    }
    _log_memory("verify")
    return report.finish()


def reproduce_hyperplane_orbits(p: int = 2, d: int = 6, k: int = 3) -> PipelineReport:
    """Orbits of the Levi complement K and of H = N:K on k-spaces; none may have length divisible by |B|."""
    report = PipelineReport("lemma-2-2", inputs={"p": p, "d": d, "k": k})
    k_group, h_group = hyperplane_levi(d, p)
    params = DesignParams(2, d, k, 1, p)
    blocks = block_count(params)
    outputs: Dict[str, object] = {"block_count_lambda_1": blocks}
    certificates = {}
    divisible = False
    for label, group in (("K", k_group), ("H", h_group)):
        census = orbit_census(group, d, k, "full-scan")
        outputs[label] = {"order": group.order, **_census_outputs(census)}
        certificates[label] = _census_certificates(census)
        divisible |= any(size % blocks == 0 for size in census.size_multiset)
    outputs["orbit_length_divisible_by_block_count"] = divisible
    outputs["holds"] = not divisible
    report.outputs = outputs
    report.certificates = certificates
    return report.finish()


def reproduce_order_divisibility(p: int = 2, d: int = 6, k: int = 3) -> PipelineReport:
    """Every admissible 2-(d,k,lambda) block count is a multiple of the lambda = 1 count."""
    report = PipelineReport("lemma-3-1", inputs={"p": p, "d": d, "k": k})
    max_lambda = gaussian_binomial(d - 2, k - 2, p)
    unit = block_count(DesignParams(2, d, k, 1, p))
    counts = {lam: block_count(DesignParams(2, d, k, lam, p)) for lam in range(1, max_lambda + 1)}
    product = primitive_part(p, d) * primitive_part(p, d - 1)
    report.outputs = {
        "block_count_lambda_1": unit,
        "block_counts": {str(lam): c for lam, c in counts.items()},
        "primitive_part_product": product,
        "holds": all(not isinstance(c, NonIntegral) and c % unit == 0 for c in counts.values()),
    }
    report.certificates = {"trivial_lambda": max_lambda, "subspaces": gaussian_binomial(d, k, p)}
    return report.finish()


def reproduce_singer_normalizer(p: int = 2, d: int = 7, k: int = 3) -> PipelineReport:
    """Block counts 3*127*lambda against the Singer normalizer, whose order has no factor 3."""
    report = PipelineReport("lemma-3-4", inputs={"p": p, "d": d, "k": k})
    group = gamma_l1(p, d)
    order = group.order
    max_lambda = gaussian_binomial(d - 2, k - 2, p)
    refuted = []
    for lam in range(1, max_lambda + 1):
        verdict = admissibility_report(DesignParams(2, d, k, lam, p), order)
        if not verdict.admissible:
            refuted.append(lam)
    census = orbit_census(group, d, k, "full-scan")
    unit = block_count(DesignParams(2, d, k, 1, p))
    report.inputs["group"] = group.name
    report.outputs = {
        "group_order": order,
        "group_order_factors": {str(q): e for q, e in sympy.factorint(order).items()},
        "block_count_lambda_1": unit,
        "refuted_lambdas": refuted,
        "census": _census_outputs(census),
        "orbit_is_block_count_multiple": any(size % unit == 0 for size in census.size_multiset),
        "holds": len(refuted) == max_lambda,
    }
    report.certificates = {"census": _census_certificates(census)}
    return report.finish()


def reproduce_exhaustive_search(
    p: int = 2,
    d: int = 11,
    k: int = 5,
    lam: int = 5,
    seed: int = DEFAULT_SEED,
    parallelism: int = CENSUS_PARALLELISM,
    budget_seconds: Optional[float] = None,
    checkpoint: Optional[str] = None,
) -> PipelineReport:
    """No single orbit of GammaL_1(p^d) on k-spaces is a 2-(d,k,lam) design.

    Long-running at d = 11; a time budget is mandatory and the block census is
    checkpointed so an interrupted run resumes.
    """
    if budget_seconds is None:
        raise InvalidParameters("lemma-3-5 needs --budget-seconds")
    group = gamma_l1(p, d)
    checkpoint = checkpoint or os.path.join(REPORT_DIR, f"lemma-3-5-d{d}-k{k}.census")
    os.makedirs(os.path.dirname(os.path.abspath(checkpoint)), exist_ok=True)
    block_census, census_report = run_census(
        group, d, k, "sampled", seed, parallelism, budget_seconds, checkpoint,
    )
    t_census = orbit_census(group, d, 2, _auto_strategy(d, 2, p), seed, parallelism)
    verdicts = screen_orbits(group, block_census, t_census, lam, parallelism)
    designs = [v for v in verdicts if v.is_design]

    report = PipelineReport("lemma-3-5", inputs={
        "p": p, "d": d, "k": k, "lambda": lam, "group": group.name,
        "seed": seed, "parallelism": parallelism, "checkpoint": checkpoint,
    })
    report.outputs = {
        "block_orbits": len(block_census),
        "block_count": block_count(DesignParams(2, d, k, lam, p)),
        "size_filter_kept": sum(1 for v in verdicts if v.reason == "profile"),
        "designs": [v.to_dict() for v in designs],
        "block_census": _census_outputs(block_census),
        "holds": not designs,
    }
    report.certificates = {
        "block_census": _census_certificates(block_census),
        "t_census": _census_certificates(t_census),
        "census_seconds": census_report.elapsed_seconds,
    }
    _log_memory("lemma-3-5")
    return report.finish()


def reproduce_zsigmondy(max_e: int = ZSIGMONDY_MAX_E, primes: Sequence[int] = (2,)) -> PipelineReport:
    """Exponents e <= max_e at which q^e - 1 has no primitive prime divisor."""
    report = PipelineReport("zsigmondy-scan", inputs={"max_e": max_e, "primes": list(primes)})
    parts: Dict[str, Dict[str, int]] = {}
    trivial: Dict[str, List[int]] = {}
    for q in primes:
        values = {e: primitive_part(q, e) for e in range(1, max_e + 1)}
        parts[str(q)] = {str(e): v for e, v in values.items()}
        trivial[str(q)] = [e for e, v in values.items() if v == 1]
    report.outputs = {"primitive_parts": parts, "trivial_exponents": trivial}
    return report.finish()


def reproduce_singer_scan(fields: Sequence[Tuple[int, int]] = SINGER_SCAN_FIELDS) -> PipelineReport:
    """Arithmetically possible GammaL_1-invariant 2-designs, with lambda = 1 spreads ruled out."""
    report = PipelineReport("singer-scan", inputs={"fields": [f"{p}^{d}" for p, d in fields]})
    feasible: Dict[str, List[Dict[str, object]]] = {}
    for p, d in fields:
        rows = []
        for k, e in singer_feasibility_scan(p, d):
            candidates = []
            for lam in sympy.divisors(e):
                derived = DesignParams(2, d, k, lam, p)
                while derived.t > 1:
                    derived = derived_params(derived)
                if lam == 1 and not spread_admissible(derived.d, derived.k):
                    logger.info(f"{p}^{d}, k={k}: lambda=1 ruled out, derived {derived} is not a spread")
                    continue
                candidates.append(lam)
            rows.append({"k": k, "E": e, "lambdas": candidates})
        feasible[f"{p}^{d}"] = rows
    report.outputs = {"feasible": feasible}
    return report.finish()


REPRODUCTIONS = {
    "lemma-2-2": reproduce_hyperplane_orbits,
    "lemma-3-1": reproduce_order_divisibility,
    "lemma-3-4": reproduce_singer_normalizer,
    "lemma-3-5": reproduce_exhaustive_search,
    "zsigmondy-scan": reproduce_zsigmondy,
    "singer-scan": reproduce_singer_scan,
}
