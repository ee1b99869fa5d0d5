import json
import os

import pytest

from subspace_designs import census as census_module
from subspace_designs.census import CensusEntry, OrbitCensus, orbit_census
from subspace_designs.errors import BudgetExceeded, IncompleteCensus, InvalidParameters
from subspace_designs.gflinalg import enumerate_subspaces
from subspace_designs.matgroup import MatGroup, orbit_min, sl_generators, trivial_group
from subspace_designs.qarith import gaussian_binomial

GOLDEN = os.path.join(os.path.dirname(__file__), "golden", "gamma_l1_2_7.json")


@pytest.fixture(scope="module")
def golden():
    with open(GOLDEN, "r") as f:
        return json.load(f)


@pytest.fixture(scope="module")
def full_scan_2_7(gamma_2_7):
    return {k: orbit_census(gamma_2_7, 7, k, "full-scan") for k in (2, 3)}


def check_partition(census: OrbitCensus, group):
    assert census.complete
    assert census.certificate == gaussian_binomial(census.d, census.k, census.p)
    reps = census.representatives
    assert len(set(reps)) == len(reps)
    assert [r.lex_key for r in reps] == sorted(r.lex_key for r in reps)
    for entry in census.entries:
        assert orbit_min(group, entry.representative) == (entry.representative, entry.size)
        if group.order is not None:
            assert group.order % entry.size == 0


def test_trivial_group_census():
    group = trivial_group(4, 2)
    census = orbit_census(group, 4, 2, "full-scan")
    assert len(census) == 35
    assert census.size_multiset == {1: 35}
    assert census.representatives == list(enumerate_subspaces(4, 2, 2))
    check_partition(census, group)


@pytest.mark.parametrize("k", [2, 3])
def test_gamma_l1_2_7_matches_golden(full_scan_2_7, golden, gamma_2_7, k):
    census = full_scan_2_7[k]
    expected = golden["censuses"][str(k)]
    assert census.group == golden["group"]
    assert census.expected == expected["expected"]
    assert len(census) == expected["orbits"]
    assert {str(s): n for s, n in census.size_multiset.items()} == expected["size_multiset"]
    check_partition(census, gamma_2_7)


@pytest.mark.parametrize("seed", [0, 1, 12345])
def test_sampled_census_equals_full_scan(full_scan_2_7, gamma_2_7, seed):
    sampled = orbit_census(gamma_2_7, 7, 3, "sampled", seed=seed, parallelism=1)
    assert sampled == full_scan_2_7[3]


def test_parallel_sampled_census_equals_full_scan(full_scan_2_7, gamma_2_7):
    sampled = orbit_census(gamma_2_7, 7, 2, "sampled", seed=7, parallelism=2)
    assert sampled == full_scan_2_7[2]


def test_hyperplane_levi_censuses(levi_6_2):
    k_group, h_group = levi_6_2
    k_census = orbit_census(k_group, 6, 3, "full-scan")
    h_census = orbit_census(h_group, 6, 3, "full-scan")
    assert k_census.size_multiset == {155: 2, 1085: 1}
    assert h_census.size_multiset == {155: 1, 1240: 1}
    assert not any(size % 93 == 0 for size in k_census.size_multiset)
    assert not any(size % 93 == 0 for size in h_census.size_multiset)
    check_partition(h_census, h_group)


def test_hyperplane_levi_sampled(levi_6_2):
    _, h_group = levi_6_2
    assert orbit_census(h_group, 6, 3, "sampled", seed=3, parallelism=1).size_multiset == {155: 1, 1240: 1}


def test_resume_merges_by_set_union(full_scan_2_7, gamma_2_7):
    complete = full_scan_2_7[3]
    partial = OrbitCensus.from_entries(7, 3, 2, complete.group, complete.order, complete.entries[::2])
    assert not partial.complete
    flushed = []
    resumed = orbit_census(gamma_2_7, 7, 3, "sampled", seed=99, parallelism=1, resume=partial,
                           on_flush=flushed.append, flush_every=2)
    assert resumed == complete
    assert flushed and flushed[-1] == complete


def test_resume_of_a_complete_census_is_idempotent(full_scan_2_7, gamma_2_7):
    complete = full_scan_2_7[2]
    assert orbit_census(gamma_2_7, 7, 2, "full-scan", resume=complete) == complete


def test_resume_rejects_other_groups(full_scan_2_7, levi_6_2):
    k_group, _ = levi_6_2
    foreign = OrbitCensus.from_entries(6, 3, 2, "gamma-l1:x^6+x+1", 378, [])
    with pytest.raises(InvalidParameters):
        orbit_census(k_group, 6, 3, "full-scan", resume=foreign)


def test_time_budget_returns_partial(gamma_2_7):
    with pytest.raises(BudgetExceeded) as excinfo:
        orbit_census(gamma_2_7, 7, 3, "full-scan", budget_seconds=-1)
    partial = excinfo.value.partial
    assert isinstance(partial, OrbitCensus)
    assert not partial.complete
    with pytest.raises(IncompleteCensus):
        partial.require_complete()


def test_full_scan_guard(gamma_2_7, monkeypatch):
    monkeypatch.setattr(census_module, "FULL_SCAN_LIMIT", 100)
    with pytest.raises(BudgetExceeded):
        orbit_census(gamma_2_7, 7, 3, "full-scan")
    assert orbit_census(gamma_2_7, 7, 2, "full-scan", force=True).complete


def test_census_argument_checks(gamma_2_7):
    unknown = MatGroup(generators=tuple(sl_generators(3, 2)), name="sl3")
    with pytest.raises(InvalidParameters):
        orbit_census(unknown, 3, 1, "sampled")
    assert len(orbit_census(unknown, 3, 1, "full-scan")) == 1
    with pytest.raises(InvalidParameters):
        orbit_census(gamma_2_7, 6, 3, "full-scan")
    with pytest.raises(InvalidParameters):
        orbit_census(gamma_2_7, 7, 7, "full-scan")
    with pytest.raises(InvalidParameters):
        orbit_census(gamma_2_7, 7, 3, "exhaustive")


def test_census_entry_order_and_equality():
    group = trivial_group(3, 2)
    census = orbit_census(group, 3, 1, "full-scan")
    shuffled = OrbitCensus.from_entries(3, 1, 2, "trivial", 1, reversed(census.entries))
    assert shuffled == census
    assert census.entries[0] == CensusEntry(next(enumerate_subspaces(3, 1, 2)), 1)


@pytest.mark.slow
def test_every_subspace_resolves_to_a_census_representative(full_scan_2_7, gamma_2_7):
    reps = {orbit_min(gamma_2_7, s)[0] for s in enumerate_subspaces(7, 3, 2)}
    assert reps == set(full_scan_2_7[3].representatives)
