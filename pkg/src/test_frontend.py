import json
import os

import pytest

from main import EXIT_BUDGET, EXIT_OK, EXIT_REFUTED, EXIT_USAGE, main
from subspace_designs import census as census_module
from subspace_designs.census import OrbitCensus, orbit_census
from subspace_designs.designs import BlockSet
from subspace_designs.errors import CheckpointLocked, CorruptCheckpoint, InvalidParameters
from subspace_designs.formats import (
    CheckpointLock, read_blocks, read_census, sniff, write_blocks, write_census,
)
from subspace_designs.gflinalg import enumerate_subspaces
from subspace_designs.matgroup import trivial_group
from subspace_designs.pipelines import parse_group_spec, run_params, run_verify
from subspace_designs.qarith import DesignParams
from utils.helpers import load_report


@pytest.fixture
def trivial_census():
    return orbit_census(trivial_group(4, 2), 4, 2, "full-scan")


@pytest.fixture
def census_file(tmp_path, trivial_census):
    path = tmp_path / "trivial.census"
    write_census(trivial_census, path)
    return path


def run(tmp_path, *argv):
    return main([*argv, "--report-dir", str(tmp_path / "reports")])


def saved(tmp_path, pipeline):
    return load_report(str(tmp_path / "reports" / f"{pipeline}.json"))


# Census and block files

def test_census_file_layout(census_file):
    lines = census_file.read_text().split("\n")
    assert lines[:5] == [
        "qdesign-census v1",
        "d=4 k=2 p=2",
        "group=trivial order=1",
        "expected=35 lexorder=pivot-rowint-v1",
        "8 4 1",
    ]
    assert lines[-1] == ""
    assert len(lines) == 4 + 35 + 1


def test_census_file_round_trip(census_file, trivial_census):
    assert read_census(census_file) == trivial_census
    assert sniff(census_file) == "census"


def test_partial_census_round_trip(tmp_path, trivial_census):
    partial = OrbitCensus.from_entries(4, 2, 2, "trivial", 1, trivial_census.entries[3:10])
    path = tmp_path / "partial.census"
    write_census(partial, path)
    loaded = read_census(path)
    assert loaded == partial
    assert not loaded.complete


def test_unknown_order_is_written_as_zero(tmp_path, trivial_census):
    census = OrbitCensus.from_entries(4, 2, 2, "custom:sl.json", None, trivial_census.entries[:1])
    path = tmp_path / "custom.census"
    write_census(census, path)
    assert "order=0" in path.read_text()
    assert read_census(path).order is None


def test_group_spec_with_whitespace_is_rejected(tmp_path):
    census = OrbitCensus.from_entries(4, 2, 2, "custom:my groups.json", None, [])
    with pytest.raises(InvalidParameters):
        write_census(census, tmp_path / "bad.census")


def _corrupt(path, old, new):
    path.write_text(path.read_text().replace(old, new, 1))


@pytest.mark.parametrize("old,new", [
    ("qdesign-census v1", "qdesign-census v2"),
    ("d=4 k=2 p=2", "d=4 k=2"),
    ("lexorder=pivot-rowint-v1", "lexorder=colex"),
    ("expected=35", "expected=36"),
    ("8 4 1\n", "8 4 0\n"),
    ("8 4 1\n", "8 4 x\n"),
    ("8 4 1\n", "8 4 100\n"),
    ("8 4 1\n", "c 4 1\n"),
    ("8 4 1\n", "8  4 1\n"),
])
def test_corrupt_census_files(census_file, old, new):
    _corrupt(census_file, old, new)
    with pytest.raises(CorruptCheckpoint):
        read_census(census_file)


def test_census_body_must_ascend(census_file):
    lines = census_file.read_text().split("\n")
    lines[4], lines[5] = lines[5], lines[4]
    census_file.write_text("\n".join(lines))
    with pytest.raises(CorruptCheckpoint):
        read_census(census_file)


def test_truncated_and_binary_census_files(census_file):
    census_file.write_text(census_file.read_text()[:-1])
    with pytest.raises(CorruptCheckpoint):
        read_census(census_file)
    census_file.write_bytes(b"qdesign-census v1\n\xff\xfe\n")
    with pytest.raises(CorruptCheckpoint):
        read_census(census_file)


def test_block_file_round_trip(tmp_path):
    blocks = BlockSet.of(list(enumerate_subspaces(5, 2, 2))[::7], 5, 2, 2)
    path = tmp_path / "some.blocks"
    write_blocks(blocks, path)
    assert read_blocks(path) == blocks
    assert sniff(path) == "blocks"
    lines = path.read_text().split("\n")
    assert lines[:2] == ["qdesign-blocks v1", "d=5 k=2 p=2"]
    path.write_text("\n".join(lines[:3] + lines[2:]))
    with pytest.raises(CorruptCheckpoint):
        read_blocks(path)


def test_sniff_rejects_other_files(tmp_path):
    path = tmp_path / "notes.txt"
    path.write_text("hello\n")
    with pytest.raises(CorruptCheckpoint):
        sniff(path)


# Checkpoint lock

def test_checkpoint_lock_is_exclusive(tmp_path):
    path = tmp_path / "run.census"
    with CheckpointLock(path) as lock:
        assert lock.lock_path.read_text() == str(os.getpid())
        with pytest.raises(CheckpointLocked):
            CheckpointLock(path).acquire()
    assert not lock.lock_path.exists()


def test_stale_lock_is_taken_over(tmp_path):
    path = tmp_path / "run.census"
    stale = tmp_path / "run.census.lock"
    stale.write_text("999999999")
    with CheckpointLock(path):
        assert stale.read_text() == str(os.getpid())
    assert not stale.exists()
    assert list(tmp_path.iterdir()) == []


@pytest.mark.parametrize("content", ["", "not a pid"])
def test_unreadable_lock_is_held(tmp_path, content):
    # a lock created but not yet written by its owner
    path = tmp_path / "run.census"
    lock_path = tmp_path / "run.census.lock"
    fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    os.write(fd, content.encode())
    os.close(fd)
    with pytest.raises(CheckpointLocked):
        CheckpointLock(path).acquire()
    assert lock_path.read_text() == content
    assert [p.name for p in tmp_path.iterdir()] == ["run.census.lock"]


# Pipelines

def test_parse_group_spec():
    assert parse_group_spec("gamma-l1", 7).name == "gamma-l1:x^7+x+1"
    assert parse_group_spec("gamma-l1:x^7+x+1", 7).order == 889
    assert parse_group_spec("gamma-l1", 3, p=3, poly="x^3+2x+1").name == "gamma-l1:x^3+2x+1"
    assert parse_group_spec("hyperplane-levi:H", 6).name == "hyperplane-levi:H"
    assert parse_group_spec("trivial", 5, p=3).order == 1
    with pytest.raises(InvalidParameters):
        parse_group_spec("symmetric", 5)


def test_reports_are_deterministic():
    first = run_params(DesignParams(2, 11, 5, 5, 2), 22517).to_dict()
    second = run_params(DesignParams(2, 11, 5, 5, 2), 22517).to_dict()
    first.pop("elapsed_seconds")
    second.pop("elapsed_seconds")
    assert first == second
    assert list(first) == ["pipeline", "inputs", "outputs", "certificates", "version"]
    assert first["inputs"]["lexorder"] == "pivot-rowint-v1"


def test_run_verify_refutes_single_orbits(tmp_path, gamma_2_7):
    path = tmp_path / "gamma.census"
    write_census(orbit_census(gamma_2_7, 7, 3, "full-scan"), path)
    report = run_verify(str(path), 2, lam=1, parallelism=1)
    assert not report.holds
    assert report.outputs["orbits"] == 15
    assert report.outputs["size_filtered"] == 15
    verdicts = report.outputs["verdicts"]
    assert len(verdicts) == 15
    assert all(v["reason"].startswith("size") and v["witness"] is not None for v in verdicts)
    assert report.certificates["t_census"]["complete"]
    with pytest.raises(InvalidParameters):
        run_verify(str(path), 2)


# Command line

@pytest.mark.parametrize("argv,code", [
    (["-t", "2", "-d", "6", "-k", "3", "-l", "1", "-q", "2"], EXIT_REFUTED),
    (["-t", "2", "-d", "7", "-k", "3", "-l", "1", "-q", "2"], EXIT_OK),
    (["-t", "2", "-d", "7", "-k", "3", "-l", "1", "-q", "2", "--group-order", "889"], EXIT_REFUTED),
    (["-t", "2", "-d", "11", "-k", "5", "-l", "1", "-q", "2"], EXIT_REFUTED),
    (["-t", "2", "-d", "11", "-k", "5", "-l", "5", "-q", "2", "--group-order", "22517"], EXIT_OK),
])
def test_params_exit_codes(tmp_path, argv, code):
    assert run(tmp_path, "params", *argv) == code
    assert saved(tmp_path, "params")["outputs"]["holds"] == (code == EXIT_OK)


def test_params_rejects_bad_parameters(tmp_path):
    assert run(tmp_path, "params", "-t", "3", "-d", "6", "-k", "3", "-l", "1", "-q", "2") == EXIT_USAGE
    assert run(tmp_path, "params", "-t", "2", "-d", "6", "-k", "3", "-l", "1", "-q", "6") == EXIT_USAGE


def test_usage_errors_exit_with_one(tmp_path):
    with pytest.raises(SystemExit) as excinfo:
        main(["params", "-t", "2"])
    assert excinfo.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as excinfo:
        main(["census", "--group", "trivial", "--d", "4", "--k", "2", "--strategy", "guess"])
    assert excinfo.value.code == EXIT_USAGE


def test_census_command_writes_the_file(tmp_path, capsys):
    output = tmp_path / "out.census"
    code = run(tmp_path, "census", "--group", "trivial", "--d", "4", "--k", "2",
               "--strategy", "full-scan", "--output", str(output))
    assert code == EXIT_OK
    assert read_census(output).size_multiset == {1: 35}
    report = saved(tmp_path, "census")
    assert report["outputs"]["size_multiset"] == {"1": 35}
    assert report["certificates"] == {"sum_of_orbit_sizes": 35, "expected": 35, "complete": True}
    assert "orbit_size" in capsys.readouterr().out


def test_census_command_with_checkpoint(tmp_path):
    checkpoint = tmp_path / "levi.census"
    argv = ["census", "--group", "hyperplane-levi:H", "--d", "6", "--k", "3", "--strategy", "sampled",
            "--parallelism", "1", "--checkpoint", str(checkpoint), "--checkpoint-every", "1", "--json"]
    assert run(tmp_path, *argv) == EXIT_OK
    first = read_census(checkpoint)
    assert first.size_multiset == {155: 1, 1240: 1}
    assert not os.path.exists(str(checkpoint) + ".lock")
    # resuming a complete checkpoint changes nothing
    assert run(tmp_path, *argv, "--seed", "5") == EXIT_OK
    assert read_census(checkpoint) == first


def test_census_command_refuses_a_held_checkpoint(tmp_path):
    checkpoint = tmp_path / "held.census"
    with CheckpointLock(checkpoint):
        code = run(tmp_path, "census", "--group", "trivial", "--d", "4", "--k", "2",
                   "--checkpoint", str(checkpoint))
    assert code == EXIT_USAGE


def test_census_budget_exit_codes(tmp_path, monkeypatch):
    argv = ["census", "--group", "gamma-l1", "--d", "7", "--k", "3", "--parallelism", "1"]
    assert run(tmp_path, *argv, "--budget-seconds=-1") == EXIT_BUDGET
    monkeypatch.setattr(census_module, "FULL_SCAN_LIMIT", 100)
    assert run(tmp_path, *argv, "--strategy", "full-scan") == EXIT_BUDGET


def test_verify_block_files(tmp_path):
    trivial = tmp_path / "all.blocks"
    write_blocks(BlockSet.of(enumerate_subspaces(6, 3, 2), 6, 2, 3), trivial)
    assert run(tmp_path, "verify", str(trivial), "-t", "2") == EXIT_OK
    assert saved(tmp_path, "verify")["outputs"]["lambda"] == 15
    assert run(tmp_path, "verify", str(trivial), "-t", "2", "-l", "15") == EXIT_OK
    assert run(tmp_path, "verify", str(trivial), "-t", "2", "-l", "1") == EXIT_REFUTED

    single = tmp_path / "one.blocks"
    write_blocks(BlockSet.of([next(enumerate_subspaces(6, 3, 2))], 6, 2, 3), single)
    assert run(tmp_path, "verify", str(single)) == EXIT_REFUTED
    witness = saved(tmp_path, "verify")["outputs"]["witness"]
    assert {witness["first_count"], witness["second_count"]} == {0, 1}


def test_verify_missing_file(tmp_path):
    assert run(tmp_path, "verify", str(tmp_path / "absent.blocks")) == EXIT_USAGE


def test_verify_census_honors_the_budget(tmp_path, gamma_2_7):
    path = tmp_path / "gamma.census"
    write_census(orbit_census(gamma_2_7, 7, 3, "full-scan"), path)
    assert run(tmp_path, "verify", str(path), "-t", "2", "-l", "1", "--parallelism", "1") == EXIT_REFUTED
    assert run(tmp_path, "verify", str(path), "-t", "2", "-l", "1", "--budget-seconds=-1") == EXIT_BUDGET


def test_reproduce_singer_scan(tmp_path):
    assert run(tmp_path, "reproduce", "singer-scan") == EXIT_OK
    feasible = saved(tmp_path, "singer-scan")["outputs"]["feasible"]
    assert feasible["2^11"] == [{"k": 5, "E": 5, "lambdas": [5]}]
    assert feasible["3^7"] == [{"k": 3, "E": 1, "lambdas": [1]}]
    assert feasible["2^13"] == []


def test_reproduce_zsigmondy(tmp_path):
    assert run(tmp_path, "reproduce", "zsigmondy-scan", "--max-e", "20") == EXIT_OK
    outputs = saved(tmp_path, "zsigmondy-scan")["outputs"]
    assert outputs["trivial_exponents"] == {"2": [1, 6]}
    assert outputs["primitive_parts"]["2"]["11"] == 2047


@pytest.mark.parametrize("lemma", ["lemma-2-2", "lemma-3-1", "lemma-3-4"])
def test_reproduce_small_lemmas(tmp_path, lemma):
    assert run(tmp_path, "reproduce", lemma) == EXIT_OK
    report = saved(tmp_path, lemma)
    assert report["pipeline"] == lemma
    assert report["outputs"]["holds"] is True


def test_reproduce_hyperplane_orbit_lengths(tmp_path):
    run(tmp_path, "reproduce", "lemma-2-2")
    outputs = saved(tmp_path, "lemma-2-2")["outputs"]
    assert outputs["K"]["size_multiset"] == {"155": 2, "1085": 1}
    assert outputs["H"]["size_multiset"] == {"155": 1, "1240": 1}
    assert outputs["block_count_lambda_1"] == 93


def test_reproduce_singer_normalizer_details(tmp_path):
    run(tmp_path, "reproduce", "lemma-3-4")
    outputs = saved(tmp_path, "lemma-3-4")["outputs"]
    assert outputs["group_order"] == 889
    assert outputs["group_order_factors"] == {"7": 1, "127": 1}
    assert outputs["refuted_lambdas"] == list(range(1, 32))
    assert outputs["census"]["size_multiset"] == {"127": 2, "889": 13}


def test_exhaustive_search_needs_a_budget(tmp_path):
    assert run(tmp_path, "reproduce", "lemma-3-5") == EXIT_USAGE


def test_exhaustive_search_desk_scale(tmp_path):
    checkpoint = tmp_path / "desk.census"
    code = run(tmp_path, "reproduce", "lemma-3-5", "--d", "7", "--k", "3", "--lambda", "3",
               "--budget-seconds", "600", "--parallelism", "1", "--checkpoint", str(checkpoint))
    assert code == EXIT_OK
    report = saved(tmp_path, "lemma-3-5")
    assert report["outputs"]["block_orbits"] == 15
    assert report["outputs"]["designs"] == []
    assert read_census(checkpoint).complete


@pytest.mark.lemma_3_5
def test_exhaustive_search_full(tmp_path):
    code = run(tmp_path, "reproduce", "lemma-3-5", "--budget-seconds", "604800",
               "--checkpoint", str(tmp_path / "lemma-3-5.census"))
    assert code == EXIT_OK
    outputs = saved(tmp_path, "lemma-3-5")["outputs"]
    assert outputs["block_orbits"] == 157607
    assert outputs["designs"] == []


def test_json_output(tmp_path, capsys):
    assert run(tmp_path, "params", "-t", "2", "-d", "7", "-k", "3", "-l", "1", "-q", "2", "--json") == EXIT_OK
    printed = json.loads(capsys.readouterr().out)
    assert printed["pipeline"] == "params"
    assert printed["certificates"]["block_count"] == 381


def test_common_options_before_the_subcommand(tmp_path, capsys):
    reports = str(tmp_path / "reports")
    argv = ["params", "-t", "2", "-d", "7", "-k", "3", "-l", "1", "-q", "2"]
    assert main(["--json", "--report-dir", reports, *argv]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["pipeline"] == "params"
    assert main(["--report-dir", reports, *argv]) == EXIT_OK
    assert not capsys.readouterr().out.startswith("{")


def test_subcommand_options_override_global_ones(tmp_path):
    argv = ["census", "--group", "gamma-l1", "--d", "7", "--k", "3", "--parallelism", "1"]
    assert main(["--budget-seconds", "600", *argv, "--budget-seconds=-1",
                 "--report-dir", str(tmp_path / "reports")]) == EXIT_BUDGET
    assert main(["--budget-seconds=-1", *argv, "--report-dir", str(tmp_path / "reports")]) == EXIT_BUDGET
