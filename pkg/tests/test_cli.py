import json

import pytest

from rankagg.cli import RunReport, main
from rankagg.perm import Instance, Permutation, kendall, ulam

pytestmark = pytest.mark.filterwarnings("ignore::rankagg.reconstruct.AnalysisRegimeWarning")


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_gen_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    assert run(capsys, "gen", "--n", 7, "--m", 5, "--seed", 11, "--out", a)[0] == 0
    assert run(capsys, "gen", "--n", 7, "--m", 5, "--seed", 11, "--out", b)[0] == 0
    assert a.read_text() == b.read_text()
    P = Instance.parse(a.read_text())
    assert (P.n, P.m) == (7, 5)


def test_planted_without_moves_gives_copies(tmp_path, capsys):
    out = tmp_path / "p.txt"
    run(capsys, "gen", "--n", 9, "--m", 6, "--model", "planted", "--moves", 0, "--seed", 3, "--out", out)
    P = Instance.parse(out.read_text())
    truth = json.loads((tmp_path / "p.txt.truth.json").read_text())
    center = Permutation(tuple(truth["center"]))
    assert all(p == center for p in P.perms)
    assert truth["moves"] == 0 and truth["seed"] == 3


def test_planted_single_move_stays_close(tmp_path, capsys):
    out = tmp_path / "p.txt"
    run(capsys, "gen", "--n", 12, "--m", 20, "--model", "planted", "--moves", 1, "--seed", 5, "--out", out)
    P = Instance.parse(out.read_text())
    center = Permutation(tuple(json.loads((tmp_path / "p.txt.truth.json").read_text())["center"]))
    assert all(ulam(p, center).moves <= 1 for p in P.perms)


def test_malformed_file_names_line_and_column(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("3 2\n1 2 3\n1 x 3\n")
    code, _, err = run(capsys, "dist", bad)
    assert code == 1
    assert "line 3" in err and "column" in err


def test_missing_file_is_input_error(tmp_path, capsys):
    code, _, err = run(capsys, "dist", tmp_path / "nope.txt")
    assert code == 1 and "cannot read" in err


def test_usage_errors_exit_one(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["aggregate"])
    assert exc.value.code == 1
    capsys.readouterr()


def test_dist_and_slack(tmp_path, capsys):
    path = tmp_path / "i.txt"
    path.write_text("3 2\n1 2 3\n3 2 1\n")
    code, out, _ = run(capsys, "dist", path, 0, 1, "--json")
    assert code == 0
    assert json.loads(out)["distances"] == [{"i": 0, "j": 1, "distance": 3}]
    code, out, _ = run(capsys, "slack", path, "--x", "2 1 3", "--json")
    assert code == 0 and json.loads(out)["total"] == 0


def test_report_round_trip(tmp_path, capsys):
    path = tmp_path / "i.txt"
    run(capsys, "gen", "--n", 6, "--m", 9, "--seed", 2, "--out", path)
    code, out, _ = run(capsys, "aggregate", path, "--metric", "kendall", "--seed", 4, "--verify")
    assert code == 0
    report = RunReport.parse(out)
    assert report.emit() == out.rstrip("\n")
    assert report.ratio >= 1 and report.opt is not None


def test_planted_copies_give_ratio_one(tmp_path, capsys):
    path = tmp_path / "p.txt"
    run(capsys, "gen", "--n", 7, "--m", 9, "--model", "planted", "--moves", 0, "--seed", 8, "--out", path)
    for metric in ("hamming", "footrule", "kendall", "ulam"):
        code, out, _ = run(capsys, "aggregate", path, "--metric", metric, "--seed", 1, "--verify")
        assert code == 0 and RunReport.parse(out).ratio == 1.0


def test_hamming_verify_ratio_mostly_within_two(tmp_path, capsys):
    good = 0
    for seed in range(100):
        path = tmp_path / f"h{seed}.txt"
        run(capsys, "gen", "--n", 6, "--m", 10, "--seed", seed, "--out", path)
        code, out, _ = run(capsys, "aggregate", path, "--metric", "hamming", "--seed", seed, "--verify")
        assert code == 0
        good += RunReport.parse(out).ratio <= 2.0
    assert good >= 90


def test_verify_suite_passes(capsys):
    code, out, _ = run(capsys, "verify", "slack", "--seed", 0)
    assert code == 0 and "PASS" in out


def test_unknown_suite_exits_one(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["verify", "nonsense"])
    assert exc.value.code == 1
    capsys.readouterr()


def test_seed_is_printed_when_omitted(tmp_path, capsys):
    code, out, err = run(capsys, "gen", "--n", 4, "--m", 2)
    assert code == 0 and err.startswith("seed: ")
    int(err.split()[1])


def test_strict_reconstruction_exits_two(tmp_path, capsys):
    path = tmp_path / "p.txt"
    run(capsys, "gen", "--n", 16, "--m", 5, "--model", "planted", "--seed", 1, "--out", path)
    code, out, err = run(capsys, "mpc", path, "--algorithm", "ulam-reconstruct", "--metric", "ulam",
                         "--seed", 0, "--strict")
    assert code == 2
    assert RunReport.parse(out).trace["failed"]["machine"] == "dp"
    code, out, _ = run(capsys, "mpc", path, "--algorithm", "ulam-reconstruct", "--metric", "ulam", "--seed", 0)
    assert code == 0 and RunReport.parse(out).output is not None


def test_mpc_distance_reports_trace(tmp_path, capsys):
    path = tmp_path / "i.txt"
    run(capsys, "gen", "--n", 16, "--m", 3, "--seed", 6, "--out", path)
    P = Instance.parse(path.read_text())
    code, out, _ = run(capsys, "mpc", path, "--algorithm", "distance", "--metric", "kendall", "--seed", 0)
    report = RunReport.parse(out)
    assert code == 0
    assert report.cost == kendall(P[0], P[1])
    assert report.trace["rounds"] > 0 and "failed" not in report.trace


def test_mpc_aggregate(tmp_path, capsys):
    path = tmp_path / "i.txt"
    run(capsys, "gen", "--n", 16, "--m", 12, "--seed", 6, "--out", path)
    code, out, _ = run(capsys, "mpc", path, "--algorithm", "aggregate", "--metric", "hamming", "--seed", 3)
    assert code == 0
    report = RunReport.parse(out)
    assert sorted(report.output) == list(range(1, 17))
