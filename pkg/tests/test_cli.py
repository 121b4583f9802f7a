import subprocess
import sys

import pytest

from idla.cli import main
from idla.io import read_snapshot


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_grow_writes_snapshot_image_and_report(capsys, tmp_path):
    snap, img = tmp_path / "a.txt", tmp_path / "a.pgm"
    code, out, _ = run(capsys, "grow", "--seed", "4", "--n", "10", "--p", "1/4",
                       "--out", str(snap), "--image", str(img))
    assert code == 0
    header, row = out.splitlines()
    assert header.startswith("kernel,p,n,seed,delta_in,delta_out")
    assert row.startswith("mixture,1/4,10,4,")
    cluster, meta = read_snapshot(snap)
    assert cluster.size == 221 and meta.seed == 4
    assert img.read_bytes().startswith(b"P5\n")


def test_replicas_get_their_own_files(capsys, tmp_path):
    code, out, _ = run(capsys, "grow", "--seed", "1", "--particles", "50", "--replicas", "3",
                       "--out", str(tmp_path / "c.txt"))
    assert code == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["c.r0.txt", "c.r1.txt", "c.r2.txt"]
    assert [line.split(",")[-1] for line in out.splitlines()[1:]] == ["0", "1", "2"]


def test_grow_from_an_offset_start(capsys, tmp_path):
    code, _, _ = run(capsys, "grow", "--seed", "2", "--particles", "40", "--start", "5,-3",
                     "--out", str(tmp_path / "s.txt"))
    assert code == 0
    cluster, _ = read_snapshot(tmp_path / "s.txt")
    assert cluster.order_log[0][1] == (5, -3)


def test_configuration_errors_exit_2(capsys):
    code, _, err = run(capsys, "grow", "--seed", "1", "--n", "5", "--p", "1")
    assert code == 2 and "p must lie in [0,1)" in err
    assert run(capsys, "grow", "--n", "5")[0] == 2
    assert run(capsys, "grow", "--seed", "1", "--n", "5", "--particles", "9")[0] == 2
    assert run(capsys, "hitprob", "--seed", "1", "--p", "1/2", "--l", "5", "--n", "5")[0] == 2
    assert run(capsys, "abelian-check", "--seed", "1", "--kernel", "srw")[0] == 2
    assert run(capsys, "axis", "--seed", "1", "--m", "0")[0] == 2


def test_simulation_errors_exit_3(capsys):
    code, _, err = run(capsys, "grow", "--seed", "1", "--n", "30", "--p", f"1/{3**38}")
    assert code == 3 and "simulation error" in err


def test_validate(capsys):
    code, out, _ = run(capsys, "validate", "--seed", "0", "--p", "3/4", "--kmax", "12")
    assert code == 0 and out.splitlines()[-1] == "OK"
    code, out, _ = run(capsys, "validate", "--seed", "0", "--kernel", "srw", "--kmax", "4")
    assert code == 1
    assert out.splitlines()[1].startswith("U3 k=1 l=2")


def test_config_file_and_flag_precedence(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# sweep\np = 1/4\nn = 8\n")
    code, out, _ = run(capsys, "grow", "--seed", "3", "--config", str(cfg))
    assert code == 0 and ",1/4,8,3," in out
    code, out, _ = run(capsys, "grow", "--seed", "3", "--config", str(cfg), "--n", "6")
    assert code == 0 and ",1/4,6,3," in out
    cfg.write_text("nonsense\n")
    assert run(capsys, "grow", "--seed", "3", "--config", str(cfg))[0] == 2


@pytest.mark.parametrize("argv", [
    ["fluct", "--seed", "7", "--n", "10", "20", "--replicas", "2"],
    ["axis", "--seed", "7", "--m", "40", "--replicas", "2000"],
    ["hitprob", "--seed", "7", "--p", "3/4", "--l", "2", "--n", "5", "--walks", "2000"],
    ["abelian-check", "--seed", "7", "--trials", "3", "--pairs", "10"],
])
def test_outputs_are_byte_identical_on_rerun(capsys, argv):
    first = run(capsys, *argv)
    second = run(capsys, *argv)
    assert first[0] == 0
    assert first == second


def test_axis_samples_file(capsys, tmp_path):
    path = tmp_path / "t.csv"
    code, out, _ = run(capsys, "axis", "--seed", "1", "--m", "20", "--replicas", "100", "--samples", str(path))
    assert code == 0
    assert len(path.read_text().splitlines()) == 101
    assert out.splitlines()[1].startswith("20,100,")


def test_progress_goes_to_stderr(capsys):
    code, out, err = run(capsys, "grow", "--seed", "1", "--particles", "3000", "--progress", "1000")
    assert code == 0 and "released 1000" in err and "released" not in out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "idla", "validate", "--seed", "0", "--kmax", "3"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.endswith("OK\n")


def test_outward_n350_gives_v350_particles(capsys, tmp_path):
    out = tmp_path / "o.txt"
    code, report, _ = run(capsys, "grow", "--kernel", "outward", "--n", "350", "--seed", "1", "--out", str(out))
    assert code == 0
    rows = [line for line in out.read_text().splitlines() if not line.startswith("#")]
    assert len(rows) == 245701
    assert report.splitlines()[1].startswith("outward,0,350,1,")


def test_decimal_p_is_accepted(capsys):
    code, out, _ = run(capsys, "grow", "--kernel", "mixture", "--p", "0.5", "--n", "5", "--seed", "42")
    assert code == 0 and ",1/2,5,42," in out


def test_replica_parallel_output_matches_serial(tmp_path):
    import argparse

    from idla.aggregation import replica_map
    from idla.cli import _grow_replica, build_parser

    args = build_parser().parse_args(["grow", "--seed", "8", "--n", "12", "--replicas", "4",
                                      "--out", str(tmp_path / "c.txt")])
    assert isinstance(args, argparse.Namespace)
    jobs = [(args, r) for r in range(4)]
    serial = replica_map(_grow_replica, jobs, workers=1)
    files = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
    parallel = replica_map(_grow_replica, jobs, workers=2)
    assert parallel == serial
    assert {p.name: p.read_bytes() for p in tmp_path.iterdir()} == files


# one happy path, one rejection and one anchored run per subcommand

def test_validate_rejections_and_anchor(capsys):
    assert run(capsys, "validate", "--seed", "0", "--kmax", "0")[0] == 2
    assert run(capsys, "validate", "--seed", "0", "--p", "1")[0] == 2
    code, out, _ = run(capsys, "validate", "--seed", "0", "--kernel", "reflected", "--kmax", "60")
    assert code == 0 and out.startswith("# kernel=reflected kmax=60")


def test_fluct_cases(capsys):
    assert run(capsys, "fluct", "--seed", "1", "--n", "1")[0] == 2
    code, out, _ = run(capsys, "fluct", "--seed", "1", "--p", "1/2", "--n", "50")
    assert code == 0
    assert out.splitlines()[1].split(",")[-1] == "1"  # within the proven envelope
    code, out, _ = run(capsys, "fluct", "--seed", "1", "--p", "3/4", "--n", "40", "--shortcut", "on")
    row = dict(zip(out.splitlines()[0].split(","), out.splitlines()[1].split(",")))
    assert int(row["delta_in"]) <= 6 * 3.3578 and row["within_envelope"] == "1"


def test_axis_anchor(capsys):
    code, out, _ = run(capsys, "axis", "--seed", "3", "--m", "200", "--replicas", "10000")
    assert code == 0
    row = dict(zip(*[line.split(",") for line in out.splitlines()]))
    assert abs(float(row["mean"]) - 80400) < 804
    assert row["expected_variance"] == "42906800"
    assert run(capsys, "axis", "--seed", "3", "--m", "20", "--eps", "1.5")[0] == 2


def test_abelian_check_anchor(capsys):
    code, out, _ = run(capsys, "abelian-check", "--seed", "5")
    assert code == 0
    lines = out.splitlines()
    assert len(lines) == 21 and all(line.endswith("agree") for line in lines[:20])
    assert lines[-1] == "monotonicity pairs=200 contained=200"
    assert run(capsys, "abelian-check", "--seed", "5", "--max-sites", "0")[0] == 2


def test_hitprob_anchor(capsys):
    code, out, _ = run(capsys, "hitprob", "--seed", "2", "--p", "3/4", "--l", "2", "--n", "5", "--walks", "20000")
    assert code == 0
    row = dict(zip(*[line.split(",") for line in out.splitlines()]))
    assert row["closed_form"].startswith("0.966942")
    assert abs(float(row["diff_sigma"])) < 4
    assert run(capsys, "hitprob", "--seed", "2", "--p", "1", "--l", "2", "--n", "5")[0] == 2
