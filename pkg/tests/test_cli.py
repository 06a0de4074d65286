import numpy as np
import pytest

from atomstress.cli import main, resolve_threads, UsageError
from atomstress.io import read_csv_table, read_xyz


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_gen_md_stress_traction(tmp_path, capsys):
    ini = tmp_path / "run.ini"
    ini.write_text("[md]\nsteps = 20\nstride = 10\n")
    code, out, _ = run(capsys, "gen", "--cells", 4, 4, 4, "--temperature", 0.1, "--out", tmp_path, "--config", ini)
    assert code == 0 and "256 particles" in out
    xyz = tmp_path / "structure.xyz"
    code, _, _ = run(capsys, "md", xyz, "--out", tmp_path / "md", "--config", ini)
    assert code == 0
    traj = read_xyz(tmp_path / "md" / "trajectory.xyz")
    assert len(traj) == 3
    h, e = read_csv_table(tmp_path / "md" / "energy.csv")
    assert h == ["time", "potential", "kinetic", "total"] and np.ptp(e[:, 3]) < 1e-5 * abs(e[0, 3])
    for est in ("hardy", "virial", "da"):
        code, _, _ = run(capsys, "stress", tmp_path / "md" / "trajectory.xyz", "--estimator", est,
                         "--diameter", 3.0, "--at", 3.1, 3.1, 3.1, "--out", tmp_path / "s")
        assert code == 0
        h, rows = read_csv_table(tmp_path / "s" / f"stress_{est}.csv")
        assert rows.shape[0] == 1
    code, _, _ = run(capsys, "stress", xyz, "--diameter", 3.0, "--grid", 2, 2, 1, "--out", tmp_path / "g")
    assert code == 0 and read_csv_table(tmp_path / "g" / "stress_hardy.csv")[1].shape[0] == 4
    code, out, _ = run(capsys, "traction", xyz, "--center", 3.1, 3.1, 3.1, "--normal", 1, 0, 0,
                       "--width", 3.0, "--out", tmp_path / "t")
    assert code == 0 and len(out.split()) == 3


def test_minimize_and_failure(tmp_path, capsys):
    run(capsys, "gen", "--cells", 2, 2, 2, "--boundary", "fff", "--out", tmp_path)
    code, out, _ = run(capsys, "minimize", tmp_path / "structure.xyz", "--out", tmp_path / "m")
    assert code == 0 and "converged=True" in out
    ini = tmp_path / "short.ini"
    ini.write_text("[minimize]\nftol = 1e-14\nmaxiter = 2\n")
    code, _, err = run(capsys, "minimize", tmp_path / "structure.xyz", "--out", tmp_path / "m2", "--config", ini)
    assert code == 2 and "numerical failure" in err


def test_ref_kirsch_stdout(capsys):
    code, out, _ = run(capsys, "ref", "kirsch", "--c11", 87.652, "--c12", 50.379, "--c44", 50.379, "--grid", 5)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "x1,x2,u1,u2,sigma11,sigma22,sigma12" and len(lines) == 26


def test_distgeo_check_exit_codes(tmp_path, capsys):
    p = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [0.3, 0.4, 0.5]])
    d = np.linalg.norm(p[:, None] - p[None], axis=2)
    good = tmp_path / "good.csv"
    np.savetxt(good, d, delimiter=",")
    assert run(capsys, "distgeo", "check", good)[0] == 0
    d[0, 1] = d[1, 0] = 5.0
    bad = tmp_path / "bad.csv"
    np.savetxt(bad, d, delimiter=",")
    code, out, _ = run(capsys, "distgeo", "check", bad)
    assert code == 2 and "not embeddable" in out


def test_usage_errors(tmp_path, capsys):
    assert run(capsys, "frobnicate")[0] == 1
    assert run(capsys, "stress", tmp_path / "missing.xyz", "--diameter", 1, "--at", 0, 0, 0)[0] == 1
    bad = tmp_path / "bad.ini"
    bad.write_text("[md]\nsteps = lots\n")
    assert run(capsys, "gen", "--config", bad, "--out", tmp_path)[0] == 1
    assert run(capsys, "gen", "--threads", 0, "--out", tmp_path)[0] == 1


def test_threads(monkeypatch):
    monkeypatch.delenv("ATOMSTRESS_THREADS", raising=False)
    assert resolve_threads(None) == 1
    monkeypatch.setenv("ATOMSTRESS_THREADS", "4")
    assert resolve_threads(None) == 4
    assert resolve_threads(2) == 2
    monkeypatch.setenv("ATOMSTRESS_THREADS", "four")
    with pytest.raises(UsageError):
        resolve_threads(None)


def test_experiment_reproducible_bytes(tmp_path, capsys):
    ini = tmp_path / "e1.ini"
    ini.write_text("[md]\nsteps = 40\nstride = 10\n[experiment]\ncells = 4\n")
    for d in ("a", "b"):
        code, _, _ = run(capsys, "experiment", 1, "--config", ini, "--out", tmp_path / d, "--seed", 3)
        assert code == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "config.ini" in names and "experiment1_summary.json" in names
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
    # the echoed config reproduces the run
    code, _, _ = run(capsys, "experiment", 1, "--config", tmp_path / "a" / "config.ini", "--out", tmp_path / "c")
    assert code == 0
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "c" / n).read_bytes()
