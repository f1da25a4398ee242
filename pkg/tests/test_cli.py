import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from fssm.cli import main
from fssm.core import Dims, Rng
from fssm.pgm import read_pgm, write_pgm
from fssm.selection import init_weights, save_weights


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_discretize_foh_exact(capsys):
    code, out, err = run(["discretize", "--delta", "0.1", "--a", "-1", "--b", "1", "--method", "foh-exact"], capsys)
    assert code == 0
    vals = dict(line.split() for line in out.strip().splitlines())
    assert float(vals["abar"]) == pytest.approx(0.904837418036, abs=5e-13)
    assert float(vals["bbar1"]) == pytest.approx(0.046788401604, abs=5e-13)
    assert float(vals["bbar2"]) == pytest.approx(0.048374180360, abs=5e-13)
    config = json.loads(err.splitlines()[0].removeprefix("# config "))
    assert config["method"] == "foh-exact" and config["seed"] == 42


def test_discretize_fssm_and_zoh(capsys):
    _, out, _ = run(["discretize", "--delta", "0.1", "--a", "-1", "--b", "1", "--method", "fssm"], capsys)
    assert out.split() == ["abar", "0.904837418036", "bbar1", "0.05", "bbar2", "0.05"]
    _, out, _ = run(["discretize", "--delta", "0.1", "--a", "-1", "--b", "1", "--method", "zoh"], capsys)
    assert out.split()[2:] == ["bbar", "0.095162581964"]


@pytest.mark.parametrize(
    "argv",
    [
        ["discretize", "--delta", "0", "--a", "-1", "--b", "1"],
        ["discretize", "--delta", "-0.1", "--a", "-1", "--b", "1"],
        ["discretize", "--delta", "0.1", "--a", "-1", "--b", "1", "--bogus"],
        ["discretize", "--delta", "0.1", "--a", "-1", "--b", "1", "--method", "rk4"],
        ["sweep", "--deltas", ""],
        ["sweep", "--deltas", "0.1,abc"],
        ["verify", "--workers", "0"],
        ["image2d", "in.pgm"],
        ["sweep", "--precision", "f32"],
        [],
    ],
)
def test_invalid_flags_exit_2(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2
    assert capsys.readouterr().err


def test_delta_error_names_the_flag(capsys):
    with pytest.raises(SystemExit):
        main(["discretize", "--delta", "0", "--a", "-1", "--b", "1"])
    assert "--delta" in capsys.readouterr().err


def test_workers_env_fallback(capsys, monkeypatch):
    monkeypatch.setenv("FSSM_WORKERS", "3")
    _, _, err = run(["discretize", "--delta", "0.1", "--a", "-1", "--b", "1"], capsys)
    assert json.loads(err.splitlines()[0].removeprefix("# config "))["workers"] == 3


def test_sweep_csv(tmp_path, capsys):
    path = tmp_path / "s.csv"
    code, _, _ = run(["sweep", "--deltas", "0.2,0.1,0.05", "--steps", "60", "--out", str(path)], capsys)
    assert code == 0
    raw = path.read_bytes()
    assert b"\r" not in raw
    rows = list(csv.DictReader(io.StringIO(raw.decode())))
    assert list(rows[0]) == ["delta", "method", "max_abs_err", "bound", "slope_so_far"]
    assert len(rows) == 6
    for r in rows:
        assert float(r["max_abs_err"]) <= float(r["bound"])
        # 17 significant digits round-trip the float exactly
        v = float(r["max_abs_err"])
        assert format(v, ".17g") == r["max_abs_err"]
    by = {(r["delta"], r["method"]): float(r["max_abs_err"]) for r in rows}
    for d in ("0.20000000000000001", "0.10000000000000001", "0.050000000000000003"):
        assert by[(d, "foh-exact")] < by[(d, "zoh")]


def test_sweep_is_deterministic(tmp_path, capsys):
    outs = []
    for i in range(2):
        p = tmp_path / f"{i}.csv"
        run(["sweep", "--deltas", "0.2,0.1", "--steps", "30", "--out", str(p)], capsys)
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_sweep_to_stdout(capsys):
    code, out, _ = run(["sweep", "--deltas", "0.1", "--methods", "fssm", "--steps", "20"], capsys)
    assert code == 0 and out.startswith("delta,method,")


def test_bench_small(tmp_path, capsys):
    path = tmp_path / "b.csv"
    code, _, err = run(
        ["bench", "--T", "64,256", "--methods", "foh-exact,fssm", "--repeats", "5", "--chunk", "16",
         "--workers", "2", "--out", str(path)],
        capsys,
    )
    assert code == 0
    rows = list(csv.DictReader(path.open()))
    assert list(rows[0]) == ["T", "method", "kernel", "workers", "tokens_per_sec"]
    kinds = {(r["kernel"], r["workers"]) for r in rows}
    assert kinds == {("sequential", "1"), ("parallel", "1"), ("parallel", "2")}
    assert all(float(r["tokens_per_sec"]) > 0 for r in rows)
    assert "throughput ratio" in err


def test_bench_f32(capsys):
    code, out, _ = run(["bench", "--T", "32", "--methods", "zoh", "--repeats", "5", "--precision", "f32"], capsys)
    assert code == 0 and out.count("\n") == 3


def _image(tmp_path, H=6, W=5, seed=0):
    path = tmp_path / "in.pgm"
    write_pgm(path, np.random.default_rng(seed).integers(0, 256, (H, W)) / 255.0)
    return path


def test_image2d_byte_deterministic(tmp_path, capsys):
    src = _image(tmp_path)
    outs = []
    for i in range(2):
        dst = tmp_path / f"out{i}.pgm"
        assert run(["image2d", str(src), "--out", str(dst), "--seed", "7", "--method", "fssm"], capsys)[0] == 0
        outs.append(dst.read_bytes())
    assert outs[0] == outs[1]
    img = read_pgm(tmp_path / "out0.pgm")
    assert img.shape == (6, 5) and img.min() == 0.0 and img.max() == 1.0


def test_image2d_seed_changes_output(tmp_path, capsys):
    src = _image(tmp_path)
    a, b = tmp_path / "a.pgm", tmp_path / "b.pgm"
    run(["image2d", str(src), "--out", str(a), "--seed", "1"], capsys)
    run(["image2d", str(src), "--out", str(b), "--seed", "2"], capsys)
    assert a.read_bytes() != b.read_bytes()


def test_image2d_one_by_one(tmp_path, capsys):
    src = _image(tmp_path, 1, 1)
    dst = tmp_path / "o.pgm"
    assert run(["image2d", str(src), "--out", str(dst)], capsys)[0] == 0
    assert read_pgm(dst).shape == (1, 1)


def test_image2d_with_weights(tmp_path, capsys):
    src = _image(tmp_path)
    wpath = tmp_path / "w.bin"
    save_weights(init_weights(Dims(1, 3, 2), Rng(5)), wpath)
    dst = tmp_path / "o.pgm"
    assert run(["image2d", str(src), "--out", str(dst), "--weights", str(wpath)], capsys)[0] == 0


def test_image2d_bad_input_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.pgm"
    bad.write_bytes(b"P6\n1 1\n255\n\0\0\0")
    code, _, err = run(["image2d", str(bad), "--out", str(tmp_path / "o.pgm")], capsys)
    assert code == 1 and "P5" in err
    code, _, _ = run(["image2d", str(tmp_path / "missing.pgm"), "--out", str(tmp_path / "o.pgm")], capsys)
    assert code == 1


def test_verify_break_identity(capsys):
    code, out, _ = run(["verify", "--break-identity"], capsys)
    lines = [l for l in out.splitlines() if l.startswith(("PASS", "FAIL"))]
    assert code == 1
    assert len(lines) >= 7
    assert any(l.startswith("FAIL identity") for l in lines)


def test_verify_exit_code_is_conjunction(capsys):
    code, out, _ = run(["verify"], capsys)
    lines = [l for l in out.splitlines() if l.startswith(("PASS", "FAIL"))]
    assert (code == 0) == all(l.startswith("PASS") for l in lines)
    assert any(l.startswith("PASS identity") for l in lines)


def test_module_entry_point():
    r = subprocess.run(
        [sys.executable, "-m", "fssm", "discretize", "--delta", "0.1", "--a", "-1", "--b", "1"],
        capture_output=True,
        text=True,
    )
    assert r.returncode == 0 and r.stdout.startswith("abar 0.904837418036")
