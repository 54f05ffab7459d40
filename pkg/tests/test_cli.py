import subprocess
import sys

import numpy as np
import pytest

from descatter import cli
from descatter.bench import FogParams, make_foggy, make_synthetic_scenes
from descatter.image import read_image, read_pfm, write_image


@pytest.fixture(scope="module")
def foggy_png(tmp_path_factory):
    path = tmp_path_factory.mktemp("in") / "foggy.png"
    scene = make_synthetic_scenes(1, 40, seed=8)[0]
    write_image(path, make_foggy(scene, FogParams(eta=1.0, seed=8)))
    return path


def test_restore_with_dumps(foggy_png, tmp_path):
    out = tmp_path / "out.png"
    code = cli.main(["restore", str(foggy_png), "-o", str(out), "--dump-t", str(tmp_path / "t.pfm"),
                     "--dump-depth", str(tmp_path / "d.png"), "--dump-structure", str(tmp_path / "s.png"),
                     "--airlight", "fixed:1,1,1", "--iters-d", "2", "--lambda-l", "0.01"])
    assert code == 0
    assert read_image(out).shape == (40, 40, 3)
    t = read_pfm(tmp_path / "t.pfm")
    assert t.shape == (40, 40, 1) and t.min() > 0 and t.max() <= 1
    assert read_image(tmp_path / "d.png").shape == (40, 40, 1)
    assert read_image(tmp_path / "s.png").shape == (40, 40, 3)


def test_underwater_and_gray_input(foggy_png, tmp_path):
    assert cli.main(["restore", str(foggy_png), "-o", str(tmp_path / "u.png"), "--underwater", "--luma"]) == 0
    gray = tmp_path / "g.png"
    write_image(gray, read_image(foggy_png).mean(axis=2, keepdims=True))
    assert cli.main(["restore", str(gray), "-o", str(tmp_path / "g_out.png")]) == 0
    assert read_image(tmp_path / "g_out.png").shape == (40, 40, 3)


def test_several_inputs(foggy_png, tmp_path):
    second = tmp_path / "b.ppm"
    write_image(second, read_image(foggy_png)[::-1])
    out_dir = tmp_path / "outs"
    assert cli.main(["restore", str(foggy_png), str(second), "-o", str(out_dir), "--jobs", "2"]) == 0
    assert sorted(p.name for p in out_dir.iterdir()) == ["b.png", "foggy.png"]


def test_config_file(foggy_png, tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("# solver settings\nlambda = 10\niters_d = 2\nno_structure = true\nairlight = fixed:1,1,1\n")
    args = cli.build_parser().parse_args(cli._expand_config(
        ["restore", str(foggy_png), "-o", "x.png", "--config", str(conf), "--lambda", "7"]))
    cfg = cli.build_config(args)
    assert cfg.transmission.lam == 7 and cfg.transmission.iterations == 2 and cfg.structure is None
    assert cli.main(["restore", str(foggy_png), "-o", str(tmp_path / "c.png"), "--config", str(conf)]) == 0
    conf.write_text("this line has no equals sign\n")
    assert cli.main(["restore", str(foggy_png), "-o", str(tmp_path / "d.png"), "--config", str(conf)]) == 2
    assert cli.main(["restore", str(foggy_png), "-o", "x.png", "--config", str(tmp_path / "nope")]) == 3


@pytest.mark.parametrize("flags", [["--iters-d", "0"], ["--airlight", "fixed:1,0,1"], ["--eps", "2"],
                                   ["--lambda", "-1"], ["--airlight", "sky"]])
def test_invalid_config_exit_code(foggy_png, tmp_path, flags):
    out = tmp_path / "o.png"
    assert cli.main(["restore", str(foggy_png), "-o", str(out), *flags]) == cli.EXIT_CONFIG
    assert not out.exists()


def test_io_failures(foggy_png, tmp_path):
    assert cli.main(["restore", str(tmp_path / "missing.png"), "-o", str(tmp_path / "o.png")]) == cli.EXIT_IO
    bogus = tmp_path / "bogus.png"
    bogus.write_bytes(b"not an image")
    assert cli.main(["restore", str(bogus), "-o", str(tmp_path / "o.png")]) == cli.EXIT_IO
    blocker = tmp_path / "file"
    blocker.write_text("")
    code = cli.main(["restore", str(foggy_png), "-o", str(blocker / "o.png"),
                     "--dump-t", str(tmp_path / "t.pfm")])
    assert code == cli.EXIT_IO
    assert cli.main(["restore", str(foggy_png), "-o", str(tmp_path / "m.png"),
                     "--airlight", f"scribble:{tmp_path / 'no_mask.png'}"]) == cli.EXIT_IO


def test_numeric_failure_writes_nothing(foggy_png, tmp_path, monkeypatch):
    import descatter.pipeline as pipeline

    monkeypatch.setattr(pipeline, "estimate_latent", lambda I, *a, **k: np.full(I.shape, np.nan))
    out = tmp_path / "o.png"
    dump = tmp_path / "t.pfm"
    assert cli.main(["restore", str(foggy_png), "-o", str(out), "--dump-t", str(dump)]) == cli.EXIT_NUMERIC
    assert not out.exists() and not dump.exists()


def test_bench_command(tmp_path):
    csv = tmp_path / "r.csv"
    assert cli.main(["bench", "--scenes", "synthetic:2", "--size", "32", "--etas", "0.5,1.5",
                     "--methods", "ours,naive-inversion,gt-inversion", "--timings", "-o", str(csv)]) == 0
    lines = csv.read_text().splitlines()
    assert lines[0] == "scene,eta,method,psnr_db,runtime_s" and len(lines) == 1 + 2 * 2 * 3
    assert cli.main(["bench", "--methods", "mystery", "-o", str(csv)]) == cli.EXIT_CONFIG
    assert cli.main(["bench", "--scenes", "synthetic:x", "-o", str(csv)]) == cli.EXIT_CONFIG
    assert cli.main(["bench", "--scenes", str(tmp_path / "none"), "-o", str(csv)]) == cli.EXIT_IO


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "descatter", "restore", "--help"],
                         capture_output=True, text=True, check=True)
    assert "--airlight" in res.stdout and "--dump-depth" in res.stdout
