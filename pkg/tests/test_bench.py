import math

import numpy as np
import pytest

from descatter.bench import (
    CSV_HEADER,
    FogParams,
    FogScene,
    fog_transmission,
    load_scene_dir,
    make_foggy,
    make_synthetic_scenes,
    mean_psnr,
    rows_to_csv,
    run_benchmark,
)
from descatter.image import to_linear, write_image, write_pfm
from descatter.scatter import invert


def test_scene_and_param_validation():
    with pytest.raises(ValueError):
        FogScene("x", np.zeros((4, 4, 3)), -np.ones((4, 4)))
    with pytest.raises(ValueError):
        FogScene("x", np.zeros((4, 4, 3)), np.ones((4, 5)))
    for bad in ({"eta": -1}, {"noise_sigma": -1}, {"airlight": (1, 0, 1)}, {"noise_domain": "raw"}):
        with pytest.raises(ValueError):
            FogParams(**bad)


def test_make_foggy_examples():
    latent = np.random.default_rng(0).uniform(0, 1, (16, 16, 3))
    scene = FogScene("s", latent, np.full((16, 16), 0.7))
    clear = make_foggy(scene, FogParams(eta=0.0, noise_sigma=0))
    assert np.max(np.abs(clear - latent)) <= 1e-6
    half = FogScene("h", latent, np.full((16, 16), math.log(2) / 1.3))
    assert np.allclose(fog_transmission(half, 1.3), 0.5)


def test_noise_generator_std():
    scene = FogScene("gray", np.full((1000, 1000, 3), 0.5), np.zeros((1000, 1000)))
    foggy = make_foggy(scene, FogParams(eta=0.0, noise_sigma=10.0, seed=3))
    std = (foggy - 0.5).std()
    assert abs(std / (10 / 255) - 1) <= 0.02


def test_noise_law_per_depth_plane():
    n = 400
    latent = np.full((n, n, 3), 0.8)
    depth = np.where(np.arange(n)[None, :] < n // 2, -math.log(0.3), -math.log(0.8)) * np.ones((n, 1))
    scene = FogScene("planes", latent, depth)
    t = fog_transmission(scene, 1.0)
    fp = FogParams(eta=1.0, noise_sigma=2.0, noise_domain="linear", seed=4)
    clean = to_linear(make_foggy(scene, FogParams(eta=1.0, noise_sigma=0)))
    noisy = to_linear(make_foggy(scene, fp))
    diff = invert(noisy, t, 1.0) - invert(clean, t, 1.0)
    for half, tv in ((slice(0, n // 2), 0.3), (slice(n // 2, n), 0.8)):
        assert abs(diff[:, half].std() / ((2 / 255) / tv) - 1) <= 0.05


def test_synthetic_scenes():
    a = make_synthetic_scenes(6, 40, seed=9)
    b = make_synthetic_scenes(6, 40, seed=9)
    assert [s.name for s in a] == [s.name for s in b]
    assert all(np.array_equal(x.latent, y.latent) and np.array_equal(x.depth, y.depth) for x, y in zip(a, b))
    assert all(np.all(np.isfinite(s.depth)) and s.depth.min() >= 0 for s in a)
    kinds = {s.name.split("-", 1)[1] for s in a}
    assert {"checker", "smooth", "gradient"} <= {k.split("-")[0] for k in kinds}
    assert {"plane", "step", "radial"} <= {k.split("-")[1] for k in kinds}
    assert not np.array_equal(make_synthetic_scenes(1, 40, seed=10)[0].latent, a[0].latent)
    with pytest.raises(ValueError):
        make_synthetic_scenes(0)


def test_step_scene_is_bimodal():
    scene = next(s for s in make_synthetic_scenes(6, 40, seed=1) if s.name.endswith("step"))
    t = fog_transmission(scene, 1.2)
    levels = np.unique(t)
    assert len(levels) == 2
    assert np.allclose(sorted(levels), sorted(np.exp(-1.2 * np.unique(scene.depth))))


def test_gt_inversion_is_exact():
    scenes = make_synthetic_scenes(2, 32, seed=2)
    rows = run_benchmark(scenes, [0.5, 1.5], FogParams(noise_sigma=0), methods=("gt-inversion",))
    assert all(r.psnr_db >= 60 for r in rows)


def test_failures_are_recorded():
    scenes = make_synthetic_scenes(1, 24, seed=3)
    rows = run_benchmark(scenes, [1.0], FogParams(), methods=("naive-inversion", "bogus"))
    bad = [r for r in rows if r.method == "bogus"]
    assert len(bad) == 1 and math.isnan(bad[0].psnr_db) and "bogus" in bad[0].note
    assert not math.isnan(next(r for r in rows if r.method == "naive-inversion").psnr_db)


def test_csv_sorted_and_deterministic():
    scenes = make_synthetic_scenes(2, 32, seed=4)
    etas = [1.0, 0.5]
    rows = run_benchmark(scenes, etas, FogParams(seed=4), methods=("naive-inversion", "ours"))
    again = run_benchmark(scenes, etas, FogParams(seed=4), methods=("naive-inversion", "ours"))
    text = rows_to_csv(rows)
    assert text == rows_to_csv(again)
    lines = text.splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    keys = [tuple(line.split(",")[:3]) for line in lines[1:]]
    assert keys == sorted(keys, key=lambda k: (k[0], float(k[1]), k[2]))
    assert all(line.endswith(",") for line in lines[1:])
    assert all(line.split(",")[4] for line in rows_to_csv(rows, timings=True).splitlines()[1:])
    assert mean_psnr(rows, "ours", 0.5) == pytest.approx(np.mean([r.psnr_db for r in rows
                                                                  if r.method == "ours" and r.eta == 0.5]))


def test_linear_psnr_domain():
    scenes = make_synthetic_scenes(1, 32, seed=5)
    rows = run_benchmark(scenes, [1.0], FogParams(noise_sigma=0), methods=("gt-inversion",),
                         psnr_domain="linear")
    assert rows[0].psnr_db >= 60
    with pytest.raises(ValueError):
        run_benchmark(scenes, [1.0], psnr_domain="log")


def test_scene_directory(tmp_path):
    rng = np.random.default_rng(6)
    write_image(tmp_path / "a.png", rng.integers(0, 256, (20, 24, 3)) / 255)
    write_pfm(tmp_path / "a.depth.pfm", rng.uniform(0, 2, (20, 24)))
    write_pfm(tmp_path / "orphan.depth.pfm", np.ones((4, 4)))
    scenes = load_scene_dir(tmp_path)
    assert [s.name for s in scenes] == ["a"] and scenes[0].depth.shape == (20, 24)
    rows = run_benchmark(scenes, [1.0], FogParams(), methods=("naive-inversion",))
    assert rows[0].scene == "a"
    with pytest.raises(ValueError):
        load_scene_dir(tmp_path / "empty_missing")
