import numpy as np
import pytest
from PIL import Image

from descatter.airlight import estimate_airlight_auto, estimate_airlight_scribble, read_scribble
from descatter.bench import FogParams, FogScene, make_foggy, make_synthetic_scenes
from descatter.image import to_linear


def test_constant_image():
    img = np.broadcast_to([0.8, 0.9, 1.0], (20, 20, 3))
    assert np.allclose(estimate_airlight_auto(img), [0.8, 0.9, 1.0])


def test_top_one_selection():
    img = np.full((999 + 1, 1, 3), 0.2)
    img[417] = 0.9
    assert np.allclose(estimate_airlight_auto(img, 0.001), [0.9, 0.9, 0.9])


def test_small_image_uses_best_pixel():
    img = np.random.default_rng(0).uniform(0, 0.5, (5, 5, 3))
    img[2, 3] = [0.9, 0.95, 0.99]
    assert np.allclose(estimate_airlight_auto(img, 0.001), img[2, 3])


def test_min_channel_ranking_skips_bright_colored_objects():
    img = np.full((40, 40, 3), 0.3)
    img[:10, :10] = [1.0, 1.0, 0.25]  # bright but saturated
    img[20, 20] = [0.7, 0.72, 0.75]  # haze-like
    assert np.allclose(estimate_airlight_auto(img, 1 / 1600), [0.7, 0.72, 0.75])
    assert np.allclose(estimate_airlight_auto(img, 1 / 1600, rank="intensity"), [1.0, 1.0, 0.25])


def test_black_image_is_an_error():
    with pytest.raises(ValueError):
        estimate_airlight_auto(np.zeros((10, 10, 3)))
    with pytest.raises(ValueError):
        estimate_airlight_auto(np.ones((4, 4, 3)), quantile=0.0)


def test_permutation_invariance_and_scaling():
    rng = np.random.default_rng(1)
    img = rng.uniform(0.05, 1, (50, 40, 3))
    B = estimate_airlight_auto(img, 0.01)
    perm = rng.permutation(img.reshape(-1, 3)).reshape(img.shape)
    assert np.allclose(estimate_airlight_auto(perm, 0.01), B)
    assert np.allclose(estimate_airlight_auto(0.6 * img, 0.01), 0.6 * B)


def test_recovers_airlight_of_dense_fog():
    scene = make_synthetic_scenes(1, 96, seed=2)[0]
    depth = np.full(scene.depth.shape, 1.0)
    depth[:20] = -np.log(0.05)  # a band at t = 0.05
    foggy = make_foggy(FogScene("band", scene.latent, depth), FogParams(eta=1.0, noise_sigma=0))
    B = estimate_airlight_auto(to_linear(foggy))
    assert np.all(np.abs(B - 1.0) <= 0.05)


def test_scribble_examples():
    img = np.zeros((4, 4, 3))
    img[0, 0] = 0.2
    img[3, 3] = 0.8
    mask = np.zeros((4, 4), bool)
    mask[0, 0] = mask[3, 3] = True
    assert np.allclose(estimate_airlight_scribble(img, mask), 0.5)
    region = np.random.default_rng(2).uniform(0.1, 1, (6, 6, 3))
    region[1:4, 1:4] = [0.3, 0.4, 0.5]
    m = np.zeros((6, 6), bool)
    m[1:4, 1:4] = True
    assert np.allclose(estimate_airlight_scribble(region, m), [0.3, 0.4, 0.5])
    assert np.allclose(estimate_airlight_scribble(region, np.ones((6, 6), bool)),
                       region.reshape(-1, 3).mean(axis=0))
    # unselected pixels do not matter
    other = region.copy()
    other[~m] = 0.99
    assert np.allclose(estimate_airlight_scribble(other, m), [0.3, 0.4, 0.5])


def test_scribble_errors():
    img = np.ones((4, 4, 3))
    with pytest.raises(ValueError):
        estimate_airlight_scribble(img, np.zeros((4, 4), bool))
    with pytest.raises(ValueError):
        estimate_airlight_scribble(img, np.ones((3, 4), bool))
    with pytest.raises(ValueError):
        estimate_airlight_scribble(np.zeros((4, 4, 3)), np.ones((4, 4), bool))


def test_read_scribble_png(tmp_path):
    arr = np.zeros((5, 6), np.uint8)
    arr[2, 1:4] = 255
    Image.fromarray(arr).save(tmp_path / "m.png")
    mask = read_scribble(tmp_path / "m.png")
    assert mask.dtype == bool and mask.sum() == 3 and mask[2, 2]
