import numpy as np
import pytest

from beamholo.errors import DegenerateBaselineError, InvalidParameterError
from beamholo.raytrace import EyeModel, RetinalImage, default_scene, render_retinal_image
from beamholo.sweep import (
    PALETTE,
    SweepConfig,
    SweepResult,
    center_profiles,
    compare_axis_robustness,
    count_local_maxima,
    perturb,
    relative_brightness,
    run_sweep,
)


def small(axis, **kw):
    lo, hi, step = (-2.0, 2.0, 1.0) if axis == "head_pan_tilt" else (-1.0, 1.0, 0.5)
    return SweepConfig(axis, lo, hi, step, rays_per_point=10, **kw)


@pytest.fixture(scope="module")
def eyebox():
    return run_sweep(default_scene(), small("eyebox_xy"))


@pytest.mark.parametrize("axis", ["eyebox_xy", "head_pan_tilt", "head_translation_xy"])
def test_center_cell_is_unity(axis):
    r = run_sweep(default_scene(), small(axis))
    c = r.center_index
    assert r.brightness[c, c] == 1.0
    assert r.brightness.shape == (5, 5)
    assert np.all(r.brightness >= 0)


def test_default_grid_sizes():
    assert len(SweepConfig.default_for("eyebox_xy").values()) == 33
    assert len(SweepConfig.default_for("head_translation_xy").values()) == 33
    assert len(SweepConfig.default_for("head_pan_tilt").values()) == 41


def test_zero_perturbation_is_identity():
    scene = default_scene()
    for axis in ("eyebox_xy", "head_pan_tilt", "head_translation_xy"):
        moved = perturb(scene, axis, 0.0, 0.0)
        np.testing.assert_allclose(moved.hoe.center, scene.hoe.center, atol=1e-15)
        np.testing.assert_allclose(moved.eye.eyeball_center, scene.eye.eyeball_center, atol=1e-15)
        np.testing.assert_allclose(moved.eye.rotation, np.eye(3), atol=1e-15)


def test_head_rotation_keeps_eye_hoe_relation():
    scene = default_scene()
    moved = perturb(scene, "head_pan_tilt", 4.0, -3.0)
    np.testing.assert_allclose(moved.eye.eyeball_center, scene.eye.eyeball_center, atol=1e-15)
    before = scene.hoe.center - scene.eye.eyeball_center
    after = moved.eye.rotation.T @ (moved.hoe.center - moved.eye.eyeball_center)
    np.testing.assert_allclose(after, before, atol=1e-12)


def test_relative_brightness_examples():
    img = render_retinal_image(default_scene(), 10, 0)
    assert relative_brightness(img, img) == 1.0
    half = RetinalImage(img.intensity / 2, img.hit_count, img.pixel_pitch)
    assert relative_brightness(half, img) == pytest.approx(0.5, rel=1e-15)
    zero = RetinalImage(np.zeros_like(img.intensity), img.hit_count, img.pixel_pitch)
    assert relative_brightness(zero, img) == 0.0
    with pytest.raises(DegenerateBaselineError):
        relative_brightness(img, zero)


def test_closed_pupil_sweep_has_degenerate_baseline():
    with pytest.raises(DegenerateBaselineError):
        run_sweep(default_scene(eye=EyeModel(pupil_diameter=0.0)), small("eyebox_xy"))


def test_sweep_is_deterministic_across_worker_counts(eyebox):
    again = run_sweep(default_scene(), small("eyebox_xy", workers=3))
    np.testing.assert_array_equal(again.brightness, eyebox.brightness)
    np.testing.assert_array_equal(again.hit_accumulation, eyebox.hit_accumulation)
    np.testing.assert_array_equal(again.intensity_accumulation, eyebox.intensity_accumulation)


def test_hit_accumulation_uses_palette(eyebox):
    colours = {tuple(c) for c in eyebox.hit_accumulation.reshape(-1, 3)}
    palette = {tuple(c) for c in PALETTE} | {(0.0, 0.0, 0.0)}
    assert colours <= palette
    sampled = set(np.unique(eyebox.hit_viewpoint)) - {-1}
    assert sampled <= {0, 10, 20}


def test_uniform_brightness_has_zero_spread():
    r = SweepResult(np.ones((5, 5)), None, None, None, np.linspace(-1, 1, 5), "eyebox_xy", ("x", "y"))
    assert compare_axis_robustness(r) == {"x": 0.0, "y": 0.0}


def test_center_profiles_orientation():
    b = np.arange(25.0).reshape(5, 5)
    r = SweepResult(b, None, None, None, np.linspace(-1, 1, 5), "head_pan_tilt", ("pan", "tilt"))
    prof = center_profiles(r)
    np.testing.assert_array_equal(prof["pan"], b[:, 2])
    np.testing.assert_array_equal(prof["tilt"], b[2, :])
    # (max - min) / mean by hand
    assert compare_axis_robustness(r)["pan"] == pytest.approx((22 - 2) / 12)


def test_count_local_maxima():
    assert count_local_maxima([0, 1, 0, 2, 0]) == 2
    assert count_local_maxima([1, 1, 1]) == 0
    assert count_local_maxima([0, 1]) == 0
    assert count_local_maxima([0, 2, 2, 1]) == 1


def test_config_validation():
    with pytest.raises(InvalidParameterError):
        SweepConfig("sideways", -1, 1, 0.5)
    with pytest.raises(InvalidParameterError):
        SweepConfig("eyebox_xy", -1, 1, 0.3)
    with pytest.raises(InvalidParameterError):
        run_sweep(default_scene(), SweepConfig("eyebox_xy", 0.5, 1.5, 0.5, rays_per_point=2))
