"""Tests for rays, sample placement, volume compositing and bias analysis."""

import io

import numpy as np
import pytest

from src.autodiff.tape import Tape
from src.features.camera import Camera, project
from src.renderer.bias_analysis import (
    analyze_ray_bias,
    find_root,
    linear_profile,
    parse_profile,
    piecewise_profile,
)
from src.renderer.rays import Ray, RayBatch, camera_rays, image_rays, pixel_ray, sphere_near_far
from src.renderer.sampling import (
    merge_sorted,
    place_samples,
    sample_hierarchical,
    sample_pdf,
    stratified,
)
from src.renderer.volume import SharpnessParam, alphas_and_weights, composite, fill_samples
from src.utils.config import RenderConfig
from src.utils.errors import NoCrossingError, RejectedInputError
from tests.conftest import central_difference


def _sphere(radius: float):
    def field(points):
        return np.linalg.norm(points, axis=-1) - radius

    return field


def _axis_rays(offsets) -> RayBatch:
    """Rays from z = -3 along +z, shifted sideways by ``offsets``."""
    origins = np.array([[x, 0.0, -3.0] for x in offsets])
    directions = np.tile([0.0, 0.0, 1.0], (len(offsets), 1))
    near, far = sphere_near_far(origins, directions, 1.0)
    return RayBatch(origins=origins, directions=directions, near=near, far=far)


class TestRays:
    """Tests for ray construction and sphere intervals"""

    def test_ray_requires_unit_direction(self):
        """Test a non-unit direction is rejected"""
        with pytest.raises(RejectedInputError):
            Ray(np.zeros(3), np.array([0.0, 0.0, 2.0]), 0.0, 1.0)

    def test_ray_requires_near_before_far(self):
        """Test an empty interval is rejected"""
        with pytest.raises(RejectedInputError):
            Ray(np.zeros(3), np.array([0.0, 0.0, 1.0]), 1.0, 1.0)

    def test_sphere_interval(self):
        """Test entry, start-inside and miss cases"""
        origins = np.array([[0.0, 0.0, -3.0], [0.0, 0.0, 0.0], [0.0, 2.0, -3.0]])
        directions = np.tile([0.0, 0.0, 1.0], (3, 1))
        near, far = sphere_near_far(origins, directions, 1.0)

        np.testing.assert_allclose(near[:2], [2.0, 0.0])
        np.testing.assert_allclose(far[:2], [4.0, 1.0])
        assert near[2] == pytest.approx(3.0)
        assert near[2] < far[2] < near[2] + 1e-5

    def test_center_pixel_looks_at_target(self):
        """Test the center pixel ray of an odd image points at the target"""
        cam = Camera.look_at([0.0, 0.0, -3.0], [0.0, 0.0, 0.0], 40.0, 5, 5)
        batch = camera_rays(cam, [[2, 2]], 1.0)

        np.testing.assert_allclose(batch.directions[0], [0.0, 0.0, 1.0], atol=1e-12)
        np.testing.assert_allclose(batch.origins[0], [0.0, 0.0, -3.0], atol=1e-12)
        assert batch.near[0] == pytest.approx(2.0)

    def test_pixel_ray_projects_back_to_its_pixel(self):
        """Test a point on a pixel ray projects onto that pixel's center"""
        cam = Camera.look_at([0.4, -0.3, -3.0], [0.0, 0.0, 0.0], 40.0, 6, 4)
        ray = pixel_ray(cam, (4, 1))
        pixel, _ = project(cam, ray.at(0.5 * (ray.near + ray.far)))

        np.testing.assert_allclose(pixel.value - 0.5, [4.0, 1.0], atol=1e-9)
        assert ray.near < ray.far

    def test_pixel_outside_image(self):
        """Test pixels beyond the image bounds are rejected"""
        cam = Camera.look_at([0.0, 0.0, -3.0], [0.0, 0.0, 0.0], 40.0, 4, 4)

        with pytest.raises(RejectedInputError):
            camera_rays(cam, [[4, 0]], 1.0)

    def test_image_rays_row_major(self):
        """Test one ray per pixel ordered row by row"""
        cam = Camera.look_at([0.0, 0.0, -3.0], [0.0, 0.0, 0.0], 40.0, 3, 2)
        batch, pixels = image_rays(cam, 1.0)

        assert len(batch) == 6
        np.testing.assert_array_equal(pixels[:4], [[0, 0], [1, 0], [2, 0], [0, 1]])

    def test_select_and_concatenate(self):
        """Test sub-batches recombine into the original"""
        batch = _axis_rays([0.0, 0.1, 0.2, 0.3])
        joined = RayBatch.concatenate([batch.select(slice(0, 1)), batch.select(slice(1, 4))])

        np.testing.assert_array_equal(joined.origins, batch.origins)
        assert batch.ray(2).near == pytest.approx(batch.near[2])


class TestAlphasAndWeights:
    """Tests for SDF-to-opacity conversion"""

    def test_reference_alpha(self):
        """Test f = (1, -1) at s = 1 gives 1 - sigmoid(-1)/sigmoid(1)"""
        alpha, weight, residual = alphas_and_weights([1.0, -1.0], [0.0, 1.0], 1.0)

        assert alpha.item() == pytest.approx(0.632121, abs=1e-6)
        assert weight.item() == pytest.approx(alpha.item())
        assert residual.item() == pytest.approx(1.0 - alpha.item())

    def test_weights_and_residual_sum_to_one(self):
        """Test transmittance is conserved on random rays"""
        rng = np.random.default_rng(5)
        sdf = rng.normal(size=(6, 10))
        t = np.cumsum(rng.uniform(0.01, 0.2, size=(6, 10)), axis=-1)
        _, weight, residual = alphas_and_weights(sdf, t, 20.0)

        np.testing.assert_allclose(weight.value.sum(-1) + residual.value, 1.0, atol=1e-12)
        assert np.all(weight.value >= 0.0)

    def test_leaving_surface_is_transparent(self):
        """Test an increasing SDF contributes no opacity"""
        alpha, _, _ = alphas_and_weights([-1.0, 0.0, 1.0], [0.0, 0.5, 1.0], 10.0)

        np.testing.assert_array_equal(alpha.value, [0.0, 0.0])

    def test_extreme_values_stay_finite(self):
        """Test very sharp sharpness does not overflow"""
        alpha, weight, residual = alphas_and_weights([50.0, 40.0, -40.0], [0.0, 1.0, 2.0], 1e4)

        assert np.all(np.isfinite(alpha.value))
        assert np.isfinite(residual.item())
        assert weight.value[1] == pytest.approx(1.0)

    @pytest.mark.parametrize(
        "sdf, t",
        [
            ([1.0, 0.0], [0.0, 0.0]),
            ([1.0, 0.0, -1.0], [0.0, 1.0]),
            ([1.0], [0.0]),
        ],
    )
    def test_rejects_bad_samples(self, sdf, t):
        """Test non-ascending, mismatched or single samples are rejected"""
        with pytest.raises(RejectedInputError):
            alphas_and_weights(sdf, t, 1.0)

    def test_gradient_matches_finite_differences(self):
        """Test weight gradients in the SDF values and in s"""
        f0 = np.array([0.4, 0.1, -0.2, -0.5])
        t = np.array([0.0, 0.3, 0.6, 0.9])
        readout = np.array([1.0, 2.0, 3.0])

        tape = Tape()
        f = tape.leaf(f0)
        s = tape.leaf(8.0)
        _, weight, _ = alphas_and_weights(f, t, s)
        adjoints = tape.backward((weight * readout).sum())

        def loss(values):
            return float((alphas_and_weights(values, t, 8.0)[1].value * readout).sum())

        def loss_s(value):
            return float((alphas_and_weights(f0, t, float(value[0]))[1].value * readout).sum())

        np.testing.assert_allclose(adjoints.of(f), central_difference(loss, f0), rtol=1e-6)
        np.testing.assert_allclose(
            adjoints.of(s), central_difference(loss_s, np.array([8.0]))[0], rtol=1e-6
        )


class TestComposite:
    """Tests for color and distance compositing"""

    def test_accepts_per_sample_or_per_interval_colors(self):
        """Test both color layouts give the same result"""
        t = np.array([[0.0, 0.5, 1.0]])
        z_axis = np.array([[0.0, 0.0, 1.0]])
        samples = fill_samples(t, np.zeros((1, 3)), z_axis, [[0.3, -0.2, -0.6]], 10.0)
        colors = np.array([[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]])

        a = composite(samples, colors)
        b = composite(samples, colors[:, :2])
        np.testing.assert_array_equal(a.color.value, b.color.value)

        with pytest.raises(RejectedInputError):
            composite(samples, colors[:, :1])

    def test_empty_ray_shows_background(self):
        """Test a ray far outside any surface has no weight"""
        t = np.array([[0.0, 0.5, 1.0]])
        z_axis = np.array([[0.0, 0.0, 1.0]])
        samples = fill_samples(t, np.zeros((1, 3)), z_axis, [[5.0, 5.0, 5.0]], 10.0)
        result = composite(samples, np.ones((1, 3, 3)), background=(0.2, 0.4, 0.6))

        assert not result.has_weight[0]
        np.testing.assert_allclose(result.color.value[0], [0.2, 0.4, 0.6], atol=1e-9)

    def test_rendered_point_on_ray(self):
        """Test the rendered point is o + t_rendered v"""
        origins = np.array([[0.1, 0.2, -3.0]])
        directions = np.array([[0.0, 0.0, 1.0]])
        t = np.linspace(2.0, 4.0, 64)[None]
        sdf = 3.0 - t
        result = composite(fill_samples(t, origins, directions, sdf, 64.0), np.zeros((1, 64, 3)))

        assert result.has_weight[0]
        assert result.t_rendered.value[0] == pytest.approx(3.0, abs=0.05)
        np.testing.assert_allclose(
            result.x_rendered.value[0], origins[0] + result.t_rendered.value[0] * directions[0]
        )

    def test_midpoint_anchor(self):
        """Test midpoint anchors shift the rendered distance by half a uniform spacing"""
        t = np.linspace(2.0, 4.0, 65)[None]
        samples = fill_samples(t, np.zeros((1, 3)), np.array([[0.0, 0.0, 1.0]]), 3.0 - t, 64.0)
        left = composite(samples, np.zeros((1, 65, 3)))
        mid = composite(samples, np.zeros((1, 65, 3)), anchor="midpoint")

        spacing = 2.0 / 64
        assert mid.t_rendered.value[0] - left.t_rendered.value[0] == pytest.approx(spacing / 2)
        assert mid.t_rendered.value[0] == pytest.approx(3.0, abs=1e-3)
        with pytest.raises(RejectedInputError):
            composite(samples, np.zeros((1, 65, 3)), anchor="right")


class TestSampling:
    """Tests for stratified, PDF and hierarchical sampling"""

    def test_stratified_midpoints(self):
        """Test midpoints of four strata on [0, 1]"""
        t = stratified(np.array([0.0]), np.array([1.0]), 4)

        np.testing.assert_allclose(t, [[0.125, 0.375, 0.625, 0.875]])

    def test_stratified_jitter_shape(self):
        """Test jitter must match the sample layout"""
        with pytest.raises(RejectedInputError):
            stratified(np.zeros(2), np.ones(2), 4, jitter=np.zeros((2, 3)))

    def test_sample_pdf_uniform(self):
        """Test uniform weights sample uniform quantiles"""
        out = sample_pdf(np.array([[0.0, 1.0, 2.0]]), np.array([[1.0, 1.0]]), 2)

        np.testing.assert_allclose(out, [[0.5, 1.5]])

    def test_sample_pdf_concentrates(self):
        """Test samples follow the weight mass"""
        out = sample_pdf(np.array([[0.0, 1.0, 2.0]]), np.array([[0.0, 1.0]]), 8)

        assert np.all(out >= 1.0)
        assert np.all(np.diff(out) > 0.0)

    def test_merge_sorted_strictly_ascending(self):
        """Test merged distances ascend strictly and carry their SDF values"""
        t, sdf = merge_sorted(
            np.array([[0.0, 1.0, 2.0]]),
            np.array([[10.0, 11.0, 12.0]]),
            np.array([[1.0, 1.5]]),
            np.array([[21.0, 21.5]]),
        )

        assert np.all(np.diff(t) > 0.0)
        np.testing.assert_array_equal(sdf, [[10.0, 11.0, 21.0, 21.5, 12.0]])
        assert t[0, 2] == np.nextafter(1.0, np.inf)

    def test_place_samples_shape(self):
        """Test coarse plus fine samples per ray"""
        cfg = RenderConfig(n_coarse=8, n_fine=8, up_sample_steps=3)
        t, sdf = place_samples(_axis_rays([0.0, 0.3]), _sphere(0.5), cfg)

        assert t.shape == sdf.shape == (2, 16)
        assert np.all(np.diff(t, axis=-1) > 0.0)

    def test_place_samples_degenerate(self):
        """Test rays with a vanishing span get a single interval"""
        rays = RayBatch(
            origins=np.zeros((1, 3)),
            directions=np.array([[0.0, 0.0, 1.0]]),
            near=np.array([1.0]),
            far=np.array([1.0 + 1e-13]),
        )
        t, _ = place_samples(rays, _sphere(0.5), RenderConfig(n_coarse=8, n_fine=8))

        assert t.shape == (1, 2)

    def test_place_samples_empty_batch(self):
        """Test an empty ray batch is rejected"""
        rays = RayBatch(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0), np.zeros(0))

        with pytest.raises(RejectedInputError):
            place_samples(rays, _sphere(0.5), RenderConfig())

    def test_hierarchical_finds_sphere(self):
        """Test fine samples render the sphere hit distance"""
        cfg = RenderConfig(n_coarse=32, n_fine=32, up_sample_steps=4)
        samples = sample_hierarchical(_axis_rays([0.0]), _sphere(0.5), cfg, inv_s=256.0)
        result = composite(samples, np.zeros((1, samples.n_samples, 3)))

        assert result.t_rendered.value[0] == pytest.approx(2.5, abs=2e-2)

    def test_fine_samples_concentrate_at_plane(self):
        """Test most fine samples land within a tenth of the ray span around a plane crossing"""
        cfg = RenderConfig()
        rays = _axis_rays([0.0, 0.3, -0.4])
        samples = sample_hierarchical(rays, lambda x: 0.2 - x[..., 2], cfg, inv_s=64.0)
        coarse = stratified(rays.near, rays.far, cfg.n_coarse)

        half = 0.05 * (rays.far - rays.near)[:, None]
        crossing = 3.2

        def in_window(t):
            return np.count_nonzero(np.abs(t - crossing) <= half, axis=-1)

        fine_hits = in_window(samples.t) - in_window(coarse)
        assert samples.n_samples == cfg.n_coarse + cfg.n_fine
        assert np.all(fine_hits >= 0.5 * cfg.n_fine)


class TestSharpness:
    """Tests for the trainable inverse standard deviation"""

    def test_initial_value(self):
        """Test the initial parameter reproduces 1 / init_std"""
        param = SharpnessParam()

        assert param.value(param.initial(0.3)) == pytest.approx(1.0 / 0.3)
        assert param.inv_std(param.initial(0.3)).item() == pytest.approx(1.0 / 0.3)

    def test_rejects_nonpositive_std(self):
        """Test a non-positive standard deviation is rejected"""
        with pytest.raises(RejectedInputError):
            SharpnessParam().initial(0.0)


class TestBiasAnalysis:
    """Tests for single-ray rendered-distance bias"""

    def test_linear_profile_is_unbiased(self):
        """Test a plane renders at its root"""
        report = analyze_ray_bias(linear_profile(0.8, 0.5), s=64.0, n=1024)

        assert report.t_star == pytest.approx(0.5, abs=1e-9)
        assert abs(report.bias) < 1e-3

    def test_slope_change_is_biased(self):
        """Test a profile with a kink at the surface renders off the root"""
        report = analyze_ray_bias(parse_profile("piecewise:0.2:2.0:0.5"), s=16.0, n=1024)

        assert abs(report.bias) > 1e-2

    def test_left_anchor_offset(self):
        """Test left anchors render half a spacing early and midpoints at the root"""
        spacing = 1.0 / 1023
        left = analyze_ray_bias(linear_profile(0.8, 0.5), s=64.0, n=1024)
        mid = analyze_ray_bias(linear_profile(0.8, 0.5), s=64.0, n=1024, anchor="midpoint")

        assert left.bias == pytest.approx(-spacing / 2, rel=0.05)
        assert abs(mid.bias) < 1e-6

    def test_csv_output(self):
        """Test per-sample rows and the summary line"""
        report = analyze_ray_bias(linear_profile(1.0, 0.5), s=32.0, n=8)
        buffer = io.StringIO()
        report.write_csv(buffer)
        lines = buffer.getvalue().splitlines()

        assert lines[0] == "t,sdf,alpha,weight"
        assert len(lines) == 10
        assert lines[-2].endswith(",,")
        assert lines[-1].startswith("# t_star=")

    @pytest.mark.parametrize("text", ["cubic:1:2", "linear:a:0.5", "linear:0.8", "piecewise:1:2"])
    def test_parse_profile_rejects(self, text):
        """Test malformed profile descriptions are rejected"""
        with pytest.raises(RejectedInputError):
            parse_profile(text)

    def test_no_crossing(self):
        """Test a profile without a root in range"""
        with pytest.raises(NoCrossingError):
            analyze_ray_bias(linear_profile(0.8, 2.0), s=64.0, n=64)

    def test_exit_only_profile(self):
        """Test a profile that only leaves the surface accumulates no weight"""
        with pytest.raises(RejectedInputError):
            analyze_ray_bias(linear_profile(-0.8, 0.5), s=64.0, n=64)

    def test_too_few_samples(self):
        """Test fewer than two samples is rejected"""
        with pytest.raises(RejectedInputError):
            analyze_ray_bias(linear_profile(0.8, 0.5), s=64.0, n=1)

    def test_find_root_cases(self):
        """Test exact zeros, multiple crossings and bisection"""
        t = np.array([0.0, 1.0, 2.0])
        profile = piecewise_profile(1.0, 1.0, 1.0)

        assert find_root(profile, t, np.array([1.0, 0.0, -1.0])) == 1.0
        with pytest.raises(RejectedInputError):
            find_root(profile, t, np.array([1.0, -1.0, 1.0]))
        root = find_root(linear_profile(1.0, 0.3), np.array([0.0, 1.0]), np.array([0.3, -0.7]))
        assert root == pytest.approx(0.3, abs=1e-9)
