"""Tests for analytic SDFs, camera rigs, reference rendering and dataset files."""

import numpy as np
import pytest

from src.renderer.rays import RayBatch
from src.scene.dataset import (
    CAMERAS_FILE,
    IMAGE_PATTERN,
    format_cameras,
    load_dataset,
    parse_cameras,
    read_image,
    read_points,
    write_dataset,
    write_image,
)
from src.scene.generate import make_scene, sample_surface_points
from src.scene.library import SCENES, get_scene
from src.scene.render import render_ground_truth, sphere_trace
from src.scene.rig import generate_rig
from src.scene.sdf import (
    Box,
    Empty,
    Intersection,
    Plane,
    Scale,
    SmoothUnion,
    Sphere,
    Torus,
    Translate,
    Union,
    sdf_eval,
)
from src.utils.config import SceneConfig
from src.utils.errors import DatasetParseError, RejectedInputError


class TestAnalyticSDF:
    """Tests for primitives and operators"""

    def test_torus_surface_points(self):
        """Test points on the tube are at distance zero"""
        torus = Torus(major=0.5, minor=0.2)

        np.testing.assert_allclose(torus([[0.7, 0.0, 0.0], [0.0, 0.5, 0.2]]), 0.0, atol=1e-15)
        assert torus([0.5, 0.0, 0.0]) == pytest.approx(-0.2)

    def test_box_and_plane(self):
        """Test exact distances outside, inside and on a half-space"""
        box = Box(half=(0.25, 0.25, 0.25))

        assert box([1.0, 0.0, 0.0]) == pytest.approx(0.75)
        assert box([0.0, 0.0, 0.0]) == pytest.approx(-0.25)
        assert Plane(normal=(0.0, 0.0, 2.0), offset=0.1)([5.0, 5.0, 0.6]) == pytest.approx(0.5)

    def test_combinators(self):
        """Test union, intersection, translation and scaling"""
        a = Sphere(radius=0.5)
        b = Translate(Sphere(radius=0.5), (0.6, 0.0, 0.0))
        p = np.array([[0.3, 0.0, 0.0], [1.0, 0.0, 0.0]])

        np.testing.assert_allclose(Union((a, b))(p), np.minimum(a(p), b(p)))
        np.testing.assert_allclose(Intersection((a, b))(p), np.maximum(a(p), b(p)))
        assert Scale(a, 2.0)([2.0, 0.0, 0.0]) == pytest.approx(1.0)

    def test_smooth_union_bounds_union(self):
        """Test the smooth minimum never exceeds the plain minimum"""
        a, b = Sphere(radius=0.3), Translate(Sphere(radius=0.3), (0.5, 0.0, 0.0))
        p = np.random.default_rng(1).uniform(-1.0, 1.0, size=(200, 3))

        assert np.all(SmoothUnion(a, b, k=0.1)(p) <= Union((a, b))(p) + 1e-12)

    def test_gradient_of_sphere(self):
        """Test the numerical gradient is the radial unit vector"""
        grad = Sphere(radius=0.5).gradient([[0.0, 0.6, 0.8]])

        np.testing.assert_allclose(grad, [[0.0, 0.6, 0.8]], atol=1e-8)

    def test_rejects_bad_input(self):
        """Test wrong point shapes and non-positive scales"""
        with pytest.raises(RejectedInputError):
            sdf_eval(Sphere(), [1.0, 2.0])
        with pytest.raises(RejectedInputError):
            Scale(Sphere(), 0.0)

    def test_scene_library(self):
        """Test every named scene builds and unknown names are rejected"""
        for name in SCENES:
            assert np.isfinite(get_scene(name)([0.9, 0.9, 0.9])) or name == "empty"
        with pytest.raises(RejectedInputError):
            get_scene("teapot")


class TestRig:
    """Tests for camera rigs"""

    def test_cameras_look_at_origin(self):
        """Test every camera sits on the sphere and faces the origin"""
        cameras = generate_rig(6, 3.0, (15.0, 45.0), seed=4, resolution=16)

        assert len(cameras) == 6
        for cam in cameras:
            assert np.linalg.norm(cam.center) == pytest.approx(3.0)
            np.testing.assert_allclose(cam.optical_axis, -cam.center / 3.0, atol=1e-12)
            elevation = np.degrees(np.arcsin(cam.center[2] / 3.0))
            assert 15.0 <= elevation <= 45.0

    def test_seeded(self):
        """Test the same seed gives the same rig"""
        a = generate_rig(4, 3.0, (10.0, 50.0), seed=9)
        b = generate_rig(4, 3.0, (10.0, 50.0), seed=9)

        for cam_a, cam_b in zip(a, b):
            np.testing.assert_array_equal(cam_a.R, cam_b.R)

    @pytest.mark.parametrize("n_views, radius", [(1, 3.0), (4, 0.0)])
    def test_rejects_bad_rig(self, n_views, radius):
        """Test too few views or a non-positive radius"""
        with pytest.raises(RejectedInputError):
            generate_rig(n_views, radius, (15.0, 45.0), seed=0)


class TestGroundTruth:
    """Tests for sphere tracing and surface sampling"""

    def test_sphere_trace_hit_distance(self):
        """Test tracing stops on the surface"""
        rays = RayBatch(
            origins=np.array([[0.0, 0.0, -3.0], [0.0, 0.9, -3.0]]),
            directions=np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 1.0]]),
            near=np.array([2.0, 2.5]),
            far=np.array([4.0, 3.5]),
        )
        t, hit = sphere_trace(Sphere(radius=0.5), rays)

        np.testing.assert_array_equal(hit, [True, False])
        assert t[0] == pytest.approx(2.5, abs=1e-5)

    def test_render_ground_truth(self):
        """Test the sphere covers the image center and not the corners"""
        cam = generate_rig(2, 3.0, (20.0, 20.0), seed=0, resolution=15)[0]
        image, mask = render_ground_truth(Sphere(radius=0.5), cam)

        assert image.shape == (15, 15, 3)
        assert mask[7, 7]
        assert not mask[0, 0]
        np.testing.assert_array_equal(image[~mask], 0.0)
        assert np.all((image >= 0.0) & (image <= 1.0))

    def test_surface_samples_on_torus(self):
        """Test sampled points lie on the zero level set"""
        torus = get_scene("torus")
        points = sample_surface_points(torus, 300, seed=3)

        assert points.shape == (300, 3)
        assert np.max(np.abs(torus(points))) < 1e-9
        assert np.all(np.abs(points) <= 1.0)

    def test_empty_scene_has_no_surface(self):
        """Test sampling a scene without a surface is rejected"""
        with pytest.raises(RejectedInputError):
            sample_surface_points(Empty(), 10, seed=0)

    def test_make_scene_independent_of_workers(self):
        """Test threaded rendering gives the same dataset"""
        cfg = SceneConfig(name="torus", n_views=3, resolution=8, gt_samples=50)
        one = make_scene(cfg, workers=1)
        two = make_scene(cfg, workers=3)

        for a, b in zip(one.images, two.images):
            np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(one.gt_points, two.gt_points)


class TestDatasetFiles:
    """Tests for reading and writing dataset directories"""

    def test_round_trip(self, sphere_dataset_dir, tmp_path):
        """Test cameras and points are exact and images stable after quantization"""
        first = load_dataset(sphere_dataset_dir)
        second = load_dataset(write_dataset(tmp_path / "copy", first))

        assert first.n_views == 4
        for a, b in zip(first.cameras, second.cameras):
            np.testing.assert_array_equal(a.K, b.K)
            np.testing.assert_array_equal(a.R, b.R)
            np.testing.assert_array_equal(a.t, b.t)
        for a, b in zip(first.images, second.images):
            np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(first.gt_points, second.gt_points)
        assert first.masks is not None and first.masks[0].any()

    def test_camera_text_round_trip(self):
        """Test formatting then parsing reproduces the cameras"""
        cameras = generate_rig(3, 2.5, (10.0, 30.0), seed=1, resolution=10)
        parsed = parse_cameras(format_cameras(cameras))

        for a, b in zip(cameras, parsed):
            np.testing.assert_array_equal(a.R, b.R)
            assert (b.width, b.height) == (10, 10)

    def test_bad_header_reports_line(self):
        """Test a malformed block header names its line"""
        text = format_cameras(generate_rig(2, 3.0, (15.0, 45.0), seed=0))
        text = text.replace("view 1", "camera 1")

        with pytest.raises(DatasetParseError) as exc:
            parse_cameras(text)
        assert exc.value.line == 11
        assert exc.value.offset is not None

    def test_bad_number_reports_line(self):
        """Test a non-numeric matrix entry names its line"""
        lines = format_cameras(generate_rig(2, 3.0, (15.0, 45.0), seed=0)).splitlines()
        lines[3] = "1 x 2"

        with pytest.raises(DatasetParseError) as exc:
            parse_cameras("\n".join(lines))
        assert exc.value.line == 4

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda lines: lines[:-3],
            lambda lines: [lines[0]],
            lambda lines: lines[:1] + ["view 5"] + lines[2:],
            lambda lines: lines[:-1] + ["size 8"],
        ],
    )
    def test_malformed_camera_files(self, mutate):
        """Test truncation, emptiness, wrong indices and bad size lines"""
        lines = format_cameras(generate_rig(2, 3.0, (15.0, 45.0), seed=0)).splitlines()

        with pytest.raises(DatasetParseError):
            parse_cameras("\n".join(mutate(lines)))

    def test_invalid_rotation(self):
        """Test a parsed non-orthonormal rotation is rejected"""
        lines = format_cameras(generate_rig(2, 3.0, (15.0, 45.0), seed=0)).splitlines()
        lines[5] = "2 0 0"

        with pytest.raises(DatasetParseError):
            parse_cameras("\n".join(lines))

    def test_points_bad_row(self, tmp_path):
        """Test a short point row names its line"""
        path = tmp_path / "points.xyz"
        path.write_text("0 0 0\n# comment\n1 2\n")

        with pytest.raises(DatasetParseError) as exc:
            read_points(path)
        assert exc.value.line == 3
        assert exc.value.offset == 16

    def test_truncated_image(self, tmp_path):
        """Test an image with missing pixel data is rejected"""
        path = tmp_path / "view.ppm"
        write_image(path, np.full((4, 4, 3), 0.5))
        path.write_bytes(path.read_bytes()[:-5])

        with pytest.raises(DatasetParseError):
            read_image(path)

    def test_not_an_image(self, tmp_path):
        """Test a text file in place of an image is rejected"""
        path = tmp_path / "view.ppm"
        path.write_text("hello")

        with pytest.raises(DatasetParseError):
            read_image(path)

    def test_missing_files(self, sphere_dataset_dir, tmp_path):
        """Test a dataset without cameras or with a missing image"""
        with pytest.raises(DatasetParseError):
            load_dataset(tmp_path)

        broken = tmp_path / "broken"
        write_dataset(broken, load_dataset(sphere_dataset_dir))
        (broken / IMAGE_PATTERN.format(2)).unlink()
        assert (broken / CAMERAS_FILE).exists()
        with pytest.raises(DatasetParseError):
            load_dataset(broken)
