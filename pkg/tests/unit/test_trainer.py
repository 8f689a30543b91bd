"""Tests for the schedule, Adam, training steps and training runs."""

import math
from unittest.mock import patch

import numpy as np
import pytest

from src.features.sampling import FeatureMap
from src.fields.checkpoint import Checkpoint, read_checkpoint
from src.scene.dataset import load_dataset
from src.trainer.evaluate import depth_to_image, psnr, render_view
from src.trainer.loop import (
    CHECKPOINT_PATTERN,
    METRIC_COLUMNS,
    MetricsWriter,
    prepare_data,
    read_metrics,
    run_training,
)
from src.trainer.model import FieldModel, load_model
from src.trainer.optimizer import OptimState, adam_step
from src.trainer.schedule import WarmupCosine, lr_and_weights, mode_weights, stage_of
from src.trainer.step import TrainingData, sample_rays, train_step
from src.utils.config import TrainConfig, build_settings
from src.utils.errors import CheckpointError, RejectedInputError, TrainingAbortError
from tests.conftest import tiny_config


@pytest.fixture
def model(tiny_settings) -> FieldModel:
    return FieldModel.from_settings(tiny_settings)


@pytest.fixture
def training_data(tiny_settings, sphere_dataset_dir) -> TrainingData:
    return prepare_data(tiny_settings, load_dataset(sphere_dataset_dir))


class TestSchedule:
    """Tests for learning rate, stages and mode weights"""

    def test_warmup_then_cosine(self):
        """Test the rate rises linearly and decays to its floor"""
        sched = WarmupCosine(lr_max=1.0, lr_min=0.1, warmup=10, total=111)

        assert sched(0) == 0.0
        assert sched(5) == pytest.approx(0.5)
        assert sched(10) == pytest.approx(1.0)
        assert sched(60) == pytest.approx(0.55)
        assert sched(110) == pytest.approx(0.1)

    def test_iteration_out_of_range(self):
        """Test iterations past the schedule are rejected"""
        with pytest.raises(RejectedInputError):
            WarmupCosine(1.0, 0.1, 10, 111)(111)

    def test_stages(self):
        """Test the stage index at and around both boundaries"""
        assert [stage_of(i, (2, 5)) for i in (0, 1, 2, 4, 5, 9)] == [0, 0, 1, 1, 2, 2]

    def test_proportional_boundaries(self):
        """Test boundaries default to a sixth and a half of the run"""
        assert TrainConfig(total_iters=600, warmup_iters=10).boundaries() == (100, 300)

    @pytest.mark.parametrize(
        "mode, expected",
        [
            ("baseline", (0.0, 0.0)),
            ("bias", (0.1, 0.0)),
            ("feature", (0.0, 0.5)),
            ("full", (0.1, 0.5)),
        ],
    )
    def test_mode_weights(self, mode, expected):
        """Test each mode zeroes its own weights"""
        assert mode_weights(mode, 0.1, 0.5) == expected

    def test_lr_and_weights_per_stage(self, tiny_settings):
        """Test the staged weights of the six-iteration run"""
        cfg = tiny_settings.train
        steps = [lr_and_weights(i, cfg) for i in range(cfg.total_iters)]

        assert [s.stage for s in steps] == [0, 1, 1, 2, 2, 2]
        assert steps[0].lr == 0.0
        assert steps[2].lr == pytest.approx(cfg.lr_max)
        assert steps[5].lr == pytest.approx(cfg.lr_min)
        assert (steps[1].weights.beta, steps[1].weights.gamma) == (0.1, 0.5)
        assert steps[4].weights.alpha == 0.1


class TestAdam:
    """Tests for the Adam update"""

    def test_first_step_moves_by_lr(self):
        """Test the bias-corrected first step has magnitude lr"""
        params = {"w": np.array([1.0, -2.0])}
        grads = {"w": np.array([0.5, -4.0])}
        state = OptimState.zeros(params)

        new_params, new_state = adam_step(params, grads, state, lr=0.1)

        np.testing.assert_allclose(new_params["w"], [0.9, -1.9], atol=1e-7)
        assert new_state.step == 1
        np.testing.assert_array_equal(params["w"], [1.0, -2.0])
        np.testing.assert_array_equal(state.m["w"], [0.0, 0.0])

    def test_non_finite_gradient_aborts(self):
        """Test a NaN gradient names its parameter"""
        params = {"w": np.zeros(2), "b": np.zeros(1)}
        grads = {"w": np.zeros(2), "b": np.array([np.nan])}

        with pytest.raises(TrainingAbortError) as exc:
            adam_step(params, grads, OptimState.zeros(params), lr=0.1, iteration=7)
        assert exc.value.part == "b"
        assert exc.value.iteration == 7

    def test_shape_mismatch(self):
        """Test gradients must match parameter shapes"""
        params = {"w": np.zeros(2)}

        with pytest.raises(RejectedInputError):
            adam_step(params, {"w": np.zeros(3)}, OptimState.zeros(params), lr=0.1)

    def test_state_survives_checkpoint(self):
        """Test moments and step count restore from checkpoint tensors"""
        params = {"w": np.ones((2, 2))}
        _, state = adam_step(params, {"w": np.full((2, 2), 0.3)}, OptimState.zeros(params), 0.01)
        ckpt = Checkpoint(tensors={**params, **state.to_tensors()}, iteration=1)

        restored = OptimState.from_checkpoint(ckpt, params)
        assert restored.step == 1
        np.testing.assert_array_equal(restored.m["w"], state.m["w"])
        np.testing.assert_array_equal(restored.v["w"], state.v["w"])

    def test_missing_moment(self):
        """Test a checkpoint without moments cannot restore the optimizer"""
        with pytest.raises(CheckpointError):
            OptimState.from_checkpoint(Checkpoint(tensors={}), {"w": np.ones(2)})


class TestFieldModel:
    """Tests for parameter layout and checkpoints of the model"""

    def test_init_params_match_shapes(self, model):
        """Test every parameter exists with its declared shape"""
        params = model.init_params(0)

        assert {k: v.shape for k, v in params.items()} == model.parameter_shapes()
        assert model.inv_std(params) == pytest.approx(1.0 / 0.3)

    def test_init_is_a_sphere(self, model):
        """Test the initial SDF is negative at the center and positive farther out"""
        field = model.sdf_field(model.init_params(0))
        directions = np.random.default_rng(2).normal(size=(200, 3))
        directions /= np.linalg.norm(directions, axis=-1, keepdims=True)

        assert field(np.zeros((1, 3)))[0] < -0.4
        assert np.mean(field(0.9 * directions)) > 0.2

    def test_checkpoint_round_trip(self, model):
        """Test the model and its parameters rebuild from a checkpoint"""
        params = model.init_params(3)
        loaded_model, loaded = load_model(model.checkpoint(params, 5, {}))

        assert loaded_model.settings == model.settings
        for name, value in params.items():
            np.testing.assert_array_equal(loaded[name], value)

    def test_missing_parameter(self, model):
        """Test a checkpoint lacking a parameter is rejected"""
        params = model.init_params(0)
        name = next(iter(params))
        del params[name]

        with pytest.raises(CheckpointError):
            model.params_from(Checkpoint(tensors=params))


class TestTrainStep:
    """Tests for one optimization step"""

    def test_sample_rays_is_seeded(self, model, training_data):
        """Test the same iteration draws the same pixels"""
        a = sample_rays(training_data, model, 4)
        b = sample_rays(training_data, model, 4)

        np.testing.assert_array_equal(a.pixels, b.pixels)
        np.testing.assert_array_equal(a.rays.origins, b.rays.origins)
        assert len(a.rays) == 48

    def test_step_is_finite(self, model, training_data):
        """Test one step returns finite losses and moves the parameters"""
        params = model.init_params(0)
        new_params, state, bundle = train_step(
            model, params, OptimState.zeros(params), training_data, iteration=2
        )

        assert state.step == 1
        assert bundle.n_rays == 48
        assert 0.0 <= bundle.valid_hit_fraction <= 1.0
        for part in ("color", "eikonal", "bias", "feature", "total"):
            assert math.isfinite(getattr(bundle, part))
        assert any(not np.array_equal(new_params[k], params[k]) for k in params)

    def test_workers_do_not_change_the_update(self, tiny_settings, training_data):
        """Test threaded chunks give the same parameters as one worker"""
        model = FieldModel.from_settings(tiny_settings)
        params = model.init_params(0)
        state = OptimState.zeros(params)

        one, _, _ = train_step(model, params, state, training_data, 2, workers=1)
        many, _, _ = train_step(model, params, state, training_data, 2, workers=3)

        for name in params:
            np.testing.assert_array_equal(one[name], many[name])

    def test_baseline_ignores_feature_maps(self, training_data):
        """Test zero bias and feature weights leave the update untouched by features"""
        settings = build_settings(tiny_config(train={"mode": "baseline"}))
        model = FieldModel.from_settings(settings)
        params = model.init_params(0)
        state = OptimState.zeros(params)
        rng = np.random.default_rng(5)
        noisy = TrainingData(
            training_data.dataset,
            [FeatureMap(rng.normal(size=f.data.shape)) for f in training_data.feature_maps],
            training_data.source_views,
            training_data.train_views,
        )

        a, _, bundle = train_step(model, params, state, training_data, 2)
        b, _, _ = train_step(model, params, state, noisy, 2)

        for name in params:
            np.testing.assert_array_equal(a[name], b[name])
        assert bundle.total == pytest.approx(bundle.color + 0.1 * bundle.eikonal)

    def test_zero_weight_terms_are_not_built(self, training_data):
        """Test the bias and feature terms are skipped while their weights are 0"""
        settings = build_settings(tiny_config(train={"mode": "baseline"}))
        model = FieldModel.from_settings(settings)
        params = model.init_params(0)

        with (
            patch("src.trainer.step.bias_loss") as bias,
            patch("src.trainer.step.feature_loss") as feature,
        ):
            _, _, bundle = train_step(model, params, OptimState.zeros(params), training_data, 2)

        bias.assert_not_called()
        feature.assert_not_called()
        assert bundle.bias == 0.0
        assert bundle.feature == 0.0
        assert math.isfinite(bundle.color)

    def test_holdout_validation(self, sphere_dataset_dir):
        """Test unknown held-out views and holding out everything"""
        dataset = load_dataset(sphere_dataset_dir)

        for holdout in ([9], [0, 1, 2, 3]):
            settings = build_settings(tiny_config(train={"holdout_views": holdout}))
            with pytest.raises(RejectedInputError):
                prepare_data(settings, dataset)


class TestEvaluation:
    """Tests for view rendering and image metrics"""

    def test_render_view_shapes(self, model, sphere_dataset_dir):
        """Test every pixel is rendered and the sphere collects weight"""
        camera = load_dataset(sphere_dataset_dir).cameras[0]
        rendered = render_view(model, model.init_params(0), camera)

        assert rendered.image.shape == (12, 12, 3)
        assert rendered.depth.shape == (12, 12)
        assert rendered.normals.shape == (12, 12, 3)
        assert rendered.mask[6, 6]
        assert np.all(np.isfinite(rendered.image))

    def test_psnr(self):
        """Test PSNR of a known error and of identical images"""
        truth = np.full((2, 2, 3), 0.1)

        assert psnr(np.zeros((2, 2, 3)), truth) == pytest.approx(20.0)
        assert psnr(truth, truth) == math.inf

    def test_psnr_mask(self):
        """Test masked PSNR ignores pixels outside the mask"""
        pred = np.zeros((2, 2, 3))
        truth = np.zeros((2, 2, 3))
        truth[0, 0] = 1.0
        mask = np.array([[False, True], [True, True]])

        assert psnr(pred, truth, mask) == math.inf
        with pytest.raises(RejectedInputError):
            psnr(pred, truth, np.zeros((2, 2), dtype=bool))
        with pytest.raises(RejectedInputError):
            psnr(pred, np.zeros((3, 2, 3)))

    def test_depth_image(self):
        """Test near surfaces are bright and background black"""
        depth = np.array([[1.0, 2.0], [0.0, 1.5]])
        mask = np.array([[True, True], [False, True]])

        np.testing.assert_allclose(depth_to_image(depth, mask), [[1.0, 0.0], [0.0, 0.5]])


class TestMetricsFile:
    """Tests for the per-iteration metrics CSV"""

    def _row(self, iteration):
        row = dict.fromkeys(METRIC_COLUMNS, 0.25)
        row["iter"] = iteration
        return row

    def test_resume_drops_later_rows(self, tmp_path):
        """Test reopening at iteration 2 keeps only earlier rows"""
        path = tmp_path / "metrics.csv"
        writer = MetricsWriter(path, 0)
        for i in range(4):
            writer.append(self._row(i))

        MetricsWriter(path, 2)
        rows = read_metrics(path)

        assert [r["iter"] for r in rows] == [0.0, 1.0]
        assert rows[0]["total"] == 0.25

    def test_header(self, tmp_path):
        """Test the header lists every metric column"""
        path = tmp_path / "metrics.csv"
        MetricsWriter(path, 0)

        assert path.read_text().splitlines()[0] == ",".join(METRIC_COLUMNS)


@pytest.mark.slow
class TestRunTraining:
    """Tests for whole training runs on the tiny sphere dataset"""

    def test_run_writes_metrics_and_checkpoints(self, tiny_settings, sphere_dataset_dir, tmp_path):
        """Test one metrics row per iteration and periodic checkpoints"""
        result = run_training(tiny_settings, sphere_dataset_dir, tmp_path / "run")
        rows = read_metrics(result.metrics_path)

        assert [int(r["iter"]) for r in rows] == list(range(6))
        assert (tmp_path / "run" / CHECKPOINT_PATTERN.format(3)).exists()
        assert read_checkpoint(result.final_checkpoint).iteration == 6
        assert rows[0]["beta"] == 0.01
        assert rows[3]["gamma"] == 0.05
        assert rows[0]["s"] == pytest.approx(1.0 / 0.3)
        assert all(math.isfinite(r["total"]) for r in rows)

    def test_resume_matches_uninterrupted_run(self, tiny_settings, sphere_dataset_dir, tmp_path):
        """Test a run resumed halfway ends bit-identical to a straight run"""
        straight = run_training(tiny_settings, sphere_dataset_dir, tmp_path / "straight")
        resumed = run_training(
            tiny_settings,
            sphere_dataset_dir,
            tmp_path / "resumed",
            resume=tmp_path / "straight" / CHECKPOINT_PATTERN.format(3),
        )

        a = read_checkpoint(straight.final_checkpoint)
        b = read_checkpoint(resumed.final_checkpoint)
        assert a.tensors.keys() == b.tensors.keys()
        for name in a.tensors:
            np.testing.assert_array_equal(a.tensors[name], b.tensors[name])
        assert read_metrics(resumed.metrics_path) == read_metrics(straight.metrics_path)[3:]

    def test_resume_beyond_schedule(self, sphere_dataset_dir, tmp_path):
        """Test a checkpoint past total_iters cannot be resumed"""
        settings = build_settings(tiny_config())
        done = run_training(settings, sphere_dataset_dir, tmp_path / "run")
        shorter = build_settings(tiny_config(train={"total_iters": 4, "ckpt_every": 2}))

        with pytest.raises(RejectedInputError):
            run_training(
                shorter, sphere_dataset_dir, tmp_path / "again", resume=done.final_checkpoint
            )

    def test_holdout_is_scored(self, sphere_dataset_dir, tmp_path):
        """Test held-out views get a validation PSNR"""
        settings = build_settings(tiny_config(train={"holdout_views": [3]}))
        result = run_training(settings, sphere_dataset_dir, tmp_path / "run")

        assert list(result.validation_psnr) == [3]
        assert math.isfinite(result.validation_psnr[3])
