"""Tests for configuration loading and structured logging."""

import json
import logging

import numpy as np
import pytest

from src.utils.config import (
    ENV_OVERRIDES,
    LoggingConfig,
    TrainConfig,
    apply_overrides,
    build_settings,
    load_config,
    read_config_file,
)
from src.utils.errors import ConfigError
from src.utils.logger import JSONFormatter, TextFormatter, configure_logging, log_structured


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ENV_OVERRIDES:
        monkeypatch.delenv(name, raising=False)


class TestLoadConfig:
    """Tests for files, environment variables and overrides"""

    def test_default_file(self):
        """Test the shipped settings file loads as the desk preset"""
        settings = load_config()

        assert settings.preset == "desk"
        assert settings.geometry.n_layers == 4
        assert settings.features.channels == 32
        assert settings.train.stage_weights[1] == (0.1, 0.5)

    def test_yaml_file(self, temp_config_file):
        """Test values from a YAML file replace the defaults"""
        settings = load_config(temp_config_file)

        assert settings.render.n_coarse == 16
        assert settings.render.perturb is False
        assert settings.train.mode == "bias"
        assert settings.train.boundaries() == (20, 60)
        assert settings.logging.level == "DEBUG"

    def test_sectioned_text_file(self, tmp_path):
        """Test key = value files with sections and comments"""
        path = tmp_path / "run.cfg"
        path.write_text(
            "[train]\ntotal_iters = 60  # short run\nmode = feature\n\n[scene]\nname = torus\n"
        )

        settings = load_config(path)
        assert settings.train.total_iters == 60
        assert settings.train.mode == "feature"
        assert settings.scene.name == "torus"

    def test_environment_overrides(self, monkeypatch, temp_config_file):
        """Test seed, workers and log level from the environment"""
        monkeypatch.setenv("SURFRECON_SEED", "7")
        monkeypatch.setenv("SURFRECON_WORKERS", "3")
        monkeypatch.setenv("SURFRECON_LOG_LEVEL", "WARNING")

        settings = load_config(temp_config_file)
        assert settings.train.seed == 7
        assert settings.train.workers == 3
        assert settings.logging.level == "WARNING"

    def test_overrides_win_over_environment(self, monkeypatch, temp_config_file):
        """Test command-line overrides are applied last"""
        monkeypatch.setenv("SURFRECON_SEED", "7")

        settings = load_config(temp_config_file, ["train.seed=11", "render.background=[1, 1, 1]"])
        assert settings.train.seed == 11
        assert settings.render.background == (1.0, 1.0, 1.0)

    def test_large_preset(self):
        """Test the full-scale preset fills sizes an override does not set"""
        settings = load_config(overrides=["preset=large", "geometry.width=32"])

        assert settings.geometry.n_layers == 8
        assert settings.geometry.width == 32
        assert settings.train.total_iters == 300000
        assert settings.train.boundaries() == (50000, 150000)
        assert settings.mesh.resolution == 512

    def test_missing_file(self, tmp_path):
        """Test an explicit config path must exist"""
        with pytest.raises(FileNotFoundError):
            load_config(tmp_path / "nope.yaml")


class TestValidation:
    """Tests for rejected configurations"""

    @pytest.mark.parametrize(
        "data",
        [
            {"train": {"bogus": 1}},
            {"unknown_section": {}},
            {"geometry": {"n_layers": 4, "skip_layers": [4]}},
            {"train": {"stage_weights": [[0.1, 0.0]]}},
            {"train": {"lr_min": 1.0, "lr_max": 0.1}},
            {"train": {"total_iters": 100, "stage_boundaries": [50, 100]}},
            {"render": {"n_coarse": 1}},
            {"features": {"extractor": "vgg"}},
            {"render": {"anchor": "right"}},
        ],
    )
    def test_invalid_settings(self, data):
        """Test unknown keys and out-of-range values raise ConfigError"""
        with pytest.raises(ConfigError):
            build_settings(data)

    @pytest.mark.parametrize("override", ["no_equals_sign", "a.b.c=1", "train=5"])
    def test_malformed_override(self, override):
        """Test overrides must look like section.key=value"""
        with pytest.raises(ConfigError):
            apply_overrides({}, [override])

    def test_override_values_are_typed(self):
        """Test override values are parsed as YAML scalars"""
        data = apply_overrides({}, ["train.perturb=false", "train.lr_max=1e-3", "scene.name=blend"])

        assert data == {"train": {"perturb": False, "lr_max": 1e-3}, "scene": {"name": "blend"}}

    def test_bad_yaml(self, tmp_path):
        """Test unparsable YAML and non-mapping documents"""
        broken = tmp_path / "broken.yaml"
        broken.write_text("train: [unclosed\n")
        listing = tmp_path / "list.yaml"
        listing.write_text("- 1\n- 2\n")

        with pytest.raises(ConfigError):
            read_config_file(broken)
        with pytest.raises(ConfigError):
            read_config_file(listing)

    def test_explicit_boundaries(self):
        """Test explicit stage boundaries replace the proportional ones"""
        cfg = TrainConfig(total_iters=100, warmup_iters=0, stage_boundaries=(10, 20))

        assert cfg.boundaries() == (10, 20)


class TestLogging:
    """Tests for structured log records"""

    def _record(self, **extra):
        logger = logging.getLogger("src.test")
        record = logger.makeRecord(
            "src.test", logging.INFO, __file__, 1, "Training step", None, None
        )
        if extra:
            record.extra_fields = extra
        return record

    def test_json_formatter_flattens_fields(self):
        """Test structured fields land at the top level of the JSON line"""
        line = JSONFormatter().format(self._record(iter=3, total=0.5))
        data = json.loads(line)

        assert data["message"] == "Training step"
        assert data["level"] == "INFO"
        assert data["iter"] == 3
        assert data["total"] == 0.5

    def test_text_formatter_appends_pairs(self):
        """Test text lines end with key=value pairs"""
        line = TextFormatter("%(message)s").format(self._record(iter=3, total=1.0 / 3.0))

        assert line == "Training step | iter=3 total=0.333333"

    def test_log_structured_respects_level(self, caplog):
        """Test records below the logger level are dropped"""
        logger = logging.getLogger("tests.logging")

        with caplog.at_level(logging.WARNING, logger="tests.logging"):
            log_structured(logger, logging.INFO, "hidden", a=1)
            log_structured(logger, logging.WARNING, "shown", a=2)

        assert [r.getMessage() for r in caplog.records] == ["shown"]
        assert caplog.records[0].extra_fields == {"a": 2}

    def test_json_formatter_handles_numpy_and_nan(self):
        """Test numpy scalars serialize and non-finite losses stay parsable"""
        line = JSONFormatter().format(self._record(iter=np.int64(4), bias=float("nan")))
        data = json.loads(line)

        assert data["iter"] == 4
        assert data["bias"] == "nan"

    def test_configure_logging_writes_json_file(self, tmp_path):
        """Test package records reach a JSON log file with the run context"""
        log_file = tmp_path / "logs" / "run.log"
        cfg = LoggingConfig(file=str(log_file), console=False)
        logger = configure_logging(cfg, context={"mode": "full", "seed": 3}, name="src.test.file")

        step_logger = logging.getLogger("src.test.file.step")
        log_structured(step_logger, logging.INFO, "Validation", psnr=31.5)
        for handler in logger.handlers:
            handler.flush()

        data = json.loads(log_file.read_text().splitlines()[0])
        assert data["message"] == "Validation"
        assert data["psnr"] == 31.5
        assert (data["mode"], data["seed"]) == ("full", 3)
        for handler in logger.handlers:
            handler.close()

    def test_configure_logging_replaces_handlers(self):
        """Test configuring twice does not duplicate sinks"""
        cfg = LoggingConfig(console=True)

        configure_logging(cfg, name="src.test.twice")
        logger = configure_logging(cfg, level="debug", name="src.test.twice")

        assert len(logger.handlers) == 1
        assert logger.level == logging.DEBUG
        assert not logger.propagate
