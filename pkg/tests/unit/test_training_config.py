"""
Unit tests for run configuration loading.
"""

import pytest

from src.model.params import ContextMode, Variant
from src.training.config import (
    PROFILES_DIR,
    ArchitectureConfig,
    ConfigError,
    TrainingConfig,
    load_run_config,
    parse_config,
    read_config_values,
)


def write_config(tmp_path, text, name="run.conf"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestTrainingConfig:
    """Test TrainingConfig validation."""

    def test_defaults(self):
        """Test the default hyper-parameters."""
        config = TrainingConfig()

        assert config.variant is Variant.NONE
        assert config.batch_size == 8
        assert config.patience == 20
        assert config.rho == 0.95
        assert config.eps == 1e-6
        assert config.clip_norm == 5.0
        assert config.effective_lambda == 0.0

    def test_variant_from_string(self):
        """Test that a variant name is converted to the enum."""
        assert TrainingConfig(variant="local", lam=0.1).variant is Variant.LOCAL

    def test_unknown_variant_raises(self):
        """Test that unknown variant names are rejected."""
        with pytest.raises(ConfigError, match="Unknown variant"):
            TrainingConfig(variant="sideways", lam=0.1)

    def test_reconstructor_needs_lambda(self):
        """Test that global and local variants require lambda."""
        with pytest.raises(ConfigError, match="lambda must be set"):
            TrainingConfig(variant=Variant.GLOBAL)

    def test_negative_lambda_raises(self):
        """Test that lambda must be nonnegative."""
        with pytest.raises(ConfigError, match="nonnegative"):
            TrainingConfig(variant=Variant.GLOBAL, lam=-0.2)

    @pytest.mark.parametrize("field", ["batch_size", "max_epochs", "patience", "beam_size", "workers"])
    def test_counts_must_be_positive(self, field):
        """Test that count settings must be at least 1."""
        with pytest.raises(ConfigError, match=field):
            TrainingConfig(**{field: 0})

    def test_rho_range(self):
        """Test that rho must lie in (0, 1)."""
        with pytest.raises(ConfigError, match="rho"):
            TrainingConfig(rho=1.0)

    def test_effective_lambda(self):
        """Test the weight applied to the reconstruction loss."""
        assert TrainingConfig(variant=Variant.LOCAL, lam=0.1).effective_lambda == 0.1
        assert TrainingConfig(variant=Variant.NONE, lam=0.3).effective_lambda == 0.0

    def test_dict_round_trip(self):
        """Test that to_dict/from_dict preserve every setting."""
        config = TrainingConfig(variant=Variant.GLOBAL, lam=0.2, seed=4, length_normalize=True)

        data = config.to_dict()

        assert data["variant"] == "global"
        assert TrainingConfig.from_dict({**data, "unknown": 1}) == config


class TestArchitectureConfig:
    """Test model dimension assembly."""

    def test_dims(self):
        """Test that data-dependent sizes are filled in."""
        dims = ArchitectureConfig(frame_budget=6).dims(vocab_size=20, feature_dim=10)

        assert dims.vocab_size == 20
        assert dims.feature_dim == 10
        assert dims.frame_budget == 6
        assert dims.context_mode is ContextMode.ATTENTION

    def test_feature_dim_mismatch_raises(self):
        """Test that a configured feature_dim must match the data."""
        with pytest.raises(ConfigError, match="differs from the dataset's 12"):
            ArchitectureConfig(feature_dim=10).dims(vocab_size=20, feature_dim=12)

    def test_invalid_size_is_config_error(self):
        """Test that dimension errors surface as ConfigError."""
        with pytest.raises(ConfigError, match="hidden_size"):
            ArchitectureConfig(hidden_size=0).dims(vocab_size=20, feature_dim=10)

    def test_unknown_context_mode_raises(self):
        """Test that unknown context modes are rejected."""
        with pytest.raises(ConfigError, match="context_mode"):
            ArchitectureConfig(context_mode="max_pool")


class TestConfigFiles:
    """Test reading key = value configuration files."""

    def test_parse_values(self):
        """Test typed parsing of raw values."""
        training, model = parse_config({
            "variant": "global",
            "lambda": "0.2",
            "batch_size": "4",
            "length_normalize": "yes",
            "hidden_size": "32",
            "context_mode": "mean_pool",
        })

        assert training.lam == 0.2
        assert training.batch_size == 4
        assert training.length_normalize is True
        assert model.hidden_size == 32
        assert model.context_mode is ContextMode.MEAN_POOL

    def test_unparsable_value_raises(self):
        """Test that a non-numeric value for a numeric key is rejected."""
        with pytest.raises(ConfigError, match="invalid value for 'batch_size'"):
            parse_config({"batch_size": "eight"})

    def test_load_file_with_comments(self, tmp_path):
        """Test a file with comments and spacing."""
        path = write_config(tmp_path, "# local run\nvariant = local\nlambda = 0.1\nseed = 3\n")

        training, model = load_run_config(path)

        assert training.variant is Variant.LOCAL
        assert training.lam == 0.1
        assert training.seed == 3
        assert model == ArchitectureConfig()

    def test_profile_then_overrides(self, tmp_path):
        """Test that file keys override the profile's."""
        path = write_config(tmp_path, "profile = desk\nlambda = 0.5\nmax_epochs = 3\n")

        training, model = load_run_config(path)

        assert training.variant is Variant.GLOBAL
        assert training.lam == 0.5
        assert training.max_epochs == 3
        assert model.hidden_size == 16
        assert model.feature_dim == 10

    def test_paper_profile_loads(self, tmp_path):
        """Test the full-size profile shipped as configs/profiles/paper.conf."""
        assert (PROFILES_DIR / "paper.conf").is_file()

        training, model = load_run_config(write_config(tmp_path, "profile = paper\n"))

        assert training.variant is Variant.LOCAL
        assert training.beam_size == 5
        assert training.patience == 20
        assert (model.embed_size, model.hidden_size) == (468, 512)
        assert model.feature_dim == 1536
        assert model.frame_budget == 28

    def test_missing_file_raises(self, tmp_path):
        """Test that an absent config file raises ConfigError."""
        with pytest.raises(ConfigError, match="not found"):
            load_run_config(tmp_path / "absent.conf")

    def test_unknown_key_raises(self, tmp_path):
        """Test that misspelled keys are rejected."""
        path = write_config(tmp_path, "batchsize = 4\n")

        with pytest.raises(ConfigError, match="unknown key 'batchsize'"):
            read_config_values(path)

    def test_unknown_profile_raises(self, tmp_path):
        """Test that a missing profile is reported."""
        path = write_config(tmp_path, "profile = huge\n")

        with pytest.raises(ConfigError, match="Unknown profile 'huge'"):
            read_config_values(path)

    def test_empty_value_raises(self, tmp_path):
        """Test that keys need values."""
        path = write_config(tmp_path, "seed =\n")

        with pytest.raises(ConfigError, match="has no value"):
            read_config_values(path)
