"""
Run Configuration for RecNet

Flat `key = value` files with `#` comments, read with python-dotenv.
A `profile = <name>` line loads configs/profiles/<name>.conf first; the
remaining keys of the file override it.
"""

import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Callable, Dict, Mapping, Optional, Tuple, Union

from dotenv import dotenv_values

from src.data.features import DEFAULT_FRAME_BUDGET
from src.data.tokenizer import MAX_CAPTION_TOKENS
from src.model.beam import DEFAULT_BEAM_SIZE
from src.model.params import DEFAULT_INIT_SCALE, ContextMode, ModelDims, Variant
from src.numeric.optim import DEFAULT_CLIP_NORM, DEFAULT_EPS, DEFAULT_RHO
from src.numeric.tensor import DimensionError

logger = logging.getLogger(__name__)

PROFILES_DIR = Path(__file__).resolve().parents[2] / "configs" / "profiles"

DEFAULT_BATCH_SIZE = 8
DEFAULT_MAX_EPOCHS = 2000
DEFAULT_PATIENCE = 20


class ConfigError(Exception):
    """Raised for invalid or unreadable run configuration"""
    pass


@dataclass(frozen=True)
class TrainingConfig:
    """
    Training hyper-parameters.

    Attributes:
        lam: Reconstruction weight; required for the global and local variants
        variant: Reconstructor variant used in stage 2
        batch_size: Captions per optimizer step
        max_epochs: Epoch limit of each stage
        patience: Epochs without a CIDEr improvement before stopping
        seed: Seed of initialization and shuffling
        clip_norm: Global gradient norm limit (<= 0 disables clipping)
        beam_size: Beam width for validation and test decoding
        length_normalize: Rank finished beams by mean token log-probability
        rho, eps: AdaDelta constants
        init_scale: Half-width of the uniform weight initialization
        max_caption_len: Tokens kept per caption; also the decoding length limit
        min_count: Minimum training-split count for a vocabulary word
        data_dir: Dataset directory
        run_dir: Output directory for checkpoints, logs and metrics
        workers: Parallel processes of a lambda sweep
    """

    lam: Optional[float] = None
    variant: Variant = Variant.NONE
    batch_size: int = DEFAULT_BATCH_SIZE
    max_epochs: int = DEFAULT_MAX_EPOCHS
    patience: int = DEFAULT_PATIENCE
    seed: int = 0
    clip_norm: float = DEFAULT_CLIP_NORM
    beam_size: int = DEFAULT_BEAM_SIZE
    length_normalize: bool = False
    rho: float = DEFAULT_RHO
    eps: float = DEFAULT_EPS
    init_scale: float = DEFAULT_INIT_SCALE
    max_caption_len: int = MAX_CAPTION_TOKENS
    min_count: int = 1
    data_dir: Optional[str] = None
    run_dir: Optional[str] = None
    workers: int = 1

    def __post_init__(self):
        if isinstance(self.variant, str):
            try:
                object.__setattr__(self, "variant", Variant(self.variant))
            except ValueError as e:
                raise ConfigError(f"Unknown variant {self.variant!r}; expected none, global or local") from e

        if self.lam is not None and self.lam < 0.0:
            raise ConfigError(f"lambda must be nonnegative, got {self.lam}")
        if self.variant is not Variant.NONE and self.lam is None:
            raise ConfigError(f"lambda must be set for the {self.variant.value} reconstructor")

        for name in ("batch_size", "max_epochs", "patience", "beam_size", "max_caption_len", "min_count", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1, got {getattr(self, name)}")
        if not 0.0 < self.rho < 1.0:
            raise ConfigError(f"rho must lie in (0, 1), got {self.rho}")
        if self.eps <= 0.0:
            raise ConfigError(f"eps must be positive, got {self.eps}")
        if self.init_scale <= 0.0:
            raise ConfigError(f"init_scale must be positive, got {self.init_scale}")

    @property
    def effective_lambda(self) -> float:
        """Weight actually applied to the reconstruction loss (0 without a reconstructor)."""
        if self.variant is Variant.NONE or self.lam is None:
            return 0.0
        return self.lam

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["variant"] = self.variant.value
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TrainingConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{key: value for key, value in data.items() if key in known})


@dataclass(frozen=True)
class ArchitectureConfig:
    """Model sizes that do not depend on the data; the vocabulary size does."""

    embed_size: int = 8
    hidden_size: int = 16
    attention_size: int = 8
    frame_budget: int = DEFAULT_FRAME_BUDGET
    feature_dim: Optional[int] = None
    context_mode: ContextMode = ContextMode.ATTENTION

    def __post_init__(self):
        if isinstance(self.context_mode, str):
            try:
                object.__setattr__(self, "context_mode", ContextMode(self.context_mode))
            except ValueError as e:
                raise ConfigError(f"Unknown context_mode {self.context_mode!r}") from e

    def dims(self, vocab_size: int, feature_dim: int) -> ModelDims:
        """
        Full model dimensions for a dataset.

        Raises:
            ConfigError: If the configured feature_dim disagrees with the data or a size is invalid
        """
        if self.feature_dim is not None and self.feature_dim != feature_dim:
            raise ConfigError(f"Config feature_dim {self.feature_dim} differs from the dataset's {feature_dim}")
        try:
            return ModelDims(
                vocab_size=vocab_size,
                embed_size=self.embed_size,
                hidden_size=self.hidden_size,
                feature_dim=feature_dim,
                attention_size=self.attention_size,
                frame_budget=self.frame_budget,
                context_mode=self.context_mode
            )
        except DimensionError as e:
            raise ConfigError(str(e)) from e


def _parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


# Config key -> (section, field, parser)
_KEYS: Dict[str, Tuple[str, str, Callable[[str], Any]]] = {
    "variant": ("training", "variant", str),
    "lambda": ("training", "lam", float),
    "batch_size": ("training", "batch_size", int),
    "max_epochs": ("training", "max_epochs", int),
    "patience": ("training", "patience", int),
    "seed": ("training", "seed", int),
    "clip_norm": ("training", "clip_norm", float),
    "beam_size": ("training", "beam_size", int),
    "length_normalize": ("training", "length_normalize", _parse_bool),
    "rho": ("training", "rho", float),
    "eps": ("training", "eps", float),
    "init_scale": ("training", "init_scale", float),
    "max_caption_len": ("training", "max_caption_len", int),
    "min_count": ("training", "min_count", int),
    "data_dir": ("training", "data_dir", str),
    "run_dir": ("training", "run_dir", str),
    "workers": ("training", "workers", int),
    "embed_size": ("model", "embed_size", int),
    "hidden_size": ("model", "hidden_size", int),
    "attention_size": ("model", "attention_size", int),
    "frame_budget": ("model", "frame_budget", int),
    "feature_dim": ("model", "feature_dim", int),
    "context_mode": ("model", "context_mode", str),
}


def read_config_values(path: Union[str, Path]) -> Dict[str, str]:
    """
    Raw key/value pairs of a config file, its profile applied first.

    Raises:
        ConfigError: If the file or its profile is missing, a key is unknown or has no value
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")

    raw = dotenv_values(path)
    for key, value in raw.items():
        if key != "profile" and key not in _KEYS:
            raise ConfigError(f"{path}: unknown key {key!r}")
        if value is None or value == "":
            raise ConfigError(f"{path}: key {key!r} has no value")

    values: Dict[str, str] = {}
    profile = raw.pop("profile", None)
    if profile is not None:
        profile_path = PROFILES_DIR / f"{profile}.conf"
        if not profile_path.is_file():
            raise ConfigError(f"Unknown profile {profile!r} (no {profile_path})")
        values.update(read_config_values(profile_path))
        logger.debug(f"Loaded profile {profile} from {profile_path}")

    values.update(raw)
    return values


def parse_config(values: Mapping[str, str], source: str = "config") -> Tuple[TrainingConfig, ArchitectureConfig]:
    """
    Typed configuration from raw key/value pairs.

    Raises:
        ConfigError: On unknown keys, unparsable values or invalid settings
    """
    sections: Dict[str, Dict[str, Any]] = {"training": {}, "model": {}}
    for key, text in values.items():
        if key not in _KEYS:
            raise ConfigError(f"{source}: unknown key {key!r}")
        section, name, parser = _KEYS[key]
        try:
            sections[section][name] = parser(text)
        except ValueError as e:
            raise ConfigError(f"{source}: invalid value for {key!r}: {text!r}") from e

    training = TrainingConfig(**sections["training"])
    model = ArchitectureConfig(**sections["model"])
    return training, model


def load_run_config(path: Union[str, Path]) -> Tuple[TrainingConfig, ArchitectureConfig]:
    """
    Load a run configuration file.

    Args:
        path: Config file path

    Returns:
        Tuple of (training config, architecture config)

    Raises:
        ConfigError: If the configuration is missing, malformed or invalid
    """
    values = read_config_values(path)
    training, model = parse_config(values, source=str(path))
    logger.info(
        f"Loaded config {path}: variant={training.variant.value}, lambda={training.lam}, "
        f"seed={training.seed}, batch_size={training.batch_size}"
    )
    return training, model
