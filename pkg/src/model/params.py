"""
Parameter Groups for RecNet

Named parameter arrays of the encoder-decoder (the attention decoder) and
of the reconstructor, their shapes as functions of the model dimensions,
and their initialization. A group can hold numpy arrays (stored values)
or tensors (values watched by a gradient tape); model code accepts both.
"""

import logging
from dataclasses import asdict, dataclass, fields, replace
from enum import Enum
from typing import Any, ClassVar, Dict, Mapping, Optional, Tuple, Union

import numpy as np

from src.numeric.tensor import DimensionError, GradientTape, Tensor

logger = logging.getLogger(__name__)

Value = Union[np.ndarray, Tensor]

DEFAULT_INIT_SCALE = 0.08
DECODER_STREAM = 1
RECONSTRUCTOR_STREAM = 2

GLOBAL_FIELDS = ("lstm_weight", "lstm_bias")
LOCAL_FIELDS = ("lstm_weight", "lstm_bias", "att_state", "att_hidden", "att_vector", "att_bias")


class ContextMode(Enum):
    """How the decoder builds the visual context of each step."""
    ATTENTION = "attention"
    MEAN_POOL = "mean_pool"


class Variant(Enum):
    """Reconstructor variant."""
    NONE = "none"
    GLOBAL = "global"
    LOCAL = "local"


@dataclass(frozen=True)
class ModelDims:
    """
    Model dimensions.

    Attributes:
        vocab_size: Vocabulary size including the reserved ids
        embed_size: Word embedding size
        hidden_size: Decoder LSTM size
        feature_dim: Frame feature size, also the reconstructor LSTM size
        attention_size: Width of the additive attention layers
        frame_budget: Frame slots per video
        context_mode: Attention (SA-LSTM) or mean-pooled (MP-LSTM) context
    """

    vocab_size: int
    embed_size: int
    hidden_size: int
    feature_dim: int
    attention_size: int
    frame_budget: int
    context_mode: ContextMode = ContextMode.ATTENTION

    def __post_init__(self):
        if isinstance(self.context_mode, str):
            object.__setattr__(self, "context_mode", ContextMode(self.context_mode))
        for name in ("embed_size", "hidden_size", "feature_dim", "attention_size", "frame_budget"):
            if getattr(self, name) < 1:
                raise DimensionError(f"{name} must be at least 1, got {getattr(self, name)}")
        if self.vocab_size < 4:
            raise DimensionError(f"vocab_size must cover the 4 reserved ids, got {self.vocab_size}")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["context_mode"] = self.context_mode.value
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ModelDims":
        return cls(**dict(data))


class ParameterGroup:
    """
    Behaviour shared by the parameter dataclasses: flat naming, shape
    validation, tape binding.
    """

    PREFIX: ClassVar[str] = ""

    def arrays(self) -> Dict[str, Value]:
        """Present fields by attribute name."""
        return {f.name: getattr(self, f.name) for f in fields(self) if getattr(self, f.name) is not None}

    def named(self) -> Dict[str, Value]:
        """Present fields keyed "<prefix>.<field>"."""
        return {f"{self.PREFIX}.{name}": value for name, value in self.arrays().items()}

    def validate(self, dims: ModelDims) -> None:
        expected = self.shapes(dims)
        actual = {name: tuple(np.shape(value.data if isinstance(value, Tensor) else value))
                  for name, value in self.arrays().items()}
        if set(actual) != set(expected):
            raise DimensionError(f"{self.PREFIX} parameters {sorted(actual)} differ from expected {sorted(expected)}")
        for name, shape in expected.items():
            if actual[name] != shape:
                raise DimensionError(f"{self.PREFIX}.{name}: expected shape {shape}, got {actual[name]}")

    def shapes(self, dims: ModelDims) -> Dict[str, Tuple[int, ...]]:
        raise NotImplementedError

    def bind(self, values: Mapping[str, Value]):
        """Copy of this group whose fields come from a "<prefix>.<field>" mapping."""
        updates = {}
        for name in self.arrays():
            key = f"{self.PREFIX}.{name}"
            if key not in values:
                raise DimensionError(f"Missing parameter {key}")
            updates[name] = values[key]
        return replace(self, **updates)

    def watch(self, tape: GradientTape):
        """Copy whose fields are leaves watched by the tape."""
        return self.bind(tape.watch(self.named()))

    def numpy(self):
        """Copy whose fields are plain arrays."""
        return replace(self, **{
            name: np.array(value.data if isinstance(value, Tensor) else value, dtype=np.float64)
            for name, value in self.arrays().items()
        })

    def is_finite(self) -> bool:
        return all(
            np.all(np.isfinite(value.data if isinstance(value, Tensor) else value))
            for value in self.arrays().values()
        )

    def equals(self, other: "ParameterGroup") -> bool:
        """Bitwise equality of every array."""
        mine, theirs = self.named(), other.named()
        if set(mine) != set(theirs):
            return False
        return all(np.array_equal(np.asarray(mine[k]), np.asarray(theirs[k])) for k in mine)


@dataclass(frozen=True, eq=False)
class DecoderParams(ParameterGroup):
    """
    Encoder-decoder parameters.

    The decoder LSTM reads [embedding(prev word), context] then its own
    previous hidden state; attention scores are
    att_vector . tanh(att_hidden h + att_feature v + att_bias).
    """

    PREFIX: ClassVar[str] = "decoder"

    embedding: Value     # (V, E); row PAD stays zero
    lstm_weight: Value   # (4H, E + d + H)
    lstm_bias: Value     # (4H,)
    att_hidden: Value    # (A, H)
    att_feature: Value   # (A, d)
    att_vector: Value    # (A,)
    att_bias: Value      # (A,)
    out_weight: Value    # (V, H)
    out_bias: Value      # (V,)

    @staticmethod
    def shapes(dims: ModelDims) -> Dict[str, Tuple[int, ...]]:
        v, e, h, d, a = dims.vocab_size, dims.embed_size, dims.hidden_size, dims.feature_dim, dims.attention_size
        return {
            "embedding": (v, e),
            "lstm_weight": (4 * h, e + d + h),
            "lstm_bias": (4 * h,),
            "att_hidden": (a, h),
            "att_feature": (a, d),
            "att_vector": (a,),
            "att_bias": (a,),
            "out_weight": (v, h),
            "out_bias": (v,),
        }

    @classmethod
    def zeros(cls, dims: ModelDims) -> "DecoderParams":
        return cls(**{name: np.zeros(shape) for name, shape in cls.shapes(dims).items()})

    @classmethod
    def init(cls, dims: ModelDims, seed: int, scale: float = DEFAULT_INIT_SCALE) -> "DecoderParams":
        """Uniform(-scale, scale) weights, zero biases, zero PAD embedding."""
        rng = np.random.default_rng([seed, DECODER_STREAM])
        values = {}
        for name, shape in cls.shapes(dims).items():
            if name.endswith("_bias"):
                values[name] = np.zeros(shape)
            else:
                values[name] = rng.uniform(-scale, scale, size=shape)
        values["embedding"][0] = 0.0
        return cls(**values)

    @classmethod
    def from_named(cls, values: Mapping[str, Value]) -> "DecoderParams":
        return cls(**{f.name: values[f"{cls.PREFIX}.{f.name}"] for f in fields(cls)})


@dataclass(frozen=True, eq=False)
class ReconstructorParams(ParameterGroup):
    """
    Reconstructor parameters; the LSTM size equals the feature dimension.

    Global variant: the LSTM reads [h_t, mean(H)] then z_{t-1}.
    Local variant: the LSTM reads the attended decoder state mu_t then
    z_{t-1}; attention scores are
    att_vector . tanh(att_state z_{t-1} + att_hidden h_i + att_bias).
    """

    PREFIX: ClassVar[str] = "reconstructor"

    variant: Variant = Variant.GLOBAL
    lstm_weight: Value = None    # global (4d, 2H + d); local (4d, H + d)
    lstm_bias: Value = None      # (4d,)
    att_state: Optional[Value] = None    # (A, d), local only
    att_hidden: Optional[Value] = None   # (A, H), local only
    att_vector: Optional[Value] = None   # (A,), local only
    att_bias: Optional[Value] = None     # (A,), local only

    def arrays(self) -> Dict[str, Value]:
        return {
            f.name: getattr(self, f.name)
            for f in fields(self)
            if f.name != "variant" and getattr(self, f.name) is not None
        }

    def shapes(self, dims: ModelDims) -> Dict[str, Tuple[int, ...]]:
        return self.shapes_for(self.variant, dims)

    @staticmethod
    def shapes_for(variant: Variant, dims: ModelDims) -> Dict[str, Tuple[int, ...]]:
        h, d, a = dims.hidden_size, dims.feature_dim, dims.attention_size
        if variant is Variant.GLOBAL:
            return {"lstm_weight": (4 * d, 2 * h + d), "lstm_bias": (4 * d,)}
        if variant is Variant.LOCAL:
            return {
                "lstm_weight": (4 * d, h + d),
                "lstm_bias": (4 * d,),
                "att_state": (a, d),
                "att_hidden": (a, h),
                "att_vector": (a,),
                "att_bias": (a,),
            }
        raise DimensionError("Variant 'none' has no reconstructor parameters")

    @classmethod
    def zeros(cls, variant: Variant, dims: ModelDims) -> "ReconstructorParams":
        return cls(variant=variant, **{n: np.zeros(s) for n, s in cls.shapes_for(variant, dims).items()})

    @classmethod
    def init(
        cls,
        variant: Variant,
        dims: ModelDims,
        seed: int,
        scale: float = DEFAULT_INIT_SCALE
    ) -> "ReconstructorParams":
        """Uniform(-scale, scale) weights and zero biases from the run seed."""
        rng = np.random.default_rng([seed, RECONSTRUCTOR_STREAM])
        values = {}
        for name, shape in cls.shapes_for(variant, dims).items():
            if name.endswith("_bias"):
                values[name] = np.zeros(shape)
            else:
                values[name] = rng.uniform(-scale, scale, size=shape)
        logger.debug(f"Initialized {variant.value} reconstructor from seed {seed}")
        return cls(variant=variant, **values)

    @classmethod
    def from_named(cls, variant: Variant, values: Mapping[str, Value]) -> "ReconstructorParams":
        names = LOCAL_FIELDS if variant is Variant.LOCAL else GLOBAL_FIELDS
        return cls(variant=variant, **{name: values[f"{cls.PREFIX}.{name}"] for name in names})

