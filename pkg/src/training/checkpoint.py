"""
Checkpoint Files for RecNet

Layout:

    b"RECN"                      magic
    u32 little-endian            format version
    u64 little-endian            metadata length in bytes
    metadata                     UTF-8 JSON
    payload                      float64 little-endian buffers

The metadata holds the epoch, stage, metric history, config and model
dimensions, the vocabulary, the optimizer constants, a manifest of
[name, shape] pairs in payload order and the sha256 of the payload.
Reconstructor arrays are present only when a reconstructor is.
"""

import hashlib
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from src.data.vocabulary import Vocabulary
from src.model.params import DecoderParams, ModelDims, ReconstructorParams, Variant
from src.numeric.optim import AdaDeltaState
from src.utils.atomic_io import atomic_write_bytes

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"RECN"
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct("<4sIQ")
_DTYPE = np.dtype("<f8")

SQUARE_GRAD_PREFIX = "optimizer.square_grad."
SQUARE_UPDATE_PREFIX = "optimizer.square_update."


class CheckpointError(Exception):
    """Raised when a checkpoint cannot be read or is inconsistent"""
    pass


@dataclass(frozen=True)
class EpochRecord:
    """
    One epoch of a training phase.

    Attributes:
        epoch: Epoch number within the phase, from 1
        nll: Mean training NLL
        rec_loss: Mean training reconstruction loss (0.0 without a reconstructor)
        val_cider: Validation CIDEr-D after the epoch
        decoder_digest: sha256 of the encoder-decoder parameters after the epoch
    """

    epoch: int
    nll: float
    rec_loss: float
    val_cider: float
    decoder_digest: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "epoch": self.epoch,
            "nll": self.nll,
            "rec_loss": self.rec_loss,
            "val_cider": self.val_cider,
            "decoder_digest": self.decoder_digest,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EpochRecord":
        return cls(
            epoch=int(data["epoch"]),
            nll=float(data["nll"]),
            rec_loss=float(data["rec_loss"]),
            val_cider=float(data["val_cider"]),
            decoder_digest=str(data.get("decoder_digest", ""))
        )


def parameter_digest(params: DecoderParams) -> str:
    """sha256 over the names and float64 bytes of the arrays, in name order."""
    digest = hashlib.sha256()
    named = params.numpy().named()
    for name in sorted(named):
        digest.update(name.encode("utf-8"))
        digest.update(np.ascontiguousarray(named[name], dtype=_DTYPE).tobytes())
    return digest.hexdigest()


@dataclass(eq=False)
class ModelCheckpoint:
    """
    Model, optimizer and progress of a training phase.

    Attributes:
        decoder: Encoder-decoder parameters
        reconstructor: Reconstructor parameters; None for variant none
        optimizer: AdaDelta state over every present parameter
        epoch: Last completed epoch of the phase
        stage: "stage1" or "stage2"
        history: Per-epoch records of the phase
        best_epoch: Epoch with the best validation CIDEr (0 before any)
        best_cider: That CIDEr, or None before any epoch
        config: TrainingConfig snapshot
        dims: Model dimensions
        vocabulary: Words of the vocabulary the decoder was trained with
    """

    decoder: DecoderParams
    reconstructor: Optional[ReconstructorParams]
    optimizer: AdaDeltaState
    dims: ModelDims
    vocabulary: Vocabulary
    epoch: int = 0
    stage: str = "stage1"
    history: List[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_cider: Optional[float] = None
    config: Dict[str, Any] = field(default_factory=dict)

    @property
    def variant(self) -> Variant:
        return self.reconstructor.variant if self.reconstructor is not None else Variant.NONE

    def arrays(self) -> Dict[str, np.ndarray]:
        """Every stored array by payload name."""
        named: Dict[str, np.ndarray] = dict(self.decoder.numpy().named())
        if self.reconstructor is not None:
            named.update(self.reconstructor.numpy().named())
        for name in sorted(self.optimizer.square_grad):
            named[SQUARE_GRAD_PREFIX + name] = np.asarray(self.optimizer.square_grad[name], dtype=np.float64)
            named[SQUARE_UPDATE_PREFIX + name] = np.asarray(self.optimizer.square_update[name], dtype=np.float64)
        return named

    def metadata(self) -> Dict[str, Any]:
        return {
            "epoch": self.epoch,
            "stage": self.stage,
            "variant": self.variant.value,
            "history": [record.to_dict() for record in self.history],
            "best_epoch": self.best_epoch,
            "best_cider": self.best_cider,
            "config": self.config,
            "dims": self.dims.to_dict(),
            "vocabulary": list(self.vocabulary.words),
            "optimizer": {"rho": self.optimizer.rho, "eps": self.optimizer.eps, "steps": self.optimizer.steps},
        }

    def equals(self, other: "ModelCheckpoint") -> bool:
        """Bitwise equality of arrays and exact equality of metadata."""
        if self.metadata() != other.metadata():
            return False
        mine, theirs = self.arrays(), other.arrays()
        if list(mine) != list(theirs):
            return False
        return all(
            mine[name].shape == theirs[name].shape and mine[name].tobytes() == theirs[name].tobytes()
            for name in mine
        )


def encode_checkpoint(checkpoint: ModelCheckpoint) -> bytes:
    arrays = checkpoint.arrays()
    payload = b"".join(np.ascontiguousarray(value, dtype=_DTYPE).tobytes() for value in arrays.values())

    metadata = checkpoint.metadata()
    metadata["arrays"] = [[name, list(value.shape)] for name, value in arrays.items()]
    metadata["payload_sha256"] = hashlib.sha256(payload).hexdigest()
    meta_bytes = json.dumps(metadata, sort_keys=True, allow_nan=False).encode("utf-8")

    return _HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(meta_bytes)) + meta_bytes + payload


def decode_checkpoint(data: bytes, source: str = "checkpoint") -> ModelCheckpoint:
    """
    Parse checkpoint bytes.

    Raises:
        CheckpointError: "corrupt checkpoint" for truncated or damaged data,
            "unsupported checkpoint version" for other format versions
    """
    if len(data) < _HEADER.size:
        raise CheckpointError(f"corrupt checkpoint {source}: {len(data)} bytes is shorter than the header")

    magic, version, meta_length = _HEADER.unpack_from(data)
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointError(f"corrupt checkpoint {source}: bad magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {version} in {source} (this build reads version {CHECKPOINT_VERSION})"
        )

    meta_end = _HEADER.size + meta_length
    if meta_end > len(data):
        raise CheckpointError(f"corrupt checkpoint {source}: metadata truncated")
    try:
        metadata = json.loads(data[_HEADER.size:meta_end].decode("utf-8"))
        manifest: List[Tuple[str, Tuple[int, ...]]] = [(name, tuple(shape)) for name, shape in metadata["arrays"]]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"corrupt checkpoint {source}: unreadable metadata ({e})") from e

    payload = data[meta_end:]
    expected = sum(int(np.prod(shape, dtype=np.int64)) for _, shape in manifest) * _DTYPE.itemsize
    if len(payload) != expected:
        raise CheckpointError(f"corrupt checkpoint {source}: payload has {len(payload)} bytes, manifest needs {expected}")
    if hashlib.sha256(payload).hexdigest() != metadata.get("payload_sha256"):
        raise CheckpointError(f"corrupt checkpoint {source}: payload checksum mismatch")

    arrays: Dict[str, np.ndarray] = {}
    offset = 0
    for name, shape in manifest:
        count = int(np.prod(shape, dtype=np.int64))
        arrays[name] = np.frombuffer(payload, dtype=_DTYPE, count=count, offset=offset).reshape(shape).astype(np.float64)
        offset += count * _DTYPE.itemsize

    try:
        return _assemble(metadata, arrays)
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"corrupt checkpoint {source}: inconsistent contents ({e})") from e


def _assemble(metadata: Mapping[str, Any], arrays: Mapping[str, np.ndarray]) -> ModelCheckpoint:
    variant = Variant(metadata["variant"])
    dims = ModelDims.from_dict(metadata["dims"])

    decoder = DecoderParams.from_named(arrays)
    decoder.validate(dims)
    reconstructor = None
    if variant is not Variant.NONE:
        reconstructor = ReconstructorParams.from_named(variant, arrays)
        reconstructor.validate(dims)
    elif any(name.startswith(ReconstructorParams.PREFIX + ".") for name in arrays):
        raise ValueError("reconstructor arrays stored for variant none")

    square_grad = {
        name[len(SQUARE_GRAD_PREFIX):]: value for name, value in arrays.items() if name.startswith(SQUARE_GRAD_PREFIX)
    }
    square_update = {
        name[len(SQUARE_UPDATE_PREFIX):]: value for name, value in arrays.items() if name.startswith(SQUARE_UPDATE_PREFIX)
    }
    optimizer_meta = metadata["optimizer"]
    optimizer = AdaDeltaState(
        square_grad=square_grad,
        square_update=square_update,
        rho=float(optimizer_meta["rho"]),
        eps=float(optimizer_meta["eps"]),
        steps=int(optimizer_meta["steps"])
    )

    best_cider = metadata["best_cider"]
    return ModelCheckpoint(
        decoder=decoder,
        reconstructor=reconstructor,
        optimizer=optimizer,
        dims=dims,
        vocabulary=Vocabulary(tuple(metadata["vocabulary"])),
        epoch=int(metadata["epoch"]),
        stage=str(metadata["stage"]),
        history=[EpochRecord.from_dict(record) for record in metadata["history"]],
        best_epoch=int(metadata["best_epoch"]),
        best_cider=None if best_cider is None else float(best_cider),
        config=dict(metadata["config"])
    )


def save_checkpoint(checkpoint: ModelCheckpoint, path: Union[str, Path]) -> Path:
    """Atomically write a checkpoint file."""
    path = atomic_write_bytes(path, encode_checkpoint(checkpoint))
    logger.debug(f"Saved {checkpoint.stage} checkpoint (epoch {checkpoint.epoch}) to {path}")
    return path


def load_checkpoint(path: Union[str, Path]) -> ModelCheckpoint:
    """
    Read a checkpoint file.

    Raises:
        CheckpointError: If the file is missing, corrupt or of another version
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}") from e
    checkpoint = decode_checkpoint(data, source=str(path))
    logger.debug(f"Loaded {checkpoint.stage} checkpoint (epoch {checkpoint.epoch}) from {path}")
    return checkpoint
