"""
Dataset Schema Validator for RecNet

Validates dataset manifests, caption records and loaded datasets before
they reach training, so malformed inputs fail with a message naming the
offending video or field.
"""

import logging
from typing import Any, Dict, List, Mapping

from src.data.dataset import CaptionDataset
from src.data.errors import DataError
from src.data.vocabulary import EOS, UNK

logger = logging.getLogger(__name__)

MANIFEST_FORMAT = 1
REQUIRED_MANIFEST_FIELDS = ("format", "feature_dim", "files", "splits")
REQUIRED_FILE_FIELDS = ("captions", "features")
SPLIT_NAMES = ("train", "validation", "test")


class SchemaValidationError(DataError):
    """Raised when a manifest, caption record or dataset is malformed."""
    pass


class DatasetValidator:
    """
    Validator for dataset files and in-memory datasets.

    Structural problems always raise; suspicious but usable data (for
    example a split without videos) is logged as a warning, or raised
    when strict_mode is set.
    """

    def __init__(self, strict_mode: bool = False):
        """
        Initialize dataset validator.

        Args:
            strict_mode: If True, treat warnings as errors
        """
        self.strict_mode = strict_mode

    def _warn(self, message: str) -> None:
        if self.strict_mode:
            raise SchemaValidationError(message)
        logger.warning(message)

    def validate_manifest(self, manifest: Any) -> bool:
        """
        Validate a dataset manifest document.

        Args:
            manifest: Parsed manifest

        Returns:
            True if the manifest is valid

        Raises:
            SchemaValidationError: If the manifest is invalid
        """
        if not isinstance(manifest, dict):
            raise SchemaValidationError("Manifest must be a mapping")

        missing_fields = [name for name in REQUIRED_MANIFEST_FIELDS if name not in manifest]
        if missing_fields:
            raise SchemaValidationError(f"Manifest missing required fields: {missing_fields}")

        if manifest["format"] != MANIFEST_FORMAT:
            raise SchemaValidationError(f"Unsupported manifest format: {manifest['format']}")

        if not isinstance(manifest["feature_dim"], int) or manifest["feature_dim"] < 1:
            raise SchemaValidationError(f"feature_dim must be a positive integer, got {manifest['feature_dim']!r}")

        files = manifest["files"]
        if not isinstance(files, dict):
            raise SchemaValidationError("Manifest 'files' must be a mapping")
        missing_files = [name for name in REQUIRED_FILE_FIELDS if name not in files]
        if missing_files:
            raise SchemaValidationError(f"Manifest 'files' missing entries: {missing_files}")

        splits = manifest["splits"]
        if not isinstance(splits, dict):
            raise SchemaValidationError("Manifest 'splits' must be a mapping")
        for name in SPLIT_NAMES:
            ids = splits.get(name)
            if not isinstance(ids, list) or not all(isinstance(i, str) and i for i in ids):
                raise SchemaValidationError(f"Split '{name}' must be a list of video ids")
            if len(set(ids)) != len(ids):
                raise SchemaValidationError(f"Split '{name}' lists a video id twice")
            if not ids:
                self._warn(f"Split '{name}' has no videos")

        logger.debug("Manifest validation passed")
        return True

    def validate_caption_record(self, record: Any) -> bool:
        """
        Validate one caption file record: {"video_id": str, "captions": [str, ...]}.

        Raises:
            SchemaValidationError: If the record is invalid
        """
        if not isinstance(record, dict):
            raise SchemaValidationError("Caption record must be an object")

        video_id = record.get("video_id")
        if not isinstance(video_id, str) or not video_id:
            raise SchemaValidationError("Caption record must have a non-empty string 'video_id'")

        captions = record.get("captions")
        if not isinstance(captions, list) or not captions:
            raise SchemaValidationError(f"Video {video_id}: 'captions' must be a non-empty list")
        if not all(isinstance(caption, str) for caption in captions):
            raise SchemaValidationError(f"Video {video_id}: every caption must be a string")

        return True

    def validate_dataset(self, dataset: CaptionDataset, expected_dim: int = None) -> List[str]:
        """
        Validate a loaded split.

        Args:
            dataset: Split to check
            expected_dim: Feature dimension the split must have

        Returns:
            List of warnings raised in non-strict mode

        Raises:
            SchemaValidationError: If the split is invalid
        """
        warnings: List[str] = []

        for entry in dataset:
            if expected_dim is not None and entry.frames.dim != expected_dim:
                raise SchemaValidationError(
                    f"Video {entry.video_id}: feature dimension {entry.frames.dim}, expected {expected_dim}"
                )
            for caption in entry.captions:
                if caption.ids[-1] != EOS:
                    raise SchemaValidationError(f"Video {entry.video_id}: caption does not end with EOS")
                if max(caption.ids) >= dataset.vocabulary.size:
                    raise SchemaValidationError(f"Video {entry.video_id}: caption id outside the vocabulary")

            unknown = sum(caption.words.count(UNK) for caption in entry.captions)
            if unknown:
                message = f"Video {entry.video_id}: {unknown} caption tokens map to UNK"
                warnings.append(message)
                self._warn(message)

        logger.debug(f"Validated {dataset.split.value} split of {len(dataset)} videos")
        return warnings


def split_ids(manifest: Mapping[str, Any]) -> Dict[str, List[str]]:
    return {name: list(manifest["splits"][name]) for name in SPLIT_NAMES}
