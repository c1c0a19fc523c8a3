"""
Dataset Files for RecNet

Reads and writes the on-disk dataset layout:

    <dir>/manifest.yaml        seed, generator settings, feature_dim, vocabulary min_count,
                               splits, file names
    <dir>/captions.jsonl       {"video_id": ..., "captions": [...]} per line
    <dir>/vocab.txt            one word per line (optional)
    <dir>/features/<id>.recf   per-video frame features

and the candidate caption files produced by captioning.
"""

import json
import logging
from collections import OrderedDict
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import yaml

from src.data.dataset import DatasetBundle, Split, build_bundle
from src.data.errors import DataError
from src.data.features import read_feature_file, write_feature_file
from src.data.schema import DatasetValidator, MANIFEST_FORMAT, SchemaValidationError, split_ids
from src.data.tokenizer import MAX_CAPTION_TOKENS, tokenize
from src.data.vocabulary import Vocabulary, build_vocabulary
from src.utils.atomic_io import atomic_write_text

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

MANIFEST_FILE = "manifest.yaml"
CAPTIONS_FILE = "captions.jsonl"
VOCABULARY_FILE = "vocab.txt"
FEATURES_DIR = "features"
FEATURE_SUFFIX = ".recf"


def _read_json_lines(path: PathLike) -> List[Dict[str, Any]]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"Cannot read {path}: {e}") from e

    records = []
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as e:
            raise DataError(f"{path}:{number}: invalid JSON: {e.msg}") from e
    return records


def _write_json_lines(path: PathLike, records: Sequence[Mapping[str, Any]]) -> Path:
    return atomic_write_text(path, "".join(json.dumps(record, ensure_ascii=False) + "\n" for record in records))


def read_caption_file(path: PathLike) -> "OrderedDict[str, List[str]]":
    """
    Read reference captions.

    Returns:
        Video id to caption strings, in file order

    Raises:
        DataError: On malformed records or repeated video ids
    """
    validator = DatasetValidator()
    captions: "OrderedDict[str, List[str]]" = OrderedDict()

    for record in _read_json_lines(path):
        validator.validate_caption_record(record)
        video_id = record["video_id"]
        if video_id in captions:
            raise DataError(f"{path}: video {video_id!r} appears twice")
        captions[video_id] = list(record["captions"])

    return captions


def write_caption_file(path: PathLike, captions: Mapping[str, Sequence[str]]) -> Path:
    records = [{"video_id": video_id, "captions": list(texts)} for video_id, texts in captions.items()]
    return _write_json_lines(path, records)


def read_candidates_file(path: PathLike) -> "OrderedDict[str, str]":
    """
    Read generated captions: {"video_id": ..., "caption": ...} per line.

    Raises:
        DataError: On malformed records or repeated video ids
    """
    candidates: "OrderedDict[str, str]" = OrderedDict()

    for record in _read_json_lines(path):
        if not isinstance(record, dict):
            raise DataError(f"{path}: candidate record must be an object")
        video_id = record.get("video_id")
        caption = record.get("caption")
        if not isinstance(video_id, str) or not video_id or not isinstance(caption, str):
            raise DataError(f"{path}: candidate records need string 'video_id' and 'caption'")
        if video_id in candidates:
            raise DataError(f"{path}: video {video_id!r} appears twice")
        candidates[video_id] = caption

    return candidates


def candidate_records(captions: Mapping[str, str]) -> List[Dict[str, str]]:
    return [{"video_id": video_id, "caption": caption} for video_id, caption in captions.items()]


def write_candidates_file(path: PathLike, captions: Mapping[str, str]) -> Path:
    return _write_json_lines(path, candidate_records(captions))


def feature_path(data_dir: PathLike, video_id: str) -> Path:
    return Path(data_dir) / FEATURES_DIR / f"{video_id}{FEATURE_SUFFIX}"


def read_feature_dir(directory: PathLike) -> "OrderedDict[str, np.ndarray]":
    """All RECF files of a directory keyed by file stem, sorted by id."""
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"Feature directory {directory} does not exist")

    features: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for path in sorted(directory.glob(f"*{FEATURE_SUFFIX}")):
        features[path.stem] = read_feature_file(path)

    if not features:
        raise DataError(f"No {FEATURE_SUFFIX} files in {directory}")
    return features


def write_dataset_dir(
    out_dir: PathLike,
    raw_features: Mapping[str, np.ndarray],
    sentences: Mapping[str, Sequence[str]],
    splits: Mapping[Split, Sequence[str]],
    metadata: Optional[Mapping[str, Any]] = None,
    min_count: int = 1
) -> Path:
    """
    Write features, captions, the training vocabulary and the manifest.

    Returns:
        Path of the manifest
    """
    out_dir = Path(out_dir)
    dims = {matrix.shape[1] for matrix in raw_features.values()}
    if len(dims) != 1:
        raise DataError(f"Videos disagree on feature dimension: {sorted(dims)}")

    for video_id, matrix in raw_features.items():
        write_feature_file(feature_path(out_dir, video_id), matrix)

    write_caption_file(out_dir / CAPTIONS_FILE, sentences)

    corpus = [tokenize(text) for video_id in splits[Split.TRAIN] for text in sentences[video_id]]
    build_vocabulary(corpus, min_count=min_count).save(out_dir / VOCABULARY_FILE)

    manifest = {
        "format": MANIFEST_FORMAT,
        **dict(metadata or {}),
        "feature_dim": int(dims.pop()),
        "vocabulary_min_count": min_count,
        "files": {"captions": CAPTIONS_FILE, "vocabulary": VOCABULARY_FILE, "features": FEATURES_DIR},
        "splits": {split.value: list(splits[split]) for split in Split},
    }
    DatasetValidator().validate_manifest(manifest)

    manifest_path = atomic_write_text(out_dir / MANIFEST_FILE, yaml.safe_dump(manifest, sort_keys=False))
    logger.info(f"Wrote dataset of {len(raw_features)} videos to {out_dir}")
    return manifest_path


def read_manifest(data_dir: PathLike) -> Dict[str, Any]:
    path = Path(data_dir) / MANIFEST_FILE
    try:
        manifest = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise DataError(f"Cannot read manifest {path}: {e}") from e
    except yaml.YAMLError as e:
        raise DataError(f"Manifest {path} is not valid YAML: {e}") from e

    DatasetValidator().validate_manifest(manifest)
    return manifest


def load_dataset_dir(
    data_dir: PathLike,
    frame_budget: int,
    min_count: int = 1,
    max_caption_len: int = MAX_CAPTION_TOKENS,
    vocabulary: Optional[Vocabulary] = None,
    expected_dim: Optional[int] = None
) -> DatasetBundle:
    """
    Load a dataset directory into encoded splits.

    The vocabulary is, in order of preference: the one given, the
    directory's vocabulary file when it was built with the same
    min_count, or one built from the training captions.

    Raises:
        DataError: On missing or malformed files, or a feature dimension
            other than expected_dim
    """
    data_dir = Path(data_dir)
    manifest = read_manifest(data_dir)

    if expected_dim is not None and manifest["feature_dim"] != expected_dim:
        raise SchemaValidationError(
            f"Dataset feature_dim {manifest['feature_dim']} does not match configured {expected_dim}"
        )

    files = manifest["files"]
    sentences = read_caption_file(data_dir / files["captions"])
    ids = split_ids(manifest)

    raw_features: Dict[str, np.ndarray] = {}
    for video_id in dict.fromkeys(ids["train"] + ids["validation"] + ids["test"]):
        raw_features[video_id] = read_feature_file(data_dir / files["features"] / f"{video_id}{FEATURE_SUFFIX}")

    vocabulary_file = files.get("vocabulary")
    if vocabulary is None and vocabulary_file and (data_dir / vocabulary_file).exists():
        saved_min_count = manifest.get("vocabulary_min_count", 1)
        if saved_min_count == min_count:
            vocabulary = Vocabulary.load(data_dir / vocabulary_file)
        else:
            logger.info(
                f"Rebuilding vocabulary: {vocabulary_file} was built with min_count={saved_min_count}, "
                f"requested {min_count}"
            )

    bundle = build_bundle(
        raw_features,
        sentences,
        {Split(name): video_ids for name, video_ids in ids.items()},
        frame_budget=frame_budget,
        vocabulary=vocabulary,
        min_count=min_count,
        max_caption_len=max_caption_len
    )

    validator = DatasetValidator()
    for dataset in (bundle.train, bundle.validation, bundle.test):
        validator.validate_dataset(dataset, expected_dim=manifest["feature_dim"])

    return bundle
