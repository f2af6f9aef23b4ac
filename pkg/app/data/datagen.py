"""Embedding CSV ingestion, synthetic distractor blobs and balanced subset sampling."""
import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.errors import DataError
from app.core.utils import format_float
from app.numerics.slr import Dataset

logger = logging.getLogger(__name__)

LABEL_COLUMN = "label"


class BlobSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_classes: int = Field(ge=1)
    dim: int = Field(ge=1)
    samples_per_class: int = Field(ge=1)
    class_separation: float = 3.0
    within_std: float = Field(1.0, ge=0)
    distractor_dims: int = Field(0, ge=0)
    distractor_std: float = Field(0.0, ge=0)
    seed: int = 0

    @model_validator(mode="after")
    def _dims(self):
        if self.distractor_dims > self.dim:
            raise ValueError(f"distractor_dims={self.distractor_dims} exceeds dim={self.dim}")
        return self


def load_csv(path):
    """Read ``f0,...,f{D-1},label``; labels become dense ids in order of first appearance."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file")
        header = [name.strip() for name in header]
        if LABEL_COLUMN not in header:
            raise DataError(f"{path}: missing '{LABEL_COLUMN}' column in header")
        label_pos = header.index(LABEL_COLUMN)
        rows, labels, names = [], [], {}
        for line_no, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != len(header):
                raise DataError(f"{path}:{line_no}: expected {len(header)} fields, got {len(record)}")
            values = []
            for pos, cell in enumerate(record):
                if pos == label_pos:
                    continue
                try:
                    values.append(float(cell))
                except ValueError:
                    raise DataError(f"{path}:{line_no}: malformed number {cell!r} in column '{header[pos]}'")
            label = record[label_pos].strip()
            labels.append(names.setdefault(label, len(names)))
            rows.append(values)
    n_features = len(header) - 1
    features = np.array(rows, dtype=np.float64).reshape(len(rows), n_features)
    if not np.all(np.isfinite(features)):
        raise DataError(f"{path}: non-finite feature values")
    logger.info(f"Loaded {features.shape[0]} rows x {n_features} features, {len(names)} classes from {path}")
    return Dataset(features, np.array(labels, dtype=np.int64), tuple(names))


def save_csv(dataset, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = [f"f{j}" for j in range(dataset.n_features)] + [LABEL_COLUMN]
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row, label in zip(dataset.features, dataset.labels):
            writer.writerow([format_float(v) for v in row] + [dataset.class_names[label]])
    logger.info(f"Wrote {dataset.n_samples} rows to {path}")
    return path


def make_blobs(spec):
    """Gaussian classes whose means sit on a sphere in the signal coordinates.

    The trailing ``distractor_dims`` coordinates are class-independent noise, so
    with ``distractor_std >> within_std`` the dominant variance carries no class signal.
    """
    rng = np.random.default_rng(spec.seed)
    signal_dims = spec.dim - spec.distractor_dims
    means = rng.normal(size=(spec.n_classes, signal_dims))
    norms = np.linalg.norm(means, axis=1, keepdims=True)
    means = spec.class_separation * means / np.where(norms == 0, 1.0, norms)
    n = spec.n_classes * spec.samples_per_class
    labels = np.repeat(np.arange(spec.n_classes), spec.samples_per_class)
    signal = means[labels] + spec.within_std * rng.normal(size=(n, signal_dims))
    distractors = spec.distractor_std * rng.normal(size=(n, spec.distractor_dims))
    features = np.hstack([signal, distractors])
    names = tuple(f"class_{c}" for c in range(spec.n_classes))
    return Dataset(features, labels, names)


def balanced_subset(data, per_class, seed, exclude=None):
    """Draw ``min(per_class, available)`` rows per class without replacement.

    Rows listed in ``exclude`` (positions in ``data``) are never drawn. The
    result keeps the original row order.
    """
    rng = np.random.default_rng(seed)
    excluded = np.zeros(data.n_samples, dtype=bool)
    if exclude is not None and len(exclude):
        excluded[np.asarray(exclude, dtype=np.int64)] = True
    picked = []
    for cls in range(data.n_classes):
        available = np.flatnonzero((data.labels == cls) & ~excluded)
        take = min(per_class, available.size)
        if take:
            picked.append(rng.choice(available, size=take, replace=False))
    rows = np.sort(np.concatenate(picked)) if picked else np.zeros(0, dtype=np.int64)
    return data.take(rows), rows


@dataclass(frozen=True)
class Splits:
    train: Dataset
    val: Dataset
    test: Dataset
    remainder: Dataset


def split_balanced(data, train_per_class, val_per_class, test_per_class, seed):
    """Sequential draws: train, then validation from the rest, then test from what is left."""
    seeds = np.random.SeedSequence(seed).spawn(3)
    train, train_rows = balanced_subset(data, train_per_class, seeds[0])
    val, val_rows = balanced_subset(data, val_per_class, seeds[1], exclude=train_rows)
    used = np.concatenate([train_rows, val_rows])
    remainder_rows = np.setdiff1d(np.arange(data.n_samples), used)
    test, test_rows = balanced_subset(data, test_per_class, seeds[2], exclude=used)
    logger.info(f"Balanced splits: train={train.n_samples} val={val.n_samples} "
                f"test={test.n_samples} held-out pool={remainder_rows.size}")
    return Splits(train=train, val=val, test=test, remainder=data.take(remainder_rows))
