"""MNIST IDX ingestion and the PCA used to down-sample images to qubit-sized vectors."""

from __future__ import annotations

import gzip
import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from iqgan.errors import (
    ArtifactError,
    CountMismatchError,
    DataError,
    DegenerateDataError,
    IdxFormatError,
    TruncatedFileError,
    ValidationError,
)

log = logging.getLogger(__name__)

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049
PCA_FORMAT = "iqgan-pca"
PCA_VERSION = 1


@dataclass
class Sample:
    pixels: np.ndarray
    label: int


def _read_bytes(path) -> bytes:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise DataError(f"{path}: cannot read ({exc.strerror})") from exc
    if raw[:2] == b"\x1f\x8b":
        try:
            raw = gzip.decompress(raw)
        except (OSError, EOFError) as exc:
            raise TruncatedFileError(f"{path}: corrupt gzip stream ({exc})") from exc
    return raw


def _parse_idx(path, expected_magic):
    raw = _read_bytes(path)
    if len(raw) < 8:
        raise TruncatedFileError(f"{path}: {len(raw)} bytes is too short for an IDX header")
    magic, count = struct.unpack(">II", raw[:8])
    if magic != expected_magic:
        raise IdxFormatError(path, magic, expected_magic)
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise TruncatedFileError(f"{path}: header truncated")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    size = int(np.prod(dims))
    body = raw[header:]
    if len(body) < size:
        raise TruncatedFileError(f"{path}: expected {size} data bytes, found {len(body)}")
    return np.frombuffer(body, dtype=np.uint8, count=size).reshape(dims)


def load_idx_arrays(images_path, labels_path) -> tuple[np.ndarray, np.ndarray]:
    """Pixels scaled to [0, 1] with shape (count, rows*cols), and integer labels."""
    images = _parse_idx(images_path, IMAGE_MAGIC)
    labels = _parse_idx(labels_path, LABEL_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise CountMismatchError(
            f"{images.shape[0]} images in {images_path} but {labels.shape[0]} labels in {labels_path}"
        )
    pixels = images.reshape(images.shape[0], -1).astype(float) / 255.0
    return pixels, labels.astype(int)


def load_idx(images_path, labels_path) -> list[Sample]:
    pixels, labels = load_idx_arrays(images_path, labels_path)
    return [Sample(p, int(y)) for p, y in zip(pixels, labels)]


def select_classes(pixels, labels, classes, per_class=None):
    """Rows whose label is in ``classes``, keeping file order, at most ``per_class`` each."""
    keep = []
    for c in classes:
        idx = np.flatnonzero(labels == c)
        if per_class is not None:
            idx = idx[:per_class]
        keep.append(idx)
    idx = np.sort(np.concatenate(keep)) if keep else np.array([], dtype=int)
    return pixels[idx], labels[idx]


@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray
    scale: np.ndarray

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def input_dim(self) -> int:
        return self.components.shape[1]

    @classmethod
    def identity(cls, dim: int) -> "PcaModel":
        return cls(np.zeros(dim), np.eye(dim), np.ones(dim))

    def to_dict(self) -> dict:
        return {
            "format": PCA_FORMAT,
            "version": PCA_VERSION,
            "input_dim": self.input_dim,
            "k": self.k,
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "scale": self.scale.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PcaModel":
        if d.get("format") != PCA_FORMAT or d.get("version") != PCA_VERSION:
            raise ArtifactError(f"not an {PCA_FORMAT} v{PCA_VERSION} document")
        model = cls(np.asarray(d["mean"], float), np.asarray(d["components"], float),
                    np.asarray(d["scale"], float))
        if model.components.shape != (d["k"], d["input_dim"]) or model.mean.shape != (d["input_dim"],):
            raise ArtifactError("PCA model dimensions disagree with its header")
        return model

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "PcaModel":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise ArtifactError(f"{path}: cannot read PCA model ({exc})") from exc


def _as_matrix(samples) -> np.ndarray:
    if len(samples) and isinstance(samples[0], Sample):
        return np.stack([s.pixels for s in samples])
    return np.asarray(samples, dtype=float)


def fit_pca(samples, k: int) -> PcaModel:
    """Top-``k`` principal components, with max-abs scaling of training projections into [-1, 1]."""
    X = _as_matrix(samples)
    m, d = X.shape
    if not 1 <= k <= d:
        raise ValidationError(f"k={k} must lie in [1, {d}]")
    if m < k + 1:
        raise DegenerateDataError(f"need at least {k + 1} samples for k={k}, got {m}")
    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / (m - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:k]
    evals, comps = evals[order], evecs[:, order].T
    if evals[-1] <= 1e-12 * max(evals[0], 1e-300):
        raise DegenerateDataError(
            f"covariance has fewer than {k} independent directions (eigenvalue {evals[-1]:.3g})"
        )
    for row in comps:
        nz = np.flatnonzero(np.abs(row) > 1e-12)
        if nz.size and row[nz[0]] < 0:
            row *= -1
    scale = np.abs(centered @ comps.T).max(axis=0)
    return PcaModel(mean, comps, scale)


def project(model: PcaModel, x) -> np.ndarray:
    """Scaled PCA coordinates, clamped to [-1, 1]; accepts one vector or a batch."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.input_dim:
        raise ValidationError(f"expected input dimension {model.input_dim}, got {x.shape[-1]}")
    v = ((x - model.mean) @ model.components.T) / model.scale
    clamped = np.abs(v) > 1.0
    if clamped.any():
        log.info("clamped %d PCA coordinate(s) outside [-1, 1]", int(clamped.sum()))
    return np.clip(v, -1.0, 1.0)


def reconstruct(model: PcaModel, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != model.k:
        raise ValidationError(f"expected {model.k} coordinates, got {v.shape[-1]}")
    return model.mean + (v * model.scale) @ model.components


def to_image(vector) -> np.ndarray:
    """Clamp a reconstructed vector to displayable [0, 1] pixel values."""
    return np.clip(np.asarray(vector, dtype=float), 0.0, 1.0)
