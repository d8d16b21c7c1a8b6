"""On-disk formats: metrics/report CSVs, parameter artifacts, run manifests, PGM images."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import yaml

from iqgan.circuits import Ansatz, EncoderParams, GeneratorParams
from iqgan.errors import ArtifactError

PARAMS_FORMAT = "iqgan-params"
PARAMS_VERSION = 1

METRICS_HEADER = ["epoch", "loss", "fidelity", "lr", "wall_ms"]
ABLATION_HEADER = ["ansatz", "mean_fidelity", "stddev", "1qg", "2qg", "params"]
SWEEP_HEADER = ["n", "fidelity", "stderr"]


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_metrics(path, records, include_wall_time=False):
    # wall time is left blank by default so reruns are byte-identical
    write_csv(path, METRICS_HEADER, [
        (r.epoch, r.loss, r.fidelity, r.lr, r.wall_ms if include_wall_time else "")
        for r in records
    ])


def read_csv(path) -> list[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def save_generator(path, params: GeneratorParams, n: int, b: int):
    params.check(n, b)
    doc = {"format": PARAMS_FORMAT, "version": PARAMS_VERSION, "kind": "generator",
           "ansatz": params.ansatz.value, "n": n, "b": b, "values": params.theta_g.tolist()}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def save_encoder(path, params: EncoderParams):
    doc = {"format": PARAMS_FORMAT, "version": PARAMS_VERSION, "kind": "encoder",
           "pretrained": bool(params.pretrained), "values": params.theta_s.tolist()}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def _load_params(path, kind):
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ArtifactError(f"{path}: cannot read ({exc.strerror})") from exc
    except ValueError as exc:
        raise ArtifactError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("format") != PARAMS_FORMAT:
        raise ArtifactError(f"{path}: not an {PARAMS_FORMAT} file")
    if doc.get("version") != PARAMS_VERSION or doc.get("kind") != kind:
        raise ArtifactError(f"{path}: expected a v{PARAMS_VERSION} {kind} artifact")
    values = doc.get("values")
    if not isinstance(values, list) or not all(isinstance(v, (int, float)) for v in values):
        raise ArtifactError(f"{path}: malformed parameter values")
    return doc


def load_generator(path) -> tuple[GeneratorParams, int, int]:
    doc = _load_params(path, "generator")
    try:
        params = GeneratorParams(np.asarray(doc["values"], float), Ansatz.parse(doc["ansatz"]))
        params.check(int(doc["n"]), int(doc["b"]))
    except (KeyError, ValueError) as exc:
        raise ArtifactError(f"{path}: inconsistent generator artifact ({exc})") from exc
    return params, int(doc["n"]), int(doc["b"])


def load_encoder(path) -> EncoderParams:
    doc = _load_params(path, "encoder")
    return EncoderParams(np.asarray(doc["values"], float), pretrained=bool(doc.get("pretrained")))


def write_manifest(path, manifest: dict):
    Path(path).write_text(yaml.safe_dump(manifest, sort_keys=False, default_flow_style=False))


def read_manifest(path) -> dict:
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ArtifactError(f"{path}: cannot read manifest ({exc.strerror})") from exc
    except yaml.YAMLError as exc:
        raise ArtifactError(f"{path}: malformed manifest") from exc
    if not isinstance(doc, dict):
        raise ArtifactError(f"{path}: malformed manifest")
    return doc


def image_grid(images, shape=(28, 28), cols=10, pad=1, fill=1.0) -> np.ndarray:
    """Tile flattened images row-major into one 2-D array separated by ``pad`` pixels."""
    images = [np.asarray(im, dtype=float).reshape(shape) for im in images]
    rows = -(-len(images) // cols)
    cols = min(cols, len(images))
    h, w = shape
    grid = np.full((rows * h + (rows - 1) * pad, cols * w + (cols - 1) * pad), fill)
    for i, im in enumerate(images):
        r, c = divmod(i, cols)
        grid[r * (h + pad):r * (h + pad) + h, c * (w + pad):c * (w + pad) + w] = im
    return grid


def write_pgm(path, image: np.ndarray):
    """Plain (P2) 8-bit PGM; pixel values in [0, 1]."""
    pix = np.rint(np.clip(image, 0.0, 1.0) * 255).astype(int)
    lines = ["P2", f"{pix.shape[1]} {pix.shape[0]}", "255"]
    lines += [" ".join(str(v) for v in row) for row in pix]
    Path(path).write_text("\n".join(lines) + "\n")


def read_pgm(path) -> np.ndarray:
    tokens = [t for line in Path(path).read_text().splitlines()
              if not line.startswith("#") for t in line.split()]
    if not tokens or tokens[0] != "P2":
        raise ArtifactError(f"{path}: not a plain PGM file")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    return np.asarray(tokens[4:4 + w * h], dtype=float).reshape(h, w) / maxval
