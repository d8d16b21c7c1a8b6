"""Convert the digit JSON bundled in the npm ``mnist`` package into IDX files.

The npm package (MIT, github.com/cazala/mnist) ships 10,000 MNIST digits as
flattened 28x28 float arrays rounded to three decimals. This script turns a
per-digit subset back into the canonical big-endian IDX layout, gzipped.

    npm pack mnist && tar xzf mnist-*.tgz
    python tools/mnist_from_npm.py package/src/digits tests/data --digits 0 1 3 7 --per-digit 300
"""

import argparse
import gzip
import json
import struct
from pathlib import Path

import numpy as np


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("digits_dir", type=Path)
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("--digits", type=int, nargs="+", default=list(range(10)))
    parser.add_argument("--per-digit", type=int, default=None)
    parser.add_argument("--prefix", default="mnist-subset")
    args = parser.parse_args()

    images, labels = [], []
    for d in args.digits:
        flat = np.asarray(json.loads((args.digits_dir / f"{d}.json").read_text())["data"])
        digits = flat.reshape(-1, 784)
        if args.per_digit is not None:
            digits = digits[: args.per_digit]
        images.append(np.rint(np.clip(digits, 0.0, 1.0) * 255).astype(np.uint8))
        labels.append(np.full(len(digits), d, dtype=np.uint8))
    images = np.concatenate(images)
    labels = np.concatenate(labels)

    args.out_dir.mkdir(parents=True, exist_ok=True)
    img_path = args.out_dir / f"{args.prefix}-images-idx3-ubyte.gz"
    lbl_path = args.out_dir / f"{args.prefix}-labels-idx1-ubyte.gz"
    # mtime=0 keeps the gzip bytes reproducible
    with gzip.GzipFile(img_path, "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 2051, len(images), 28, 28))
        f.write(images.tobytes())
    with gzip.GzipFile(lbl_path, "wb", mtime=0) as f:
        f.write(struct.pack(">II", 2049, len(labels)))
        f.write(labels.tobytes())
    print(f"wrote {len(images)} samples to {img_path} and {lbl_path}")


if __name__ == "__main__":
    main()
