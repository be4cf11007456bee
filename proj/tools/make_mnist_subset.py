#!/usr/bin/env python3
"""Build the desk-scale MNIST subset in IDX format.

Source: the `mnist` npm package (10,000 MNIST digits stored as JSON arrays of
intensity/255). Run `npm pack mnist` and extract it, then:

    tools/make_mnist_subset.py path/to/package data/mnist-desk

Produces a 5,000-image train split and a 1,000-image test split, drawn from a
fixed permutation so the files are reproducible.
"""
import json
import random
import struct
import sys
from pathlib import Path

ROWS = COLS = 28
TRAIN, TEST = 5000, 1000


def load_digits(package_dir):
    samples = []
    for digit in range(10):
        path = Path(package_dir) / "src" / "digits" / f"{digit}.json"
        values = json.loads(path.read_text())["data"]
        count = len(values) // (ROWS * COLS)
        for i in range(count):
            chunk = values[i * ROWS * COLS:(i + 1) * ROWS * COLS]
            pixels = bytes(min(255, max(0, round(v * 255))) for v in chunk)
            samples.append((pixels, digit))
    return samples


def write_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), ROWS, COLS))
        for img in images:
            f.write(img)


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    package_dir, out_dir = sys.argv[1], Path(sys.argv[2])
    samples = load_digits(package_dir)
    random.Random(20180601).shuffle(samples)
    train, test = samples[:TRAIN], samples[TRAIN:TRAIN + TEST]
    out_dir.mkdir(parents=True, exist_ok=True)
    write_images(out_dir / "train-images-idx3-ubyte", [s[0] for s in train])
    write_labels(out_dir / "train-labels-idx1-ubyte", [s[1] for s in train])
    write_images(out_dir / "t10k-images-idx3-ubyte", [s[0] for s in test])
    write_labels(out_dir / "t10k-labels-idx1-ubyte", [s[1] for s in test])


if __name__ == "__main__":
    main()
