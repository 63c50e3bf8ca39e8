#!/usr/bin/env python3
"""Convert the digit arrays shipped in the `mnist` npm package into gzipped IDX files.

The package bundles the 10k MNIST test digits as JSON, grouped by class, with
pixel values already scaled to [0,1] and rounded to three decimals. Rounding
back through 255 restores the original bytes exactly. Digits are interleaved
with a fixed seed so that any prefix is class-balanced in expectation.

Usage: npm pack mnist && tar xzf mnist-*.tgz
       python3 tools/mnist_from_npm.py package/src/digits data/mnist
"""
import argparse
import gzip
import json
import pathlib
import random
import struct


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("digits_dir")
    ap.add_argument("out_dir")
    ap.add_argument("--seed", type=int, default=20221)
    args = ap.parse_args()

    samples = []
    for label in range(10):
        data = json.loads((pathlib.Path(args.digits_dir) / f"{label}.json").read_text())["data"]
        assert len(data) % 784 == 0
        for k in range(len(data) // 784):
            px = bytes(min(255, max(0, round(v * 255))) for v in data[k * 784:(k + 1) * 784])
            samples.append((px, label))
    random.Random(args.seed).shuffle(samples)

    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = len(samples)
    with gzip.GzipFile(out / "images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, n, 28, 28))
        for px, _ in samples:
            f.write(px)
    with gzip.GzipFile(out / "labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, n))
        f.write(bytes(label for _, label in samples))
    print(f"wrote {n} digits to {out}")


if __name__ == "__main__":
    main()
