#!/usr/bin/env python3
"""Rebuild testdata/mnist5k from the 5,000-digit MNIST sample shipped in the
mlxtend wheel (mlxtend/data/data/mnist_5k.csv.gz).

    pip download mlxtend==0.24.0 --no-deps -d /tmp/mlx
    python3 tools/make_mnist_subset.py /tmp/mlx/mlxtend-0.24.0-py3-none-any.whl testdata/mnist5k

The first 400 samples of each digit form the training split and the remaining
100 the test split; each split is shuffled with numpy's default_rng(0).
"""
import argparse
import gzip
import io
import os
import struct
import zipfile

import numpy as np

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"
TRAIN_PER_CLASS = 400


def write_idx(out_dir, name, images, labels):
    with open(os.path.join(out_dir, f"{name}-images-idx3-ubyte"), "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(images), 28, 28))
        f.write(images.tobytes())
    with open(os.path.join(out_dir, f"{name}-labels-idx1-ubyte"), "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(labels.tobytes())


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("wheel")
    ap.add_argument("out_dir")
    args = ap.parse_args()

    raw = zipfile.ZipFile(args.wheel).read(MEMBER)
    d = np.loadtxt(io.BytesIO(gzip.decompress(raw)), delimiter=",")
    y = d[:, -1].astype(np.uint8)
    x = d[:, :-1].astype(np.uint8)

    train, test = [], []
    for c in range(10):
        idx = np.where(y == c)[0]
        train += list(idx[:TRAIN_PER_CLASS])
        test += list(idx[TRAIN_PER_CLASS:])
    rng = np.random.default_rng(0)
    train, test = np.array(train), np.array(test)
    rng.shuffle(train)
    rng.shuffle(test)

    os.makedirs(args.out_dir, exist_ok=True)
    write_idx(args.out_dir, "train", x[train], y[train])
    write_idx(args.out_dir, "t10k", x[test], y[test])


if __name__ == "__main__":
    main()
