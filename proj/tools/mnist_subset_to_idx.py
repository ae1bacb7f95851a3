#!/usr/bin/env python3
"""Convert the digit subset bundled with the `mnist` npm package into IDX files.

The npm package (https://www.npmjs.com/package/mnist) ships 10,000 MNIST
digits as JSON arrays of pixel intensities scaled to [0, 1] and rounded to
three decimals; rounding back to uint8 is lossless. Digits are split per
class into a train part (first 70%) and a test part (the rest), then
interleaved round-robin over classes and written as gzipped IDX files using
the official MNIST file names.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/mnist_subset_to_idx.py package/src/digits data/mnist
"""
import gzip
import json
import pathlib
import struct
import sys

TRAIN_FRACTION = 0.7


def load_digit(path):
    flat = json.loads(path.read_text())["data"]
    assert len(flat) % 784 == 0
    pixels = [min(255, max(0, round(v * 255))) for v in flat]
    return [bytes(pixels[i:i + 784]) for i in range(0, len(pixels), 784)]


def interleave(per_digit):
    out = []
    cursors = [0] * 10
    while any(cursors[d] < len(per_digit[d]) for d in range(10)):
        for d in range(10):
            if cursors[d] < len(per_digit[d]):
                out.append((per_digit[d][cursors[d]], d))
                cursors[d] += 1
    return out


def write_idx(dest, prefix, samples):
    with gzip.GzipFile(dest / f"{prefix}-images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, len(samples), 28, 28))
        for img, _ in samples:
            f.write(img)
    with gzip.GzipFile(dest / f"{prefix}-labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, len(samples)))
        f.write(bytes(label for _, label in samples))


def main():
    src, dest = pathlib.Path(sys.argv[1]), pathlib.Path(sys.argv[2])
    dest.mkdir(parents=True, exist_ok=True)
    train, test = [], []
    for d in range(10):
        imgs = load_digit(src / f"{d}.json")
        cut = int(round(len(imgs) * TRAIN_FRACTION))
        train.append(imgs[:cut])
        test.append(imgs[cut:])
    write_idx(dest, "train", interleave(train))
    write_idx(dest, "t10k", interleave(test))


if __name__ == "__main__":
    main()
