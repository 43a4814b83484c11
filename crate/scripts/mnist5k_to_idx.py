#!/usr/bin/env python3
"""Convert the 5000-image MNIST subset shipped with mlxtend into IDX files.

Usage: mnist5k_to_idx.py <mnist_5k.csv.gz | mlxtend wheel> <out_dir>

Each CSV row holds 784 pixel values (0-255) followed by the digit label.
Writes gzip-compressed idx3 (images) and idx1 (labels) files.
"""
import gzip
import struct
import sys
import zipfile
from pathlib import Path


def read_rows(src: Path):
    if src.suffix == ".whl":
        raw = zipfile.ZipFile(src).read("mlxtend/data/data/mnist_5k.csv.gz")
    else:
        raw = src.read_bytes()
    for line in gzip.decompress(raw).decode().splitlines():
        vals = [int(float(v)) for v in line.split(",")]
        yield vals[:-1], vals[-1]


def main():
    src, out = Path(sys.argv[1]), Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    rows = list(read_rows(src))
    images = bytearray(struct.pack(">IIII", 0x00000803, len(rows), 28, 28))
    labels = bytearray(struct.pack(">II", 0x00000801, len(rows)))
    for pixels, label in rows:
        assert len(pixels) == 784
        images.extend(bytes(pixels))
        labels.append(label)
    # mtime=0 keeps the output byte-identical across runs
    with gzip.GzipFile(out / "mnist5k-images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(images)
    with gzip.GzipFile(out / "mnist5k-labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(labels)
    print(f"wrote {len(rows)} images to {out}")


if __name__ == "__main__":
    main()
