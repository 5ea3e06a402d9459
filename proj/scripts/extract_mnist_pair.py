#!/usr/bin/env python3
"""Write an IDX image/label pair holding only the requested digit classes.

Records keep their original file order, so loading the first K matching
samples from the subset gives the same samples as loading them from the
full MNIST training files.

usage: extract_mnist_pair.py <images-idx3> <labels-idx1> <out-dir> [--classes 3 5] [--count 2968]
"""
import argparse
import struct
from pathlib import Path


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("images")
    ap.add_argument("labels")
    ap.add_argument("out_dir")
    ap.add_argument("--classes", type=int, nargs="+", default=[3, 5])
    ap.add_argument("--count", type=int, default=2968)
    args = ap.parse_args()

    labels = Path(args.labels).read_bytes()
    images = Path(args.images).read_bytes()
    magic, n = struct.unpack(">II", labels[:8])
    assert magic == 0x801, "bad label magic"
    magic, n_img, rows, cols = struct.unpack(">IIII", images[:16])
    assert magic == 0x803 and n_img == n, "bad image header"
    size = rows * cols

    keep = [i for i in range(n) if labels[8 + i] in args.classes][: args.count]
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(keep), rows, cols))
        for i in keep:
            f.write(images[16 + i * size: 16 + (i + 1) * size])
    with open(out / "labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(keep)))
        f.write(bytes(labels[8 + i] for i in keep))
    print(f"wrote {len(keep)} records to {out}")


if __name__ == "__main__":
    main()
