#!/usr/bin/env python3
"""Convert an MNIST-style CSV (784 pixel columns then a label column) into
gzip-wrapped IDX image and label files."""
import argparse
import gzip
import struct


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("csv")
    ap.add_argument("--images", required=True)
    ap.add_argument("--labels", required=True)
    ap.add_argument("--side", type=int, default=28)
    args = ap.parse_args()

    opener = gzip.open if args.csv.endswith(".gz") else open
    pixels, labels = bytearray(), bytearray()
    with opener(args.csv, "rt") as f:
        for line in f:
            fields = line.strip().split(",")
            if not fields or fields == [""]:
                continue
            pixels.extend(int(float(v)) for v in fields[:-1])
            labels.append(int(float(fields[-1])))
    count = len(labels)
    assert len(pixels) == count * args.side * args.side
    with gzip.GzipFile(args.images, "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x803, count, args.side, args.side))
        f.write(pixels)
    with gzip.GzipFile(args.labels, "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x801, count))
        f.write(labels)


if __name__ == "__main__":
    main()
