"""Rebuilds the IDX subset from the digits bundled in the npm `mnist` package.

    npm pack mnist@1.1.0 && tar xzf mnist-1.1.0.tgz
    python3 convert_npm_mnist.py package/src/digits .

Per digit the first 500 images go to train, the next 100 to t10k.
"""
import json
import struct
import sys

import numpy as np

src, dst = sys.argv[1], sys.argv[2]
tr_x, tr_y, te_x, te_y = [], [], [], []
for d in range(10):
    arr = json.load(open(f"{src}/{d}.json"))["data"]
    imgs = np.array(arr, dtype=np.float64).reshape(-1, 784)
    imgs = np.clip(np.rint(imgs * 255), 0, 255).astype(np.uint8)
    tr_x.append(imgs[:500])
    tr_y += [d] * 500
    te_x.append(imgs[500:600])
    te_y += [d] * 100


def write(prefix, xs, ys):
    x = np.concatenate(xs)
    with open(f"{dst}/{prefix}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(x), 28, 28))
        f.write(x.tobytes())
    with open(f"{dst}/{prefix}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(ys)))
        f.write(bytes(ys))


write("train", tr_x, tr_y)
write("t10k", te_x, te_y)
