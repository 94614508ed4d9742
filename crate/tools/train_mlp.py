#!/usr/bin/env python3
"""Train the 784-300-10 MNIST MLP, quantize it and export the frozen fixtures.

Writes, under data/:
  mnist_mlp.qmlp            quantized model (QMLP container)
  mnist_test_images.idx     test images (IDX, 28x28 u8)
  mnist_test_labels.idx     test labels (IDX, u8)

The input is a CSV (optionally gzipped) with 784 pixel columns followed by
the label. The model is trained in float32 and quantized afterwards with
per-tensor power-of-two scales, matching the Rust inference rules:

  activations: q * 2^-s, input pixels p -> p >> 1 at shift 7
  hidden: acc >> (acc_shift - out_shift), ReLU, clamp 0..127
  output: raw accumulator scores, argmax with lowest-index ties
"""

import argparse
import gzip
import json
import math
import struct
from pathlib import Path

import numpy as np
import torch
from torch import nn

ROOT = Path(__file__).resolve().parent.parent
INPUT_SHIFT = 7


def load_csv(path):
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rt") as f:
        data = np.loadtxt(f, delimiter=",", dtype=np.int64)
    return data[:, :784].astype(np.uint8), data[:, 784].astype(np.uint8)


def shift_for(max_abs, limit=127, cap=15):
    if max_abs <= 0:
        return cap
    return max(0, min(cap, math.floor(math.log2(limit / max_abs))))


def quantize(t, shift):
    return np.clip(np.round(t * 2.0**shift), -127, 127).astype(np.int8)


def quant_forward(layers, images):
    """Integer forward pass mirroring the Rust reference path."""
    acts = (images.astype(np.int64) >> 1)
    act_shift = INPUT_SHIFT
    for layer in layers:
        acc_shift = layer["weight_shift"] + act_shift
        w = layer["weights"].astype(np.int64)
        b = layer["bias"].astype(np.int64) << (acc_shift - layer["bias_shift"])
        acc = acts @ w.T + b
        if layer["activation"] == "identity":
            return acc
        acts = np.clip(acc >> (acc_shift - layer["output_shift"]), 0, 127)
        act_shift = layer["output_shift"]
    raise AssertionError("model must end with an identity layer")


def export_model(path, layers):
    blob = bytearray()
    headers = []
    for layer in layers:
        w = layer["weights"].astype(np.int8).tobytes()
        b = layer["bias"].astype(np.int8).tobytes()
        wspan = {"offset": len(blob), "len": len(w)}
        blob += w
        bspan = {"offset": len(blob), "len": len(b)}
        blob += b
        headers.append({
            "inputs": int(layer["weights"].shape[1]),
            "outputs": int(layer["weights"].shape[0]),
            "weight_shift": layer["weight_shift"],
            "bias_shift": layer["bias_shift"],
            "output_shift": layer["output_shift"],
            "activation": layer["activation"],
            "weights": wspan,
            "bias": bspan,
        })
    header = json.dumps({
        "format": "qmlp",
        "version": 1,
        "input_shift": INPUT_SHIFT,
        "layers": headers,
    }, separators=(",", ":")).encode()
    with open(path, "wb") as f:
        f.write(b"QMLP")
        f.write(struct.pack("<II", 1, len(header)))
        f.write(header)
        f.write(bytes(blob))


def write_idx_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(images), 28, 28))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("csv", type=Path)
    ap.add_argument("--out", type=Path, default=ROOT / "data")
    ap.add_argument("--train", type=int, default=3000)
    ap.add_argument("--test", type=int, default=2000)
    ap.add_argument("--epochs", type=int, default=40)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()

    images, labels = load_csv(args.csv)
    rng = np.random.default_rng(args.seed)
    order = rng.permutation(len(labels))
    tr, te = order[: args.train], order[args.train : args.train + args.test]

    torch.manual_seed(args.seed)
    torch.set_num_threads(1)
    x = torch.tensor(images[tr], dtype=torch.float32) / 256.0
    y = torch.tensor(labels[tr], dtype=torch.int64)
    model = nn.Sequential(nn.Linear(784, 300), nn.ReLU(), nn.Linear(300, 10))
    opt = torch.optim.Adam(model.parameters(), lr=1e-3, weight_decay=1e-4)
    loss_fn = nn.CrossEntropyLoss()
    for epoch in range(args.epochs):
        perm = torch.randperm(len(y))
        for k in range(0, len(y), 64):
            idx = perm[k : k + 64]
            opt.zero_grad()
            loss = loss_fn(model(x[idx]), y[idx])
            loss.backward()
            opt.step()

    with torch.no_grad():
        xt = torch.tensor(images[te], dtype=torch.float32) / 256.0
        float_acc = (model(xt).argmax(1).numpy() == labels[te]).mean()
        hidden = torch.relu(model[0](x)).numpy()

    w1 = model[0].weight.detach().numpy()
    b1 = model[0].bias.detach().numpy()
    w2 = model[2].weight.detach().numpy()
    b2 = model[2].bias.detach().numpy()

    s_w1 = shift_for(np.abs(w1).max())
    acc1 = s_w1 + INPUT_SHIFT
    s_b1 = min(shift_for(np.abs(b1).max()), acc1)
    s_h = shift_for(np.percentile(hidden, 99.9))
    s_w2 = shift_for(np.abs(w2).max())
    acc2 = s_w2 + s_h
    s_b2 = min(shift_for(np.abs(b2).max()), acc2)

    layers = [
        {"weights": quantize(w1, s_w1), "bias": quantize(b1, s_b1), "weight_shift": s_w1,
         "bias_shift": s_b1, "output_shift": s_h, "activation": "relu"},
        {"weights": quantize(w2, s_w2), "bias": quantize(b2, s_b2), "weight_shift": s_w2,
         "bias_shift": s_b2, "output_shift": 0, "activation": "identity"},
    ]
    scores = quant_forward(layers, images[te])
    quant_acc = (scores.argmax(1) == labels[te]).mean()
    all_w = np.concatenate([l["weights"].ravel().astype(np.float64) * 2.0 ** -l["weight_shift"] for l in layers])
    near_zero = (np.abs(all_w) < 0.08).mean()

    args.out.mkdir(parents=True, exist_ok=True)
    export_model(args.out / "mnist_mlp.qmlp", layers)
    write_idx_images(args.out / "mnist_test_images.idx", images[te])
    write_idx_labels(args.out / "mnist_test_labels.idx", labels[te])
    print(f"float accuracy {float_acc:.4f}, quantized accuracy {quant_acc:.4f}")
    print(f"shifts w1={s_w1} b1={s_b1} h={s_h} w2={s_w2} b2={s_b2}; |w|<0.08: {near_zero:.4f}")


if __name__ == "__main__":
    main()
