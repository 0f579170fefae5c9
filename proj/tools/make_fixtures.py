#!/usr/bin/env python3
"""Train the desk-scale LeNet-style fixture and write it in the interchange format.

Produces, in the output directory:
  lenet_digits.json / .bin      network manifest + weight blob
  digits_eval.json / .bin       evaluation split
  conv1_activations.json / .bin post-ReLU conv1 activations of the first samples

The dataset is scikit-learn's bundled 8x8 digits, so no download is needed.
"""

import argparse
import hashlib
import json
import os

import numpy as np
import torch
import torch.nn as nn
from sklearn.datasets import load_digits

EVAL_COUNT = 500
RAW_ACTIVATION_SAMPLES = 100


class LeNetDigits(nn.Module):
    def __init__(self):
        super().__init__()
        self.conv1 = nn.Conv2d(1, 32, 3, padding=1)
        self.conv2 = nn.Conv2d(32, 64, 3, padding=1)
        self.fc1 = nn.Linear(64 * 2 * 2, 128)
        self.fc2 = nn.Linear(128, 10)

    def features(self, x):
        return torch.relu(self.conv1(x))

    def forward(self, x):
        x = torch.max_pool2d(self.features(x), 2)
        x = torch.max_pool2d(torch.relu(self.conv2(x)), 2)
        x = torch.flatten(x, 1)
        x = torch.relu(self.fc1(x))
        return self.fc2(x)


def split(seed, eval_count):
    digits = load_digits()
    images = (digits.images / 16.0).astype(np.float32)[:, None, :, :]
    labels = digits.target.astype(np.int64)
    order = np.random.default_rng(seed).permutation(len(labels))
    eval_idx, train_idx = order[:eval_count], order[eval_count:]
    return (images[train_idx], labels[train_idx]), (images[eval_idx], labels[eval_idx])


def train(model, images, labels, epochs, seed):
    torch.manual_seed(seed)
    x = torch.from_numpy(images)
    y = torch.from_numpy(labels)
    opt = torch.optim.Adam(model.parameters(), lr=2e-3, weight_decay=1e-4)
    for _ in range(epochs):
        perm = torch.randperm(len(y))
        for start in range(0, len(y), 64):
            idx = perm[start:start + 64]
            opt.zero_grad()
            loss = nn.functional.cross_entropy(model(x[idx]), y[idx])
            loss.backward()
            opt.step()


def layer_matrix(weight, bias):
    w = weight.detach().numpy().astype(np.float32)
    b = bias.detach().numpy().astype(np.float32)
    return np.concatenate([w.reshape(w.shape[0], -1), b[:, None]], axis=1)


def write_blob(path, arrays):
    entries, offset = [], 0
    with open(path, "wb") as f:
        for arr in arrays:
            data = np.ascontiguousarray(arr, dtype="<f4").tobytes()
            f.write(data)
            entries.append((offset, len(data)))
            offset += len(data)
    return entries


def export_network(model, out_dir, reference_accuracy, dataset_desc):
    layers = [
        {"id": "conv1", "kind": "conv", "inputs": ["input"], "filters": 32, "channels": 1,
         "kernel": [3, 3], "stride": 1, "pad": 1},
        {"id": "relu1", "kind": "relu", "inputs": ["conv1"]},
        {"id": "pool1", "kind": "maxpool", "inputs": ["relu1"], "window": 2, "stride": 2},
        {"id": "conv2", "kind": "conv", "inputs": ["pool1"], "filters": 64, "channels": 32,
         "kernel": [3, 3], "stride": 1, "pad": 1},
        {"id": "relu2", "kind": "relu", "inputs": ["conv2"]},
        {"id": "pool2", "kind": "maxpool", "inputs": ["relu2"], "window": 2, "stride": 2},
        {"id": "flatten", "kind": "flatten", "inputs": ["pool2"]},
        {"id": "fc1", "kind": "fc", "inputs": ["flatten"], "filters": 128, "in_features": 256},
        {"id": "relu3", "kind": "relu", "inputs": ["fc1"]},
        {"id": "fc2", "kind": "fc", "inputs": ["relu3"], "filters": 10, "in_features": 128},
        {"id": "softmax", "kind": "softmax", "inputs": ["fc2"]},
    ]
    mats = {
        "conv1": layer_matrix(model.conv1.weight, model.conv1.bias),
        "conv2": layer_matrix(model.conv2.weight, model.conv2.bias),
        "fc1": layer_matrix(model.fc1.weight, model.fc1.bias),
        "fc2": layer_matrix(model.fc2.weight, model.fc2.bias),
    }
    names = list(mats)
    offsets = write_blob(os.path.join(out_dir, "lenet_digits.bin"), [mats[n] for n in names])
    tensors = [{"layer": n, "dtype": "f32", "shape": list(mats[n].shape), "offset": o, "bytes": b}
               for n, (o, b) in zip(names, offsets)]
    manifest = {
        "format": "coreset-network",
        "version": 1,
        "blob": "lenet_digits.bin",
        "input_shape": [1, 8, 8],
        "layers": layers,
        "tensors": tensors,
        "metadata": {
            "reference_accuracy": reference_accuracy,
            "eval_set": "digits_eval.json",
            "dataset": dataset_desc,
        },
    }
    with open(os.path.join(out_dir, "lenet_digits.json"), "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")


def export_evalset(images, labels, out_dir):
    (offset, nbytes), = write_blob(os.path.join(out_dir, "digits_eval.bin"), [images])
    manifest = {
        "format": "coreset-evalset",
        "version": 1,
        "blob": "digits_eval.bin",
        "input_shape": [1, 8, 8],
        "class_count": 10,
        "count": int(len(labels)),
        "labels": [int(v) for v in labels],
        "inputs": {"dtype": "f32", "offset": offset, "bytes": nbytes},
    }
    with open(os.path.join(out_dir, "digits_eval.json"), "w") as f:
        json.dump(manifest, f)
        f.write("\n")


def export_activations(model, images, out_dir):
    with torch.no_grad():
        acts = model.features(torch.from_numpy(images[:RAW_ACTIVATION_SAMPLES])).numpy()
    (offset, nbytes), = write_blob(os.path.join(out_dir, "conv1_activations.bin"), [acts])
    manifest = {
        "format": "coreset-tensor",
        "version": 1,
        "blob": "conv1_activations.bin",
        "layer": "conv1",
        "tap": "relu1",
        "first_samples": RAW_ACTIVATION_SAMPLES,
        "shape": list(acts.shape),
        "dtype": "f32",
        "offset": offset,
        "bytes": nbytes,
    }
    with open(os.path.join(out_dir, "conv1_activations.json"), "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "tests", "fixtures"))
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--epochs", type=int, default=60)
    parser.add_argument("--eval-count", type=int, default=EVAL_COUNT)
    args = parser.parse_args()
    os.makedirs(args.out, exist_ok=True)

    torch.set_num_threads(1)
    (train_x, train_y), (eval_x, eval_y) = split(args.seed, args.eval_count)
    torch.manual_seed(args.seed)
    model = LeNetDigits()
    train(model, train_x, train_y, args.epochs, args.seed)
    model.eval()
    with torch.no_grad():
        pred = model(torch.from_numpy(eval_x)).argmax(dim=1).numpy()
    accuracy = float((pred == eval_y).mean())
    print(f"reference accuracy on {len(eval_y)} eval samples: {accuracy:.4f}")

    desc = {"source": "sklearn.datasets.load_digits", "eval_count": args.eval_count, "split_seed": args.seed}
    export_network(model, args.out, accuracy, desc)
    export_evalset(eval_x, eval_y, args.out)
    export_activations(model, eval_x, args.out)

    for name in ("lenet_digits.bin", "digits_eval.bin", "conv1_activations.bin"):
        with open(os.path.join(args.out, name), "rb") as f:
            print(name, hashlib.sha256(f.read()).hexdigest())


if __name__ == "__main__":
    main()
