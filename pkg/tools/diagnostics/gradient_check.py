#!/usr/bin/env python3
"""
Randomized Gradient Check for the Deinterlacing Network

Compares analytic gradients of every conv layer kind and of the training
loss against central finite differences on small float64 tensors.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

# Add project root to path
project_root = Path(__file__).resolve().parents[2]
sys.path.insert(0, str(project_root))

from deint.tensor import ConvSpec, Padding, Tensor, backward, conv2d, relu, tensor_sum
from deint.train import loss


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / scale))


def numeric_gradient(fn, array: np.ndarray, step: float) -> np.ndarray:
    grad = np.zeros_like(array)
    for index in np.ndindex(array.shape):
        saved = array[index]
        array[index] = saved + step
        plus = fn()
        array[index] = saved - step
        minus = fn()
        array[index] = saved
        grad[index] = (plus - minus) / (2 * step)
    return grad


def conv_trial(rng: np.random.Generator, step: float) -> float:
    spec = ConvSpec(int(rng.integers(1, 3)), int(rng.integers(1, 3)), 3, int(rng.choice([1, 3])),
                    stride_h=int(rng.choice([1, 2])), padding=rng.choice([Padding.ZERO, Padding.REPLICATE]))
    x = Tensor(rng.normal(size=(2, spec.in_channels, int(rng.integers(3, 7)), int(rng.integers(3, 7)))),
               requires_grad=True, dtype=np.float64)
    w = Tensor(rng.normal(size=spec.weight_shape), requires_grad=True, dtype=np.float64)
    b = Tensor(rng.normal(size=spec.out_channels), requires_grad=True, dtype=np.float64)

    def value():
        return tensor_sum(relu(conv2d(x, w, b, spec))).item()

    backward(tensor_sum(relu(conv2d(x, w, b, spec))))
    return max(relative_error(t.grad, numeric_gradient(value, t.data, step)) for t in (x, w, b))


def loss_trial(rng: np.random.Generator, step: float) -> float:
    n, half, width = 2, 3, 4
    pred_a = Tensor(rng.random((n, 1, half, width)), requires_grad=True, dtype=np.float64)
    pred_b = Tensor(rng.random((n, 1, half, width)), requires_grad=True, dtype=np.float64)
    inputs = rng.random((n, 1, 2 * half, width))
    targets = rng.random((n, 1, half, width)), rng.random((n, 1, half, width))
    lam = 0.5

    def value():
        return loss(pred_a, pred_b, inputs, *targets, lam).item()

    backward(loss(pred_a, pred_b, inputs, *targets, lam))
    return max(relative_error(t.grad, numeric_gradient(value, t.data, step)) for t in (pred_a, pred_b))


def main() -> int:
    parser = argparse.ArgumentParser(description="Finite-difference gradient sweep")
    parser.add_argument("--trials", type=int, default=100)
    parser.add_argument("--step", type=float, default=1e-3)
    parser.add_argument("--tolerance", type=float, default=1e-3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    print("🧮 Gradient Check")
    print("=" * 40)
    rng = np.random.default_rng(args.seed)
    worst = {"conv2d": 0.0, "loss": 0.0}
    for _ in range(args.trials):
        worst["conv2d"] = max(worst["conv2d"], conv_trial(rng, args.step))
        worst["loss"] = max(worst["loss"], loss_trial(rng, args.step))

    failed = False
    for name, error in worst.items():
        ok = error < args.tolerance
        failed |= not ok
        print(f"{'✅' if ok else '❌'} {name}: worst relative error {error:.2e} over {args.trials} trials")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
