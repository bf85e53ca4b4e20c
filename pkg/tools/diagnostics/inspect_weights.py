#!/usr/bin/env python3
"""
Weights File Inspector

Prints the layers, kernel statistics, training metadata, extension records
and per-resolution MAC counts stored in a DINW weights or checkpoint file.
"""

import sys
from pathlib import Path

import numpy as np

# Add project root to path
project_root = Path(__file__).resolve().parents[2]
sys.path.insert(0, str(project_root))

from deint.config import TIMING_RESOLUTIONS
from deint.model import WeightsFileError, flop_count, load_weights, parameters


def inspect(path: str) -> int:
    print(f"🔍 Inspecting {path}")
    print("=" * 60)
    try:
        net = load_weights(path)
    except WeightsFileError as e:
        print(f"❌ {e}")
        return 1

    print(f"Sharing: {'shared trunk' if net.shared else 'two separate networks'}")
    print(f"Epochs completed: {net.epochs_completed}  Final loss: {net.final_loss:.6g}")
    print(f"\n🧱 Layers:")
    for name, weight, bias in parameters(net):
        spec = net.layers[name].spec
        w = weight.data
        print(f"  {name:4s} {str(spec.weight_shape):18s} stride {spec.stride_h} {net.layers[name].activation:8s} "
              f"|w| mean {np.abs(w).mean():.4g} max {np.abs(w).max():.4g}  bias mean {bias.data.mean():.4g}")

    if net.extensions:
        print(f"\n📎 Extensions: " + ", ".join(f"{tag} ({len(payload)} bytes)" for tag, payload in net.extensions.items()))

    print(f"\n⚙️  MACs per frame:")
    for width, height in TIMING_RESOLUTIONS:
        shared = flop_count(net, height, width, shared=True) if net.shared else None
        separate = flop_count(net, height, width, shared=False)
        line = f"  {width}x{height}: separate {separate / 1e9:.2f} G"
        if shared is not None:
            line += f", shared {shared / 1e9:.2f} G (ratio {separate / shared:.2f})"
        print(line)
    return 0


if __name__ == "__main__":
    if len(sys.argv) != 2:
        print("Usage: inspect_weights.py WEIGHTS_FILE")
        sys.exit(2)
    sys.exit(inspect(sys.argv[1]))
