"""
The five-layer two-pathway deinterlacing network.

Layers L1-L3 form a trunk shared by both pathways; pathway A (L4a, L5a)
predicts the even field of frame t and pathway B (L4b, L5b) the odd field of
frame t+1. L5 convolves with vertical stride 2, so each pathway emits a
half-height image directly.

Weights are stored in the DINW format:

    "DINW" | u16 version | u16 flags (bit 0: shared trunk) | u16 layer count
    per layer: u8 name length | name | u16 in, out, kernel_h, kernel_w,
               stride_h, stride_w | u8 padding | u8 activation |
               f32 kernel (out*in*kh*kw) | f32 bias (out)
    u32 epochs completed | f64 final loss
    extension records until EOF: 4-byte tag | u32 length | payload

All integers and floats are little-endian.
"""

import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .config import ArchitectureConfig
from .frames import Field, Frame, Parity, ParityError, weave
from .tensor import ACTIVATIONS, ConvSpec, ContractViolation, Padding, Tensor, conv2d

logger = logging.getLogger(__name__)

WEIGHTS_MAGIC = b"DINW"
WEIGHTS_VERSION = 1
FLAG_SHARED = 0x1

_PADDING_CODES = {Padding.ZERO: 0, Padding.REPLICATE: 1}
_ACTIVATION_CODES = {"identity": 0, "relu": 1}

TRUNK = ("L1", "L2", "L3")
BRANCH = ("L4", "L5")


class WeightsFileError(Exception):
    """Base class for weights file load errors"""
    pass


class NotAWeightsFileError(WeightsFileError):
    """Raised when the magic bytes are wrong"""
    pass


class WeightsVersionError(WeightsFileError):
    """Raised for an unsupported format version"""
    pass


class WeightsShapeError(WeightsFileError):
    """Raised when a stored layer disagrees with the expected architecture"""
    pass


class TruncatedWeightsError(WeightsFileError):
    """Raised when the file ends in the middle of a record"""
    pass


@dataclass
class ConvLayer:
    name: str
    spec: ConvSpec
    weight: Tensor
    bias: Tensor
    activation: str = "identity"

    def __call__(self, x: Tensor) -> Tensor:
        return ACTIVATIONS[self.activation](conv2d(x, self.weight, self.bias, self.spec))


@dataclass
class DeinterlaceNet:
    """
    Layers keyed by name plus training metadata. A shared net holds
    L1, L2, L3, L4a, L5a, L4b, L5b; an unshared one holds a full
    L1x..L5x stack per pathway x in {a, b}.
    """
    layers: Dict[str, ConvLayer]
    shared: bool = True
    epochs_completed: int = 0
    final_loss: float = 0.0
    extensions: Dict[str, bytes] = field(default_factory=dict)

    def pathway(self, which: str) -> List[ConvLayer]:
        """The five layers an input passes through to reach pathway ``which`` ("a" or "b")."""
        if which not in ("a", "b"):
            raise ContractViolation(f"Unknown pathway {which!r}")
        trunk = TRUNK if self.shared else tuple(f"{n}{which}" for n in TRUNK)
        return [self.layers[n] for n in trunk + tuple(f"{n}{which}" for n in BRANCH)]

    def set_trainable(self, flag: bool) -> None:
        for layer in self.layers.values():
            layer.weight.requires_grad = flag
            layer.bias.requires_grad = flag
            if not flag:
                layer.weight.grad = layer.bias.grad = None


# Checkpoints and final weights share one type.
ModelWeights = DeinterlaceNet


def layer_specs(arch: ArchitectureConfig, shared: Optional[bool] = None) -> Dict[str, Tuple[ConvSpec, str]]:
    """Expected (spec, activation) per layer name, in serialization order."""
    shared = arch.shared if shared is None else shared
    t1, t2, t3 = arch.trunk_kernels
    b = arch.branch_kernels
    pad = Padding(arch.padding)
    trunk = {
        "L1": (ConvSpec(1, t1, 3, 3, padding=pad), "relu"),
        "L2": (ConvSpec(t1, t2, 3, 3, padding=pad), "relu"),
        "L3": (ConvSpec(t2, t3, 1, 1, padding=pad), "identity"),
    }
    branch = {
        "L4": (ConvSpec(t3, b, 3, 3, padding=pad), "identity"),
        "L5": (ConvSpec(b, 1, 3, 3, stride_h=2, padding=pad), "identity"),
    }

    specs: Dict[str, Tuple[ConvSpec, str]] = {}
    if shared:
        specs.update(trunk)
    for which in ("a", "b"):
        if not shared:
            specs.update({f"{n}{which}": v for n, v in trunk.items()})
        specs.update({f"{n}{which}": v for n, v in branch.items()})
    return specs


def build_net(arch: Optional[ArchitectureConfig] = None, seed: int = 0) -> DeinterlaceNet:
    """
    Construct the network with uniform Glorot initialization and zero biases.

    Each kernel is drawn from U(-b, b) with b = sqrt(6 / (fan_in + fan_out)),
    in serialization order from one seeded generator.
    """
    arch = arch or ArchitectureConfig()
    rng = np.random.default_rng(seed)
    layers = {}
    for name, (spec, activation) in layer_specs(arch).items():
        receptive = spec.kernel_h * spec.kernel_w
        bound = math.sqrt(6.0 / (spec.in_channels * receptive + spec.out_channels * receptive))
        weight = rng.uniform(-bound, bound, size=spec.weight_shape).astype(np.float32)
        layers[name] = ConvLayer(name, spec, Tensor(weight), Tensor(np.zeros(spec.out_channels)), activation)
    logger.debug(f"Built {'shared' if arch.shared else 'unshared'} net with {len(layers)} layers (seed {seed})")
    return DeinterlaceNet(layers, shared=arch.shared)


def unshared(net: DeinterlaceNet) -> DeinterlaceNet:
    """Two complete networks, each with its own copy of the trunk; outputs are unchanged."""
    if not net.shared:
        return net

    def clone(layer: ConvLayer, name: str) -> ConvLayer:
        return ConvLayer(name, layer.spec, Tensor(layer.weight.data.copy()),
                         Tensor(layer.bias.data.copy()), layer.activation)

    layers = {}
    for which in ("a", "b"):
        for name in TRUNK:
            layers[f"{name}{which}"] = clone(net.layers[name], f"{name}{which}")
        for name in BRANCH:
            layers[f"{name}{which}"] = clone(net.layers[f"{name}{which}"], f"{name}{which}")
    return DeinterlaceNet(layers, shared=False, epochs_completed=net.epochs_completed, final_loss=net.final_loss)


def parameters(net: DeinterlaceNet) -> List[Tuple[str, Tensor, Tensor]]:
    return [(name, layer.weight, layer.bias) for name, layer in net.layers.items()]


def forward(net: DeinterlaceNet, interlaced: Tensor) -> Tuple[Tensor, Tensor]:
    """
    Predict the two missing half frames.

    Args:
        net: The network
        interlaced: (batch, 1, H, W) interlaced luminance with even H

    Returns:
        (even field of frame t, odd field of frame t+1), each (batch, 1, H/2, W)

    Raises:
        ParityError: If H is odd
        ContractViolation: If the input is not single-channel 4-D
    """
    if interlaced.data.ndim != 4 or interlaced.shape[1] != 1:
        raise ContractViolation(f"Network input must be (N, 1, H, W), got {interlaced.shape}")
    if interlaced.shape[2] % 2:
        raise ParityError(f"Interlaced input must have an even height, got {interlaced.shape[2]} rows")

    def run(layers: List[ConvLayer], x: Tensor) -> Tensor:
        for layer in layers:
            x = layer(x)
        return x

    if net.shared:
        trunk = run(net.pathway("a")[:3], interlaced)
        return run(net.pathway("a")[3:], trunk), run(net.pathway("b")[3:], trunk)
    return run(net.pathway("a"), interlaced), run(net.pathway("b"), interlaced)


def deinterlace_frame(net: DeinterlaceNet, interlaced: Frame) -> Tuple[Frame, Frame]:
    """Reconstruct frames t and t+1 from a single-channel interlaced frame; known rows are copied."""
    if interlaced.channels != 1:
        raise ContractViolation(f"deinterlace_frame needs a single-channel frame, got {interlaced.channels} channels")
    x = Tensor(interlaced.data[None, None])
    even_t, odd_t1 = forward(net, x)
    frame_t = weave(Field(Parity.ODD, interlaced.rows(Parity.ODD)), Field(Parity.EVEN, even_t.data[0, 0]))
    frame_t1 = weave(Field(Parity.EVEN, interlaced.rows(Parity.EVEN)), Field(Parity.ODD, odd_t1.data[0, 0]))
    return frame_t, frame_t1


def flop_count(net: DeinterlaceNet, height: int, width: int, shared: Optional[bool] = None) -> int:
    """
    Multiply-accumulates of one forward pass on a height x width frame.

    With shared=False the count is that of two disjoint five-layer networks,
    each running its own trunk.
    """
    shared = net.shared if shared is None else shared

    def pathway_macs(layers: List[ConvLayer]) -> Tuple[int, int]:
        h, total, trunk = height, 0, 0
        for i, layer in enumerate(layers):
            total += layer.spec.macs(h, width)
            h = layer.spec.output_size(h, width)[0]
            if i == len(TRUNK) - 1:
                trunk = total
        return total, trunk

    total_a, trunk_a = pathway_macs(net.pathway("a"))
    total_b, trunk_b = pathway_macs(net.pathway("b"))
    if shared:
        return total_a + total_b - trunk_b
    return total_a + total_b


# ----------------------------------------------------------------------
# Serialization
# ----------------------------------------------------------------------

_FILE_HEADER = struct.Struct("<4sHHH")
_LAYER_INTS = struct.Struct("<6H2B")
_METADATA = struct.Struct("<Id")
_EXT_HEADER = struct.Struct("<4sI")


def save_weights(net: DeinterlaceNet, path: Union[str, Path],
                 extensions: Optional[Dict[str, bytes]] = None) -> Path:
    """
    Write the net (and optional tagged extension records) in the DINW format.

    ``extensions`` overrides the records already attached to ``net``.
    """
    records = dict(net.extensions)
    records.update(extensions or {})

    chunks = [_FILE_HEADER.pack(WEIGHTS_MAGIC, WEIGHTS_VERSION, FLAG_SHARED if net.shared else 0, len(net.layers))]
    for name, layer in net.layers.items():
        encoded = name.encode("ascii")
        s = layer.spec
        chunks.append(struct.pack("<B", len(encoded)) + encoded)
        chunks.append(_LAYER_INTS.pack(s.in_channels, s.out_channels, s.kernel_h, s.kernel_w, s.stride_h,
                                       s.stride_w, _PADDING_CODES[s.padding], _ACTIVATION_CODES[layer.activation]))
        chunks.append(layer.weight.data.astype("<f4").tobytes())
        chunks.append(layer.bias.data.astype("<f4").tobytes())
    chunks.append(_METADATA.pack(net.epochs_completed, net.final_loss))
    for tag, payload in records.items():
        tag_bytes = tag.encode("ascii")
        if len(tag_bytes) != 4:
            raise ContractViolation(f"Extension tags must be 4 ASCII characters, got {tag!r}")
        chunks.append(_EXT_HEADER.pack(tag_bytes, len(payload)) + payload)

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(b"".join(chunks))
    logger.info(f"Saved {len(net.layers)}-layer weights to {path}")
    return path


class _Cursor:
    def __init__(self, blob: bytes, path: Path):
        self.blob, self.path, self.pos = blob, path, 0

    def take(self, size: int, what: str) -> bytes:
        if self.pos + size > len(self.blob):
            raise TruncatedWeightsError(
                f"Truncated weights file {self.path}: {what} needs {size} bytes at offset {self.pos}, "
                f"{len(self.blob) - self.pos} left")
        chunk = self.blob[self.pos:self.pos + size]
        self.pos += size
        return chunk

    def unpack(self, fmt: struct.Struct, what: str) -> tuple:
        return fmt.unpack(self.take(fmt.size, what))

    @property
    def exhausted(self) -> bool:
        return self.pos >= len(self.blob)


def load_weights(path: Union[str, Path], arch: Optional[ArchitectureConfig] = None) -> DeinterlaceNet:
    """
    Read a DINW weights file and check it against the architecture.

    Args:
        path: Weights file
        arch: Expected kernel counts (defaults to the standard architecture);
              the sharing mode is taken from the file

    Raises:
        NotAWeightsFileError: If the magic bytes are wrong
        WeightsVersionError: If the version is unsupported
        WeightsShapeError: If a layer does not match ``arch``, naming the layer
        TruncatedWeightsError: If the file ends early
    """
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise WeightsFileError(f"Cannot read weights file {path}: {e}")

    cursor = _Cursor(blob, path)
    if len(blob) < 4 or blob[:4] != WEIGHTS_MAGIC:
        raise NotAWeightsFileError(f"{path} is not a weights file (magic {blob[:4]!r})")
    _, version, flags, count = cursor.unpack(_FILE_HEADER, "header")
    if version != WEIGHTS_VERSION:
        raise WeightsVersionError(f"Unsupported weights version {version} in {path} (expected {WEIGHTS_VERSION})")

    shared = bool(flags & FLAG_SHARED)
    expected = layer_specs(arch or ArchitectureConfig(), shared=shared)
    codes_padding = {v: k for k, v in _PADDING_CODES.items()}
    codes_activation = {v: k for k, v in _ACTIVATION_CODES.items()}

    layers = {}
    for index in range(count):
        (name_len,) = cursor.unpack(struct.Struct("<B"), f"layer {index} name length")
        name = cursor.take(name_len, f"layer {index} name").decode("ascii", errors="replace")
        cin, cout, kh, kw, sh, sw, pad_code, act_code = cursor.unpack(_LAYER_INTS, f"layer {name} spec")

        if name not in expected:
            raise WeightsShapeError(f"Unexpected layer {name} in {path}")
        want, activation = expected[name]
        got = (cout, cin, kh, kw, sh, sw)
        if got != want.weight_shape + (want.stride_h, want.stride_w):
            raise WeightsShapeError(
                f"Layer {name} has kernels {got[:4]} stride {got[4:]}, expected "
                f"{want.weight_shape} stride {(want.stride_h, want.stride_w)}")
        if pad_code not in codes_padding or codes_activation.get(act_code) != activation:
            raise WeightsShapeError(f"Layer {name} has unknown padding/activation codes ({pad_code}, {act_code})")

        spec = ConvSpec(cin, cout, kh, kw, sh, sw, codes_padding[pad_code])
        n_weight = cout * cin * kh * kw
        weight = np.frombuffer(cursor.take(4 * n_weight, f"layer {name} kernel"), dtype="<f4")
        bias = np.frombuffer(cursor.take(4 * cout, f"layer {name} bias"), dtype="<f4")
        layers[name] = ConvLayer(name, spec, Tensor(weight.reshape(spec.weight_shape).astype(np.float32)),
                                 Tensor(bias.astype(np.float32)), activation)

    missing = [n for n in expected if n not in layers]
    if missing:
        raise WeightsShapeError(f"{path} lacks layer(s) {', '.join(missing)}")

    epochs, final_loss = cursor.unpack(_METADATA, "training metadata")
    extensions = {}
    while not cursor.exhausted:
        tag, length = cursor.unpack(_EXT_HEADER, "extension header")
        extensions[tag.decode("ascii", errors="replace")] = cursor.take(length, f"extension {tag!r}")

    net = DeinterlaceNet({n: layers[n] for n in expected}, shared=shared, epochs_completed=epochs,
                         final_loss=final_loss, extensions=extensions)
    logger.info(f"Loaded {'shared' if shared else 'unshared'} weights from {path} ({epochs} epochs)")
    return net
