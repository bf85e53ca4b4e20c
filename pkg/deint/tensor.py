"""
Dense tensors and the small set of differentiable operators the deinterlacing
network needs: same-padded 2-D convolution with a vertical stride, ReLU,
identity, elementwise arithmetic, reductions, total variation and row weaving.

Gradients are recorded on a tape of parent links while any input requires
them; ``backward`` walks the tape once in reverse topological order.
Inference with plain (non-trainable) inputs records nothing.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence, Union

import numpy as np

logger = logging.getLogger(__name__)

STORAGE_DTYPE = np.float32
ACCUM_DTYPE = np.float64

ArrayLike = Union["Tensor", np.ndarray, float, int]
BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class ContractViolation(Exception):
    """Raised when an operation receives arguments outside its contract"""
    pass


class NonFiniteError(Exception):
    """Raised when an operation receives or produces NaN or Inf"""
    pass


def _check_finite(op: str, array: np.ndarray) -> np.ndarray:
    if not np.isfinite(array).all():
        bad = int(array.size - np.count_nonzero(np.isfinite(array)))
        raise NonFiniteError(f"{op} produced {bad} non-finite value(s) in a tensor of shape {array.shape}")
    return array


class Tensor:
    """
    An N-dimensional array plus the bookkeeping needed for reverse-mode gradients.

    Images and feature maps are 4-D (batch, channels, height, width); bias
    vectors are 1-D and losses are 0-D scalars. Tensors are never mutated by
    operators, so read-only weights can be shared across inference workers.
    """

    __slots__ = ("data", "requires_grad", "grad", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None, *, _op: str = "leaf"):
        array = np.asarray(data, dtype=STORAGE_DTYPE if dtype is None else dtype)
        if array.ndim and 0 in array.shape:
            raise ContractViolation(f"Tensor extents must all be >= 1, got shape {array.shape}")
        self.data = _check_finite(_op, array)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.op = _op
        self._parents: tuple["Tensor", ...] = ()
        self._backward: Optional[BackwardFn] = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data, dtype=self.data.dtype)

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractViolation(f"item() needs a single value, got shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, op={self.op}, requires_grad={self.requires_grad})"

    def __add__(self, other: ArrayLike) -> "Tensor":
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return sub(as_tensor(other, like=self), self)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        return mul(self, other)

    __rmul__ = __mul__


def as_tensor(value: ArrayLike, like: Optional[Tensor] = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value), dtype=like.dtype if like is not None else None)


def _result(op: str, data: np.ndarray, parents: Sequence[Tensor], backward: BackwardFn) -> Tensor:
    out = Tensor(data, dtype=data.dtype, _op=op)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# ----------------------------------------------------------------------
# Elementwise arithmetic and reductions
# ----------------------------------------------------------------------

def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b, like=as_tensor(a))

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _result("add", a.data + b.data, (a, b), backward)


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b, like=as_tensor(a))

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _result("sub", a.data - b.data, (a, b), backward)


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b, like=as_tensor(a))

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _result("mul", a.data * b.data, (a, b), backward)


def square(a: Tensor) -> Tensor:
    def backward(g):
        return (2.0 * a.data * g,)

    return _result("square", a.data * a.data, (a,), backward)


def tensor_sum(a: Tensor) -> Tensor:
    """Sum of all elements, accumulated in 64-bit."""
    def backward(g):
        return (np.broadcast_to(g, a.shape).astype(a.dtype),)

    total = np.sum(a.data, dtype=ACCUM_DTYPE)
    return _result("sum", np.asarray(total, dtype=ACCUM_DTYPE), (a,), backward)


def mean(a: Tensor) -> Tensor:
    count = a.data.size

    def backward(g):
        return (np.broadcast_to(g / count, a.shape).astype(a.dtype),)

    total = np.sum(a.data, dtype=ACCUM_DTYPE) / count
    return _result("mean", np.asarray(total, dtype=ACCUM_DTYPE), (a,), backward)


def relu(a: Tensor) -> Tensor:
    """Elementwise max(0, x). The subgradient at 0 is 0."""
    mask = a.data > 0

    def backward(g):
        return (g * mask,)

    return _result("relu", np.where(mask, a.data, 0).astype(a.dtype), (a,), backward)


def identity(a: Tensor) -> Tensor:
    def backward(g):
        return (g,)

    return _result("identity", a.data, (a,), backward)


ACTIVATIONS: dict[str, Callable[[Tensor], Tensor]] = {
    "relu": relu,
    "identity": identity,
}


# ----------------------------------------------------------------------
# Convolution
# ----------------------------------------------------------------------

class Padding(str, Enum):
    ZERO = "zero"
    REPLICATE = "replicate"


@dataclass(frozen=True)
class ConvSpec:
    in_channels: int
    out_channels: int
    kernel_h: int
    kernel_w: int
    stride_h: int = 1
    stride_w: int = 1
    padding: Padding = Padding.REPLICATE

    def __post_init__(self):
        if min(self.in_channels, self.out_channels, self.kernel_h, self.kernel_w) < 1:
            raise ContractViolation(f"ConvSpec extents must be positive: {self}")
        if self.stride_h not in (1, 2):
            raise ContractViolation(f"stride_h must be 1 or 2, got {self.stride_h}")
        if self.stride_w != 1:
            raise ContractViolation(f"stride_w must be 1, got {self.stride_w}")
        object.__setattr__(self, "padding", Padding(self.padding))

    @property
    def weight_shape(self) -> tuple[int, int, int, int]:
        return (self.out_channels, self.in_channels, self.kernel_h, self.kernel_w)

    def output_size(self, height: int, width: int) -> tuple[int, int]:
        """Same padding: ceil(height / stride_h) rows, unchanged width."""
        return (height + self.stride_h - 1) // self.stride_h, width

    def macs(self, height: int, width: int) -> int:
        """Multiply-accumulates of one forward pass over a single image."""
        out_h, out_w = self.output_size(height, width)
        return out_h * out_w * self.kernel_h * self.kernel_w * self.in_channels * self.out_channels


def _pads(spec: ConvSpec) -> tuple[int, int, int, int]:
    top = (spec.kernel_h - 1) // 2
    left = (spec.kernel_w - 1) // 2
    return top, spec.kernel_h - 1 - top, left, spec.kernel_w - 1 - left


def _fold_replicate(gpad: np.ndarray, top: int, left: int, height: int, width: int) -> np.ndarray:
    """Route gradients of replicated border samples back to the edge pixels."""
    rows = gpad[:, :, top:top + height, :].copy()
    rows[:, :, 0, :] += gpad[:, :, :top, :].sum(axis=2)
    rows[:, :, -1, :] += gpad[:, :, top + height:, :].sum(axis=2)
    out = rows[:, :, :, left:left + width].copy()
    out[:, :, :, 0] += rows[:, :, :, :left].sum(axis=3)
    out[:, :, :, -1] += rows[:, :, :, left + width:].sum(axis=3)
    return out


def conv2d(input: Tensor, weights: Tensor, bias: Tensor, spec: ConvSpec) -> Tensor:
    """
    Same-padded 2-D convolution (cross-correlation) with vertical stride.

    With stride 2 the output samples padded rows 0, 2, 4, ... so output row i
    is centred on input row 2i.

    Args:
        input: (batch, in_channels, height, width)
        weights: (out_channels, in_channels, kernel_h, kernel_w)
        bias: (out_channels,)
        spec: Layer geometry and padding mode

    Returns:
        (batch, out_channels, ceil(height / stride_h), width)

    Raises:
        ContractViolation: If any shape disagrees with ``spec``
    """
    if input.data.ndim != 4 or input.shape[1] != spec.in_channels:
        raise ContractViolation(
            f"conv2d input shape {input.shape} does not match weights shape "
            f"{weights.shape} (expected {spec.in_channels} input channels)")
    if weights.shape != spec.weight_shape:
        raise ContractViolation(
            f"conv2d weights shape {weights.shape} does not match spec {spec.weight_shape} "
            f"for input shape {input.shape}")
    if bias.shape != (spec.out_channels,):
        raise ContractViolation(f"conv2d bias shape {bias.shape} does not match ({spec.out_channels},)")

    dtype = np.result_type(input.dtype, weights.dtype)
    x, w = input.data.astype(ACCUM_DTYPE, copy=False), weights.data.astype(ACCUM_DTYPE, copy=False)
    n, _, height, width = x.shape
    top, bottom, left, right = _pads(spec)
    mode = "edge" if spec.padding is Padding.REPLICATE else "constant"
    xpad = np.pad(x, ((0, 0), (0, 0), (top, bottom), (left, right)), mode=mode)

    s = spec.stride_h
    out_h, out_w = spec.output_size(height, width)
    row_span = s * (out_h - 1) + 1

    def window(ky: int, kx: int) -> np.ndarray:
        return xpad[:, :, ky:ky + row_span:s, kx:kx + out_w]

    # Products and sums stay in ACCUM_DTYPE; the result is rounded to storage once.
    acc = np.zeros((spec.out_channels, n, out_h, out_w), dtype=ACCUM_DTYPE)
    for ky in range(spec.kernel_h):
        for kx in range(spec.kernel_w):
            acc += np.tensordot(w[:, :, ky, kx], window(ky, kx), axes=([1], [1]))
    acc += bias.data.astype(ACCUM_DTYPE)[:, None, None, None]
    out = np.ascontiguousarray(acc.transpose(1, 0, 2, 3), dtype=dtype)

    def backward(g):
        g = g.astype(ACCUM_DTYPE, copy=False)
        grad_w = grad_x = grad_b = None
        if weights.requires_grad:
            grad_w = np.empty(spec.weight_shape, dtype=ACCUM_DTYPE)
            for ky in range(spec.kernel_h):
                for kx in range(spec.kernel_w):
                    grad_w[:, :, ky, kx] = np.tensordot(g, window(ky, kx), axes=([0, 2, 3], [0, 2, 3]))
            grad_w = grad_w.astype(weights.dtype)
        if bias.requires_grad:
            grad_b = g.sum(axis=(0, 2, 3)).astype(bias.dtype)
        if input.requires_grad:
            gpad = np.zeros(xpad.shape, dtype=ACCUM_DTYPE)
            for ky in range(spec.kernel_h):
                for kx in range(spec.kernel_w):
                    contrib = np.tensordot(g, w[:, :, ky, kx], axes=([1], [0]))
                    gpad[:, :, ky:ky + row_span:s, kx:kx + out_w] += contrib.transpose(0, 3, 1, 2)
            if spec.padding is Padding.REPLICATE:
                grad_x = _fold_replicate(gpad, top, left, height, width)
            else:
                grad_x = gpad[:, :, top:top + height, left:left + width]
            grad_x = grad_x.astype(input.dtype)
        return grad_x, grad_w, grad_b

    return _result("conv2d", out, (input, weights, bias), backward)


# ----------------------------------------------------------------------
# Image-specific operators
# ----------------------------------------------------------------------

def total_variation(image: Tensor) -> Tensor:
    """
    Anisotropic squared total variation: the sum over pixels of squared
    forward differences along both axes, summed over the batch.

    Raises:
        ContractViolation: If the image is not (batch, 1, height, width)
    """
    if image.data.ndim != 4 or image.shape[1] != 1:
        raise ContractViolation(f"total_variation needs a single-channel (N, 1, H, W) image, got {image.shape}")

    x = image.data.astype(ACCUM_DTYPE)
    dv = x[:, :, 1:, :] - x[:, :, :-1, :]
    dh = x[:, :, :, 1:] - x[:, :, :, :-1]
    value = np.sum(dv * dv) + np.sum(dh * dh)

    def backward(g):
        grad = np.zeros_like(x)
        grad[:, :, 1:, :] += 2.0 * dv
        grad[:, :, :-1, :] -= 2.0 * dv
        grad[:, :, :, 1:] += 2.0 * dh
        grad[:, :, :, :-1] -= 2.0 * dh
        return ((grad * g).astype(image.dtype),)

    return _result("total_variation", np.asarray(value, dtype=ACCUM_DTYPE), (image,), backward)


def weave_rows(known: Union[Tensor, np.ndarray], predicted: Tensor, predicted_parity: int) -> Tensor:
    """
    Interleave two half-height stacks into a full-height one.

    Rows ``predicted_parity::2`` come from ``predicted``; the others are copied
    from ``known``, which is treated as a constant and receives no gradient.
    """
    known_data = known.data if isinstance(known, Tensor) else np.asarray(known)
    if predicted_parity not in (0, 1):
        raise ContractViolation(f"predicted_parity must be 0 or 1, got {predicted_parity}")
    if known_data.ndim != 4 or known_data.shape != predicted.shape:
        raise ContractViolation(
            f"weave_rows needs equal (N, C, H/2, W) halves, got {known_data.shape} and {predicted.shape}")

    n, c, half, width = predicted.shape
    out = np.empty((n, c, 2 * half, width), dtype=predicted.dtype)
    out[:, :, predicted_parity::2, :] = predicted.data
    out[:, :, 1 - predicted_parity::2, :] = known_data

    def backward(g):
        return (np.ascontiguousarray(g[:, :, predicted_parity::2, :]),)

    return _result("weave_rows", out, (predicted,), backward)


# ----------------------------------------------------------------------
# Reverse pass
# ----------------------------------------------------------------------

def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> dict[Tensor, np.ndarray]:
    """
    Propagate gradients from a scalar loss to every trainable leaf.

    Returns:
        Mapping from each leaf tensor with ``requires_grad`` to its gradient,
        which is also stored on ``leaf.grad``

    Raises:
        ContractViolation: If ``loss`` is not a scalar
        NonFiniteError: If a gradient becomes NaN or Inf
    """
    if loss.data.ndim != 0:
        raise ContractViolation(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return {}

    grads: dict[int, np.ndarray] = {id(loss): np.ones((), dtype=ACCUM_DTYPE)}
    leaves: list[Tensor] = []
    for node in reversed(_topological_order(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = _check_finite(f"grad of {node.op}", np.asarray(g, dtype=node.dtype))
            leaves.append(node)
            continue
        for parent, parent_grad in zip(node._parents, node._backward(g)):
            if parent_grad is None or not parent.requires_grad:
                continue
            if id(parent) in grads:
                grads[id(parent)] = grads[id(parent)] + parent_grad
            else:
                grads[id(parent)] = parent_grad

    return {leaf: leaf.grad for leaf in leaves}
