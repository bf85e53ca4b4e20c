"""
Frames, fields and scanline parity.

Parity convention used everywhere in this package: the "odd" field holds the
1-indexed odd scanlines, i.e. 0-indexed rows 0, 2, 4, ...; the "even" field
holds 0-indexed rows 1, 3, 5, ... An interlaced frame carries frame t on its
odd field and frame t+1 on its even field.
"""

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .tensor import ContractViolation

logger = logging.getLogger(__name__)

FRAME_DTYPE = np.float32


class ParityError(ContractViolation):
    """Raised when scanline parity rules are violated (odd heights, same-parity fields)"""
    pass


class Parity(str, Enum):
    ODD = "odd"
    EVEN = "even"

    @property
    def offset(self) -> int:
        """0-indexed first row of this parity."""
        return 0 if self is Parity.ODD else 1

    @property
    def opposite(self) -> "Parity":
        return Parity.EVEN if self is Parity.ODD else Parity.ODD


def _as_raster(data) -> np.ndarray:
    array = np.asarray(data, dtype=FRAME_DTYPE)
    if array.ndim == 3 and array.shape[2] == 1:
        array = array[:, :, 0]
    if array.ndim not in (2, 3) or (array.ndim == 3 and array.shape[2] != 3):
        raise ContractViolation(f"Expected an (H, W) or (H, W, 3) raster, got shape {array.shape}")
    if 0 in array.shape:
        raise ContractViolation(f"Raster extents must be positive, got shape {array.shape}")
    return array


@dataclass
class Frame:
    """A full-height raster with values in [0, 1]; 1 (luminance) or 3 (RGB) channels."""
    data: np.ndarray

    def __post_init__(self):
        array = _as_raster(self.data)
        if not np.isfinite(array).all():
            raise ContractViolation("Frame values must be finite")
        if array.min() < 0.0 or array.max() > 1.0:
            array = np.clip(array, 0.0, 1.0)
        self.data = array

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else self.data.shape[2]

    def rows(self, parity: Parity) -> np.ndarray:
        return self.data[parity.offset::2]


@dataclass
class Field:
    """Every other scanline of a frame, tagged with the parity it came from."""
    parity: Parity
    data: np.ndarray

    def __post_init__(self):
        self.parity = Parity(self.parity)
        self.data = _as_raster(self.data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def _require_even_height(frame: Frame, what: str) -> None:
    if frame.height % 2:
        raise ParityError(f"{what} must have an even height, got {frame.height} rows")


def split_fields(frame: Frame) -> tuple[Field, Field]:
    """Decompose a frame into its (odd, even) fields."""
    _require_even_height(frame, "Frame")
    return (Field(Parity.ODD, frame.rows(Parity.ODD).copy()),
            Field(Parity.EVEN, frame.rows(Parity.EVEN).copy()))


def weave(known_field: Field, predicted_field: Field) -> Frame:
    """
    Interleave two opposite-parity fields into a full frame.

    Rows of the known field's parity are copied bit-exact; the remaining rows
    come from the predicted field.

    Raises:
        ParityError: If both fields have the same parity
        ContractViolation: If the fields differ in shape
    """
    if known_field.parity is predicted_field.parity:
        raise ParityError(f"Cannot weave two {known_field.parity.value} fields")
    if known_field.data.shape != predicted_field.data.shape:
        raise ContractViolation(
            f"Field shapes differ: known {known_field.data.shape} vs predicted {predicted_field.data.shape}")

    shape = (2 * known_field.height,) + known_field.data.shape[1:]
    out = np.empty(shape, dtype=FRAME_DTYPE)
    out[known_field.parity.offset::2] = known_field.data
    out[predicted_field.parity.offset::2] = predicted_field.data
    return Frame(out)


def interlace(frame_t: Frame, frame_t1: Frame) -> Frame:
    """
    Synthesize an interlaced frame: the odd field comes from ``frame_t`` and
    the even field from ``frame_t1``.

    Raises:
        ContractViolation: If the frames differ in dimensions
        ParityError: If the height is odd
    """
    if frame_t.data.shape != frame_t1.data.shape:
        raise ContractViolation(f"Frame dimensions differ: {frame_t.data.shape} vs {frame_t1.data.shape}")
    _require_even_height(frame_t, "Interlacing input")

    out = frame_t.data.copy()
    out[Parity.EVEN.offset::2] = frame_t1.rows(Parity.EVEN)
    return Frame(out)
