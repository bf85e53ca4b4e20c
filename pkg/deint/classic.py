"""
Intra-field baselines: bob (linear and Catmull-Rom cubic vertical
interpolation), edge-based line averaging and plain weave.

Every method copies the known field's rows into its output untouched and only
synthesizes the rows of the missing parity. Multi-channel fields are processed
per channel.
"""

import logging
from enum import Enum
from typing import Callable, Dict, Tuple

import numpy as np

from .frames import FRAME_DTYPE, Field, Frame, split_fields

logger = logging.getLogger(__name__)

# Catmull-Rom weights at the midpoint between the two centre taps.
CUBIC_MIDPOINT_TAPS = np.array([-1.0, 9.0, 9.0, -1.0]) / 16.0

# ELA candidate order; argmin keeps the first minimum, so vertical wins ties.
ELA_VERTICAL, ELA_UPPER_LEFT, ELA_UPPER_RIGHT = 0, 1, 2


class BaselineKind(str, Enum):
    WEAVE = "weave"
    BOB_LINEAR = "bob_linear"
    BOB_BICUBIC = "bob_bicubic"
    ELA = "ela"


def _neighbour_rows(field: Field) -> Tuple[np.ndarray, np.ndarray]:
    """Field row indices directly above and below each missing row, clamped to the field."""
    rows = np.arange(field.height)
    above = rows - field.parity.offset
    return np.clip(above, 0, field.height - 1), np.clip(above + 1, 0, field.height - 1)


def _assemble(field: Field, missing: np.ndarray) -> Frame:
    out = np.empty((2 * field.height,) + field.data.shape[1:], dtype=FRAME_DTYPE)
    out[field.parity.offset::2] = field.data
    out[field.parity.opposite.offset::2] = missing
    return Frame(out)


def bob_linear(field: Field) -> Frame:
    """Average of the known rows above and below; edge rows repeat their neighbour."""
    above, below = _neighbour_rows(field)
    data = field.data.astype(np.float64)
    return _assemble(field, 0.5 * (data[above] + data[below]))


def bob_bicubic(field: Field) -> Frame:
    """Catmull-Rom cubic through the four nearest known rows, replicated at the borders."""
    start = np.arange(field.height) - field.parity.offset - 1
    data = field.data.astype(np.float64)
    missing = np.zeros(data.shape, dtype=np.float64)
    for tap, weight in enumerate(CUBIC_MIDPOINT_TAPS):
        missing += weight * data[np.clip(start + tap, 0, field.height - 1)]
    return _assemble(field, missing)


def _ela_candidates(field: Field) -> Tuple[np.ndarray, np.ndarray]:
    """(3, h, W, ...) absolute differences and averages of each direction pair."""
    above, below = _neighbour_rows(field)
    data = field.data.astype(np.float64)
    pad = [(0, 0), (1, 1)] + [(0, 0)] * (data.ndim - 2)
    a = np.pad(data[above], pad, mode="edge")
    b = np.pad(data[below], pad, mode="edge")
    centre, left, right = np.s_[:, 1:-1], np.s_[:, :-2], np.s_[:, 2:]
    pairs = [
        (a[centre], b[centre]),
        (a[left], b[right]),
        (a[right], b[left]),
    ]
    diffs = np.stack([np.abs(p - q) for p, q in pairs])
    means = np.stack([0.5 * (p + q) for p, q in pairs])
    return diffs, means


def ela_directions(field: Field) -> np.ndarray:
    """
    Chosen direction for every missing pixel: 0 vertical, 1 upper-left to
    lower-right, 2 upper-right to lower-left.
    """
    diffs, _ = _ela_candidates(field)
    return np.argmin(diffs, axis=0)


def ela(field: Field) -> Frame:
    """Edge-based line averaging over the three direction pairs of minimum absolute difference."""
    diffs, means = _ela_candidates(field)
    choice = np.argmin(diffs, axis=0)
    return _assemble(field, np.take_along_axis(means, choice[None], axis=0)[0])


SINGLE_FIELD_METHODS: Dict[BaselineKind, Callable[[Field], Frame]] = {
    BaselineKind.BOB_LINEAR: bob_linear,
    BaselineKind.BOB_BICUBIC: bob_bicubic,
    BaselineKind.ELA: ela,
}


def weave_baseline(interlaced: Frame) -> Tuple[Frame, Frame]:
    return interlaced, interlaced


def deinterlace_classic(interlaced: Frame, kind: BaselineKind) -> Tuple[Frame, Frame]:
    """
    Reconstruct frames t and t+1 from the odd and even field independently.

    Raises:
        ParityError: If the frame height is odd
    """
    kind = BaselineKind(kind)
    if kind is BaselineKind.WEAVE:
        return weave_baseline(interlaced)
    odd, even = split_fields(interlaced)
    method = SINGLE_FIELD_METHODS[kind]
    return method(odd), method(even)
