"""
Frame-level deinterlacing for every method, including colour handling.

The network sees only CIE L*. For RGB input the a*/b* channels of each
output frame are filled by cubic bob from the matching field, the frame is
converted back to RGB and the known rows are copied from the input again, so
the retained field is bit-exact in RGB as well.
"""

import logging
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .classic import BaselineKind, bob_bicubic, deinterlace_classic
from .colorspace import lab_to_rgb, rgb_to_lab
from .frames import Field, Frame, Parity
from .model import DeinterlaceNet, deinterlace_frame
from .utils.workers import parallel_map

logger = logging.getLogger(__name__)

NET_METHOD = "net"
METHODS = (NET_METHOD,) + tuple(kind.value for kind in BaselineKind)

# a*/b* are shifted into [0, 1] while they pass through Frame-based interpolation.
_CHROMA_OFFSET = 128.0
_CHROMA_SCALE = 256.0

Deinterlacer = Callable[[Frame], Tuple[Frame, Frame]]


class PipelineError(Exception):
    """Raised when a deinterlacing method cannot be set up"""
    pass


def _bob_chroma(channel: np.ndarray, parity: Parity) -> np.ndarray:
    field = Field(parity, (channel[parity.offset::2] + _CHROMA_OFFSET) / _CHROMA_SCALE)
    return bob_bicubic(field).data.astype(np.float64) * _CHROMA_SCALE - _CHROMA_OFFSET


def deinterlace_with_net(net: DeinterlaceNet, interlaced: Frame) -> Tuple[Frame, Frame]:
    """Network reconstruction of frames t and t+1 for luminance or RGB input."""
    if interlaced.channels == 1:
        return deinterlace_frame(net, interlaced)

    lab = rgb_to_lab(interlaced.data)
    luma_t, luma_t1 = deinterlace_frame(net, Frame(lab[..., 0] / 100.0))

    outputs = []
    for luma, known in ((luma_t, Parity.ODD), (luma_t1, Parity.EVEN)):
        chroma = [_bob_chroma(lab[..., c], known) for c in (1, 2)]
        rgb = lab_to_rgb(np.stack([luma.data.astype(np.float64) * 100.0] + chroma, axis=-1)).astype(np.float32)
        rgb[known.offset::2] = interlaced.rows(known)
        outputs.append(Frame(rgb))
    return outputs[0], outputs[1]


def make_deinterlacer(method: str, net: Optional[DeinterlaceNet] = None) -> Deinterlacer:
    """
    Raises:
        PipelineError: For an unknown method or the net method without weights
    """
    if method == NET_METHOD:
        if net is None:
            raise PipelineError("The net method needs a weights file")
        return lambda frame: deinterlace_with_net(net, frame)
    try:
        kind = BaselineKind(method)
    except ValueError:
        raise PipelineError(f"Unknown method {method!r}; choose one of {', '.join(METHODS)}")
    return lambda frame: deinterlace_classic(frame, kind)


def deinterlace_sequence(frames: Sequence[Frame], deinterlacer: Deinterlacer,
                         threads: Optional[int] = None) -> List[Tuple[Frame, Frame]]:
    """Deinterlace independent frames in parallel; output order follows input order."""
    return parallel_map(deinterlacer, frames, threads)


def verify_known_rows(interlaced: Frame, frame_t: Frame, frame_t1: Frame) -> List[str]:
    """Problems found when the retained fields are not copied bit-exact (empty when all is well)."""
    problems = []
    for name, frame, parity in (("frame t", frame_t, Parity.ODD), ("frame t+1", frame_t1, Parity.EVEN)):
        if frame.data.shape != interlaced.data.shape:
            problems.append(f"{name} has shape {frame.data.shape}, input is {interlaced.data.shape}")
            continue
        mismatched = np.flatnonzero(np.any(
            (frame.rows(parity) != interlaced.rows(parity)).reshape(interlaced.height // 2, -1), axis=1))
        if mismatched.size:
            rows = [int(parity.offset + 2 * i) for i in mismatched[:5]]
            problems.append(f"{name} differs from the input on {mismatched.size} {parity.value} row(s), e.g. {rows}")
    return problems
