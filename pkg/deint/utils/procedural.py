"""
Seeded procedural clips used as a hermetic corpus: static scenes, moving
rectangles, scrolling textures, very fast motion and single-scanline stripes.
"""

import logging
from pathlib import Path
from typing import Callable, Dict, List, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage

from ..frames import Frame
from .image_io import write_frame

logger = logging.getLogger(__name__)

CLIP_KINDS = ("static", "moving_rect", "scroll", "fast_motion", "thin_stripes")


def frame_name(index: int, suffix: str = "") -> str:
    return f"{index:06d}{suffix}.png"


def _texture(rng: np.random.Generator, height: int, width: int, channels: int, sigma: float = 3.0) -> np.ndarray:
    """Smooth random texture in [0.1, 0.9], wrapped so it can scroll seamlessly."""
    noise = rng.random((height, width, channels))
    smooth = ndimage.gaussian_filter(noise, sigma=(sigma, sigma, 0), mode="wrap")
    low, high = smooth.min(), smooth.max()
    return 0.1 + 0.8 * (smooth - low) / max(high - low, 1e-12)


def _finish(frames: List[np.ndarray], channels: int) -> List[Frame]:
    return [Frame(f[:, :, 0] if channels == 1 else f) for f in frames]


def _static(rng, height, width, channels, count):
    scene = _texture(rng, height, width, channels)
    return [scene.copy() for _ in range(count)]


def _rect_over(rng, height, width, channels, count, speed):
    background = _texture(rng, height, width, channels, sigma=6.0)
    colour = rng.uniform(0.0, 1.0, channels)
    rect_h, rect_w = max(2, height // 4), max(2, width // 4)
    top = int(rng.integers(0, height - rect_h + 1))
    frames = []
    for t in range(count):
        frame = background.copy()
        left = (int(speed * t)) % max(1, width - rect_w)
        frame[top:top + rect_h, left:left + rect_w] = colour
        frames.append(frame)
    return frames


def _moving_rect(rng, height, width, channels, count):
    return _rect_over(rng, height, width, channels, count, speed=2)


def _fast_motion(rng, height, width, channels, count):
    return _rect_over(rng, height, width, channels, count, speed=max(8, width // 6))


def _scroll(rng, height, width, channels, count):
    texture = _texture(rng, height, width, channels, sigma=2.0)
    return [np.roll(texture, shift=(t, 2 * t), axis=(0, 1)) for t in range(count)]


def _thin_stripes(rng, height, width, channels, count):
    frame = _texture(rng, height, width, channels, sigma=8.0)
    rows = rng.choice(np.arange(2, height - 2), size=max(1, height // 16), replace=False)
    frame[rows] = 0.95
    return [frame.copy() for _ in range(count)]


_GENERATORS: Dict[str, Callable] = {
    "static": _static,
    "moving_rect": _moving_rect,
    "scroll": _scroll,
    "fast_motion": _fast_motion,
    "thin_stripes": _thin_stripes,
}


def generate_clip(kind: str, height: int = 64, width: int = 64, frames: int = 6,
                  seed: int = 0, color: bool = False) -> List[Frame]:
    """
    Progressive frames of one synthetic clip.

    Raises:
        ValueError: For an unknown clip kind or a frame smaller than 8x8
    """
    if kind not in _GENERATORS:
        raise ValueError(f"Unknown clip kind {kind!r}; choose from {', '.join(CLIP_KINDS)}")
    if height < 8 or width < 8:
        raise ValueError(f"Clips need at least 8x8 pixels, got {width}x{height}")
    rng = np.random.default_rng([seed, CLIP_KINDS.index(kind)])
    channels = 3 if color else 1
    return _finish(_GENERATORS[kind](rng, height, width, channels, frames), channels)


def write_corpus(out_dir: Union[str, Path], clips: int = len(CLIP_KINDS), size: Tuple[int, int] = (64, 64),
                 frames: int = 6, seed: int = 0, color: bool = False,
                 kinds: Sequence[str] = CLIP_KINDS) -> List[Path]:
    """
    Write ``clips`` clips, cycling through ``kinds``, as numbered PNG sequences
    in ``out_dir/<kind>_<n>/``.

    Returns:
        The clip directories in creation order
    """
    out_dir = Path(out_dir)
    height, width = size
    written = []
    for n in range(clips):
        kind = kinds[n % len(kinds)]
        clip_dir = out_dir / f"{kind}_{n:02d}"
        for index, frame in enumerate(generate_clip(kind, height, width, frames, seed + n, color)):
            write_frame(clip_dir / frame_name(index), frame)
        written.append(clip_dir)
    logger.info(f"Wrote {clips} procedural clips of {frames} frames ({width}x{height}) to {out_dir}")
    return written
