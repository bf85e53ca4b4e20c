"""
Training-data factory: pairs progressive frames, synthesizes interlaced
frames, cuts parity-preserving patch triplets from the L channel, splits
train/validation and packs everything into a DIPT archive so training never
re-reads image files.
"""

import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple, TypeVar, Union

import numpy as np
from PIL import Image

from .colorspace import rgb_to_L
from .config import DataConfig
from .frames import Frame, Parity, ParityError, interlace
from .tensor import ContractViolation
from .utils.workers import parallel_map

logger = logging.getLogger(__name__)

ARCHIVE_MAGIC = b"DIPT"
ARCHIVE_VERSION = 1
_HEADER = struct.Struct("<4sHHHI")

T = TypeVar("T")


class DatasetError(Exception):
    """Raised when a dataset cannot be assembled from the given inputs"""
    pass


class ArchiveError(Exception):
    """Raised when a patch archive is malformed"""
    pass


@dataclass
class PatchTriplet:
    """
    A P x P interlaced input patch with its two (P/2) x P target half-patches:
    the even rows of the frame-t patch and the odd rows of the frame-(t+1) patch.
    """
    input_patch: np.ndarray
    target_even_t: np.ndarray
    target_odd_t1: np.ndarray
    source_id: int
    origin: Tuple[int, int]

    @property
    def size(self) -> int:
        return self.input_patch.shape[0]


def rescale(frame: Frame, width: int, height: int) -> Frame:
    """Bilinear resampling of every channel to width x height."""
    if (frame.width, frame.height) == (width, height):
        return frame
    planes = frame.data[:, :, None] if frame.channels == 1 else frame.data
    resized = [
        np.asarray(Image.fromarray(np.ascontiguousarray(planes[:, :, c]), mode="F")
                   .resize((width, height), Image.BILINEAR))
        for c in range(planes.shape[2])
    ]
    return Frame(np.stack(resized, axis=-1))


def pair_frames(items: Sequence[T]) -> List[Tuple[T, T]]:
    """Consecutive pairs (0, 1), (2, 3), ... so each frame is used at most once."""
    if len(items) % 2:
        logger.warning(f"Odd number of frames ({len(items)}); the last frame is not paired")
    return [(items[i], items[i + 1]) for i in range(0, len(items) - 1, 2)]


def extract_patches(interlaced: Frame, frame_t: Frame, frame_t1: Frame,
                    patch: int = 64, stride: int = 64, source_id: int = 0) -> List[PatchTriplet]:
    """
    Cut aligned patch triplets on a regular grid.

    Patch origins are multiples of ``stride``; an even stride keeps every
    patch's row parity equal to its source rows.

    Raises:
        ContractViolation: If the frames differ in shape or are smaller than a patch
        ParityError: If the patch size or stride is odd
    """
    if patch % 2 or stride % 2:
        raise ParityError(f"Patch size and stride must be even to keep parity (got {patch}, {stride})")
    shapes = {interlaced.data.shape, frame_t.data.shape, frame_t1.data.shape}
    if len(shapes) != 1:
        raise ContractViolation(f"Triplet frames differ in shape: {sorted(shapes)}")
    if interlaced.height < patch or interlaced.width < patch:
        raise ContractViolation(
            f"Frame {interlaced.width}x{interlaced.height} is smaller than the {patch}x{patch} patch")

    frames = [rgb_to_L(f).data for f in (interlaced, frame_t, frame_t1)]
    triplets = []
    for row in range(0, interlaced.height - patch + 1, stride):
        for col in range(0, interlaced.width - patch + 1, stride):
            window = np.s_[row:row + patch, col:col + patch]
            i_p, t_p, t1_p = (f[window] for f in frames)
            triplets.append(PatchTriplet(
                input_patch=i_p.copy(),
                target_even_t=t_p[Parity.EVEN.offset::2].copy(),
                target_odd_t1=t1_p[Parity.ODD.offset::2].copy(),
                source_id=source_id,
                origin=(row, col),
            ))
    return triplets


def build_patch_set(pairs: Sequence[Tuple[Frame, Frame]], config: DataConfig | None = None,
                    threads: int | None = None) -> List[PatchTriplet]:
    """
    Rescale each progressive pair, interlace it and cut patch triplets.

    Pairs are processed in parallel; the result is ordered by source id, then
    patch origin.
    """
    config = config or DataConfig()
    if not pairs:
        raise DatasetError("No frame pairs to build patches from")

    def one(indexed):
        source_id, (frame_t, frame_t1) = indexed
        if config.rescale:
            frame_t = rescale(frame_t, config.rescale, config.rescale)
            frame_t1 = rescale(frame_t1, config.rescale, config.rescale)
        frame_t, frame_t1 = rgb_to_L(frame_t), rgb_to_L(frame_t1)
        return extract_patches(interlace(frame_t, frame_t1), frame_t, frame_t1,
                               config.patch_size, config.patch_stride, source_id)

    per_pair = parallel_map(one, list(enumerate(pairs)), threads)
    triplets = [t for chunk in per_pair for t in chunk]
    triplets.sort(key=lambda t: (t.source_id, t.origin))
    logger.info(f"Built {len(triplets)} patch triplets from {len(pairs)} frame pairs")
    return triplets


def split_dataset(triplets: Sequence[T], fraction: float = 0.8, seed: int = 0) -> Tuple[List[T], List[T]]:
    """
    Seeded shuffle, then a disjoint exhaustive train/validation split.

    The validation side gets ceil((1 - fraction) * n) items and training the
    rest, so 9,792 triplets split 7,833 / 1,959.
    """
    if not triplets:
        raise DatasetError("Cannot split an empty dataset")
    if not 0.0 < fraction < 1.0:
        raise DatasetError(f"Split fraction must lie in (0, 1), got {fraction}")

    n = len(triplets)
    n_val = min(n - 1, math.ceil(round((1.0 - fraction) * n, 9))) if n > 1 else 0
    order = np.random.default_rng(seed).permutation(n)
    train = [triplets[i] for i in order[: n - n_val]]
    validation = [triplets[i] for i in order[n - n_val:]]
    return train, validation


def _record_dtype(patch: int) -> np.dtype:
    half = patch // 2
    return np.dtype([
        ("source", "<u4"),
        ("row", "<u4"),
        ("col", "<u4"),
        ("input", "<f4", (patch, patch)),
        ("even_t", "<f4", (half, patch)),
        ("odd_t1", "<f4", (half, patch)),
    ])


def write_archive(path: Union[str, Path], triplets: Sequence[PatchTriplet]) -> Path:
    """Pack patch triplets into a DIPT archive."""
    if not triplets:
        raise DatasetError("Refusing to write an empty patch archive")
    patch = triplets[0].size
    if any(t.size != patch for t in triplets):
        raise DatasetError("All patches of an archive must share one size")

    records = np.zeros(len(triplets), dtype=_record_dtype(patch))
    for i, t in enumerate(triplets):
        records[i] = (t.source_id, t.origin[0], t.origin[1], t.input_patch, t.target_even_t, t.target_odd_t1)

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(ARCHIVE_MAGIC, ARCHIVE_VERSION, patch, patch, len(triplets)))
        f.write(records.tobytes())
    logger.info(f"Wrote {len(triplets)} patch triplets to {path}")
    return path


def read_archive(path: Union[str, Path]) -> List[PatchTriplet]:
    """
    Load every record of a DIPT archive.

    Raises:
        ArchiveError: On a wrong magic, unknown version or truncated payload
    """
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise ArchiveError(f"Cannot read patch archive {path}: {e}")

    if len(blob) < _HEADER.size:
        raise ArchiveError(f"{path} is not a patch archive (too short)")
    magic, version, height, width, count = _HEADER.unpack_from(blob)
    if magic != ARCHIVE_MAGIC:
        raise ArchiveError(f"{path} is not a patch archive (magic {magic!r})")
    if version != ARCHIVE_VERSION:
        raise ArchiveError(f"Unsupported patch archive version {version} in {path}")
    if height != width or height % 2:
        raise ArchiveError(f"Unsupported patch geometry {width}x{height} in {path}")

    dtype = _record_dtype(height)
    expected = _HEADER.size + count * dtype.itemsize
    if len(blob) != expected:
        raise ArchiveError(f"Truncated patch archive {path}: {len(blob)} bytes, expected {expected}")

    records = np.frombuffer(blob, dtype=dtype, offset=_HEADER.size, count=count)
    return [
        PatchTriplet(
            input_patch=r["input"].astype(np.float32),
            target_even_t=r["even_t"].astype(np.float32),
            target_odd_t1=r["odd_t1"].astype(np.float32),
            source_id=int(r["source"]),
            origin=(int(r["row"]), int(r["col"])),
        )
        for r in records
    ]


def stack_batch(triplets: Sequence[PatchTriplet]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(N, 1, P, P) inputs and two (N, 1, P/2, P) target stacks."""
    inputs = np.stack([t.input_patch for t in triplets])[:, None]
    even_t = np.stack([t.target_even_t for t in triplets])[:, None]
    odd_t1 = np.stack([t.target_odd_t1 for t in triplets])[:, None]
    return inputs, even_t, odd_t1
