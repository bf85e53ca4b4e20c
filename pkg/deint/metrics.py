"""
Quality metrics (PSNR, SSIM, difference images), per-sequence quality
reports and the wall-clock timing harness.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import ndimage

from .colorspace import rgb_to_L
from .frames import Frame
from .tensor import ContractViolation
from .utils.system_info import pinned_to_single_core
from .utils.workers import parallel_map

logger = logging.getLogger(__name__)

PSNR_CAP_DB = 99.0

SSIM_SIGMA = 1.5
SSIM_WINDOW = 11
SSIM_K1 = 0.01
SSIM_K2 = 0.03
# gaussian_filter's kernel radius is int(truncate * sigma + 0.5); 3.5 * 1.5 gives radius 5, an 11-tap window.
_SSIM_TRUNCATE = 3.5

# Published per-frame seconds (GPU for the network, CPU for the rest) keyed by (width, height).
REFERENCE_SECONDS: Dict[Tuple[int, int], Dict[str, float]] = {
    (1920, 1080): {"ela": 0.6854, "bob_bicubic": 0.7068, "net": 0.0835, "net_unshared": 0.2520},
    (1024, 768): {"ela": 0.0676, "bob_bicubic": 0.2812, "net": 0.0301, "net_unshared": 0.0833},
    (720, 576): {"ela": 0.0317, "bob_bicubic": 0.1176, "net": 0.0204, "net_unshared": 0.0556},
    (720, 480): {"ela": 0.0241, "bob_bicubic": 0.1110, "net": 0.0137, "net_unshared": 0.0403},
}


def _pair(a, b) -> Tuple[np.ndarray, np.ndarray]:
    a = a.data if isinstance(a, Frame) else np.asarray(a)
    b = b.data if isinstance(b, Frame) else np.asarray(b)
    if a.shape != b.shape:
        raise ContractViolation(f"Metric inputs differ in shape: {a.shape} vs {b.shape}")
    return a.astype(np.float64), b.astype(np.float64)


def psnr(a, b) -> float:
    """10 * log10(1 / MSE) in dB for [0, 1] images, capped at 99 dB."""
    x, y = _pair(a, b)
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10(1.0 / mse))


def ssim(a, b) -> float:
    """
    Mean structural similarity over an 11x11 Gaussian window (sigma 1.5,
    K1 = 0.01, K2 = 0.03, dynamic range 1), excluding the 5-pixel border
    where the window does not fit.

    Raises:
        ContractViolation: If the inputs are multi-channel, differ in shape
            or are smaller than the window
    """
    x, y = _pair(a, b)
    if x.ndim != 2:
        raise ContractViolation(f"ssim needs single-channel images, got shape {x.shape}")
    if min(x.shape) < SSIM_WINDOW:
        raise ContractViolation(f"Image {x.shape} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    if np.array_equal(x, y):
        return 1.0

    def blur(z: np.ndarray) -> np.ndarray:
        return ndimage.gaussian_filter(z, sigma=SSIM_SIGMA, mode="reflect", truncate=_SSIM_TRUNCATE)

    c1, c2 = SSIM_K1 ** 2, SSIM_K2 ** 2
    mu_x, mu_y = blur(x), blur(y)
    mu_xy = mu_x * mu_y
    var_x = blur(x * x) - mu_x * mu_x
    var_y = blur(y * y) - mu_y * mu_y
    cov = blur(x * y) - mu_xy

    score = ((2 * mu_xy + c1) * (2 * cov + c2)) / ((mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2))
    border = (SSIM_WINDOW - 1) // 2
    return float(score[border:-border, border:-border].mean(dtype=np.float64))


def diff_image(a, b) -> Frame:
    """Pixel-wise |a - b|."""
    x, y = _pair(a, b)
    return Frame(np.clip(np.abs(x - y), 0.0, 1.0))


@dataclass
class QualityReport:
    method: str
    sequence: str
    psnr: List[float] = field(default_factory=list)
    ssim: List[float] = field(default_factory=list)

    @property
    def frames(self) -> int:
        return len(self.psnr)

    @property
    def mean_psnr(self) -> float:
        return float(np.mean(self.psnr)) if self.psnr else float("nan")

    @property
    def mean_ssim(self) -> float:
        return float(np.mean(self.ssim)) if self.ssim else float("nan")


@dataclass
class TimingReport:
    method: str
    resolution: Tuple[int, int]
    seconds: List[float]
    warmup: int
    macs: Optional[int] = None
    pinned: bool = False

    @property
    def mean_seconds(self) -> float:
        return float(np.mean(self.seconds))

    @property
    def label(self) -> str:
        return f"{self.resolution[0]}x{self.resolution[1]}"


def evaluate_sequence(predictions: Sequence[Frame], truths: Sequence[Frame], method: str, sequence: str,
                      threads: Optional[int] = None) -> QualityReport:
    """
    Per-frame PSNR and SSIM on the L channel, averaged over the sequence.

    Raises:
        ContractViolation: If the frame counts differ or a pair differs in shape
    """
    if len(predictions) != len(truths):
        raise ContractViolation(
            f"Sequence {sequence}: {len(predictions)} predicted frames vs {len(truths)} ground-truth frames")

    def score(pair: Tuple[Frame, Frame]) -> Tuple[float, float]:
        pred, truth = (rgb_to_L(f).data for f in pair)
        return psnr(pred, truth), ssim(pred, truth)

    scores = parallel_map(score, list(zip(predictions, truths)), threads)
    report = QualityReport(method, sequence, [p for p, _ in scores], [s for _, s in scores])
    logger.info(f"{method} on {sequence}: {report.mean_psnr:.2f} dB / {report.mean_ssim:.4f} "
                f"over {report.frames} frames")
    return report


def bench(method: str, run: Callable[[Frame], object], resolution: Tuple[int, int], frames: int = 50,
          warmup: int = 5, macs: Optional[int] = None, seed: int = 0) -> TimingReport:
    """
    Mean wall-clock seconds per frame of ``run`` on random single-channel
    frames of ``resolution`` (width, height), pinned to one core when the
    platform allows. Warmup calls are not timed.
    """
    if frames < 1 or warmup < 0:
        raise ContractViolation(f"bench needs frames >= 1 and warmup >= 0 (got {frames}, {warmup})")
    width, height = resolution
    frame = Frame(np.random.default_rng(seed).random((height, width), dtype=np.float32))

    seconds = []
    with pinned_to_single_core() as pinned:
        for _ in range(warmup):
            run(frame)
        for _ in range(frames):
            started = time.perf_counter()
            run(frame)
            seconds.append(time.perf_counter() - started)

    report = TimingReport(method, (width, height), seconds, warmup, macs, pinned)
    logger.info(f"{method} at {report.label}: {report.mean_seconds:.4f}s/frame over {frames} frames")
    return report


def quality_table(reports: Sequence[QualityReport]) -> Tuple[str, pd.DataFrame]:
    """
    Returns:
        An aligned text table (method rows, sequence columns, "PSNR/SSIM"
        cells) and the long-form frame ordered by sequence, then method
    """
    rows = pd.DataFrame([{
        "sequence": r.sequence,
        "method": r.method,
        "frames": r.frames,
        "psnr": r.mean_psnr,
        "ssim": r.mean_ssim,
    } for r in reports], columns=["sequence", "method", "frames", "psnr", "ssim"])
    rows = rows.sort_values(["sequence", "method"], kind="stable").reset_index(drop=True)
    if rows.empty:
        return "(no results)", rows

    cells = rows.assign(cell=[f"{p:.2f}/{s:.4f}" for p, s in zip(rows["psnr"], rows["ssim"])])
    grid = cells.pivot(index="method", columns="sequence", values="cell").fillna("-")
    grid.index.name = "PSNR/SSIM"
    grid.columns.name = None
    return grid.to_string(), rows


def frames_table(reports: Sequence[QualityReport]) -> pd.DataFrame:
    """One row per evaluated frame."""
    return pd.DataFrame([
        {"sequence": r.sequence, "method": r.method, "frame": i, "psnr": p, "ssim": s}
        for r in reports for i, (p, s) in enumerate(zip(r.psnr, r.ssim))
    ], columns=["sequence", "method", "frame", "psnr", "ssim"])


def timing_table(reports: Sequence[TimingReport]) -> Tuple[str, pd.DataFrame]:
    """
    Per-resolution timing rows with the published seconds alongside, plus the
    measured unshared/shared ratio next to the published one where both nets
    were timed.
    """
    rows = pd.DataFrame([{
        "resolution": r.label,
        "method": r.method,
        "seconds": r.mean_seconds,
        "frames": len(r.seconds),
        "macs": r.macs,
        "reference_seconds": REFERENCE_SECONDS.get(r.resolution, {}).get(r.method),
    } for r in reports], columns=["resolution", "method", "seconds", "frames", "macs", "reference_seconds"])
    if rows.empty:
        return "(no results)", rows

    lines = [rows.to_string(index=False)]
    by_key = {(r.resolution, r.method): r for r in reports}
    for resolution in dict.fromkeys(r.resolution for r in reports):
        shared, split = by_key.get((resolution, "net")), by_key.get((resolution, "net_unshared"))
        if shared is None or split is None:
            continue
        ratio = split.mean_seconds / shared.mean_seconds
        line = f"{shared.label}: unshared/shared time ratio {ratio:.2f}"
        reference = REFERENCE_SECONDS.get(resolution)
        if reference:
            line += (f" (published {reference['net_unshared']:.4f}/{reference['net']:.4f} = "
                     f"{reference['net_unshared'] / reference['net']:.2f})")
        if shared.macs and split.macs:
            line += f", MAC ratio {split.macs / shared.macs:.2f}"
        lines.append(line)
    return "\n".join(lines), rows
