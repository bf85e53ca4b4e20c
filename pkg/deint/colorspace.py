"""
sRGB <-> CIE-Lab conversion under the D65 white point (2 degree observer).

Refs: http://en.wikipedia.org/wiki/SRGB
      http://en.wikipedia.org/wiki/Lab_color_space#CIELAB-CIEXYZ_conversions
"""

import numpy as np

from .frames import Frame

RGB_TO_XYZ = np.array([[0.4124, 0.3576, 0.1805],
                       [0.2126, 0.7152, 0.0722],
                       [0.0193, 0.1192, 0.9505]])
XYZ_TO_RGB = np.linalg.inv(RGB_TO_XYZ)

# D65 white is the image of RGB (1, 1, 1), so white maps to a = b = 0.
WHITE_D65 = RGB_TO_XYZ.sum(axis=1)

_DELTA = 6.0 / 29.0


def _srgb_to_linear(c: np.ndarray) -> np.ndarray:
    return np.where(c > 0.04045, ((c + 0.055) / 1.055) ** 2.4, c / 12.92)


def _linear_to_srgb(c: np.ndarray) -> np.ndarray:
    c = np.clip(c, 0.0, None)
    return np.where(c > 0.0031308, 1.055 * c ** (1.0 / 2.4) - 0.055, 12.92 * c)


def _f(t: np.ndarray) -> np.ndarray:
    return np.where(t > _DELTA ** 3, np.cbrt(t), t / (3 * _DELTA ** 2) + 4.0 / 29.0)


def _finv(t: np.ndarray) -> np.ndarray:
    return np.where(t > _DELTA, t ** 3, 3 * _DELTA ** 2 * (t - 4.0 / 29.0))


def rgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    """(..., 3) sRGB in [0, 1] -> (..., 3) Lab with L* in [0, 100]."""
    xyz = _srgb_to_linear(np.asarray(rgb, dtype=np.float64)) @ RGB_TO_XYZ.T
    fx, fy, fz = np.moveaxis(_f(xyz / WHITE_D65), -1, 0)
    return np.stack([116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)], axis=-1)


def lab_to_rgb(lab: np.ndarray) -> np.ndarray:
    """(..., 3) Lab -> (..., 3) sRGB clipped to [0, 1]."""
    lab = np.asarray(lab, dtype=np.float64)
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    xyz = _finv(np.stack([fx, fy, fz], axis=-1)) * WHITE_D65
    return np.clip(_linear_to_srgb(xyz @ XYZ_TO_RGB.T), 0.0, 1.0)


def rgb_to_L(frame: Frame) -> Frame:
    """Single-channel CIE L*, rescaled from [0, 100] to [0, 1]. Luminance frames pass through."""
    if frame.channels == 1:
        return frame
    return Frame(rgb_to_lab(frame.data)[..., 0] / 100.0)
