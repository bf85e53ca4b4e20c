#!/usr/bin/env python3
"""
Frame image I/O for the deinterlacer.
Reads and writes PNG (8/16-bit, grey or RGB) and binary PPM/PGM with
extension and magic-byte format detection.
"""

import logging
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import png
from PIL import Image

from ..frames import Frame

logger = logging.getLogger(__name__)

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
PNM_MAGICS = (b"P5", b"P6")


class ImageImportError(Exception):
    """Raised when a frame image cannot be read or written"""
    pass


class FrameImporter:
    """
    Load frame images with automatic format detection and consistent
    conversion to float rasters in [0, 1]
    """

    SUPPORTED_FORMATS = {
        '.png': 'png',
        '.ppm': 'pnm',
        '.pgm': 'pnm',
        '.pnm': 'pnm',
    }

    def __init__(self, max_file_size_mb: int = 512):
        self.max_file_size_mb = max_file_size_mb
        self.max_file_size_bytes = max_file_size_mb * 1024 * 1024

    def validate_file(self, file_path: Union[str, Path]) -> bool:
        """
        Validate file before decoding

        Raises:
            ImageImportError: If the file is missing, empty, too large or of an unsupported type
        """
        file_path = Path(file_path)

        if not file_path.exists():
            raise ImageImportError(f"File does not exist: {file_path}")

        file_size = file_path.stat().st_size
        if file_size == 0:
            raise ImageImportError(f"File is empty: {file_path}")
        if file_size > self.max_file_size_bytes:
            raise ImageImportError(
                f"File too large: {file_size / (1024*1024):.1f}MB "
                f"(max allowed: {self.max_file_size_mb}MB)"
            )

        if self.detect_format(file_path) is None:
            supported_formats = ', '.join(self.SUPPORTED_FORMATS.keys())
            raise ImageImportError(
                f"Unsupported image format: {file_path.name}. "
                f"Supported formats: {supported_formats}"
            )

        return True

    @classmethod
    def detect_format(cls, file_path: Union[str, Path]) -> Optional[str]:
        """Detect format from the extension, falling back to magic bytes."""
        file_path = Path(file_path)
        detected = cls.SUPPORTED_FORMATS.get(file_path.suffix.lower())
        if detected:
            return detected

        try:
            with open(file_path, 'rb') as f:
                head = f.read(8)
        except OSError as e:
            logger.warning(f"Content detection failed for {file_path}: {e}")
            return None

        if head.startswith(PNG_MAGIC):
            detected = 'png'
        elif head[:2] in PNM_MAGICS:
            detected = 'pnm'
        if detected:
            logger.info(f"Content-based detection: {file_path.name} is {detected}")
        return detected

    @staticmethod
    def import_png(file_path: Union[str, Path]) -> np.ndarray:
        try:
            width, height, rows, info = png.Reader(filename=str(file_path)).asDirect()
            planes = info['planes']
            array = np.vstack([np.asarray(row, dtype=np.uint32) for row in rows])
        except (png.Error, OSError, ValueError) as e:
            raise ImageImportError(f"Error reading PNG {file_path}: {e}")

        array = array.reshape(height, width, planes).astype(np.float64)
        array /= float(2 ** info['bitdepth'] - 1)
        if info['alpha']:
            array = array[:, :, :-1]
        return array

    @staticmethod
    def import_pnm(file_path: Union[str, Path]) -> np.ndarray:
        try:
            with Image.open(file_path) as img:
                mode = img.mode
                array = np.asarray(img)
        except (OSError, ValueError) as e:
            raise ImageImportError(f"Error reading PPM/PGM {file_path}: {e}")

        if mode in ('L', 'RGB'):
            scale = 255.0
        elif mode.startswith('I'):
            scale = 65535.0
        else:
            raise ImageImportError(f"Unsupported PPM/PGM mode {mode} in {file_path}")
        return array.astype(np.float64) / scale

    def import_file(self, file_path: Union[str, Path]) -> Frame:
        """
        Auto-detect and decode an image into a Frame

        Raises:
            ImageImportError: If the file cannot be decoded
        """
        file_path = Path(file_path)
        self.validate_file(file_path)

        file_format = self.detect_format(file_path)
        if file_format == 'png':
            array = self.import_png(file_path)
        else:
            array = self.import_pnm(file_path)

        logger.debug(f"Read {file_format} frame {file_path.name}: {array.shape}")
        return Frame(array)


def read_frame(file_path: Union[str, Path]) -> Frame:
    return FrameImporter().import_file(file_path)


def write_frame(file_path: Union[str, Path], frame: Frame, bitdepth: int = 8) -> Path:
    """
    Write a frame as PNG (8 or 16-bit) or, for .ppm/.pgm paths, binary PNM.

    Raises:
        ImageImportError: If the frame cannot be encoded
    """
    file_path = Path(file_path)
    if bitdepth not in (8, 16):
        raise ImageImportError(f"Unsupported bit depth: {bitdepth}")

    maxval = 2 ** bitdepth - 1
    quantized = np.rint(frame.data.astype(np.float64) * maxval).astype(np.uint16 if bitdepth == 16 else np.uint8)
    file_path.parent.mkdir(parents=True, exist_ok=True)

    try:
        if file_path.suffix.lower() in ('.ppm', '.pgm', '.pnm'):
            if bitdepth != 8:
                raise ImageImportError("PPM/PGM output is written 8-bit only")
            Image.fromarray(quantized).save(file_path)
        else:
            greyscale = frame.channels == 1
            writer = png.Writer(width=frame.width, height=frame.height, greyscale=greyscale, bitdepth=bitdepth)
            with open(file_path, 'wb') as f:
                writer.write(f, quantized.reshape(frame.height, -1))
    except (png.Error, OSError, ValueError) as e:
        raise ImageImportError(f"Error writing {file_path}: {e}")

    return file_path


def list_frames(directory: Union[str, Path]) -> List[Path]:
    """Supported image files of a directory in lexicographic order."""
    directory = Path(directory)
    if not directory.is_dir():
        raise ImageImportError(f"Not a directory: {directory}")
    return sorted(p for p in directory.iterdir()
                  if p.is_file() and p.suffix.lower() in FrameImporter.SUPPORTED_FORMATS)
