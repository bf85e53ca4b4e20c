#!/usr/bin/env python3
"""
Per-file validation of frame sequences.
Collects every problem of an input directory in one pass so commands can
report all diagnostics at once instead of failing on the first bad file.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from ..frames import Frame
from .image_io import FrameImporter, ImageImportError

logger = logging.getLogger(__name__)


class FrameValidator:
    """
    Validate frame images for interlacing: readable, even height and a
    single resolution across the sequence
    """

    def __init__(self, require_even_height: bool = True, importer: Optional[FrameImporter] = None):
        self.require_even_height = require_even_height
        self.importer = importer or FrameImporter()

    def validate_frame(self, file_path: Union[str, Path],
                       expected_shape: Optional[tuple] = None) -> Dict[str, Any]:
        """
        Decode and check one frame.

        Returns:
            Dictionary with 'valid': bool, 'frame': Frame or None, 'path', 'errors': list, 'warnings': list
        """
        file_path = Path(file_path)
        result = {
            'path': str(file_path),
            'valid': True,
            'frame': None,
            'errors': [],
            'warnings': []
        }

        try:
            frame = self.importer.import_file(file_path)
        except ImageImportError as e:
            result['valid'] = False
            result['errors'].append(f"Unreadable frame: {e}")
            return result

        if self.require_even_height and frame.height % 2:
            result['valid'] = False
            result['errors'].append(f"Odd frame height {frame.height} (interlacing needs an even number of rows)")

        if frame.width % 2:
            result['warnings'].append(f"Odd frame width {frame.width}")

        if expected_shape is not None and frame.data.shape != expected_shape:
            result['valid'] = False
            result['errors'].append(
                f"Frame shape {frame.data.shape} differs from the sequence shape {expected_shape}")

        if result['valid']:
            result['frame'] = frame
        return result

    def validate_batch(self, paths: List[Union[str, Path]]) -> Dict[str, Any]:
        """
        Validate every frame of a sequence against the first readable one.

        Returns:
            Dictionary with validation statistics, per-file results and the decoded frames
        """
        results = []
        expected_shape = None
        valid_count = 0
        warning_count = 0

        for i, path in enumerate(paths):
            result = self.validate_frame(path, expected_shape)
            result['index'] = i
            if expected_shape is None and result['frame'] is not None:
                expected_shape = result['frame'].data.shape
            results.append(result)

            if result['valid']:
                valid_count += 1
            warning_count += len(result['warnings'])

        summary_errors = [] if paths else ['No frames found']

        return {
            'valid': bool(paths) and valid_count == len(paths),
            'total_count': len(paths),
            'valid_count': valid_count,
            'invalid_count': len(paths) - valid_count,
            'warning_count': warning_count,
            'results': results,
            'frames': [r['frame'] for r in results],
            'summary_errors': summary_errors,
        }

    @staticmethod
    def get_validation_summary(batch_result: Dict[str, Any]) -> str:
        """Generate a human-readable validation summary"""
        if batch_result['total_count'] == 0:
            return "❌ No frames to validate"

        summary_parts = []
        if batch_result['valid']:
            summary_parts.append(f"✅ All {batch_result['total_count']} frames are valid")
        else:
            summary_parts.append(f"❌ {batch_result['invalid_count']}/{batch_result['total_count']} frames invalid")

        if batch_result['warning_count'] > 0:
            summary_parts.append(f"⚠️ {batch_result['warning_count']} warnings found")

        for result in batch_result['results']:
            for error in result['errors']:
                summary_parts.append(f"🔸 {Path(result['path']).name}: {error}")

        return "\n".join(summary_parts)


def validate_sequence(paths: List[Union[str, Path]], require_even_height: bool = True) -> Dict[str, Any]:
    """Quick validation of a frame sequence"""
    batch = FrameValidator(require_even_height).validate_batch(paths)
    for result in batch['results']:
        for error in result['errors']:
            logger.error(f"{result['path']}: {error}")
        for warning in result['warnings']:
            logger.warning(f"{result['path']}: {warning}")
    return batch


def frames_or_none(batch_result: Dict[str, Any]) -> Optional[List[Frame]]:
    """The decoded frames when every file validated, else None."""
    return batch_result['frames'] if batch_result['valid'] else None
