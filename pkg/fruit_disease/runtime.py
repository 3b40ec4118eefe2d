"""
Runtime utilities for the fruit disease pipeline.
Provides lazy loading of heavy modules, stage timing and an ordered worker pool.
"""

import time
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, Iterable, List, Optional, TypeVar

T = TypeVar("T")
R = TypeVar("R")


class StageTimer:
    """Measures and logs the duration of pipeline stages."""

    def __init__(self) -> None:
        self.start_time = time.perf_counter()
        self.checkpoints: Dict[str, float] = {}

    def checkpoint(self, name: str) -> None:
        """Record a checkpoint."""
        elapsed = time.perf_counter() - self.start_time
        self.checkpoints[name] = elapsed
        logging.info("Stage checkpoint '%s': %.3fs", name, elapsed)

    def total_time(self) -> float:
        return time.perf_counter() - self.start_time

    def log_summary(self) -> None:
        """Log a summary of all stage timings."""
        total = self.total_time()
        logging.info("=== Stage Timing Summary ===")
        logging.info("Total time: %.3fs", total)
        for name, elapsed in self.checkpoints.items():
            percentage = (elapsed / total) * 100 if total > 0 else 0.0
            logging.info("  %s: %.3fs (%.1f%%)", name, elapsed, percentage)


class LazyImporter:
    """Lazy loading utility for heavy modules."""

    def __init__(self) -> None:
        self._modules: Dict[str, Any] = {}

    def get_cv2(self) -> Any:
        """Lazy load OpenCV."""
        if 'cv2' not in self._modules:
            logging.debug("Lazy loading cv2...")
            import cv2
            self._modules['cv2'] = cv2
        return self._modules['cv2']

    def get_pil(self) -> Any:
        """Lazy load PIL Image."""
        if 'PIL' not in self._modules:
            logging.debug("Lazy loading PIL...")
            from PIL import Image
            self._modules['PIL'] = Image
        return self._modules['PIL']


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None) -> List[R]:
    """
    Apply fn to every item, in parallel when threads > 1.
    Results are returned in input order whatever the completion order.
    """
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as executor:
        return list(executor.map(fn, items))


lazy_importer = LazyImporter()
