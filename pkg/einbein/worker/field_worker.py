"""
Field Worker

Evaluates the thimble-sum field on every point of a grid. Points run in a thread
pool; neighbouring points in the same zone share one decomposition through the
topology cache, so the expensive integer fit runs once per zone.

Usage:
    Called by einbein.core.quadrature.field_grid and by the `field` CLI command.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

from ..core.critical import Region
from ..core.quadrature import FieldSample, TopologyCache, safe_field_at
from ..schemas.objects import GridSpec, RefractionModel, SourceSpec
from ..utils.config import get_settings

logger = logging.getLogger(__name__)


class FieldWorker:
    """
    Per-point field pipeline over a grid.
    Failures at single points are recorded as diagnostics and never stop the run.
    """

    def __init__(self, model: RefractionModel, source: SourceSpec, k0: float,
                 region: Optional[Region] = None, workers: Optional[int] = None):
        """
        Initialize the worker.

        Args:
            model: refraction profile
            source: point source or phase sheet
            k0: wavenumber
            region: Lambda search region for channel actions
            workers: thread count (defaults to the configured worker count)
        """
        self.model = model
        self.source = source
        self.k0 = k0
        self.region = region
        self.workers = workers or get_settings().max_workers
        self.cache = TopologyCache()

    def process_point(self, x: Sequence[float], cell: float = 0.0) -> FieldSample:
        """Field at one point, diagnostics attached."""
        sample = safe_field_at(self.model, self.source, x, self.k0, self.region, self.cache, cell)
        logger.debug(f"Point {sample.x}: {sample.value:.6g} [{sample.zone}] {sample.decomposition_id}")
        return sample

    def run_points(self, points: Sequence[Tuple[float, ...]], cell: float = 0.0) -> List[FieldSample]:
        started = time.time()
        logger.info(f"Evaluating field at {len(points)} points (k0={self.k0}, {self.workers} workers)")
        batch_size = max(self.workers * 4, 1)
        samples: List[FieldSample] = []
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            for i in range(0, len(points), batch_size):
                batch = points[i:i + batch_size]
                samples.extend(pool.map(lambda p: self.process_point(p, cell), batch))
                logger.info(f"Processed {len(samples)}/{len(points)} points")
        failed = sum(1 for s in samples if s.decomposition_id == "")
        logger.info(
            f"Field grid done in {time.time() - started:.1f}s: {failed} failed, "
            f"{len(self.cache)} topologies, {self.cache.hits} cache hits"
        )
        return samples

    def run(self, grid: GridSpec) -> List[FieldSample]:
        """Row-major samples (z outer, x inner)."""
        return self.run_points(grid.points(), cell=max(grid.spacing))


def compute_field_grid(model: RefractionModel, source: SourceSpec, k0: float, grid: GridSpec,
                       region: Optional[Region] = None) -> List[FieldSample]:
    """Function entry point mirroring FieldWorker.run."""
    logger.info(f"Starting field grid for {model.kind.value} / {source.kind.value}")
    return FieldWorker(model, source, k0, region=region).run(grid)
