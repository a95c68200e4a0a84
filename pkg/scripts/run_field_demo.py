#!/usr/bin/env python3
"""
Field demo: thimble-sum field of the linear profile across its fold caustic.

Usage:
    python scripts/run_field_demo.py [k0] [resolution]

Example:
    python scripts/run_field_demo.py 5 15
"""

import sys
import os
import logging

import numpy as np

# Add parent directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from einbein.core.quadrature import helmholtz_residual, oracle_real_axis, samples_to_array
from einbein.core.action import build_wavefunction
from einbein.schemas.objects import GridSpec, ModelKind, RefractionModel, SourceSpec
from einbein.worker.field_worker import compute_field_grid

logging.basicConfig(level=logging.INFO, format='[%(levelname)s] %(asctime)s %(message)s',
                    datefmt='%Y-%m-%d %H:%M:%S')


def main():
    k0 = float(sys.argv[1]) if len(sys.argv) > 1 else 5.0
    resolution = int(sys.argv[2]) if len(sys.argv) > 2 else 15

    model = RefractionModel(kind=ModelKind.LINEAR_Z, n0sq=1.0, a=1.0)
    source = SourceSpec(location=[0.0, 0.0])
    grid = GridSpec(x_range=(0.5, 3.0), z_range=(-1.0, 1.5), resolution=(resolution, resolution))

    print("=" * 80)
    print("Linear-profile field across the fold caustic")
    print("=" * 80)
    print(f"n^2 = {model.n0sq} - {model.a} z, source at {source.location}, k0 = {k0}")
    print(f"Grid: x {grid.x_range}, z {grid.z_range}, {resolution} x {resolution}")
    print()

    # Sweep the grid
    print("[1/3] Evaluating the thimble sum on the grid...")
    try:
        samples = compute_field_grid(model, source, k0, grid)
        print("✓ Grid completed")
    except Exception as e:
        print(f"✗ Grid failed: {e}")
        import traceback
        traceback.print_exc()
        sys.exit(1)
    failed = [s for s in samples if s.decomposition_id == ""]
    zones = {}
    for s in samples:
        zones[s.zone or "failed"] = zones.get(s.zone or "failed", 0) + 1
    print(f"  Points: {len(samples)}, failed: {len(failed)}")
    for zone, count in sorted(zones.items()):
        print(f"  {zone}: {count}")
    print()

    # Spot-check against the damped real-axis oracle
    print("[2/3] Comparing with the damped real-axis oracle...")
    for s in samples[:: max(len(samples) // 5, 1)]:
        if s.decomposition_id in ("", "oracle"):
            continue
        oracle = oracle_real_axis(build_wavefunction(model, source, s.x, k0))
        err = abs(s.value - oracle) / abs(oracle)
        mark = "✓" if err < 1e-6 else "✗"
        print(f"  {mark} x={s.x[0]:.3f} z={s.x[1]:.3f} [{s.zone}] relative difference {err:.2e}")
    print()

    # Finite-difference Helmholtz residual
    print("[3/3] Helmholtz residual on interior points...")
    xs = np.linspace(*grid.x_range, resolution)
    zs = np.linspace(*grid.z_range, resolution)
    residual = helmholtz_residual(samples_to_array(samples, grid.resolution), xs, zs, model, k0)
    print(f"  median {np.nanmedian(residual):.2e}, max {np.nanmax(residual):.2e}")
    print()

    print("=" * 80)
    print("✓ Demo completed successfully!")
    print("=" * 80)


if __name__ == '__main__':
    main()
