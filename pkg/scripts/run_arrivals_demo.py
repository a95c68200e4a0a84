#!/usr/bin/env python3
"""
Arrivals demo: arrival times inside the cusp of a smeared phase-sheet source,
next to the envelope peaks of a pulse synthesized over a k0 band.

Usage:
    python scripts/run_arrivals_demo.py [k_center] [bandwidth]

Example:
    python scripts/run_arrivals_demo.py 20 6
"""

import sys
import os
import logging

import numpy as np
from scipy.signal import find_peaks

# Add parent directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from einbein.core.asymptotics import arrival_times
from einbein.core.quadrature import decompose_at, safe_field_at
from einbein.schemas.objects import ModelKind, RefractionModel, SourceKind, SourceSpec

logging.basicConfig(level=logging.WARNING, format='[%(levelname)s] %(asctime)s %(message)s',
                    datefmt='%Y-%m-%d %H:%M:%S')

TRANSECT = [(0.0, 0.5), (0.0, 1.0), (0.0, 1.5), (0.3, 1.0), (0.6, 1.0)]


def synthesize(model, source, point, k_center, bandwidth, n_k=41):
    """Gaussian-weighted sum of fields over the band; returns (t, envelope)."""
    ks = np.linspace(k_center - bandwidth, k_center + bandwidth, n_k)
    weights = np.exp(-0.5 * ((ks - k_center) / (0.5 * bandwidth)) ** 2)
    values = np.array([safe_field_at(model, source, point, k).value for k in ks])
    good = np.isfinite(values)
    t = np.linspace(0.0, 4.0, 801)
    pulse = (weights[good] * values[good] * np.exp(-1j * np.outer(t, ks[good]))).sum(axis=1)
    return t, np.abs(pulse)


def main():
    k_center = float(sys.argv[1]) if len(sys.argv) > 1 else 20.0
    bandwidth = float(sys.argv[2]) if len(sys.argv) > 2 else 6.0

    model = RefractionModel(kind=ModelKind.CONSTANT, n0sq=1.0)
    source = SourceSpec(kind=SourceKind.PHASE_SHEET, location=[0.0, 0.0], mu=1.0)

    print("=" * 80)
    print("Arrivals inside the cusp of a phase-sheet source")
    print("=" * 80)
    print(f"n0 = 1, mu = {source.mu}, cusp points at (0, +-2)")
    print(f"Band: k0 = {k_center} +- {bandwidth}")
    print()

    for i, point in enumerate(TRANSECT, 1):
        print(f"[{i}/{len(TRANSECT)}] x = {point[0]}, z = {point[1]}")
        try:
            _, decomposition = decompose_at(model, source, point, k_center)
        except Exception as e:
            print(f"✗ Decomposition failed: {e}")
            continue
        arrivals = arrival_times(decomposition)
        for a in arrivals:
            print(f"  t = {a.t:.4f}  smear = {a.smear:.2e}  x{a.coefficient:+d}  {a.label}")
        t, envelope = synthesize(model, source, point, k_center, bandwidth)
        peaks, _ = find_peaks(envelope, height=0.1 * envelope.max())
        print(f"  envelope peaks: {', '.join(f'{t[p]:.3f}' for p in peaks) or 'none'}")
        print()

    print("=" * 80)
    print("✓ Demo completed")
    print("=" * 80)


if __name__ == '__main__':
    main()
