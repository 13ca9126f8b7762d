"""
Generalization gap on multiscale signals
========================================

Measure the gap between clean and partially noisy evaluation for growing
training sets and compare it with the diameter bound, with and without a
wavelet projection.
"""

import numpy as np

from hpsplinet.stability import GenGapConfig, gengap_sweep

recs = gengap_sweep((32, 128, 512), amplitudes=(1.0,), levels=(0, 2), seeds=range(3), cfg=GenGapConfig())

for J in (None, 2):
    for n in (32, 128, 512):
        sel = [r for r in recs if r.J == J and r.n == n]
        gap = np.mean([r.gengap for r in sel])
        bound = np.mean([r.bound for r in sel])
        print(f"J={J}  n={n:4d}  gap={gap:.3e}  D/sqrt(n)={bound:.3e}")
