"""Flat system at growing t: one-point Fredholm CDF against the Airy_1 limit.

Run with ``python3 demos/flat_vs_airy1.py``.  Takes about a minute.
"""

import numpy as np

from onesided.fredholm import LabelSet, joint_cdf_airy1, joint_cdf_flat

s_grid = np.linspace(-2.0, 1.0, 7)
airy = np.array([joint_cdf_airy1([(0.0, s)]).value for s in s_grid])

print("     s   " + "".join(f"{'t=%g' % t:>12}" for t in (10, 100, 1000)) + "      Airy_1")
rows = []
for t in (10.0, 100.0, 1000.0):
    n = -int(t)
    scale = (2 * t) ** (1 / 3)
    # P(X_t(0) <= s) = P(x_n(t) >= -scale * s)
    rows.append([joint_cdf_flat(t, LabelSet.of([n], [-scale * s])).value for s in s_grid])
rows = np.array(rows)
for i, s in enumerate(s_grid):
    print(f"{s:6.2f}   " + "".join(f"{v:12.6f}" for v in rows[:, i]) + f"{airy[i]:12.6f}")

print("\nsup distance:", ", ".join(f"t={t:g}: {d:.2e}" for t, d in zip((10, 100, 1000), np.max(np.abs(rows - airy), axis=1))))
