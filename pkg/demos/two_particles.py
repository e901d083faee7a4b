"""Two reflected particles from x_k(0) = -k: simulation, determinant and density.

Run with ``python3 demos/two_particles.py``.
"""

import numpy as np

from onesided.experiments import warren_tail_n2
from onesided.fredholm import LabelSet, joint_cdf_finite
from onesided.simulate import sample_finite

t = 1.0
x = sample_finite(2, t, [1, 2], 20_000, seed=1)

print(" a     MC P(x_2 >= a)     stderr    Fredholm    density quadrature")
for a in (-4.0, -3.0, -2.5, -2.0, -1.0):
    p = np.mean(x[:, 1] >= a)
    se = np.sqrt(p * (1 - p) / len(x))
    det = joint_cdf_finite(t, LabelSet.of([2], [a])).value
    print(f"{a:5.1f}   {p:12.4f}   {se:10.4f}   {det:10.6f}   {warren_tail_n2(a, t, 2):10.6f}")

# the joint event needs the determinant over both labels
a = [-1.5, -2.5]
p = np.mean(np.all(x >= a, axis=1))
print(f"\nP(x_1 >= {a[0]}, x_2 >= {a[1]}): MC {p:.4f}, Fredholm "
      f"{joint_cdf_finite(t, LabelSet.of([1, 2], a)).value:.6f}")
