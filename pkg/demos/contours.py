"""Check the steep-descent contours and show a few points on them.

Run with ``python3 demos/contours.py``.
"""

import numpy as np

from onesided.lambert import ContourSpec, gamma_contour, gamma_junction, validate_contour

for rho in (0.0, 0.1, 0.5):
    print(f"rho = {rho}: crosses the real axis at {gamma_junction(rho):.6f}")
    z, _ = gamma_contour(rho, np.array([-3.0, -1.5, 1.5, 3.0]))
    print("   ", "  ".join(f"{v.real:+.3f}{v.imag:+.3f}i" for v in z))

for spec in (ContourSpec.gamma(0.1), ContourSpec.wedge(-2.0, 2 * np.pi / 3)):
    print()
    print(validate_contour(spec).summary())
