"""Independent reference values used by the tests."""

import numpy as np
from scipy import integrate, special

from onesided.kernels import warren_density


def tracy_widom(xs, x0=6.0):
    """GOE and GUE Tracy-Widom distributions ``(F1(x), F2(x))`` from Painleve II.

    Integrates the Hastings-McLeod solution ``q'' = x q + 2 q^3``, ``q ~ Ai``,
    backwards from ``x0`` together with ``int q`` and ``int (y - x) q^2``.
    """
    ai, aip, _, _ = special.airy(x0)
    i1 = integrate.quad(lambda y: special.airy(y)[0], x0, np.inf, epsabs=1e-16)[0]
    j = integrate.quad(lambda y: special.airy(y)[0] ** 2, x0, np.inf, epsabs=1e-18)[0]
    i2 = integrate.quad(lambda y: (y - x0) * special.airy(y)[0] ** 2, x0, np.inf, epsabs=1e-18)[0]

    def rhs(x, u):
        q, p, _, jj, _ = u
        return [p, x * q + 2 * q**3, -q, -q * q, -jj]

    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    sol = integrate.solve_ivp(rhs, (x0, min(xs.min(), x0)), [ai, aip, i1, j, i2], method="DOP853",
                              rtol=1e-13, atol=1e-16, dense_output=True)
    u = sol.sol(xs)
    f2 = np.exp(-u[4])
    return np.sqrt(f2) * np.exp(-0.5 * u[2]), f2


def warren_joint_n2(a1, a2, t, x0=(-1.0, -2.0)):
    """``P(x_1(t) >= a1, x_2(t) >= a2)`` for two particles by 2-D quadrature."""
    x0 = np.asarray(x0, dtype=float)
    top = max(a1, a2, x0[0]) + 12 * np.sqrt(t)

    def f(x1, x2):
        return float(warren_density(np.array([x1, x2]), x0, t))

    return integrate.dblquad(f, a2, top, lambda x2: max(a1, x2), lambda x2: top, epsabs=1e-12, epsrel=1e-10)[0]
