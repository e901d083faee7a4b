"""Correlation kernels for one-sided reflected Brownian motions.

Particles start at ``x_k(0) = -k`` and label ``n`` moves under reflection
off label ``n - 1``.  The joint law of the positions of finitely many labels
is a Fredholm determinant of one of the kernels below:

* :class:`FiniteKernel` -- particles ``1..N`` only (labels ``n >= 1``),
* :class:`FlatKernel` -- the flat configuration with labels in ``Z``,
* :class:`Airy1Kernel` -- the extended Airy_1 kernel, the large-time limit.

All ``block`` methods take vectors of positions for a fixed pair of labels
and return the kernel matrix ``K[i, j] = K(x1[i], n1; x2[j], n2)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import factorial, lgamma

import numpy as np
from scipy import special

from .lambert import ContourNodes, ContourSpec, lambert_w

__all__ = [
    "KernelPoint",
    "heat_kernel",
    "eval_Fk",
    "eval_Fk_left",
    "eval_psi",
    "eval_biphi",
    "phi_conv",
    "phi_profile",
    "biorthogonality_matrix",
    "warren_density",
    "transition_density",
    "airy_function",
    "FiniteKernel",
    "FlatKernel",
    "Airy1Kernel",
    "eval_finite_kernel",
    "eval_flat_kernel",
    "eval_phi_conv",
    "eval_conjugated_kernel",
    "eval_airy1_kernel",
    "flat_kernel_multisheet",
    "flat_k2_double",
    "shifted_finite_kernel",
    "scaling_map",
    "default_contour",
]

_SQRT2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class KernelPoint:
    """A space-label point ``(x, n)`` of the kernel domain."""

    x: float
    n: int


# ---------------------------------------------------------------------------
# one-variable building blocks


def heat_kernel(x, t):
    """Gaussian density ``exp(-x^2/2t)/sqrt(2 pi t)``."""
    x = np.asarray(x, dtype=float)
    return np.exp(-x * x / (2.0 * t)) / np.sqrt(2.0 * np.pi * t)


def _hh_table(nmax, u):
    """``Hh_j(u)`` for ``j = 0..nmax`` (rows), ``Hh_j(u) = int_u^inf (v-u)^j/j! e^{-v^2/2} dv``.

    Forward recurrence where it is stable (``u <= 0``), Miller's backward
    recurrence otherwise.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    out = np.empty((nmax + 1, u.size))
    # forward recurrence is stable for u <= 0 and loses only a few digits
    # for small positive u; Miller's backward recurrence elsewhere
    fwd = u < 0.5
    if fwd.any():
        un = u[fwd]
        prev = np.exp(-un * un / 2.0)
        cur = np.sqrt(np.pi / 2.0) * special.erfc(un / np.sqrt(2.0))
        out[0, fwd] = cur
        for j in range(1, nmax + 1):
            prev, cur = cur, (prev - un * cur) / j
            out[j, fwd] = cur
    bwd = ~fwd
    if bwd.any() and nmax == 0:
        up = u[bwd]
        out[0, bwd] = np.sqrt(np.pi / 2.0) * special.erfc(up / np.sqrt(2.0))
    elif bwd.any():
        up = u[bwd]
        top = int((np.sqrt(nmax) + 40.0 / np.min(up)) ** 2) + 10
        a = np.zeros(up.size)
        b = np.full(up.size, 1e-300)
        vals = np.empty((nmax + 1, up.size))
        # j Hh_j = Hh_{j-2} - u Hh_{j-1}, run downwards
        for j in range(top + 1, 1, -1):
            a, b = b, j * a + up * b
            if j - 2 <= nmax:
                vals[j - 2] = b
            big = b > 1e250
            if big.any():
                a[big] /= b[big]
                vals[:, big] /= b[big][None, :] if j - 2 <= nmax else 1.0
                b[big] = 1.0
        # normalise with Hh_0 in scaled form, then restore the Gaussian factor
        h0 = np.sqrt(np.pi / 2.0) * special.erfcx(up / np.sqrt(2.0))
        out[:, bwd] = vals / vals[0] * h0 * np.exp(-up * up / 2.0)
    return out


def _hermite_table(mmax, u):
    """Probabilists' Hermite polynomials ``He_j(u)``, ``j = 0..mmax`` (rows)."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    out = np.empty((mmax + 1, u.size))
    out[0] = 1.0
    if mmax >= 1:
        out[1] = u
    for j in range(2, mmax + 1):
        out[j] = u * out[j - 1] - (j - 1) * out[j - 2]
    return out


def _Fk_closed(k, x, t):
    x = np.asarray(x, dtype=float)
    u = x / np.sqrt(t)
    if k <= 0:
        m = -k
        he = _hermite_table(m, u.ravel())[m].reshape(u.shape)
        return t ** (-m / 2.0) * he * heat_kernel(x, t)
    hh = _hh_table(k - 1, u.ravel())[k - 1].reshape(u.shape)
    return t ** ((k - 1) / 2.0) / _SQRT2PI * hh


def _Fk_line(k, x, t, delta):
    """Vertical-line contour integral for ``F_k``; trapezoid rule in ``Im z``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if delta is None:
        # real saddle of |e^{t z^2/2 - z x} z^{-k}|
        delta = (x + np.sqrt(x * x + 4 * t * max(k, 0))) / (2 * t) if k > 0 else x / t
    delta = np.broadcast_to(np.asarray(delta, dtype=float), x.shape)
    if k > 0 and np.any(delta <= 0):
        raise ValueError("the line must pass right of the pole at 0 for k > 0")
    ymax = np.sqrt(2.0 * 80.0 / t) + 1.0
    h = min(0.5 / np.sqrt(t), np.pi / (10 + np.max(np.abs(x))))
    if k > 0:
        h = min(h, np.min(delta) / 6.0)
    y = np.arange(-ymax, ymax + h / 2, h)
    z = delta[:, None] + 1j * y[None, :]
    logf = t * z * z / 2.0 - z * x[:, None]
    if k != 0:
        logf = logf - k * np.log(z)
    return (np.exp(logf).sum(axis=1) * h / (2 * np.pi)).real


def eval_Fk(k: int, x, t: float, method: str = "closed", delta: float | None = None):
    """The functions ``F_k(x, t) = (1/2 pi i) int e^{t z^2/2 - z x} z^{-k} dz``.

    The contour is a vertical line passing right of the origin.  For
    ``k <= 0`` these are derivatives of the heat kernel, for ``k >= 1``
    iterated tail integrals of it (``F_1`` is the Gaussian tail).

    Parameters
    ----------
    k : int
    x : array_like
    t : float
        Time, ``> 0``.
    method : {"closed", "contour"}
        Closed form (Hermite polynomials / parabolic cylinder functions) or
        direct quadrature of the contour integral.
    delta : float, optional
        Real part of the contour for ``method="contour"``.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    if method == "closed":
        return _Fk_closed(int(k), x, t)
    if method == "contour":
        return _Fk_line(int(k), x, t, delta)
    raise ValueError(f"unknown method {method!r}")


def eval_Fk_left(k: int, x, t: float):
    """``F_k`` with the contour passing left of the origin: ``(-1)^k F_k(-x)``."""
    return (-1) ** k * eval_Fk(k, -np.asarray(x, dtype=float), t)


def eval_psi(n: int, k: int, x, t: float, method: str = "closed"):
    """``Psi^n_{n-k}(x)``, the Gaussian-type factor of the finite kernel.

    For ``k <= n`` this is a Hermite function centred at ``-k``; for
    ``k > n`` an iterated Gaussian tail.
    """
    x = np.asarray(x, dtype=float)
    m = n - k
    if method == "closed":
        return eval_Fk(-m, -(x + k), t)
    if method == "contour":
        # (-1)^m / (2 pi i) int_{iR - delta} e^{t z^2/2 - z(x+k)} z^m dz
        return (-1) ** m * eval_Fk_left(-m, x + k, t)
    raise ValueError(f"unknown method {method!r}")


def eval_biphi(n: int, ell: int, x, t: float, method: str = "closed", radius: float = 1.0, nodes: int = 128):
    """``Phi^n_{n-ell}(x)``, the polynomial factor of the finite kernel.

    Defined for ``ell >= 1``; vanishes identically for ``ell > n``.

    Parameters
    ----------
    method : {"closed", "contour"}
        Hermite-polynomial closed form or the trapezoid rule on a circle of
        the given ``radius`` around the origin.
    """
    if ell < 1:
        raise ValueError("ell must be >= 1")
    x = np.asarray(x, dtype=float)
    m = n - ell
    if m < 0:
        return np.zeros_like(x)
    u = x + ell
    if method == "closed":
        he = _hermite_table(m, (u / np.sqrt(t)).ravel())
        c = lambda j: t ** (j / 2.0) * he[j].reshape(u.shape) / factorial(j)
        val = c(m) + (c(m - 1) if m >= 1 else 0.0)
        return (-1) ** m * val
    if method == "contour":
        th = 2 * np.pi * (np.arange(nodes) + 0.5) / nodes
        w = radius * np.exp(1j * th)
        f = np.exp(np.multiply.outer(u, w) - t * w * w / 2.0) * w ** (-m) * (1 + w) / w
        return ((-1) ** m * np.mean(f * w, axis=-1)).real
    raise ValueError(f"unknown method {method!r}")


def phi_conv(n1: int, n2: int, x1, x2):
    """``phi^{(n1,n2)}(x1, x2) = (x1-x2)^{m-1}/(m-1)! 1(x1 >= x2)``, ``m = n2 - n1 > 0``."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    m = n2 - n1
    if m <= 0:
        return np.zeros(np.broadcast(x1, x2).shape)
    d = x1 - x2
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(d > 0, np.exp((m - 1) * np.log(np.where(d > 0, d, 1.0)) - lgamma(m)), 0.0)
    if m == 1:
        val = np.where(d >= 0, 1.0, 0.0)
    return val


def phi_profile(n1: int, n2: int, conjugate: bool = False):
    """``d -> d^{m-1}/(m-1)!`` (times ``e^{-d}`` when conjugated) for ``d >= 0``, ``m = n2 - n1``.

    ``phi^{(n1,n2)}(x1, x2)`` is this profile at ``d = x1 - x2`` on
    ``x1 >= x2`` and zero elsewhere.  Returns ``None`` when ``m <= 0``.
    """
    m = n2 - n1
    if m <= 0:
        return None
    c = lgamma(m)

    def prof(d):
        d = np.asarray(d, dtype=float)
        with np.errstate(divide="ignore"):
            lg = (m - 1) * np.log(d) if m > 1 else np.zeros(d.shape)
        lg = lg - c - (d if conjugate else 0.0)
        return np.exp(lg)

    return prof


def _phi_conv_conj(n1, n2, x1, x2):
    # e^{x2-x1} phi^{(n1,n2)}(x1,x2): a Gamma(m) density in x1 - x2
    m = n2 - n1
    d = np.subtract.outer(np.asarray(x1, float), np.asarray(x2, float))
    if m <= 0:
        return np.zeros(d.shape)
    pos = d >= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        logd = np.log(np.where(d > 0, d, 1.0))
        val = np.exp((m - 1) * logd - d - lgamma(m))
    if m == 1:
        val = np.exp(-np.where(pos, d, 0.0))
    return np.where(pos, val, 0.0)


def biorthogonality_matrix(n: int, t: float, nodes: int = 80):
    """Matrix ``B[k-1, l-1] = int Psi^n_{n-k} Phi^n_{n-l} dx``, ``1 <= k, l <= n``.

    Computed by Gauss-Hermite quadrature around each centre ``-k``; the
    integrand is a Gaussian times a polynomial, so the rule is exact up to
    rounding once ``nodes`` exceeds ``n``.
    """
    xg, wg = special.roots_hermitenorm(nodes)
    B = np.empty((n, n))
    s = np.sqrt(t)
    for k in range(1, n + 1):
        x = -k + s * xg
        # Psi^n_{n-k}(x) = t^{-m/2} He_m((x+k)/sqrt t) F0(x+k) (-1)^m ... divide out the weight
        m = n - k
        he = _hermite_table(m, xg)[m]
        psi_over_w = (-1) ** m * t ** (-m / 2.0) * he / _SQRT2PI / s
        for ell in range(1, n + 1):
            ph = eval_biphi(n, ell, x, t)
            B[k - 1, ell - 1] = np.sum(wg * psi_over_w * ph) * s
    return B


def warren_density(x, x0, t: float):
    """Transition density of ``N`` one-sided reflected Brownian motions.

    ``x`` and ``x0`` are ordered ``x[0] >= x[1] >= ...`` (label 1 first).
    Returns ``det[F_{i-j}(x_{N+1-i} - x0_{N+1-j}, t)]``.
    """
    x = np.asarray(x, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    N = x.shape[-1]
    xr = x[..., ::-1]
    x0r = x0[::-1]
    mat = np.empty(x.shape[:-1] + (N, N))
    for i in range(N):
        for j in range(N):
            mat[..., i, j] = eval_Fk(i - j, xr[..., i] - x0r[j], t)
    return np.linalg.det(mat)


def transition_density(x, t: float, x0):
    """Density of the positions ``x`` (label 1 first) at time ``t`` from ``x0``.

    Same as :func:`warren_density`; capped at 12 particles.
    """
    x0 = np.asarray(x0, dtype=float)
    if t <= 0:
        raise ValueError("t must be positive")
    if x0.size == 0 or x0.size > 12:
        raise ValueError("between 1 and 12 particles are supported")
    return warren_density(x, x0, t)


# ---------------------------------------------------------------------------
# finite kernel


def _outer_exp(A, B):
    """``sum_j exp(A[p, j] + B[j, q])`` without overflow in the factors."""
    alpha = np.max(A.real, axis=0)
    alpha = np.where(np.isfinite(alpha), alpha, 0.0)
    return np.exp(A - alpha[None, :]) @ np.exp(B + alpha[:, None])


class FiniteKernel:
    """Kernel of particles ``1..N`` started at ``x_k(0) = -k``.

    The kernel does not depend on ``N`` as long as all labels are ``<= N``.

    Parameters
    ----------
    t : float
        Time.
    method : {"sum", "double"}
        ``"sum"`` uses the biorthogonal expansion, ``"double"`` the
        double-contour form with ``z = -1 + iy`` and ``|w| = 1/4``.
    conjugate : bool
        Multiply by ``exp(x2 - x1)``.
    """

    def __init__(self, t: float, method: str = "sum", conjugate: bool = False):
        if t <= 0:
            raise ValueError("t must be positive")
        if method not in ("sum", "double"):
            raise ValueError(f"unknown method {method!r}")
        self.t = float(t)
        self.method = method
        self.conjugate = conjugate

    def smooth_block(self, x1, n1: int, x2, n2: int):
        """The kernel without its ``-phi`` part."""
        if n1 < 1 or n2 < 1:
            raise ValueError("labels of the finite system start at 1")
        x1 = np.atleast_1d(np.asarray(x1, dtype=float))
        x2 = np.atleast_1d(np.asarray(x2, dtype=float))
        if self.method == "sum":
            psi = np.stack([eval_psi(n1, k, x1, self.t) for k in range(1, n2 + 1)], axis=1)
            phi = np.stack([eval_biphi(n2, k, x2, self.t) for k in range(1, n2 + 1)], axis=0)
            K = psi @ phi
        else:
            K = _finite_double(x1, n1, x2, n2, self.t)
        if self.conjugate:
            K = K * np.exp(np.subtract.outer(-x1, -x2))
        return K

    def volterra(self, n1: int, n2: int):
        """Profile of the ``phi`` part, see :func:`phi_profile`."""
        return phi_profile(n1, n2, self.conjugate)

    def block(self, x1, n1: int, x2, n2: int):
        x1 = np.atleast_1d(np.asarray(x1, dtype=float))
        x2 = np.atleast_1d(np.asarray(x2, dtype=float))
        K = self.smooth_block(x1, n1, x2, n2)
        if self.conjugate:
            return K - _phi_conv_conj(n1, n2, x1, x2)
        return K - phi_conv(n1, n2, x1[:, None], x2[None, :])

    def __call__(self, p1: KernelPoint, p2: KernelPoint) -> float:
        return float(self.block([p1.x], p1.n, [p2.x], p2.n)[0, 0])


def _finite_double(x1, n1, x2, n2, t, ny=None, nw=96):
    # z = -1 + iy, trapezoid in y; w = e^{i theta}/4, trapezoid in theta
    ymax = np.sqrt(2 * 60.0 / t) + 2.0
    h = min(0.6 / np.sqrt(t), 0.05, np.pi / (8 + np.max(np.abs(np.concatenate([x1, x2])))))
    y = np.arange(-ymax, ymax + h / 2, h)
    z = -1.0 + 1j * y
    th = 2 * np.pi * (np.arange(nw) + 0.5) / nw
    w = 0.25 * np.exp(1j * th)
    A = t * z * z / 2 + n1 * np.log(-z)
    A = A[None, :] - np.outer(x1, z)
    B = -t * w * w / 2 - n2 * np.log(-w) + np.log1p(w) + w
    B = B[:, None] + np.outer(w, x2)
    C = 1.0 / (np.multiply.outer(z * np.exp(z), np.ones_like(w)) - w * np.exp(w))
    dz = 1j * h
    dw = 1j * w * (2 * np.pi / nw)
    # (1/(2 pi i)^2) sum_z sum_w e^A C e^B dz dw
    alpha = np.max(A.real, axis=0)
    left = np.exp(A - alpha) * dz
    beta = np.max(B.real, axis=1)
    right = np.exp(B - beta[:, None]) * dw[:, None]
    mid = C * np.exp(alpha[:, None] + beta[None, :])
    K = left @ mid @ right
    return (K / (2j * np.pi) ** 2).real


# ---------------------------------------------------------------------------
# flat kernel


def default_contour(t: float) -> ContourSpec:
    """Steep-descent contour ``Gamma^rho`` with ``rho = 0.1 min(1, t^{-2/3})``.

    ``rho > 0`` keeps the Lambert argument strictly inside the disc of
    radius ``1/e``, so the integrand is analytic along the whole contour,
    while the junction ``-1 - sqrt(2 rho)`` stays within the ``t^{-1/3}``
    neighbourhood of the double critical point ``-1``.
    """
    return ContourSpec.gamma(0.1 * min(1.0, t ** (-2.0 / 3.0)))


class FlatKernel:
    """Kernel of the flat configuration ``x_k(0) = -k``, ``k in Z``.

    The single contour integral runs along ``contour`` (default
    :func:`default_contour`); the contour is truncated where the integrand has dropped
    below ``exp(-45)`` of its peak and discretised with composite
    Gauss-Legendre panels, the number of which is chosen from the total phase
    variation of the integrand.

    Parameters
    ----------
    t : float
    contour : ContourSpec, optional
    conjugate : bool
        Multiply by ``exp(x2 - x1)``.
    resolution : float
        Multiplier on the number of quadrature panels.
    """

    def __init__(self, t: float, contour: ContourSpec | None = None, conjugate: bool = False,
                 resolution: float = 1.0, order: int = 24):
        if t <= 0:
            raise ValueError("t must be positive")
        self.t = float(t)
        self.contour = contour if contour is not None else default_contour(t)
        self.conjugate = conjugate
        self.resolution = resolution
        self.order = order

    # log of the two factors of the integrand at parameter s
    def _logs(self, z, phi, x1, n1, x2, n2):
        t = self.t
        A = (t * z * z / 2 + n1 * np.log(-z))[None, :] - np.outer(x1, z)
        B = (-t * phi * phi / 2 - n2 * np.log(-phi))[:, None] + np.outer(phi, x2)
        if self.conjugate:
            A = A - x1[:, None]
            B = B + x2[None, :]
        return A, B

    def _probe(self, s, ends1, n1, ends2, n2):
        """Upper bound of log|integrand| and its phase along both halves."""
        out = []
        for upper in (True, False):
            z, dz, ph = self.contour.piece(s, upper)
            A, B = self._logs(z, ph, ends1, n1, ends2, n2)
            mag = np.max(A.real, axis=0) + np.max(B.real, axis=1) + np.log(np.abs(dz) + 1e-300)
            ang = np.max(np.abs(np.diff(np.unwrap(A.imag, axis=1), axis=1)), axis=0) + \
                np.max(np.abs(np.diff(np.unwrap(B.imag, axis=0), axis=0)), axis=1)
            out.append((mag, float(np.sum(ang))))
        return np.maximum(out[0][0], out[1][0]), max(out[0][1], out[1][1])

    def _extent(self, x1, n1, x2, n2):
        """Truncation parameter and panel count for the given block."""
        cs = self.contour
        ends1 = np.array([np.min(x1), np.max(x1)])
        ends2 = np.array([np.min(x2), np.max(x2)])
        if cs.kind == "gamma":
            s_hi = 2.0 * min(1.0, self.t ** (-1.0 / 3.0))
        else:
            s_hi = 4.0
        for _ in range(60):
            s = np.linspace(0.0, s_hi, 800)
            u, _ = self._probe(s, ends1, n1, ends2, n2)
            peak = np.max(u)
            if np.all(u[-80:] < peak - 50) and u[-1] < u[-80]:
                break
            s_hi *= 1.6
        live = np.flatnonzero(u > peak - 45)
        s_max = float(s[min(live[-1] + 2, s.size - 1)])
        _, phase = self._probe(np.linspace(0.0, s_max, 4000), ends1, n1, ends2, n2)
        panels = int(np.ceil(self.resolution * (6 + phase / (3 * np.pi))))
        return s_max, panels

    def nodes_for(self, x1, n1, x2, n2) -> ContourNodes:
        s_max, panels = self._extent(np.atleast_1d(x1), n1, np.atleast_1d(x2), n2)
        return self.contour.nodes(s_max, panels=panels, order=self.order)

    def integral_block(self, x1, n1: int, x2, n2: int, nodes: ContourNodes | None = None):
        """The contour-integral part of the kernel, without ``-phi``."""
        x1 = np.atleast_1d(np.asarray(x1, dtype=float))
        x2 = np.atleast_1d(np.asarray(x2, dtype=float))
        if nodes is None:
            nodes = self.nodes_for(x1, n1, x2, n2)
        A, B = self._logs(nodes.z, nodes.phi, x1, n1, x2, n2)
        B = B + np.log(nodes.weight)[:, None]
        out = np.empty((x1.size, x2.size))
        step = max(1, 4_000_000 // max(1, nodes.z.size * x2.size))
        for i in range(0, x1.size, step):
            out[i:i + step] = (_outer_exp(A[i:i + step], B) / (2j * np.pi)).real
        return out

    smooth_block = integral_block

    def volterra(self, n1: int, n2: int):
        """Profile of the ``phi`` part, see :func:`phi_profile`."""
        return phi_profile(n1, n2, self.conjugate)

    def block(self, x1, n1: int, x2, n2: int, nodes: ContourNodes | None = None):
        x1 = np.atleast_1d(np.asarray(x1, dtype=float))
        x2 = np.atleast_1d(np.asarray(x2, dtype=float))
        K = self.integral_block(x1, n1, x2, n2, nodes)
        if self.conjugate:
            return K - _phi_conv_conj(n1, n2, x1, x2)
        return K - phi_conv(n1, n2, x1[:, None], x2[None, :])

    def __call__(self, p1: KernelPoint, p2: KernelPoint) -> float:
        return float(self.block([p1.x], p1.n, [p2.x], p2.n)[0, 0])


def flat_kernel_multisheet(x1, n1: int, x2, n2: int, t: float, kmax: int = 4, nodes: int = 256):
    """Flat kernel as a sum over the non-trivial roots of ``z e^z = w e^w``.

    ``w`` runs over the unit circle; the root ``z_k(w) = L_k(w e^w)`` is
    summed over ``0 < |k| <= kmax``.
    """
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    th = -np.pi + 2 * np.pi * (np.arange(nodes) + 0.5) / nodes
    w = np.exp(1j * th)
    W = w * np.exp(w)
    if np.max(np.abs(lambert_w(0, W) - w)) > 1e-10:
        raise ArithmeticError("trivial root is not the principal branch on the circle")
    Bw = (-t * w * w / 2 - n2 * np.log(-w) + np.log1p(w) + w)[:, None] + np.outer(w, x2)
    dw = 1j * w * (2 * np.pi / nodes)
    K = np.zeros((x1.size, x2.size))
    for k in range(-kmax, kmax + 1):
        if k == 0:
            continue
        z = lambert_w(k, W)
        Az = (t * z * z / 2 + n1 * np.log(-z) - np.log1p(z) - z)[None, :] - np.outer(x1, z)
        K += (_outer_exp(Az, Bw + np.log(dw)[:, None]) / (2j * np.pi)).real
    return K - phi_conv(n1, n2, x1[:, None], x2[None, :])


def _wedge_circle_nodes(t, xs):
    zc = ContourSpec.wedge(-2.0, 2 * np.pi / 3)
    s_max = 4.0 + np.sqrt(2 * 60 / t) * 2 + 0.5 * np.max(np.abs(xs)) / max(t, 0.1) ** 0.5
    zn = zc.nodes(s_max, panels=int(12 + 2 * s_max), order=24)
    return zn


def flat_k2_double(x1, n1: int, x2, n2: int, t: float, nw: int = 128):
    """Flat kernel as ``-phi + K2`` with ``K2`` a double contour integral.

    ``z`` runs over the wedge through ``-2`` and ``w`` over the unit circle.
    """
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    zn = _wedge_circle_nodes(t, np.concatenate([x1, x2]))
    K2 = _k2(x1, n1, x2, n2, t, zn, nw)
    return K2 - phi_conv(n1, n2, x1[:, None], x2[None, :])


def _k2(x1, n1, x2, n2, t, zn, nw):
    z = zn.z
    th = 2 * np.pi * (np.arange(nw) + 0.5) / nw
    w = np.exp(1j * th)
    A = (t * z * z / 2 + (n1 - n2) * np.log(-z) + np.log(zn.weight))[None, :] - np.outer(x1 + n2, z)
    B = (-t * w * w / 2 + np.log1p(w) + w + np.log(1j * w * 2 * np.pi / nw))[:, None] + np.outer(w, x2 + n2)
    C = 1.0 / (np.multiply.outer(z * np.exp(z), np.ones_like(w)) - w * np.exp(w))
    alpha = np.max(A.real, axis=0)
    beta = np.max(B.real, axis=1)
    K = np.exp(A - alpha) @ (C * np.exp(alpha[:, None] + beta[None, :])) @ np.exp(B - beta[:, None])
    return (-K / (2j * np.pi) ** 2).real


def shifted_finite_kernel(x1, n1: int, x2, n2: int, t: float, M: int, nw: int = 128):
    """Finite kernel at ``(x1 - M, n1 + M; x2 - M, n2 + M)``.

    Uses the double-contour form of the finite kernel with the wedge
    through ``-2`` for ``z`` and the unit circle for ``w``; the part of the
    integrand that depends on ``M`` is evaluated separately so that no
    cancellation between large terms occurs.  As ``M`` grows this tends to
    the flat kernel.
    """
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if n1 + M < 1 or n2 + M < 1:
        raise ValueError("shifted labels must be >= 1")
    zn = _wedge_circle_nodes(t, np.concatenate([x1, x2]))
    z = zn.z
    th = 2 * np.pi * (np.arange(nw) + 0.5) / nw
    w = np.exp(1j * th)
    m1, m2 = n1 + M, n2 + M
    y1, y2 = x1 - M, x2 - M
    A = (t * z * z / 2 + m1 * np.log(-z) + np.log(zn.weight))[None, :] - np.outer(y1, z)
    B = (-t * w * w / 2 - m2 * np.log(-w) + np.log1p(w) + w + np.log(1j * w * 2 * np.pi / nw))[:, None] \
        + np.outer(w, y2)
    C = 1.0 / (np.multiply.outer(z * np.exp(z), np.ones_like(w)) - w * np.exp(w))
    alpha = np.max(A.real, axis=0)
    beta = np.max(B.real, axis=1)
    K1 = np.exp(A - alpha) @ (C * np.exp(alpha[:, None] + beta[None, :])) @ np.exp(B - beta[:, None])
    K1 = (K1 / (2j * np.pi) ** 2).real
    K2 = _k2(x1, n1, x2, n2, t, zn, nw)
    return K1 + K2 - phi_conv(n1, n2, x1[:, None], x2[None, :])


# ---------------------------------------------------------------------------
# Airy_1


class Airy1Kernel:
    """Extended Airy_1 kernel in the variables ``(s, r)``."""

    def block(self, s1, r1: float, s2, r2: float):
        s1 = np.atleast_1d(np.asarray(s1, dtype=float))
        s2 = np.atleast_1d(np.asarray(s2, dtype=float))
        d = r2 - r1
        S = np.add.outer(s1, s2)
        ai = special.airy(S + d * d)[0]
        K = ai * np.exp(d * S + 2.0 * d**3 / 3.0)
        if d > 0:
            D = np.subtract.outer(s1, s2)
            K = K - np.exp(-D * D / (4 * d)) / np.sqrt(4 * np.pi * d)
        return K

    def __call__(self, q1, q2) -> float:
        (r1, s1), (r2, s2) = q1, q2
        return float(self.block([s1], r1, [s2], r2)[0, 0])


def airy_function(x):
    """Airy function ``Ai(x)`` on the supported range ``[-20, 200]``."""
    x = np.asarray(x, dtype=float)
    if np.any((x < -20) | (x > 200)):
        raise ValueError("Ai is supported on [-20, 200]")
    return special.airy(x)[0]


def scaling_map(t: float, r: float, s):
    """Label and position ``(n, x)`` corresponding to scaled ``(r, s)`` at time ``t``."""
    n = int(np.floor(-t + 2 ** (5 / 3) * t ** (2 / 3) * r + 1e-9))
    x = -(2 ** (5 / 3)) * t ** (2 / 3) * r - (2 * t) ** (1 / 3) * np.asarray(s, dtype=float)
    return n, x


# ---------------------------------------------------------------------------
# scalar wrappers


def eval_finite_kernel(p1: KernelPoint, p2: KernelPoint, t: float, method: str = "sum") -> float:
    """Finite-system kernel ``K_t(x1, n1; x2, n2)``."""
    return FiniteKernel(t, method)(p1, p2)


def eval_phi_conv(n1: int, n2: int, x1: float, x2: float) -> float:
    """Scalar form of :func:`phi_conv`."""
    return float(phi_conv(n1, n2, x1, x2))


def eval_flat_kernel(p1: KernelPoint, p2: KernelPoint, t: float, contour: ContourSpec | None = None) -> float:
    """Flat kernel ``K_t^flat(x1, n1; x2, n2)``."""
    return FlatKernel(t, contour)(p1, p2)


def eval_conjugated_kernel(q1, q2, t: float, scaled: bool = True, contour: ContourSpec | None = None) -> float:
    """Conjugated flat kernel ``e^{x2-x1} K_t^flat``.

    With ``scaled=True`` the points are ``(r, s)`` pairs, mapped to labels
    and positions by :func:`scaling_map`, and the result carries the
    Jacobian ``(2t)^{1/3}``; it tends to the Airy_1 kernel as ``t`` grows.
    Otherwise the points are :class:`KernelPoint` instances.
    """
    kern = FlatKernel(t, contour, conjugate=True)
    if not scaled:
        return kern(q1, q2)
    (r1, s1), (r2, s2) = q1, q2
    n1, x1 = scaling_map(t, r1, s1)
    n2, x2 = scaling_map(t, r2, s2)
    return float((2 * t) ** (1 / 3) * kern.block([x1], n1, [x2], n2)[0, 0])


def eval_airy1_kernel(s1: float, r1: float, s2: float, r2: float) -> float:
    """Extended Airy_1 kernel ``K_{A1}(s1, r1; s2, r2)``."""
    return Airy1Kernel()((r1, s1), (r2, s2))
