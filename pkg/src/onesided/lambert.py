"""Multi-branch Lambert W and the steep-descent contours built from it.

The branch ``L_k`` of the Lambert W function is the solution of
``w * exp(w) = z`` lying in the k-th branch region of the w-plane.  Branch
regions are bounded by the curves ``{-eta*cot(eta) + i*eta}``; the principal
region is the one containing the positive real axis.

Branch cuts follow the usual convention: ``L_0`` is cut along
``(-inf, -1/e]`` and the other branches along ``(-inf, 0]`` (``L_{+1}`` and
``L_{-1}`` additionally along ``(-1/e, 0)``).  A point exactly on a cut is
evaluated as the limit from above (``side=+1``) or from below (``side=-1``).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LambertWConvergenceError",
    "lambert_w",
    "branch_index",
    "phi_map",
    "ContourSpec",
    "ContourNodes",
    "gamma_contour",
    "gamma_junction",
    "SteepDescent",
    "ContourReport",
    "validate_contour",
]

_INV_E = np.exp(-1.0)
_TWO_PI = 2.0 * np.pi


class LambertWConvergenceError(ArithmeticError):
    """Halley iteration failed to converge on the requested branch.

    Attributes
    ----------
    w : ndarray
        Last iterate at the offending points.
    z : ndarray
        Arguments at the offending points.
    residual : ndarray
        ``|w e^w - z|`` at the last iterate.
    """

    def __init__(self, k, z, w, residual):
        self.k = k
        self.z = np.asarray(z)
        self.w = np.asarray(w)
        self.residual = np.asarray(residual)
        super().__init__(
            f"Lambert W branch {k} did not converge at {self.z.size} point(s); "
            f"max residual {np.max(self.residual) if self.residual.size else 0:.3e}"
        )


def branch_index(w, side=1):
    """Index k of the branch region containing ``w``.

    Parameters
    ----------
    w : array_like
        Points of the w-plane.
    side : {+1, -1}
        Tie-break for points on a region boundary: the point is assigned to
        the region it belongs to when ``z = w e^w`` is approached from
        ``Im z > 0`` (``+1``) or ``Im z < 0`` (``-1``).

    Returns
    -------
    ndarray of int
    """
    w = np.asarray(w, dtype=complex)
    a, b = w.real, w.imag
    k = np.zeros(w.shape, dtype=np.int64)

    pos = b > 0
    neg = b < 0
    k[pos] = _upper_index(a[pos], b[pos])
    k[neg] = -_upper_index(a[neg], -b[neg])

    real = b == 0
    left = real & (a < -1)
    k[left] = -1 if side > 0 else 1

    # boundary points: nudge w in the direction z moves when shifted by i*side
    on_curve = ~real & _on_boundary(a, b)
    if np.any(on_curve):
        wc = w[on_curve]
        dw = 1j * side * wc / ((wc * np.exp(wc)) * (1 + wc))
        wn = wc + 1e-9 * (1 + np.abs(wc)) * dw / np.abs(dw)
        k[on_curve] = branch_index(wn, side)
    return k


def _upper_index(a, b):
    # branch index for Im w = b > 0: number of boundary curves below the point
    full = np.where(b >= np.pi, np.floor((b - np.pi) / _TWO_PI) + 1, 0)
    j = np.floor(b / _TWO_PI)
    eta = b - _TWO_PI * j
    in_band = eta < np.pi
    with np.errstate(divide="ignore", invalid="ignore"):
        bound = -b / np.tan(np.where(in_band, b, 1.0))
    part = in_band & (a < bound)
    return (full + part).astype(np.int64)


def _on_boundary(a, b, tol=1e-13):
    eta = np.mod(np.abs(b), _TWO_PI)
    with np.errstate(divide="ignore", invalid="ignore"):
        bound = -np.abs(b) / np.tan(np.abs(b))
    return (eta > 0) & (eta < np.pi) & (np.abs(a - bound) <= tol * (1 + np.abs(a)))


def _on_cut(k, z):
    if k == 0:
        return (z.imag == 0) & (z.real < -_INV_E)
    return (z.imag == 0) & (z.real <= 0)


def _branch_point_series(p):
    return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3


_E_LO = 1.4456468917292502e-16  # e - float(e)


def _two_prod(a, b):
    # Dekker: a * b = hi + lo exactly
    hi = a * b
    c = 134217729.0
    a1 = c * a
    a1 = a1 - (a1 - a)
    a2 = a - a1
    b1 = c * b
    b1 = b1 - (b1 - b)
    b2 = b - b1
    lo = ((a1 * b1 - hi) + a1 * b2 + a2 * b1) + a2 * b2
    return hi, lo


def _branch_p(z, side):
    """``sqrt(2 (e z + 1))`` with the cancellation in ``e z + 1`` compensated."""
    hi, lo = _two_prod(np.e, z.real)
    re = (hi + 1.0) + (lo + _E_LO * z.real)
    q = 2.0 * (re + 1j * np.e * z.imag)
    sq = np.sqrt(q)
    neg_axis = (z.imag == 0) & (q.real < 0)
    sq[neg_axis] = 1j * side * np.sqrt(-q.real[neg_axis])
    return sq


def _seed(k, z, side):
    """Initial guesses for Halley iteration on branch k."""
    upper = (z.imag > 0) | ((z.imag == 0) & (side > 0))
    with np.errstate(all="ignore"):
        # z = 0 gives -inf here; those entries are handled separately
        logz = np.log(np.abs(z)) + 1j * np.where(
            z.imag == 0, np.where(z.real < 0, side * np.pi, 0.0), np.angle(z)
        )
        L1 = logz + 1j * _TWO_PI * k
        L2 = np.log(L1)
        w0 = L1 - L2 + L2 / L1

    near = np.abs(z + _INV_E) <= 0.3
    q = 2.0 * (np.e * z + 1.0)
    # on the negative real axis the square root takes the sign of the side
    sq = np.sqrt(q)
    neg_axis = (z.imag == 0) & (q.real < 0)
    sq[neg_axis] = 1j * side * np.sqrt(-q.real[neg_axis])
    if k == 0:
        mid = np.abs(z + _INV_E) <= 1.5
        w0 = np.where(mid, _branch_point_series(sq), w0)
        small = (np.abs(z) < 0.25) & ~near
        w0 = np.where(small, z * (1 - z), w0)
    elif k == -1:
        w0 = np.where(near & upper, _branch_point_series(-sq), w0)
    elif k == 1:
        w0 = np.where(near & ~upper, _branch_point_series(-sq), w0)
    return w0


def _halley(z, w, tol, maxiter):
    with np.errstate(all="ignore"):
        return _halley_loop(z, w, tol, maxiter)


def _halley_loop(z, w, tol, maxiter):
    active = np.ones(z.shape, dtype=bool)
    for _ in range(maxiter):
        if not active.any():
            break
        wa = w[active]
        ew = np.exp(wa)
        f = wa * ew - z[active]
        wp1 = wa + 1.0
        wp1 = np.where(wp1 == 0, 1e-300, wp1)
        dw = f / (ew * wp1 - (wa + 2.0) * f / (2.0 * wp1))
        dw = np.where(np.isfinite(dw), dw, 0.0)
        w[active] = wa - dw
        done = np.abs(dw) <= tol * (1.0 + np.abs(wa))
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    return w, active


def lambert_w(k: int, z, side: int = 1, *, tol: float = 4e-16, maxiter: int = 60):
    """Branch ``k`` of the Lambert W function.

    Parameters
    ----------
    k : int
        Branch index.
    z : array_like
        Arguments (complex).
    side : {+1, -1}, default +1
        For arguments lying exactly on a branch cut, return the limit from
        ``Im z > 0`` (``+1``) or ``Im z < 0`` (``-1``).  Ignored elsewhere.
    tol : float
        Relative step tolerance of the Halley iteration.
    maxiter : int
        Iteration cap.

    Returns
    -------
    complex or ndarray
        ``w`` with ``w * exp(w) == z`` and ``branch_index(w) == k``.

    Raises
    ------
    LambertWConvergenceError
        If the iteration does not settle on branch ``k``.
    ValueError
        If ``side`` is not +1 or -1.

    Notes
    -----
    ``lambert_w(k, -1/e)`` returns ``-1`` for ``k == 0`` and for the branch
    that touches the branch point from the requested side (``k=-1`` from
    above, ``k=+1`` from below).
    """
    if side not in (1, -1):
        raise ValueError("side must be +1 or -1")
    k = int(k)
    z_arr = np.asarray(z, dtype=complex)
    scalar = z_arr.ndim == 0
    z_arr = np.atleast_1d(z_arr).ravel()
    w = _seed(k, z_arr, side)

    zero = z_arr == 0
    if k == 0:
        w[zero] = 0.0
    bp = z_arr == -_INV_E
    touches = k == 0 or (k == -1 and side > 0) or (k == 1 and side < 0)

    w, stuck = _halley(z_arr, w, tol, maxiter)
    if k in (-1, 0, 1):
        # near -1/e the residual w e^w - z cancels; the series in p is exact to rounding
        p = _branch_p(z_arr, side)
        upper = (z_arr.imag > 0) | ((z_arr.imag == 0) & (side > 0))
        mine = np.full(z_arr.shape, True) if k == 0 else (upper if k == -1 else ~upper)
        close = mine & (np.abs(p) <= 0.02)
        if close.any():
            w[close] = _branch_series_p1(p[close] if k == 0 else -p[close]) - 1.0
            stuck[close] = False
    cut = (z_arr.imag == 0) & (z_arr.real < 0)
    w[cut] = _snap_real(w[cut])
    got = _classify(w, z_arr, cut, side)
    with np.errstate(all="ignore"):
        resid = np.abs(w * np.exp(w) - z_arr)
    stuck &= ~(resid <= 1e-14 * (1 + np.abs(z_arr)))
    bad = (got != k) | stuck | ~np.isfinite(w)
    if touches:
        bad &= ~bp
    if k == 0:
        bad &= ~zero
    if np.any(bad):
        w = _retry(k, z_arr, w, bad, side, tol, maxiter)
        w[cut] = _snap_real(w[cut])
        got = _classify(w, z_arr, cut, side)
        bad = (got != k) | ~np.isfinite(w)
        if touches:
            bad &= ~bp
        if k == 0:
            bad &= ~zero
        if np.any(bad):
            res = np.abs(w[bad] * np.exp(w[bad]) - z_arr[bad])
            raise LambertWConvergenceError(k, z_arr[bad], w[bad], res)
    if touches:
        w[bp] = -1.0
    if k != 0 and np.any(zero):
        w[zero] = complex(-np.inf, 0.0)

    shape = np.shape(z)
    if scalar:
        return complex(w[0])
    return w.reshape(shape)


def _snap_real(w):
    return np.where(np.abs(w.imag) <= 1e-13 * (1 + np.abs(w.real)), w.real + 0j, w)


def _classify(w, z, cut, side):
    """Branch of each root.

    Roots lying on or numerically next to a region boundary are nudged in
    the direction they move when ``z`` is pushed away from the real axis.
    """
    got = branch_index(w, side)
    a, b = w.real, w.imag
    fin = np.isfinite(w) & (w != -1) & (z != 0)
    close = cut | ((np.abs(b) <= 1e-11 * (1 + np.abs(a))) & (a < -1))
    close |= _on_boundary(a, b, 1e-11)
    sel = close & fin
    if np.any(sel):
        ws, zs = w[sel], z[sel]
        sz = np.where(zs.imag == 0, side, np.sign(zs.imag))
        dw = 1j * sz * ws / (zs * (1 + ws))
        step = 1e-7 * np.minimum(1.0, np.abs(ws + 1)) * (1 + np.abs(ws))
        wn = ws + step * dw / np.abs(dw)
        got[sel] = branch_index(wn, side)
    return got


def _retry(k, z, w, bad, side, tol, maxiter):
    """Second attempt at stubborn points: solve w + log w = Log z + 2 pi i k."""
    zb = z[bad]
    logz = np.log(np.abs(zb)) + 1j * np.where(
        zb.imag == 0, np.where(zb.real < 0, side * np.pi, 0.0), np.angle(zb)
    )
    target = logz + 1j * _TWO_PI * k
    wb = target - np.log(target + (target == 0))
    with np.errstate(all="ignore"):
        wb = _newton_log(wb, target, tol)
    wb, _ = _halley(zb, wb, tol, maxiter)
    w = w.copy()
    w[bad] = wb
    return w


def _newton_log(wb, target, tol):
    for _ in range(200):
        g = wb + np.log(wb) - target
        dw = g / (1.0 + 1.0 / wb)
        wb = wb - dw
        if np.all(np.abs(dw) <= tol * (1 + np.abs(wb))):
            break
    return wb


def phi_map(z):
    """The map ``phi(z) = L_0(z e^z)``.

    On the principal region ``phi`` is the identity; elsewhere it returns
    the principal solution ``w`` of ``w e^w = z e^z``.
    """
    z = np.asarray(z, dtype=complex)
    return lambert_w(0, z * np.exp(z))


# ---------------------------------------------------------------------------
# contours


# Taylor coefficients of L(p) + 1 in p = sqrt(2(e z + 1)) around the branch point
_BRANCH_SERIES = np.array([
    0.0, 1.0, -1.0 / 3.0, 11.0 / 72.0, -43.0 / 540.0, 769.0 / 17280.0, -221.0 / 8505.0,
    680863.0 / 43545600.0, -1963.0 / 204120.0, 226287557.0 / 37623398400.0,
])


def _branch_series_p1(p):
    """``w + 1`` for the root near ``-1`` with branch-point coordinate ``p``."""
    return np.polynomial.polynomial.polyval(p, _BRANCH_SERIES)


def _gamma_argument(rho, tau):
    frac = tau - np.floor(tau)
    return -(1.0 - rho) * _INV_E * np.exp(1j * _TWO_PI * frac)


def gamma_contour(rho: float, tau):
    """Points and tangents of the contour ``Gamma^rho``.

    The contour is ``gamma(tau) = L_{floor(tau)}(-(1-rho) e^{2 pi i tau - 1})``
    for real ``tau`` outside ``[0, 1)``; at integer ``tau`` the right limit is
    used.  The two halves meet on the real axis at ``gamma_junction(rho)``.

    Parameters
    ----------
    rho : float
        Shift parameter in ``[0, 1)``.
    tau : array_like
        Parameter values, each ``< 0`` or ``>= 1``.

    Returns
    -------
    z, dz : ndarray
        Points and ``d gamma / d tau``.
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError("rho must lie in [0, 1)")
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any((tau >= 0) & (tau < 1)):
        raise ValueError("tau must lie outside [0, 1)")
    arg = _gamma_argument(rho, tau)
    kk = np.floor(tau).astype(np.int64)
    z = np.empty(tau.shape, dtype=complex)
    for k in np.unique(kk):
        sel = kk == k
        on_axis = sel & (tau == np.floor(tau))
        off = sel & ~on_axis
        if off.any():
            z[off] = lambert_w(int(k), arg[off])
        if on_axis.any():
            z[on_axis] = lambert_w(int(k), arg[on_axis], side=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        dz = 1j * _TWO_PI * (1.0 - 1.0 / (z + 1.0))
    return z, dz


def gamma_junction(rho: float) -> float:
    """Real point where the two halves of ``Gamma^rho`` meet (``<= -1``)."""
    if rho == 0.0:
        return -1.0
    return float(lambert_w(-1, -(1.0 - rho) * _INV_E).real)


def _gamma_phi(rho, tau):
    # phi(gamma(tau)) = L_0 of the same argument; avoids cancellation near -1
    return lambert_w(0, _gamma_argument(rho, tau))


@dataclass(frozen=True)
class ContourNodes:
    """Quadrature nodes on a contour.

    ``sum(f(z) * weight)`` approximates the oriented contour integral of
    ``f``.  ``phi`` holds ``phi_map(z)`` at the same nodes.
    """

    z: np.ndarray
    weight: np.ndarray
    phi: np.ndarray

    def __len__(self):
        return self.z.size


@dataclass(frozen=True)
class ContourSpec:
    """An admissible contour running from ``inf e^{-i theta}`` to ``inf e^{i theta}``.

    Parameters
    ----------
    kind : {"gamma", "wedge"}
        ``"gamma"`` is ``Gamma^rho``; ``"wedge"`` is two rays leaving the
        real point ``vertex`` at angles ``+-angle``.
    rho : float
        Shift of ``Gamma^rho``.
    vertex : float
        Real crossing of the wedge, must be ``< -1``.
    angle : float
        Opening angle of the wedge rays, in ``(pi/2, 3 pi/4)``.
    """

    kind: str = "gamma"
    rho: float = 0.0
    vertex: float = -2.0
    angle: float = 2.0 * np.pi / 3.0

    def __post_init__(self):
        if self.kind not in ("gamma", "wedge"):
            raise ValueError(f"unknown contour kind {self.kind!r}")
        if self.kind == "gamma" and not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")
        if self.kind == "wedge":
            if not self.vertex < -1.0:
                raise ValueError("wedge vertex must lie left of -1")
            if not np.pi / 2 < self.angle < 0.75 * np.pi:
                raise ValueError("wedge angle must lie in (pi/2, 3pi/4)")

    @classmethod
    def gamma(cls, rho: float = 0.0) -> "ContourSpec":
        return cls(kind="gamma", rho=rho)

    @classmethod
    def wedge(cls, vertex: float = -2.0, angle: float = 2.0 * np.pi / 3.0) -> "ContourSpec":
        return cls(kind="wedge", vertex=vertex, angle=angle)

    def crossing(self) -> float:
        """Real point where the contour crosses the real axis."""
        if self.kind == "gamma":
            return gamma_junction(self.rho)
        return self.vertex

    def piece(self, s, upper: bool):
        """Points, tangents and phi on one half, parametrised by ``s >= 0``.

        ``s = 0`` is the real crossing; the upper half runs away from it and
        the lower half runs towards it along the contour orientation.
        """
        s = np.asarray(s, dtype=float)
        if self.kind == "gamma":
            return self._gamma_piece(s, upper)
        e = np.exp(1j * self.angle * (1 if upper else -1))
        z = self.vertex + e * s
        dz = np.full(s.shape, e, dtype=complex)
        return z, dz, phi_map(z)

    def _gamma_piece(self, s, upper):
        rho = self.rho
        # the junction s = 0 is evaluated from the upper half
        tau = 1.0 + s * s if upper else np.where(s == 0, 1.0, -s * s)
        dtau = 2.0 * s if upper else -2.0 * s
        # e W + 1 without cancellation, W the Lambert argument
        q = rho - (1.0 - rho) * np.expm1(1j * _TWO_PI * (s * s if upper else -s * s))
        p = np.sqrt(2.0 * q)
        near = (np.abs(p) <= 0.03) & (s < 0.5)
        far = ~near
        zp1 = np.empty(s.shape, dtype=complex)
        phi = np.empty(s.shape, dtype=complex)
        if far.any():
            zf, _ = gamma_contour(rho, tau[far])
            zp1[far] = zf + 1.0
            phi[far] = _gamma_phi(rho, tau[far])
        if near.any():
            zp1[near] = _branch_series_p1(-p[near])
            phi[near] = _branch_series_p1(p[near]) - 1.0
        z = zp1 - 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            dz = 1j * _TWO_PI * (1.0 - 1.0 / zp1) * dtau
        # removable singularity at s = 0 when rho = 0
        tip = (s == 0) & (zp1 == 0)
        if tip.any():
            dz[tip] = np.sqrt(4 * np.pi) * np.exp(1j * (0.75 if upper else -0.75) * np.pi)
        return z, dz, phi

    def nodes(self, s_max: float, panels: int = 8, order: int = 20, grade: int = 3) -> ContourNodes:
        """Composite Gauss-Legendre nodes on the truncated contour.

        Each half is cut at parameter ``s_max`` and split into ``panels``
        equal panels; the first panel is refined geometrically ``grade``
        times towards the crossing.
        """
        x, wq = np.polynomial.legendre.leggauss(order)
        edges = np.linspace(0.0, s_max, panels + 1)
        if self.kind == "gamma" and self.rho > 0:
            # the contour map is singular at distance ~ sqrt(rho / 2 pi) from s = 0
            near = 0.5 * np.sqrt(self.rho / _TWO_PI)
            grade = max(grade, int(np.ceil(np.log2(edges[1] / near))) + 1)
        inner = edges[1] * 0.5 ** np.arange(grade, 0, -1)
        edges = np.concatenate([[0.0], inner, edges[1:]])
        a, b = edges[:-1, None], edges[1:, None]
        s = (0.5 * (b - a) * x + 0.5 * (a + b)).ravel()
        ws = (0.5 * (b - a) * wq).ravel()
        zu, dzu, pu = self.piece(s, True)
        zl, dzl, pl = self.piece(s, False)
        # upper half: s increasing; lower half traversed with s decreasing
        wl = -dzl * ws
        return ContourNodes(
            z=np.concatenate([zl, zu]),
            weight=np.concatenate([wl, dzu * ws]),
            phi=np.concatenate([pl, pu]),
        )


# ---------------------------------------------------------------------------
# steep-descent functions


@dataclass(frozen=True)
class SteepDescent:
    """Exponent functions of the flat kernel after scaling.

    ``f3 = (z^2 + 2z - phi^2 - 2phi)/2`` carries the time dependence,
    ``f2`` the label dependence and ``f1 = f11 + f12`` the position
    dependence, with ``phi = phi_map(z)``.
    """

    r1: float = 0.0
    r2: float = 0.0
    s1: float = 0.0
    s2: float = 0.0
    shift: float = 0.0

    @staticmethod
    def f3(z, phi=None):
        z = np.asarray(z, dtype=complex)
        phi = phi_map(z) if phi is None else phi
        return 0.5 * (z * z + 2 * z - phi * phi - 2 * phi)

    def f2(self, z, phi=None):
        z = np.asarray(z, dtype=complex)
        phi = phi_map(z) if phi is None else phi
        return 2 ** (5 / 3) * (
            self.r1 * (z + 1 + np.log(-z)) - self.r2 * (phi + 1 + np.log(-phi))
        )

    def f11(self, z, phi=None):
        z = np.asarray(z, dtype=complex)
        phi = phi_map(z) if phi is None else phi
        return 2 ** (1 / 3) * ((self.s1 - self.shift) * (z + 1) - (self.s2 - self.shift) * (phi + 1))

    def f12(self, z, phi=None):
        z = np.asarray(z, dtype=complex)
        phi = phi_map(z) if phi is None else phi
        return 2 ** (1 / 3) * self.shift * (phi - z)

    def f1(self, z, phi=None):
        z = np.asarray(z, dtype=complex)
        phi = phi_map(z) if phi is None else phi
        return self.f11(z, phi) + self.f12(z, phi)


# ---------------------------------------------------------------------------
# validation


@dataclass
class ContourReport:
    """Outcome of :func:`validate_contour`.

    ``claims`` maps claim names to booleans; ``details`` holds the worst
    observed margin for each claim.
    """

    kind: str
    rho: float
    claims: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.claims.values())

    @property
    def failed(self) -> list:
        return [name for name, good in self.claims.items() if not good]

    def summary(self) -> str:
        lines = [f"{self.kind} rho={self.rho}: {'ok' if self.ok else 'FAILED'}"]
        for name, good in self.claims.items():
            lines.append(f"  {'pass' if good else 'FAIL'}  {name}  ({self.details.get(name, '')})")
        return "\n".join(lines)


def _monotone(v, decreasing):
    d = np.diff(v)
    return bool(np.all(d < 0)) if decreasing else bool(np.all(d > 0))


def validate_contour(spec: ContourSpec | None = None, rho: float | None = None, tau_grid=None) -> ContourReport:
    """Check the geometric properties of a steep-descent contour on a grid.

    For ``Gamma^rho`` the checks cover the contour itself, its image under
    ``phi`` and the time exponent ``f3`` along it.  For a wedge contour the
    admissibility conditions are checked (crossing left of ``-1``, asymptotic
    angle, bounded and continuous ``phi``).

    Parameters
    ----------
    spec : ContourSpec, optional
        Contour to check; defaults to ``ContourSpec.gamma(rho)``.
    rho : float, optional
        Overrides ``spec.rho``.
    tau_grid : array_like, optional
        Positive parameter values ``>= 1``; the grid is mirrored to negative
        values.  Defaults to ``linspace(1.01, 20, 400)``.
    """
    if spec is None:
        spec = ContourSpec.gamma(0.0 if rho is None else rho)
    elif rho is not None and spec.kind == "gamma":
        spec = ContourSpec.gamma(rho)
    if tau_grid is None:
        tau_grid = np.linspace(1.01, 20.0, 400)
    tau_pos = np.sort(np.asarray(tau_grid, dtype=float))
    if spec.kind == "wedge":
        return _validate_wedge(spec, tau_pos)

    rho = spec.rho
    rep = ContourReport(kind="gamma", rho=rho)
    tau_neg = -tau_pos
    zp, dzp = gamma_contour(rho, tau_pos)
    zn, dzn = gamma_contour(rho, tau_neg)
    z0 = gamma_junction(rho)
    z0_left = complex(lambert_w(-1, _gamma_argument(rho, np.array([0.0]))[0]))

    # contour claims
    good = np.all(zp.imag > 0) and np.all(zn.imag < 0) and abs(z0_left - z0) < 1e-12 and z0 <= -1
    rep.claims["single real crossing z0 <= -1"] = bool(good)
    rep.details["single real crossing z0 <= -1"] = f"z0={z0:.12f}"

    err = abs(z0 + 1 + np.sqrt(2 * rho))
    rep.claims["z0 = -1 - sqrt(2 rho) + O(rho)"] = bool(err <= 2 * rho + 1e-14)
    rep.details["z0 = -1 - sqrt(2 rho) + O(rho)"] = f"|z0+1+sqrt(2rho)|={err:.3e}"

    allz = np.concatenate([zn, zp])
    rep.claims["Re z < z0 off the crossing"] = bool(np.all(allz.real < z0))
    rep.details["Re z < z0 off the crossing"] = f"max Re z - z0={np.max(allz.real) - z0:.3e}"

    mono = _monotone(zp.real, True) and _monotone(zn[::-1].real, False)
    rep.claims["Re z monotone on each half"] = mono

    big = np.abs(np.concatenate([tau_neg, tau_pos])) >= 2
    dre = np.abs(np.concatenate([dzn, dzp]).real)[big]
    rep.claims["|d Re z/d tau| <= 3 pi for |tau| >= 2"] = bool(np.all(dre <= 3 * np.pi))
    rep.details["|d Re z/d tau| <= 3 pi for |tau| >= 2"] = f"max={dre.max() if dre.size else 0:.3f}"

    ang_p = np.angle(dzp[-1])
    ang_n = np.angle(dzn[-1])
    dev = max(abs(ang_p - np.pi / 2), abs(ang_n - np.pi / 2))
    tol = 2.0 / np.abs(zp[-1])
    rep.claims["tangent angle tends to pi/2"] = bool(dev < tol)
    rep.details["tangent angle tends to pi/2"] = f"deviation={dev:.3e}"

    # image under phi, computed directly rather than through the identity
    php = phi_map(zp)
    phn = phi_map(zn)
    ident = np.max(np.abs(np.concatenate([php - _gamma_phi(rho, tau_pos), phn - _gamma_phi(rho, tau_neg)])))
    rep.claims["phi(gamma(tau)) = gamma({tau})"] = bool(ident < 1e-6)
    rep.details["phi(gamma(tau)) = gamma({tau})"] = f"max dev={ident:.3e}"

    # phi over one period: fractional parts in (0, 1)
    theta = np.linspace(0.0, 1.0, 801)[1:-1]
    ph = _gamma_phi(rho, theta)
    z0s = complex(_gamma_phi(rho, np.array([0.0]))[0]).real
    z1s = complex(_gamma_phi(rho, np.array([0.5]))[0]).real
    lo, hi = theta < 0.5, theta > 0.5
    crossings = bool(np.all(ph.imag[lo] < 0) and np.all(ph.imag[hi] > 0))
    rep.claims["phi image crosses R at z0* >= -1 and z1*"] = bool(crossings and z0s >= -1 - 1e-12 and z1s > z0s)
    rep.details["phi image crosses R at z0* >= -1 and z1*"] = f"z0*={z0s:.6f}, z1*={z1s:.6f}"

    key = "z0* = -1 iff rho = 0"
    rep.claims[key] = bool(abs(z0s + 1) < 1e-7) if rho == 0 else bool(z0s > -1)
    rep.details[key] = f"|z0*+1|={abs(z0s + 1):.3e}"

    rep.claims["Re phi > Re z0* off z0*"] = bool(np.all(ph.real > z0s))
    mono_phi = _monotone(ph.real[lo], False) and _monotone(ph.real[hi], True)
    rep.claims["Re phi monotone between z0* and z1*"] = mono_phi

    # time exponent, in the normalisation without the factor 1/2
    f3p = 2 * SteepDescent.f3(zp, php)
    f3n = 2 * SteepDescent.f3(zn, phn)
    f3z0 = complex(2 * SteepDescent.f3(np.array([z0 + 0j]))[0])
    rep.claims["f3 image crosses R once"] = bool(np.all(f3p.imag < 0) and np.all(f3n.imag > 0) and abs(f3z0.imag) < 1e-12)
    key = "f3(z0) = 0 when rho = 0"
    rep.claims[key] = bool(abs(f3z0) < 1e-7) if rho == 0 else True
    rep.details[key] = f"f3(z0)={f3z0.real:.3e}"
    allf = np.concatenate([f3n, f3p])
    rep.claims["Re f3 < f3(z0) off z0"] = bool(np.all(allf.real < f3z0.real))
    rep.claims["Re f3 monotone on each half"] = _monotone(f3p.real, True) and _monotone(f3n[::-1].real, False)

    # d f3/d tau = 4 pi i (gamma(tau) - gamma({tau}))
    dfp = 4j * np.pi * (zp - php)
    dfn = 4j * np.pi * (zn - phn)
    taus = np.concatenate([tau_neg, tau_pos])
    dfs = np.concatenate([dfn, dfp])
    big5 = np.abs(taus) >= 5
    ratio = np.abs(dfs.real[big5]) / (4 * np.pi**2 * np.abs(taus[big5]))
    key = "|d Re f3/d tau| >= 4 pi^2 |tau| for |tau| >= 5"
    rep.claims[key] = bool(np.all(ratio >= 1.0)) if ratio.size else True
    rep.details[key] = f"min ratio={ratio.min() if ratio.size else np.nan:.4f}"
    return rep


def _validate_wedge(spec, s_grid):
    # arc length from the vertex, fine enough to tell continuity from jumps
    s_grid = np.linspace(0.0, float(np.max(s_grid)), 4001)
    rep = ContourReport(kind="wedge", rho=np.nan)
    zu, dzu, pu = spec.piece(s_grid, True)
    zl, dzl, pl = spec.piece(s_grid, False)
    rep.claims["crossing left of -1"] = bool(spec.vertex < -1)
    ang = abs(np.angle(dzu[-1]))
    rep.claims["asymptotic angle in (pi/2, 3pi/4)"] = bool(np.pi / 2 < ang < 0.75 * np.pi)
    allp = np.concatenate([pl[::-1], pu])
    jumps = np.abs(np.diff(allp))
    rep.claims["phi bounded"] = bool(np.all(np.isfinite(allp)) and np.max(np.abs(allp)) < 10)
    rep.claims["phi continuous"] = bool(jumps.max() < 0.05)
    rep.details["phi continuous"] = f"max jump={jumps.max():.3e}"
    zz = np.concatenate([zl, zu])
    rep.claims["|z e^z| < 1/e on contour"] = bool(np.all(np.abs(zz * np.exp(zz)) < _INV_E))
    return rep
