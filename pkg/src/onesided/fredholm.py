"""Fredholm determinants of projected kernels by Nystrom discretisation.

Each label carries a finite interval, either ``(-inf, a_k)`` truncated below
(``BelowThreshold``) or ``(s_k, inf)`` truncated above (``AboveThreshold``),
discretised with Gauss-Legendre nodes.  With nodes ``u`` and weights ``w``
the operator becomes the block matrix ``sqrt(w_u w_v) K(u, v)`` and the
determinant is computed by LU.  Parts of a kernel that jump across the
diagonal ``x1 = x2`` are discretised by product integration so that node
doubling still converges spectrally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg

from .kernels import Airy1Kernel, FiniteKernel, FlatKernel

__all__ = [
    "LabelSet",
    "FredholmOperator",
    "DeterminantResult",
    "KernelEvaluationError",
    "FredholmConvergenceError",
    "build_operator",
    "fredholm_det",
    "refined_det",
    "joint_cdf_flat",
    "joint_cdf_finite",
    "joint_cdf_airy1",
    "flat_window",
    "airy_window",
]

BELOW = "below"
ABOVE = "above"



class KernelEvaluationError(RuntimeError):
    """A kernel block could not be evaluated; carries the offending labels."""

    def __init__(self, n1, n2, cause):
        super().__init__(f"kernel evaluation failed for labels ({n1}, {n2}): {cause}")
        self.labels = (n1, n2)


class FredholmConvergenceError(RuntimeError):
    """Determinant did not settle under node doubling."""

    def __init__(self, trace):
        super().__init__(f"no convergence under refinement: {trace}")
        self.trace = trace


@dataclass(frozen=True)
class LabelSet:
    """Labels with one threshold each.

    Labels may be integers (particle labels) or reals (Airy times ``r``).
    """

    labels: tuple
    thresholds: tuple

    def __post_init__(self):
        if len(self.labels) == 0:
            raise ValueError("at least one label is required")
        if len(self.labels) != len(self.thresholds):
            raise ValueError("one threshold per label")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("labels must be distinct")

    @classmethod
    def of(cls, labels: Sequence, thresholds: Sequence) -> "LabelSet":
        return cls(tuple(labels), tuple(float(a) for a in thresholds))

    def __len__(self):
        return len(self.labels)


@dataclass
class FredholmOperator:
    """Discretised ``P K P`` on the union of the labelled intervals.

    ``matrix`` holds the blocks ``sqrt(w_u w_v) K(u, label_i; v, label_j)``;
    ``nodes[i]`` and ``weights[i]`` belong to ``labels[i]``.  Labels whose
    interval is empty are dropped.
    """

    matrix: np.ndarray
    labels: list
    nodes: list
    weights: list
    orientation: str

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def block(self, i: int, j: int) -> np.ndarray:
        off = np.cumsum([0] + [len(u) for u in self.nodes])
        return self.matrix[off[i]:off[i + 1], off[j]:off[j + 1]]


@dataclass
class DeterminantResult:
    value: float
    resolution_trace: list = field(default_factory=list)

    def __float__(self):
        return float(self.value)


def _interval_nodes(lo: float, hi: float, n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def _barycentric(x, w, y):
    """Matrix of Lagrange basis values ``l_j(y_q)`` for Gauss-Legendre nodes ``x``."""
    lam = (-1.0) ** np.arange(x.size) * np.sqrt((1.0 - x * x) * w)
    d = y[..., None] - x
    exact = d == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        c = lam / d
        B = c / np.sum(c, axis=-1, keepdims=True)
    if exact.any():
        hit = exact.any(axis=-1)
        B[hit] = exact[hit].astype(float)
    return B


def _volterra_block(u, panels, n, profile):
    """Product-integration matrix of ``f -> int_lo^{min(u, hi)} g(u - v) f(v) dv``.

    ``f`` is represented by its values at ``n`` Gauss-Legendre nodes on each
    panel ``(a, b)`` of ``[lo, hi]``; for each ``u`` the integral over a
    panel is taken with its own rule on ``[a, min(u, b)]``, interpolating
    ``f`` from the panel nodes.
    """
    x, w = np.polynomial.legendre.leggauss(n)
    V = np.zeros((u.size, n * len(panels)))
    chunk = max(1, 2_000_000 // (n * n))
    for p, (lo, hi) in enumerate(panels):
        b = np.minimum(u, hi)
        live = np.flatnonzero(b > lo)
        for c0 in range(0, live.size, chunk):
            idx = live[c0:c0 + chunk]
            half = 0.5 * (b[idx] - lo)
            v = lo + half[:, None] * (x + 1.0)
            om = half[:, None] * w
            g = profile(u[idx, None] - v)
            y = 2.0 * (v - lo) / (hi - lo) - 1.0
            B = _barycentric(x, w, y)
            V[idx, p * n:(p + 1) * n] = np.einsum("iq,iqj->ij", om * g, B)
    return V


def _panels(lo, hi, cuts):
    pts = sorted({lo, hi, *(c for c in cuts if lo < c < hi)})
    return list(zip(pts[:-1], pts[1:]))


def build_operator(kernel, labels: LabelSet, windows: Sequence[tuple], n_nodes: int,
                   orientation: str = BELOW) -> FredholmOperator:
    """Nystrom matrix of a projected kernel.

    Parameters
    ----------
    kernel : callable or kernel object
        Either ``kernel(x1, n1, x2, n2)`` returning the block of kernel
        values, or an object with ``smooth_block(x1, n1, x2, n2)`` and
        ``volterra(n1, n2)``; the latter describes a part ``-1(x1 >= x2)
        g(x1 - x2)`` that jumps across the diagonal and is discretised by
        product integration instead of the plain rule.  Intervals are then
        split at the endpoints of the other labels, where the discretised
        operator has kinks.
    labels : LabelSet
    windows : sequence of (lo, hi)
        Truncated integration interval per label; empty when ``hi <= lo``.
    n_nodes : int
        Gauss-Legendre nodes per label and panel, at least 8.
    orientation : {"below", "above"}
        Recorded for reference; the windows define the intervals.
    """
    if n_nodes < 8:
        raise ValueError("at least 8 nodes per label")
    if len(windows) != len(labels):
        raise ValueError("one window per label")
    split = hasattr(kernel, "smooth_block")
    live = [(lab, win) for lab, win in zip(labels.labels, windows) if win[1] > win[0]]
    cuts = [c for _, win in live for c in win] if split else []
    labs, nodes, weights, pans = [], [], [], []
    for lab, (lo, hi) in live:
        panels = _panels(lo, hi, cuts)
        uw = [_interval_nodes(a, b, n_nodes) for a, b in panels]
        labs.append(lab)
        nodes.append(np.concatenate([u for u, _ in uw]))
        weights.append(np.concatenate([w for _, w in uw]))
        pans.append(panels)
    size = sum(len(u) for u in nodes)
    mat = np.zeros((size, size))
    off = np.cumsum([0] + [len(u) for u in nodes])
    for i, (li, ui, wi) in enumerate(zip(labs, nodes, weights)):
        for j, (lj, uj, wj) in enumerate(zip(labs, nodes, weights)):
            try:
                blk = np.asarray(kernel.smooth_block(ui, li, uj, lj) if split else kernel(ui, li, uj, lj),
                                 dtype=float)
                blk = np.sqrt(wi)[:, None] * blk * np.sqrt(wj)[None, :]
                prof = kernel.volterra(li, lj) if split else None
                if prof is not None:
                    V = _volterra_block(ui, pans[j], n_nodes, prof)
                    blk = blk - np.sqrt(wi)[:, None] * V / np.sqrt(wj)[None, :]
            except Exception as exc:  # noqa: BLE001 - re-raised with labels attached
                raise KernelEvaluationError(li, lj, exc) from exc
            mat[off[i]:off[i + 1], off[j]:off[j + 1]] = blk
    return FredholmOperator(mat, labs, nodes, weights, orientation)


def fredholm_det(op: FredholmOperator) -> DeterminantResult:
    """``det(I - M)`` by LU with partial pivoting."""
    if not np.all(np.isfinite(op.matrix)):
        raise FloatingPointError("non-finite entries in the Fredholm matrix")
    if op.size == 0:
        return DeterminantResult(1.0, [(0, 1.0)])
    lu, piv = linalg.lu_factor(np.eye(op.size) - op.matrix, check_finite=False)
    d = np.diag(lu)
    sign = (-1.0) ** np.count_nonzero(piv != np.arange(op.size)) * np.prod(np.sign(d))
    value = float(sign * np.exp(np.sum(np.log(np.abs(d)))))
    return DeterminantResult(value, [(op.size, value)])


def refined_det(kernel, labels: LabelSet, windows: Sequence[tuple], n_nodes: int = 24,
                orientation: str = BELOW, tol: float = 1e-8, max_nodes: int = 400) -> DeterminantResult:
    """Determinant with node doubling until two successive values agree.

    Starts at ``n_nodes`` per label and doubles until the change is below
    ``tol``; the whole sequence is returned as ``resolution_trace`` and the
    finest value as ``value``.
    """
    trace = []
    n = n_nodes
    prev = None
    while True:
        val = fredholm_det(build_operator(kernel, labels, windows, n, orientation)).value
        trace.append((n, val))
        if prev is not None and abs(val - prev) <= tol:
            return DeterminantResult(val, trace)
        if 2 * n > max_nodes:
            raise FredholmConvergenceError(trace)
        prev = val
        n *= 2


# ---------------------------------------------------------------------------
# windows


def flat_window(t: float, n: int, a: float, depth: float = 9.0) -> tuple:
    """Truncation of ``(-inf, a)`` for label ``n`` of the flat system.

    The bulk of ``x_n(t)`` sits at ``-(n + t)`` with spread ``(2t)^{1/3}``
    (plus a Gaussian spread ``sqrt(t)`` at small ``t``); the window extends
    ``depth`` such spreads below the bulk.
    """
    scale = max((2 * t) ** (1 / 3), np.sqrt(t))
    lo = -(n + t) - depth * scale
    return (lo, a) if a > lo else (a, a)


def airy_window(s: float, depth: float = 8.0) -> tuple:
    """Truncation of ``(s, inf)`` for the Airy_1 kernel."""
    hi = max(s, 0.0) + depth
    return (s, hi)


def finite_window(t: float, n: int, a: float, depth: float = 9.0) -> tuple:
    """Truncation of ``(-inf, a)`` for label ``n`` of the finite system."""
    lo = -n - 2.0 * np.sqrt(n * t) - depth * np.sqrt(t) - 1.0
    return (lo, a) if a > lo else (a, a)


# ---------------------------------------------------------------------------
# probabilities


def joint_cdf_flat(t: float, labels: LabelSet, n_nodes: int = 24, tol: float = 1e-8,
                   resolution: float = 1.0, depth: float = 9.0) -> DeterminantResult:
    """``P(x_k(t) >= a_k for k in S)`` for the flat system.

    Computed as ``det(I - P_a K P_a)`` on the conjugated flat kernel.
    """
    kern = FlatKernel(t, conjugate=True, resolution=resolution)
    windows = [flat_window(t, int(n), a, depth) for n, a in zip(labels.labels, labels.thresholds)]
    return refined_det(kern, labels, windows, n_nodes, BELOW, tol)


def joint_cdf_finite(t: float, labels: LabelSet, n_nodes: int = 24, tol: float = 1e-8,
                     depth: float = 9.0) -> DeterminantResult:
    """``P(x_k(t) >= a_k for k in S)`` for particles ``1..N``, ``x_k(0) = -k``."""
    kern = FiniteKernel(t, conjugate=True)
    windows = [finite_window(t, int(n), a, depth) for n, a in zip(labels.labels, labels.thresholds)]
    return refined_det(kern, labels, windows, n_nodes, BELOW, tol)


def joint_cdf_airy1(points: Sequence[tuple], n_nodes: int = 24, tol: float = 1e-8,
                    depth: float = 8.0) -> DeterminantResult:
    """``P(A_1(r_k) <= s_k for all k)`` for points ``(r_k, s_k)``."""
    rs = [float(r) for r, _ in points]
    ss = [float(s) for _, s in points]
    labels = LabelSet.of(rs, ss)
    kern = Airy1Kernel()

    def block(x1, r1, x2, r2):
        return kern.block(x1, r1, x2, r2)

    windows = [airy_window(s, depth) for s in ss]
    return refined_det(block, labels, windows, n_nodes, ABOVE, tol)
