"""Acceptance suite: one test per criterion, run at the stated tolerances.

A pass/fail line per criterion is printed in the terminal summary.  The
Monte Carlo criteria (5, 6, 8, 9) and the large-``t`` Fredholm trend (7)
take minutes each.
"""

from functools import lru_cache

import mpmath
import numpy as np
import pytest
from scipy import optimize

from onesided import experiments as ex
from onesided.fredholm import (
    LabelSet,
    build_operator,
    flat_window,
    fredholm_det,
    joint_cdf_airy1,
    joint_cdf_flat,
    refined_det,
)
from onesided.kernels import (
    FlatKernel,
    KernelPoint,
    biorthogonality_matrix,
    eval_finite_kernel,
    shifted_finite_kernel,
)
from onesided.lambert import ContourSpec, branch_index, gamma_junction, lambert_w, validate_contour
from onesided.simulate import BrownianGrid, InitialCondition, coupled_evolve

SEED = 0


@lru_cache(maxsize=None)
def report(name, **overrides):
    cfg = ex.default_config(name, seed=SEED)
    if overrides:
        cfg = cfg.replace(**overrides)
    return ex.run_experiment(cfg)


def flat_report():
    # the trend only involves determinants; the simulation rows are not part of it
    return report("flat", n_rep=0)


@pytest.mark.criterion(1, "Lambert W round trip and branch-point series order")
def test_lambert(record_property):
    worst = 0.0
    for k in range(-3, 4):
        rng = np.random.default_rng(200 + k)
        lo = (2 * k - 2) * np.pi if k > 0 else ((2 * k - 1) * np.pi if k < 0 else -np.pi)
        hi = (2 * k + 1) * np.pi if k > 0 else ((2 * k + 2) * np.pi if k < 0 else np.pi)
        w = rng.uniform(-8, 8, 6000) + 1j * rng.uniform(lo, hi, 6000)
        w = w[branch_index(w) == k][:1000]
        assert w.size == 1000
        z = w * np.exp(w)
        got = lambert_w(k, z)
        worst = max(worst, float(np.max(np.abs(got * np.exp(got) - z) / (1 + np.abs(z)))))
    ps = np.array([1e-2, 10**-2.5, 1e-3])
    z = (ps**2 / 2 - 1) * np.exp(-1.0)
    p = np.array([float(mpmath.sqrt(2 * (mpmath.e * mpmath.mpf(v) + 1))) for v in z])
    err = np.abs(lambert_w(0, z) - (-1 + p - p**2 / 3 + 11 * p**3 / 72))
    order = float(np.polyfit(np.log(p), np.log(err), 1)[0])
    record_property("detail", f"max scaled residual {worst:.2e}, series order {order:.2f}")
    assert worst <= 1e-12
    assert order >= 3.5


@pytest.mark.criterion(2, "contour properties on rho in {0, 0.1, 0.5}")
def test_contours(record_property):
    tau = np.linspace(1.01, 20.0, 400)
    failed = []
    for rho in (0.0, 0.1, 0.5):
        rep = validate_contour(rho=rho, tau_grid=tau)
        failed += [f"rho={rho}: {c}" for c, ok in rep.claims.items() if not ok]
    rho = 1e-4
    root = optimize.brentq(lambda w: w * np.exp(w) + np.exp(-1.0) * (1 - rho), -3, -1 - 1e-12)
    gap = abs(gamma_junction(rho) - root)
    record_property("detail", f"{len(failed)} failed claims, |z0 - root| = {gap:.1e}")
    assert not failed, failed
    assert gap <= 1e-4


@pytest.mark.criterion(3, "biorthogonality for n <= 6")
def test_biorthogonality(record_property):
    worst = max(float(np.max(np.abs(biorthogonality_matrix(n, t) - np.eye(n))))
                for n in range(1, 7) for t in (0.5, 1.0, 2.0))
    record_property("detail", f"max |B - I| = {worst:.1e}")
    assert worst <= 1e-7


@pytest.mark.criterion(4, "kernel consistency: sum vs double, contour invariance, shifted form")
def test_kernel_consistency(record_property):
    rng = np.random.default_rng(4)
    sum_err = 0.0
    for _ in range(20):
        n1, n2 = (int(v) for v in rng.integers(1, 6, 2))
        x1, x2 = rng.uniform(-7, 1, 2)
        a = eval_finite_kernel(KernelPoint(x1, n1), KernelPoint(x2, n2), 1.0)
        b = eval_finite_kernel(KernelPoint(x1, n1), KernelPoint(x2, n2), 1.0, method="double")
        sum_err = max(sum_err, abs(a - b))

    # at t = 4 all three wedges resolve every label gap in double precision
    t = 4.0
    sc = (2 * t) ** (1 / 3)
    ref = FlatKernel(t)
    wedges = [ContourSpec.wedge(-2.5, np.pi / 2 + 0.1), ContourSpec.wedge(-2.0, 2 * np.pi / 3),
              ContourSpec.wedge(-1.05, 3 * np.pi / 4 - 0.05)]
    contour_err = 0.0
    for spec in wedges:
        k = FlatKernel(t, spec)
        for n1 in range(-2, 3):
            for n2 in range(-2, 3):
                x1 = np.array([-t - n1 - sc, -t - n1 + 0.5 * sc])
                x2 = np.array([-t - n2 - 1.5 * sc, -t - n2 - 0.3 * sc])
                contour_err = max(contour_err, float(np.max(np.abs(k.block(x1, n1, x2, n2) - ref.block(x1, n1, x2, n2)))))

    x1, x2 = np.array([-1.0, -2.0]), np.array([-1.5, -3.0])
    flat = FlatKernel(1.0).block(x1, 0, x2, 1)
    shifted = [float(np.max(np.abs(shifted_finite_kernel(x1, 0, x2, 1, 1.0, M) - flat))) for M in (5, 10, 20)]
    record_property("detail", f"sum/double {sum_err:.1e}, contours {contour_err:.1e}, "
                              f"shifted M=5,10,20 {', '.join(f'{e:.1e}' for e in shifted)}")
    assert sum_err <= 1e-8
    assert contour_err <= 1e-8
    assert shifted[0] > shifted[1] > shifted[2]


@pytest.mark.slow
@pytest.mark.criterion(5, "Monte Carlo vs Fredholm, N = 2, 3 at t = 1")
def test_mc_vs_fredholm(record_property):
    rep = report("finite")
    zc = rep.summary["mc"]
    n = len(rep.select("mc-vs-fredholm"))
    record_property("detail", f"{zc['share_within']:.1%} of {n} points within 3 stderr, max |z| {zc['max_abs_z']:.2f}")
    assert n > 0
    assert zc["share_within"] >= 0.95


@pytest.mark.slow
@pytest.mark.criterion(6, "N = 2 step system vs GUE top eigenvalue")
def test_gue(record_property):
    rep = report("gue")
    rows = rep.select("mc-vs-gue")
    zs = [abs(r.z) if r.stderr > 0 else (0.0 if abs(r.estimate - r.exact) < 1e-12 else np.inf) for r in rows]
    record_property("detail", f"max |z| {max(zs):.2f} over {len(rows)} points")
    assert len(rows) == 20
    assert max(zs) <= 3.0


@pytest.mark.slow
@pytest.mark.criterion(7, "flat Fredholm CDF approaches Airy_1; kernel slope")
def test_flat_trend(record_property):
    sup = flat_report().summary["sup_fredholm_airy1"]
    dist = [sup[k] for k in sorted(sup, key=float)]
    slope = report("kernel").summary["loglog_slope"]
    record_property("detail", "sup distance " + " > ".join(f"{d:.2e}" for d in dist) + f", slope {slope:.3f}")
    assert all(b < a for a, b in zip(dist, dist[1:]))
    assert -0.45 <= slope <= -0.20


@pytest.mark.criterion(8, "attractiveness: sup gap 0.5 is never exceeded")
def test_attractiveness(record_property):
    # noise and shifts on the 2^-30 lattice: every DP sum is exact in double
    # precision, so the bound is checked without rounding slack
    K, T, q = 16, 4.0, 2.0**30
    worst = 0.0
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        base = -np.arange(K, dtype=float)
        shift = np.round(rng.uniform(-0.5, 0.5, K) * q) / q
        shift[rng.integers(K)] = 0.5 * rng.choice([-1.0, 1.0])
        g = BrownianGrid.generate(0, K - 1, T, 64, seed=seed)
        g.increments = np.round(g.increments * q) / q
        a, b = coupled_evolve(g, InitialCondition.custom(base), InitialCondition.custom(base + shift), T)
        worst = max(worst, float(np.max(np.abs(a - b))))
    record_property("detail", f"largest final gap {worst!r}")
    assert worst <= 0.5


@pytest.mark.slow
@pytest.mark.criterion(9, "slow decorrelation probability decreases in t")
def test_decorrelation(record_property):
    rep = report("decorrelation")
    probs = [rep.summary["probabilities"][k] for k in sorted(rep.summary["probabilities"], key=float)]
    record_property("detail", " > ".join(f"{p:.4f}" for p in probs))
    assert len(probs) == 3
    assert all(b < a for a, b in zip(probs, probs[1:]))


@pytest.mark.criterion(10, "Fredholm engine: rank one, doubling, bounds and monotonicity")
def test_fredholm_engine(record_property):
    def rank_one(x1, n1, x2, n2):
        return np.exp(-x1[:, None] - x2[None, :])

    exact = 1 - (1 - np.exp(-4.0)) / 2
    r1 = abs(refined_det(rank_one, LabelSet.of([0], [2.0]), [(0.0, 2.0)], 16, tol=1e-12).value - exact)

    lab = LabelSet.of([0, 3], [-1.0, -3.0])
    res = joint_cdf_flat(1.0, lab, tol=1e-6)
    n, v = res.resolution_trace[-1]
    wins = [flat_window(1.0, k, a) for k, a in zip(lab.labels, lab.thresholds)]
    doubling = abs(fredholm_det(build_operator(FlatKernel(1.0, conjugate=True), lab, wins, 2 * n)).value - v)

    # shipped grids: flat thresholds along s, finite offsets, Airy_1 points of the tagged run
    bad = []
    curves = {}
    for r in flat_report().select("fredholm-vs-airy1"):
        curves.setdefault(("flat", r.t), []).append((r.arg, r.estimate, +1))
        curves.setdefault(("airy1", 0), []).append((r.arg, r.exact, +1))
    for r in report("finite").select("mc-vs-fredholm"):
        curves.setdefault(("finite", r.label), []).append((r.arg, r.exact, -1))
    for s in ex.default_config("tagged").get("s"):
        curves.setdefault(("airy1-tagged", 0), []).append((s, joint_cdf_airy1([(-0.5, s)]).value, +1))
    for key, pts in curves.items():
        pts = sorted(set(pts))
        vals = np.array([p for _, p, _ in pts])
        direction = pts[0][2]
        if np.any(vals < -1e-8) or np.any(vals > 1 + 1e-8):
            bad.append(f"{key}: out of [0, 1]")
        if np.any(direction * np.diff(vals) < -1e-8):
            bad.append(f"{key}: not monotone")
    record_property("detail", f"rank one {r1:.1e}, doubling {doubling:.1e}, {len(curves)} grids, {len(bad)} violations")
    assert r1 <= 1e-8
    assert doubling <= 1e-6
    assert not bad, bad
