"""Acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line (shown in the terminal summary) before
asserting. Error conventions:

* the smooth-phantom convergence checks use the fixed subdomain
  ``[-0.9, 0.9]^2``, away from the corner singularities of the solutions;
* anisotropy and determinant errors are relative errors over unmasked
  interior nodes (boundary ring excluded); the all-node value is printed
  alongside.
"""
import time

import numpy as np
import sympy as sp

from anisopd.anisotropy import (
    reconstruct_least_squares,
    reconstruct_pointwise,
    rotated_illumination_family,
)
from anisopd.conductivity import AnisotropyXiZeta, phantom, sqrt_of_anisotropy, unit_spd
from anisopd.experiments import ANISO_STREAM, ExperimentConfig, compute_errors, run_experiment
from anisopd.forward import NoiseSpec, add_noise, power_densities, solve_illuminations
from anisopd.frames import gram_schmidt_transfer, matvec, xy_fields
from anisopd.grid import (
    DirichletSolver,
    Grid,
    elliptic_operator,
    impose_dirichlet_rows,
)

from conftest import observed_order, record_acceptance, subdomain, triplet_data

SEEDS = range(1, 11)


def _run(name, **changes):
    return run_experiment(ExperimentConfig.load(name).replace(out=None, **changes), write=False)


def _pct(v):
    return f"{100 * v:.4g}%"


# 1 -------------------------------------------------------------------------

def test_criterion_01_manufactured_solution():
    x, y = sp.symbols("x y")
    a11 = 2 + sp.sin(sp.pi * x / 2) * sp.cos(y) / 2
    a22 = sp.Rational(3, 2) + sp.exp(-x**2 - y**2) / 2
    a12 = sp.sin(x + y) * sp.Rational(3, 10)
    u = sp.exp(x) * sp.sin(sp.pi * y) + x**2 * y
    flux = [a11 * sp.diff(u, x) + a12 * sp.diff(u, y), a12 * sp.diff(u, x) + a22 * sp.diff(u, y)]
    f = sp.diff(flux[0], x) + sp.diff(flux[1], y)
    lam = {k: sp.lambdify((x, y), e, "numpy") for k, e in
           {"a11": a11, "a22": a22, "a12": a12, "u": u, "f": f}.items()}

    t0 = time.perf_counter()
    errs = []
    for n in (32, 64, 128):
        g = Grid(n)
        X, Y = g.meshgrid()
        ev = {k: np.broadcast_to(fn(X, Y), g.shape).astype(float) for k, fn in lam.items()}
        coeff = np.array([[ev["a11"], ev["a12"]], [ev["a12"], ev["a22"]]])
        A = impose_dirichlet_rows(g, elliptic_operator(g, coeff))
        b = np.where(g.boundary_mask, ev["u"], ev["f"]).ravel()
        uh = DirichletSolver(A, n).solve(b).reshape(g.shape)
        errs.append(np.sqrt(np.mean((uh - ev["u"]) ** 2)))
    runtime = time.perf_counter() - t0
    orders = observed_order(errs)
    ok = orders.min() >= 1.9 and runtime < 30
    record_acceptance(1, ok, f"L2 errors {np.array(errs)}, orders {np.round(orders, 3)}, {runtime:.1f}s")
    assert ok


# 2 -------------------------------------------------------------------------

def test_criterion_02_algebraic_identity():
    errs, hs = [], []
    for n in (32, 64, 128):
        c, _, H = triplet_data("smooth", n)
        D = xy_fields(*gram_schmidt_transfer(H))
        res = np.hypot(*(matvec(c.aniso.matrix(), D.X) - D.Y))
        errs.append(res[subdomain(c.grid)].max())
        hs.append(c.grid.h)
    orders = observed_order(errs)
    C = max(e / h**2 for e, h in zip(errs, hs))
    ok = orders.min() >= 1.0
    record_acceptance(2, ok, f"max residual on [-0.9,0.9]^2 {np.array(errs)}, orders {np.round(orders, 3)}, "
                             f"C = max err/h^2 = {C:.3g}")
    assert ok


# 3, 4 ----------------------------------------------------------------------

def _aniso_line(rep):
    parts = []
    for name in ("xi", "zeta"):
        parts.append(f"{name} L2 {_pct(rep.rel_l2(name, True))} Linf {_pct(rep.rel_linf(name, True))} "
                     f"(all nodes L2 {_pct(rep.rel_l2(name))} Linf {_pct(rep.rel_linf(name))})")
    return "; ".join(parts)


def test_criterion_03_anisotropy_smooth_noiseless():
    t0 = time.perf_counter()
    rep = _run("fig2_smooth_noiseless")
    runtime = time.perf_counter() - t0
    ok = rep.rel_l2("xi", True) <= 0.01 and rep.rel_l2("zeta", True) <= 0.03 and runtime < 60
    record_acceptance(3, ok, f"{_aniso_line(rep)}, {runtime:.1f}s")
    assert ok


def test_criterion_04_anisotropy_rough_noiseless():
    rep = _run("fig2_rough_noiseless")
    xi2, ze2 = rep.rel_l2("xi", True), rep.rel_l2("zeta", True)
    xii, zei = rep.rel_linf("xi", True), rep.rel_linf("zeta", True)
    checks = {
        "xi L2 in [1%,20%]": 0.01 <= xi2 <= 0.20,
        "zeta L2 in [3%,40%]": 0.03 <= ze2 <= 0.40,
        "xi Linf > 50%": xii > 0.5,
        "zeta Linf > 50%": zei > 0.5,
    }
    failed = [k for k, v in checks.items() if not v]
    ok = not failed
    record_acceptance(4, ok, f"{_aniso_line(rep)}" + (f"; failed: {', '.join(failed)}" if failed else ""))
    assert ok, failed


# 5 -------------------------------------------------------------------------

def _rotated_data(c, p):
    fam = rotated_illumination_family(p)
    us = solve_illuminations(c, [il for t in fam for il in t])
    return [power_densities(c, us[3 * j:3 * j + 3]) for j in range(p)]


def _ls_errors(c, Hs, alpha, seed):
    Ds = []
    for j, H in enumerate(Hs):
        Hn = add_noise(H, NoiseSpec(alpha, seed), (ANISO_STREAM, j))
        Ds.append(xy_fields(*gram_schmidt_transfer(Hn, strict=False)))
    est = reconstruct_least_squares(Ds)
    mask = est.mask | c.grid.boundary_mask
    return compute_errors(est.xi, c.xi, mask)[0], compute_errors(est.zeta, c.zeta, mask)[0]


def test_criterion_05_least_squares_robustness():
    alpha = 0.1
    c = phantom("smooth", Grid(128))
    medians = {}
    for p in (10, 30, 100):
        Hs = _rotated_data(c, p)
        E = np.array([_ls_errors(c, Hs, alpha, s) for s in SEEDS])
        medians[p] = np.median(E, axis=0)
        if p == 100:
            at_seed1 = E[0]
    # the direct loop above is the same computation as the bundled p = 100 run
    rep = _run("fig2_noisy_p100", seed=1)
    same = np.allclose(at_seed1, [rep.rel_l2("xi", True), rep.rel_l2("zeta", True)], rtol=1e-12)
    bound = all(v <= 0.40 for v in medians[100])
    mono = {name: medians[10][i] >= medians[30][i] >= medians[100][i] for i, name in enumerate(("xi", "zeta"))}
    ok = bound and all(mono.values()) and same
    detail = ", ".join(f"p={p}: xi {_pct(m[0])} zeta {_pct(m[1])}" for p, m in medians.items())
    notes = [f"{k} median not monotone in p" for k, v in mono.items() if not v]
    record_acceptance(5, ok, f"median interior L2 over seeds 1-10 at alpha=0.1%: {detail}"
                             + (f"; failed: {', '.join(notes)}" if notes else ""))
    assert same
    assert ok, notes


# 6, 7 ----------------------------------------------------------------------

def test_criterion_06_theta_pipeline_noiseless():
    rep = _run("fig4_smooth_noiseless")
    th, ds = rep.rel_l2("theta", True), rep.rel_l2("detsqrt", True)
    ok = th <= 0.005 and ds <= 0.005
    record_acceptance(6, ok, f"theta L2 {_pct(th)} (all {_pct(rep.rel_l2('theta'))}), "
                             f"detsqrt L2 {_pct(ds)} (all {_pct(rep.rel_l2('detsqrt'))})")
    assert ok


def test_criterion_07_theta_pipeline_noisy():
    E = np.array([[r.rel_l2("detsqrt", True), r.rel_l2("theta", True)]
                  for r in (_run("fig4_noise30", seed=s) for s in SEEDS)])
    ds, th = np.median(E, axis=0)
    ok = ds <= 0.10 and th <= 0.30
    record_acceptance(7, ok, f"median over seeds 1-10 at alpha=30%: detsqrt L2 {_pct(ds)}, theta L2 {_pct(th)}")
    assert ok


# 8, 9 ----------------------------------------------------------------------

def test_criterion_08_coupled_self_consistency():
    rep = _run("fig5_smooth_noiseless")
    u1, u2 = rep.rel_l2("u1"), rep.rel_l2("u2")
    ok = u1 <= 1e-9 and u2 <= 1e-9
    record_acceptance(8, ok, f"u1 L2 {u1:.3g}, u2 L2 {u2:.3g} (all nodes)")
    assert ok


def test_criterion_09_coupled_rough():
    clean = _run("fig5_rough_noiseless").rel_l2("detsqrt", True)
    noisy = float(np.median([_run("fig5_rough_noise30", seed=s).rel_l2("detsqrt", True) for s in SEEDS]))
    ok = clean <= 0.30 and noisy <= 0.30 and noisy <= 2 * clean
    record_acceptance(9, ok, f"detsqrt L2 noiseless {_pct(clean)}, alpha=30% median {_pct(noisy)}, "
                             f"ratio {noisy / clean:.3g}")
    assert ok


# 10 ------------------------------------------------------------------------

def test_criterion_10_invariants():
    rng = np.random.default_rng(2024)
    xi = np.exp(rng.uniform(-1.5, 1.5, 2000))
    zeta = rng.uniform(-2, 2, 2000)
    M = unit_spd(xi, zeta)
    det_err = np.abs(M[0, 0] * M[1, 1] - M[0, 1] ** 2 - 1).max()
    S = sqrt_of_anisotropy(AnisotropyXiZeta(xi, zeta)).matrix()
    sq_err = (np.abs(np.einsum("abk,bck->ack", S, S) - M) / np.maximum(1, np.abs(M))).max()

    _, _, H = triplet_data("smooth", 128)
    F1, F2 = gram_schmidt_transfer(H)
    ttt = max(np.abs(np.einsum("kixy,kjxy->ijxy", F.t, F.t) - F.H_inv).max() for F in (F1, F2))
    v12 = max(np.abs(F.V[0, 1]).max() for F in (F1, F2))
    D = xy_fields(F1, F2)
    a, b = reconstruct_pointwise(D), reconstruct_least_squares([D])
    bitwise = all(np.array_equal(getattr(a, k), getattr(b, k), equal_nan=True) for k in ("xi", "zeta", "mask"))

    runs = [_run("fig4_noise30", n=32, seed=7).to_dict() for _ in range(2)]
    noisy_runs = [_run("fig2_noisy_p100", n=32, p=5, seed=7).to_dict() for _ in range(2)]
    deterministic = runs[0] == runs[1] and noisy_runs[0] == noisy_runs[1]

    checks = {
        "det Atilde^2 = 1 (1e-14)": det_err <= 1e-14,
        "T^T T = H^-1 (1e-10)": ttt <= 1e-10,
        "sqrt round trip (1e-12)": sq_err <= 1e-12,
        "V12 = 0": v12 == 0.0,
        "p=1 least squares == pointwise": bitwise,
        "noisy runs deterministic": deterministic,
    }
    failed = [k for k, v in checks.items() if not v]
    ok = not failed
    record_acceptance(10, ok, f"det {det_err:.2g}, TtT {ttt:.2g}, sqrt {sq_err:.2g}, V12 {v12:g}, "
                              f"bitwise {bitwise}, deterministic {deterministic}")
    assert ok, failed
