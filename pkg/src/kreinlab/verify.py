"""Preset invariant checks runnable from the CLI (`kreinlab verify`).

The fast level finishes in well under a minute; the full level adds the fine
grids and the 3d scattering run.  Each check prints one [PASS]/[FAIL] line.
A debug switch can deliberately collapse the pencil numerator onto the
squared Dirichlet matrix to demonstrate that the distinctness check catches
broken assemblies.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq

from . import bounds as bnd
from .assembly import (
    Tau2Stencil,
    apply_gauge,
    assemble_friedrichs,
    assemble_krein_pencil,
    assemble_tau2,
)
from .eigensolve import counting, hermitian_eigs, pencil_eigs
from .experiment import ExperimentConfig, run_counting_experiment
from .grid import build_domain, fatten, sample_coefficients
from .scattering import solve_lippmann_schwinger, uniform_problem

__all__ = ["run_verify_suite"]


def _random_config(rng, dim):
    """Small random mask with random admissible coefficients."""
    if dim == 1:
        d = build_domain({"type": "interval", "lo": 0.0, "hi": 1.0}, 1.0 / rng.integers(6, 14))
    else:
        d = build_domain(
            {"type": "disk", "center": [0.5, 0.5], "radius": 0.35 + 0.1 * rng.random()},
            1.0 / rng.integers(8, 14),
        )
    c = sample_coefficients(d, None, m=1)
    shape = c.box_shape
    a = tuple(1.0 + 2.0 * rng.random(shape) for _ in range(dim))
    theta = tuple(rng.uniform(-1.5, 1.5, shape) for _ in range(dim))
    q = 5.0 * rng.random(shape)
    from .grid import CoefficientField

    c = CoefficientField(
        c.box_origin, shape, c.spacing, a, theta, q,
        float(min(x.min() for x in a)), None,
    )
    return d, c


def _clamped_rod_buckling_roots(count=2):
    """Roots of the clamped-rod buckling determinant, smallest first."""

    def det(s):
        M = np.array(
            [
                [1.0, 0.0, 1.0, 0.0],
                [0.0, 1.0, 0.0, s],
                [1.0, 1.0, math.cos(s), math.sin(s)],
                [0.0, 1.0, -s * math.sin(s), s * math.cos(s)],
            ]
        )
        return float(np.linalg.det(M))

    roots = []
    ss = np.linspace(0.5, 16.0, 8000)
    vals = [det(s) for s in ss]
    for i in range(len(ss) - 1):
        if vals[i] * vals[i + 1] < 0:
            roots.append(brentq(det, ss[i], ss[i + 1], xtol=1e-13))
            if len(roots) == count:
                break
    return [r * r for r in roots]


# --- individual checks; each returns a detail string or raises AssertionError


def check_grid_rasterization():
    d = build_domain({"type": "interval", "lo": 0.0, "hi": 1.0}, 1.0 / 8)
    assert d.n_nodes == 7 and abs(d.volume - 7.0 / 8) < 1e-15
    sq = build_domain({"type": "box", "lo": [0, 0], "hi": [1, 1]}, 0.25)
    assert sq.n_nodes == 9 and abs(sq.volume - 9.0 / 16) < 1e-15
    return "interval 7/8, square 9/16"


def check_fatten_prefix():
    d = build_domain({"type": "box", "lo": [0, 0], "hi": [1, 1]}, 0.25)
    f1 = fatten(d, 1)
    f2 = fatten(fatten(d, 1), 1)
    g2 = fatten(d, 2)
    assert f2.box_shape == g2.box_shape and np.array_equal(f2.mask, g2.mask)
    assert np.allclose(f1.coordinates()[: d.n_nodes], d.coordinates())
    assert f1.box_shape == (5, 5)
    return "dilation semigroup and prefix embedding hold"


def check_stencil_rows():
    d = build_domain({"type": "interval", "lo": 0.0, "hi": 1.0}, 0.25)
    c = sample_coefficients(d, {"b": 2.0, "q": "x1"}, m=1)
    T = Tau2Stencil(c).matrix().toarray()
    h = d.spacing
    theta = h * 2.0
    mid = 2  # interior box node
    assert abs(T[mid, mid - 1] - (-np.exp(-1j * theta) / h**2)) < 1e-12
    assert abs(T[mid, mid + 1] - (-np.exp(1j * theta) / h**2)) < 1e-12
    assert abs(T[mid, mid] - (2.0 / h**2 + c.q[mid])) < 1e-12
    free = sample_coefficients(d, {"q": "x1^2"}, m=1)
    ones = np.ones(free.box_shape)
    out = assemble_tau2(d, free).apply(ones)
    inner = slice(1, -1)
    assert np.allclose(out[inner], free.q[inner], atol=1e-12)
    return "link phases and q-row identities hold"


def check_hermiticity():
    rng = np.random.default_rng(7)
    d, c = _random_config(rng, 2)
    num, den = assemble_krein_pencil(d, c, m=1)
    for M in (num.matrix, den.matrix):
        dev = abs(M - M.getH()).max()
        assert dev <= 1e-12 * abs(M).max()
    return "assembled blocks Hermitian to 1e-12 relative"


def check_gauge_invariance():
    rng = np.random.default_rng(0)
    d, c = _random_config(rng, 2)
    chi = rng.uniform(-math.pi, math.pi, c.box_shape)
    f0 = hermitian_eigs(assemble_friedrichs(d, c, 1)).values
    f1 = hermitian_eigs(assemble_friedrichs(d, apply_gauge(c, chi), 1)).values
    dev = np.max(np.abs(f0 - f1) / np.abs(f0))
    assert dev < 1e-10, f"gauge conjugation moved eigenvalues by {dev:.2e}"
    num0, den0 = assemble_krein_pencil(d, c, 1)
    num1, den1 = assemble_krein_pencil(d, apply_gauge(c, chi), 1)
    p0 = pencil_eigs(num0, den0, k=5).values
    p1 = pencil_eigs(num1, den1, k=5).values
    dev = np.max(np.abs(p0 - p1) / np.abs(p0))
    assert dev < 1e-10, f"gauge conjugation moved pencil eigenvalues by {dev:.2e}"
    return "spectra invariant under random gauge (seed 0) to 1e-10"


def check_diamagnetic():
    rng = np.random.default_rng(0)
    for trial in range(20):
        dim = 1 if trial % 2 == 0 else 2
        d, c = _random_config(rng, dim)
        free = sample_coefficients(d, None, m=1)
        lam = hermitian_eigs(assemble_friedrichs(d, c, 1), k=1).min()
        lam_free = hermitian_eigs(assemble_friedrichs(d, free, 1), k=1).min()
        assert lam >= c.eps_a * lam_free, (
            f"trial {trial}: {lam} < eps_a*free = {c.eps_a * lam_free}"
        )
    return "ground energy dominates eps_a times the free one on 20 random configs"


def check_pencil_domination():
    rng = np.random.default_rng(3)
    for dim in (1, 2):
        d, c = _random_config(rng, dim)
        num, den = assemble_krein_pencil(d, c, 1)
        pv = pencil_eigs(num, den).values
        fv = hermitian_eigs(den).values
        assert np.all(pv >= fv), "pencil eigenvalue fell below its Dirichlet partner"
    return "lambda_j(pencil) >= lambda_j(dirichlet), every j, exact"


def check_pencil_distinct(collapse=False):
    d = build_domain({"type": "interval", "lo": 0.0, "hi": 1.0}, 1.0 / 40)
    c = sample_coefficients(d, None, m=1)
    num, den = assemble_krein_pencil(d, c, 1)
    if collapse:
        from .assembly import HermitianOperator

        num = HermitianOperator((den.matrix @ den.matrix).tocsr(), d, 4, c)
    p1 = pencil_eigs(num, den, k=1).min()
    f1 = hermitian_eigs(den, k=1).min()
    assert p1 > 4.0 * f1 * 0.9, (
        f"pencil ground value {p1:.6g} does not separate from dirichlet {f1:.6g}; "
        "numerator has collapsed onto the squared Dirichlet matrix"
    )
    return f"ground values separate ({p1:.4g} vs {f1:.4g})"


def check_counting_rules():
    from .eigensolve import Spectrum

    vals = np.array([math.pi**2 * j * j for j in range(1, 10)])
    s = Spectrum(vals, np.zeros_like(vals), len(vals))
    assert counting(s, 50.0) == 2
    assert counting(s, math.pi**2) == 0
    sq = np.array([2, 5, 5, 8, 10, 10]) * math.pi**2
    s2 = Spectrum(sq, np.zeros_like(sq), len(sq))
    assert counting(s2, 50.0) == 3
    alpha = 3.7
    s3 = Spectrum(vals * alpha, np.zeros_like(vals), len(vals))
    for lam in (15.0, 55.0, 200.0):
        assert counting(s3, lam) == counting(s, lam / alpha)
    return "strictness, multiplicity, and scaling rules hold"


def check_minimization_oracle(pairs=((1, 1), (2, 1), (3, 2))):
    for n, m in pairs:
        closed = bnd.krein_minimum(n, m)
        oracle = bnd.krein_minimum_oracle(n, m)
        assert abs(oracle.value - closed.value) <= 1e-6 * closed.value
        assert abs(oracle.alpha_star - closed.alpha_star) <= 1e-6 * closed.alpha_star
        fc = bnd.friedrichs_minimum(n, m)
        fo = bnd.friedrichs_minimum_oracle(n, m)
        assert abs(fo.value - fc.value) <= 1e-6 * fc.value
        for alpha in (0.5, 2.0 * m / n, 3.0):
            ref = bnd.friedrichs_integral(alpha, n, m)
            quad = bnd.friedrichs_integral_quadrature(alpha, n, m)
            assert abs(quad - ref) <= 1e-8 * ref
    return f"oracle matches closed forms on {len(pairs)} (n, m) pairs"


def check_constant_chain():
    for n in range(1, 5):
        for m in range(1, 4):
            rep = bnd.shape_factor_chain(n, m)
            assert rep["passed"], f"chain failed at (n, m) = ({n}, {m})"
    return "1 < krein < friedrichs < e on (1..4) x (1..3)"


def check_weyl_forms():
    d = build_domain({"type": "box", "lo": [0, 0], "hi": [1, 1]}, 1.0 / 12)
    a = np.diag([1.0, 4.0])
    w1 = bnd.weyl_leading(100.0, d, a, 1)
    w2 = bnd.weyl_leading_angular(100.0, d, a, 1)
    assert abs(w1 - w2) <= 1e-6 * w1
    return "determinant and angular forms agree to 1e-6"


def check_scattering_free():
    d = build_domain({"type": "interval", "lo": 0.0, "hi": 1.0}, 1.0 / 64)
    p = uniform_problem(1, 0.0, -0.5, 0.5, 64)
    wave = solve_lippmann_schwinger(p, np.array([3.0]), domain=d)
    x = d.coordinates()[:, 0]
    assert np.max(np.abs(wave.values_on_domain - np.exp(3j * x))) < 1e-12
    assert abs(wave.l2_on_domain - d.volume) < 1e-10
    return "zero potential reproduces the plane wave and |Omega| exactly"


def check_branch_symmetry():
    pp = uniform_problem(1, 0.6, -0.4, 0.4, 200, sign=+1)
    pm = uniform_problem(1, 0.6, -0.4, 0.4, 200, sign=-1)
    xi = np.array([2.0])
    plus = solve_lippmann_schwinger(pp, xi)
    minus = solve_lippmann_schwinger(pm, -xi)
    assert np.max(np.abs(plus.values_on_support - np.conj(minus.values_on_support))) < 1e-12
    return "opposite branches are complex conjugates (with xi reflected)"


def check_dirichlet_1d_fine():
    d = build_domain({"type": "interval", "lo": 0.0, "hi": 1.0}, 1.0 / 2000)
    c = sample_coefficients(d, None, m=1)
    vals = hermitian_eigs(assemble_friedrichs(d, c, 1), k=5).values
    exact = np.array([math.pi**2 * j * j for j in range(1, 6)])
    rel = np.max(np.abs(vals - exact) / exact)
    assert rel < 0.01, f"relative error {rel:.3e}"
    return f"first five eigenvalues within {rel:.2e} of pi^2 j^2"


def check_buckling_1d_fine():
    targets = _clamped_rod_buckling_roots(2)
    d = build_domain({"type": "interval", "lo": 0.0, "hi": 1.0}, 1.0 / 2000)
    c = sample_coefficients(d, None, m=1)
    num, den = assemble_krein_pencil(d, c, 1)
    vals = pencil_eigs(num, den, k=2).values
    rel = np.max(np.abs(vals - targets) / np.asarray(targets))
    assert rel < 0.01, f"relative error {rel:.3e}"
    return f"two smallest buckling values within {rel:.2e} of the determinant roots"


def check_square_experiment():
    cfg = ExperimentConfig(
        domain={"type": "box", "lo": [0, 0], "hi": [1, 1], "h": 1.0 / 48},
        lambda_grid=[50.0, 100.0, 200.0, 300.0],
        label="unit-square-free",
    )
    report = run_counting_experiment(cfg)
    assert report.passed, f"violations: {report.violations}"
    return "unit square free-case bound checks pass at all trusted lambdas"


def check_squarewell_fine():
    from .verify_oracles import square_well_wave

    for k in (1.0, 2.0, 5.0):
        p = uniform_problem(1, 0.75, -0.5, 0.5, 1600)
        wave = solve_lippmann_schwinger(p, np.array([k]))
        ref = square_well_wave(p.points[:, 0], k, 0.75, 0.5)
        assert np.max(np.abs(wave.values_on_support - ref)) < 1e-6
    return "square-well waves match the transmission solution to 1e-6"


def check_large_xi_ray():
    d = build_domain({"type": "interval", "lo": 0.0, "hi": 1.0}, 1.0 / 200)
    p = uniform_problem(1, 1.0, 0.3, 0.7, 1200)
    devs = []
    for t in (5.0, 10.0, 20.0):
        wave = solve_lippmann_schwinger(p, np.array([t]), domain=d)
        x = d.coordinates()[:, 0]
        dev = np.sqrt(np.sum(np.abs(wave.values_on_domain - np.exp(1j * t * x)) ** 2) * d.spacing)
        devs.append(dev)
    assert devs[0] > devs[1] > devs[2], f"deviations {devs} not decreasing"
    return "distance to the plane wave decreases along xi = (5, 10, 20)"


def check_ls3d():
    d = build_domain({"type": "box", "lo": [0, 0, 0], "hi": [1, 1, 1]}, 1.0 / 8)
    p0 = uniform_problem(3, 0.0, -0.5, 0.5, 10)
    xi = np.array([2.0, 0.0, 0.0])
    free = solve_lippmann_schwinger(p0, xi, domain=d)
    assert abs(free.l2_on_domain - d.volume) < 1e-10 * d.volume
    p1 = uniform_problem(3, 0.01, -0.5, 0.5, 10)
    born = solve_lippmann_schwinger(p1, xi, domain=d)
    assert abs(born.l2_on_domain - d.volume) < 0.01 * d.volume
    return "3d free case exact; Born-regime mass within 1% of |Omega|"


FAST_CHECKS = [
    ("grid rasterization", check_grid_rasterization),
    ("fatten prefix and semigroup", check_fatten_prefix),
    ("stencil rows", check_stencil_rows),
    ("hermiticity", check_hermiticity),
    ("gauge invariance", check_gauge_invariance),
    ("diamagnetic lower bound", check_diamagnetic),
    ("pencil domination", check_pencil_domination),
    ("pencil vs dirichlet distinctness", check_pencil_distinct),
    ("counting rules", check_counting_rules),
    ("minimization oracle", check_minimization_oracle),
    ("constant chain", check_constant_chain),
    ("weyl forms", check_weyl_forms),
    ("scattering free case", check_scattering_free),
    ("branch symmetry", check_branch_symmetry),
]

FULL_CHECKS = FAST_CHECKS + [
    ("dirichlet 1d fine grid", check_dirichlet_1d_fine),
    ("buckling 1d fine grid", check_buckling_1d_fine),
    ("unit square experiment", check_square_experiment),
    ("square well fine", check_squarewell_fine),
    ("large xi ray", check_large_xi_ray),
    ("scattering 3d", check_ls3d),
]


def run_verify_suite(level: str = "fast", collapse_pencil: bool = False, echo=print) -> bool:
    """Run the preset invariant checks; returns True when everything passed."""
    if level not in ("fast", "full"):
        raise ValueError(f"unknown verify level {level!r}")
    checks = list(FAST_CHECKS if level == "fast" else FULL_CHECKS)
    ok = True
    for name, fn in checks:
        try:
            if fn is check_pencil_distinct:
                detail = fn(collapse=collapse_pencil)
            else:
                detail = fn()
            echo(f"[PASS] {name}: {detail}")
        except Exception as exc:
            ok = False
            echo(f"[FAIL] {name}: {exc}")
    return ok
