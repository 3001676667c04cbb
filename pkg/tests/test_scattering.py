"""Kernels, Nystrom solves, and the cphi estimate.

The square-well reference solution below is derived independently: plane
waves outside the well, e^{+-i kappa x} inside with kappa^2 = k^2 - q0, and
a 4x4 linear system expressing continuity of the value and the derivative at
both edges.
"""

import math

import numpy as np
import pytest

from kreinlab import (
    ConfigError,
    build_domain,
    cphi_estimate,
    default_xi_grid,
    green_kernel,
    solve_lippmann_schwinger,
    uniform_problem,
)
from kreinlab.scattering import write_cphi_json, write_waves_csv


def transmission_reference(x, k, q0, a):
    """Piecewise plane-wave solution for q = q0 on [-a, a], incidence e^{ikx}."""
    kap = np.sqrt(complex(k * k - q0))
    eka, ekA = np.exp(1j * k * a), np.exp(-1j * k * a)
    em, ep = np.exp(-1j * kap * a), np.exp(1j * kap * a)
    M = np.array(
        [
            [-eka, em, ep, 0.0],
            [1j * k * eka, 1j * kap * em, -1j * kap * ep, 0.0],
            [0.0, ep, em, -eka],
            [0.0, 1j * kap * ep, -1j * kap * em, -1j * k * eka],
        ]
    )
    rhs = np.array([ekA, 1j * k * ekA, 0.0, 0.0])
    refl, amp_plus, amp_minus, trans = np.linalg.solve(M, rhs)
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape, dtype=complex)
    left, mid, right = x < -a, (x >= -a) & (x <= a), x > a
    out[left] = np.exp(1j * k * x[left]) + refl * np.exp(-1j * k * x[left])
    out[mid] = amp_plus * np.exp(1j * kap * x[mid]) + amp_minus * np.exp(-1j * kap * x[mid])
    out[right] = trans * np.exp(1j * k * x[right])
    return out


def test_kernel_values():
    assert green_kernel(3, 1.0, 1.0) == pytest.approx(
        np.exp(1j) / (4 * math.pi), rel=1e-14
    )
    assert green_kernel(1, 2.0, 0.0) == pytest.approx(0.25j, rel=1e-14)
    # incoming branch is the conjugate, prefactor included
    for dim, r in ((1, 0.3), (3, 0.7)):
        plus = green_kernel(dim, 1.7, r, +1)
        minus = green_kernel(dim, 1.7, r, -1)
        assert minus == pytest.approx(np.conj(plus), rel=1e-14)


def test_kernel_3d_singular_at_zero():
    with pytest.raises(ValueError, match="singular"):
        green_kernel(3, 1.0, 0.0)


def test_kernel_rejects_bad_arguments():
    with pytest.raises(ValueError):
        green_kernel(1, 0.0, 1.0)
    with pytest.raises(ConfigError):
        green_kernel(2, 1.0, 1.0)


def test_free_field_is_plane_wave_1d():
    d = build_domain({"type": "interval", "lo": 0.0, "hi": 1.0}, 1.0 / 50)
    p = uniform_problem(1, 0.0, -0.5, 0.5, 40)
    wave = solve_lippmann_schwinger(p, np.array([3.0]), domain=d)
    x = d.coordinates()[:, 0]
    assert np.max(np.abs(wave.values_on_domain - np.exp(3j * x))) < 1e-13
    assert abs(wave.l2_on_domain - d.volume) < 1e-10
    assert wave.residual < 1e-12


def test_free_field_is_plane_wave_3d():
    d = build_domain({"type": "box", "lo": [0, 0, 0], "hi": [1, 1, 1]}, 0.25)
    p = uniform_problem(3, 0.0, -0.5, 0.5, 6)
    xi = np.array([1.0, 2.0, -1.0])
    wave = solve_lippmann_schwinger(p, xi, domain=d)
    x = d.coordinates()
    assert np.max(np.abs(wave.values_on_domain - np.exp(1j * x @ xi))) < 1e-13
    assert abs(wave.l2_on_domain - d.volume) < 1e-10 * d.volume


@pytest.mark.parametrize("k", [1.0, 2.0, 5.0])
def test_square_well_matches_transmission_solution(k):
    q0, a = 0.75, 0.5
    p = uniform_problem(1, q0, -a, a, 1600)
    wave = solve_lippmann_schwinger(p, np.array([k]))
    ref = transmission_reference(p.points[:, 0], k, q0, a)
    assert np.max(np.abs(wave.values_on_support - ref)) < 1e-6
    # off-support evaluation through the post-multiplication
    d = build_domain({"type": "interval", "lo": 1.0, "hi": 2.0}, 0.05)
    wave = solve_lippmann_schwinger(p, np.array([k]), domain=d)
    ref = transmission_reference(d.coordinates()[:, 0], k, q0, a)
    assert np.max(np.abs(wave.values_on_domain - ref)) < 1e-6


def test_branch_solutions_conjugate():
    xi = np.array([2.0])
    plus = solve_lippmann_schwinger(uniform_problem(1, 0.6, -0.4, 0.4, 300, +1), xi)
    minus = solve_lippmann_schwinger(uniform_problem(1, 0.6, -0.4, 0.4, 300, -1), -xi)
    assert np.max(np.abs(plus.values_on_support - np.conj(minus.values_on_support))) < 1e-12


def test_large_xi_monotone_approach():
    d = build_domain({"type": "interval", "lo": 0.0, "hi": 1.0}, 1.0 / 100)
    p = uniform_problem(1, 1.0, 0.3, 0.7, 800)
    x = d.coordinates()[:, 0]
    devs = []
    for t in (5.0, 10.0, 20.0):
        wave = solve_lippmann_schwinger(p, np.array([t]), domain=d)
        dev = np.linalg.norm(wave.values_on_domain - np.exp(1j * t * x)) * math.sqrt(d.spacing)
        devs.append(dev)
    assert devs[0] > devs[1] > devs[2]


def test_resolution_warning():
    p = uniform_problem(1, 0.1, -0.5, 0.5, 8)
    with pytest.warns(UserWarning, match="points per"):
        solve_lippmann_schwinger(p, np.array([40.0]))


def test_xi_zero_rejected():
    p = uniform_problem(1, 0.1, -0.5, 0.5, 50)
    with pytest.raises(ConfigError):
        solve_lippmann_schwinger(p, np.array([0.0]))


def test_negative_potential_rejected():
    with pytest.raises(ConfigError):
        uniform_problem(1, -0.5, -0.5, 0.5, 16)


def test_cphi_free_field():
    d = build_domain({"type": "interval", "lo": 0.0, "hi": 1.0}, 1.0 / 64)
    p = uniform_problem(1, 0.0, -0.5, 0.5, 64)
    grid = default_xi_grid(1, n_moduli=4, lo=0.5, hi=10.0)
    est = cphi_estimate(p, d, grid)
    assert est.cphi == pytest.approx(d.volume, abs=1e-10)
    assert est.free_field_value == pytest.approx(d.volume, abs=0)
    assert est.grid_size == len(grid)


def test_cphi_monotone_under_grid_refinement():
    d = build_domain({"type": "interval", "lo": 0.0, "hi": 1.0}, 1.0 / 64)
    p = uniform_problem(1, 0.8, -0.4, 0.4, 500)
    small = [np.array([0.7]), np.array([1.9])]
    large = small + [np.array([-1.2]), np.array([3.4]), np.array([6.0])]
    est_small = cphi_estimate(p, d, small)
    est_large = cphi_estimate(p, d, large)
    assert est_large.cphi >= est_small.cphi


def test_cphi_born_regime_1d():
    d = build_domain({"type": "interval", "lo": 0.0, "hi": 1.0}, 1.0 / 64)
    p = uniform_problem(1, 0.01, 0.2, 0.8, 400)
    est = cphi_estimate(p, d, default_xi_grid(1, n_moduli=5, lo=0.5, hi=20.0))
    assert abs(est.cphi - d.volume) < 0.01 * d.volume


def test_wave_and_cphi_dumps(tmp_path):
    d = build_domain({"type": "interval", "lo": 0.0, "hi": 1.0}, 0.125)
    p = uniform_problem(1, 0.3, -0.5, 0.5, 200)
    waves = [solve_lippmann_schwinger(p, np.array([t]), domain=d) for t in (1.0, 2.0)]
    csv = tmp_path / "waves.csv"
    write_waves_csv(csv, waves, d)
    lines = csv.read_text().strip().splitlines()
    assert lines[0] == "xi_1,x_1,re_phi,im_phi"
    assert len(lines) == 1 + 2 * d.n_nodes
    est = cphi_estimate(p, d, [np.array([1.0]), np.array([2.0])])
    out = tmp_path / "cphi.json"
    write_cphi_json(out, est)
    import json

    data = json.loads(out.read_text())
    assert set(data) == {"cphi", "argmax_xi", "free_field_value", "grid_size"}


def test_self_weight_against_subdivision():
    # volume-equivalent sphere weight vs brute subdivision of one cell
    from kreinlab.scattering import _self_weight

    s, k = 1.0 / 12, 2.0
    n = 64
    g = (np.arange(n) + 0.5) * s / n - s / 2
    X, Y, Z = np.meshgrid(g, g, g, indexing="ij")
    r = np.sqrt(X**2 + Y**2 + Z**2)
    brute = np.sum(np.exp(1j * k * r) / (4 * math.pi * r)) * (s / n) ** 3
    approx = _self_weight(k, s**3)
    assert abs(approx - brute) < 0.05 * abs(brute)


def test_3d_born_regime():
    d = build_domain({"type": "box", "lo": [0, 0, 0], "hi": [1, 1, 1]}, 0.2)
    p = uniform_problem(3, 0.01, -0.5, 0.5, 8)
    wave = solve_lippmann_schwinger(p, np.array([2.0, 0.0, 0.0]), domain=d)
    assert abs(wave.l2_on_domain - d.volume) < 0.01 * d.volume
