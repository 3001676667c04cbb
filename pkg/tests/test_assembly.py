"""Stencil conventions, the Dirichlet matrix, and the buckling pencil blocks."""

import numpy as np
import pytest

from kreinlab import (
    ConfigError,
    apply_gauge,
    assemble_friedrichs,
    assemble_krein_pencil,
    assemble_tau2,
    build_domain,
    extension_operator,
    hermitian_eigs,
    pencil_eigs,
    sample_coefficients,
    write_matrix,
)


def interval(h):
    return build_domain({"type": "interval", "lo": 0.0, "hi": 1.0}, h)


def test_free_stencil_row_1d():
    d = interval(0.25)
    c = sample_coefficients(d, None, m=1)
    T = assemble_tau2(d, c).matrix().toarray()
    h2 = 0.25**2
    mid = T.shape[0] // 2
    assert T[mid, mid - 1] == pytest.approx(-1.0 / h2, abs=0)
    assert T[mid, mid] == pytest.approx(2.0 / h2, abs=0)
    assert T[mid, mid + 1] == pytest.approx(-1.0 / h2, abs=0)


def test_peierls_stencil_row_1d():
    h, b, q0 = 0.125, 2.0, 0.7
    d = interval(h)
    c = sample_coefficients(d, {"b": b, "q": q0}, m=1)
    T = assemble_tau2(d, c).matrix().toarray()
    theta = h * b
    mid = T.shape[0] // 2
    assert T[mid, mid - 1] == pytest.approx(-np.exp(-1j * theta) / h**2, rel=1e-14)
    assert T[mid, mid] == pytest.approx(2.0 / h**2 + q0, rel=1e-14)
    assert T[mid, mid + 1] == pytest.approx(-np.exp(1j * theta) / h**2, rel=1e-14)


def test_stencil_annihilates_constants_up_to_q():
    d = build_domain({"type": "box", "lo": [0, 0], "hi": [1, 1]}, 0.2)
    c = sample_coefficients(d, {"a": "1 + x1*x2", "q": "x1 + x2"}, m=1)
    stencil = assemble_tau2(d, c)
    out = stencil.apply(np.ones(c.box_shape))
    inner = (slice(1, -1), slice(1, -1))
    assert np.allclose(out[inner], c.q[inner], atol=1e-12)


def test_apply_matches_matrix():
    d = build_domain({"type": "box", "lo": [0, 0], "hi": [1, 1]}, 0.25)
    c = sample_coefficients(d, {"a": "1 + x2", "b": ["1", "x1"], "q": "x1"}, m=1)
    stencil = assemble_tau2(d, c)
    rng = np.random.default_rng(1)
    u = rng.normal(size=c.box_shape) + 1j * rng.normal(size=c.box_shape)
    via_matrix = (stencil.matrix() @ u.ravel()).reshape(c.box_shape)
    assert np.allclose(stencil.apply(u), via_matrix, atol=1e-11)


def test_mismatched_grid_rejected():
    d = interval(0.25)
    c = sample_coefficients(d, None, m=1)
    other = interval(0.2)
    with pytest.raises(ConfigError, match="mismatched sampling grid"):
        assemble_tau2(other, c)


def test_free_friedrichs_is_toeplitz_with_known_spectrum():
    K = 31
    h = 1.0 / (K + 1)
    d = interval(h)
    c = sample_coefficients(d, None, m=1)
    F = assemble_friedrichs(d, c, 1)
    assert F.matrix.dtype == np.float64  # free case stays real
    exact = (4.0 / h**2) * np.sin(np.arange(1, K + 1) * np.pi * h / 2.0) ** 2
    vals = hermitian_eigs(F).values
    assert np.allclose(vals, np.sort(exact), rtol=1e-12)


def test_second_power_is_zero_extension_beam():
    K = 12
    h = 1.0 / (K + 1)
    d = interval(h)
    c = sample_coefficients(d, None, m=2)
    F2 = assemble_friedrichs(d, c, 2).dense() * h**4
    mid = K // 2
    assert np.allclose(F2[mid, mid - 2:mid + 3], [1.0, -4.0, 6.0, -4.0, 1.0])
    # zero-extension closure keeps the corner at 6, not the clamped-sum 7
    assert F2[0, 0] == pytest.approx(6.0)
    assert np.count_nonzero(F2[0]) == 3


def test_insufficient_coverage_rejected():
    d = interval(0.125)
    c = sample_coefficients(d, None, m=1)
    with pytest.raises(ConfigError, match="extension undefined"):
        assemble_friedrichs(d, c, 2)


def test_pencil_numerator_exceeds_squared_friedrichs():
    K = 4
    h = 1.0 / (K + 1)
    d = interval(h)
    c = sample_coefficients(d, None, m=1)
    num, den = assemble_krein_pencil(d, c, 1)
    Fsq = den.dense() @ den.dense()
    diff = num.dense() - Fsq
    assert np.linalg.matrix_rank(diff, tol=1e-6) == 2
    nonzero_rows = np.nonzero(np.abs(diff).sum(axis=1) > 1e-9)[0]
    assert set(nonzero_rows) == {0, K - 1}
    # the boundary-layer rows contribute (u_1/h^2)^2 and (u_K/h^2)^2
    assert diff[0, 0] == pytest.approx(1.0 / h**4, rel=1e-12)
    assert np.min(np.linalg.eigvalsh(diff)) > -1e-9


def test_pencil_ordering_with_large_constant_potential():
    K = 8
    d = interval(1.0 / (K + 1))
    c = sample_coefficients(d, {"q": 50.0}, m=1)
    num, den = assemble_krein_pencil(d, c, 1)
    pv = pencil_eigs(num, den).values
    fv = hermitian_eigs(den).values
    assert np.all(pv >= fv)


def test_extension_operator_action():
    d = build_domain({"type": "box", "lo": [0, 0], "hi": [1, 1]}, 0.2)
    c = sample_coefficients(d, {"a": "1 + x1^2", "q": "x2^2"}, m=2)
    ext = extension_operator(d, c, 2)
    assert ext.matrix.shape == (ext.target.n_nodes, d.n_nodes)
    rng = np.random.default_rng(2)
    u = rng.normal(size=d.n_nodes)
    # same action through the stencil applicator on the zero extension
    stencil = assemble_tau2(d, c)
    box = np.zeros(c.box_shape)
    offset = np.rint((d.origin - c.box_origin) / d.spacing).astype(int)
    box[tuple((d.nodes + offset).T)] = u
    twice = stencil.apply(stencil.apply(box))
    target_off = np.rint((ext.target.origin - c.box_origin) / d.spacing).astype(int)
    expected = twice[tuple((ext.target.nodes + target_off).T)]
    assert np.allclose(ext.apply(u), expected, atol=1e-9)


def test_magnetic_ground_energy_dominates_free():
    # 1d: the interval is simply connected, so constant phases are pure gauge
    # and the ground energy is unchanged up to rounding
    d = interval(1.0 / 12)
    free = sample_coefficients(d, None, m=1)
    lam_free = hermitian_eigs(assemble_friedrichs(d, free, 1), k=1).min()
    for b in (0.5, 2.0, 7.0):
        c = sample_coefficients(d, {"b": b}, m=1)
        lam = hermitian_eigs(assemble_friedrichs(d, c, 1), k=1).min()
        assert abs(lam - lam_free) <= 1e-12 * lam_free
    # 2d: a linear vector potential carries flux through the plaquettes and
    # the domination is strict
    sq = build_domain({"type": "box", "lo": [0, 0], "hi": [1, 1]}, 0.1)
    free2 = sample_coefficients(sq, None, m=1)
    lam_free2 = hermitian_eigs(assemble_friedrichs(sq, free2, 1), k=1).min()
    for strength in (3.0, 8.0):
        c = sample_coefficients(sq, {"b": [f"-{strength}*x2", "0"]}, m=1)
        lam = hermitian_eigs(assemble_friedrichs(sq, c, 1), k=1).min()
        assert lam > lam_free2


def test_gauge_conjugation_preserves_spectra():
    d = build_domain({"type": "disk", "center": [0.5, 0.5], "radius": 0.45}, 0.1)
    c = sample_coefficients(d, {"b": ["1.3", "-0.8"], "q": "x1"}, m=1)
    rng = np.random.default_rng(0)
    chi = rng.uniform(-np.pi, np.pi, c.box_shape)
    gauged = apply_gauge(c, chi)
    f0 = hermitian_eigs(assemble_friedrichs(d, c, 1)).values
    f1 = hermitian_eigs(assemble_friedrichs(d, gauged, 1)).values
    assert np.max(np.abs(f0 - f1) / np.abs(f0)) < 1e-10
    n0, d0 = assemble_krein_pencil(d, c, 1)
    n1, d1 = assemble_krein_pencil(d, gauged, 1)
    p0 = pencil_eigs(n0, d0).values
    p1 = pencil_eigs(n1, d1).values
    assert np.max(np.abs(p0 - p1) / np.abs(p0)) < 1e-10


def test_assembled_blocks_hermitian():
    d = build_domain({"type": "box", "lo": [0, 0], "hi": [1, 1]}, 0.2)
    c = sample_coefficients(d, {"a": "1 + x1^2", "b": ["x2", "1"], "q": "x1^2*x2^2"}, m=2)
    num, den = assemble_krein_pencil(d, c, 2)
    for M in (num.matrix, den.matrix):
        assert abs(M - M.getH()).max() <= 1e-12 * abs(M).max()


def test_pencil_positive_definite_denominator():
    d = build_domain({"type": "box", "lo": [0, 0], "hi": [1, 1]}, 0.25)
    c = sample_coefficients(d, {"b": 1.0}, m=1)
    _, den = assemble_krein_pencil(d, c, 1)
    assert np.min(np.linalg.eigvalsh(den.dense())) > 0


def test_matrix_dump_format(tmp_path):
    d = interval(0.25)
    c = sample_coefficients(d, {"b": 1.0}, m=1)
    F = assemble_friedrichs(d, c, 1)
    path = tmp_path / "f.coo"
    write_matrix(path, F)
    lines = path.read_text().strip().splitlines()
    n, nnz = map(int, lines[0].split())
    assert n == d.n_nodes
    assert len(lines) == nnz + 1
    r, col, re, im = lines[1].split()
    assert int(r) == 0 and int(col) in (0, 1)
    float(re), float(im)
    # rows appear in nondecreasing order
    rows = [int(line.split()[0]) for line in lines[1:]]
    assert rows == sorted(rows)
