"""Distorted plane waves through the Lippmann-Schwinger integral equation.

For a compactly supported potential q >= 0 the wave is the solution of

    phi(x) = e^{i xi . x} - int G(|xi|^2 +/- i0; x, y) q(y) phi(y) dy

collocated on a quadrature grid over supp(q) (Nystrom, dense direct solve),
then evaluated anywhere by one post-multiplication of the integral term.
Supported dimensions are 1 and 3, where the outgoing kernels are
``(i/(2k)) e^{i k r}`` and ``e^{i k r}/(4 pi r)``.

The L2 norm of the wave over a grid domain feeds the counting-bound constant
``cphi``; for q = 0 it equals the domain volume exactly.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .errors import ConfigError, SolverError
from .grid import GridDomain

__all__ = [
    "ScatteringProblem",
    "DistortedWave",
    "CphiEstimate",
    "green_kernel",
    "uniform_problem",
    "solve_lippmann_schwinger",
    "cphi_estimate",
    "default_xi_grid",
    "write_waves_csv",
    "write_cphi_json",
]

RESONANCE_RCOND = 1e-12
RESIDUAL_RTOL = 1e-8
MIN_POINTS_PER_PERIOD = 10.0


def green_kernel(dim: int, k: float, r, sign: int = +1):
    """Outgoing (+) or incoming (-) free resolvent kernel at energy k^2.

    dim 3: e^{s i k r} / (4 pi r), singular at r = 0.
    dim 1: (i / (2k)) e^{s i k r}, finite at coincidence.
    """
    if dim not in (1, 3):
        raise ConfigError("green_kernel supports dim 1 and 3")
    if k <= 0:
        raise ValueError("wavenumber k must be positive")
    if sign not in (+1, -1):
        raise ConfigError("branch sign must be +1 or -1")
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("distance r must be nonnegative")
    phase = np.exp(1j * sign * k * r)
    if dim == 1:
        # the incoming branch is the full conjugate, prefactor included
        out = (sign * 1j / (2.0 * k)) * phase
    else:
        if np.any(r == 0):
            raise ValueError("3d kernel is singular at r=0; use corrected weights")
        out = phase / (4.0 * math.pi * r)
    return out if out.shape else complex(out)


def _self_weight(k: float, cell_volume: float) -> complex:
    """Integral of the 3d kernel over the volume-equivalent sphere of a cell."""
    a = (3.0 * cell_volume / (4.0 * math.pi)) ** (1.0 / 3.0)
    return (np.exp(1j * k * a) * (1.0 - 1j * k * a) - 1.0) / k ** 2


@dataclass(frozen=True, eq=False)
class ScatteringProblem:
    """Potential samples on a quadrature grid covering its compact support."""

    dim: int
    points: np.ndarray
    weights: np.ndarray
    q: np.ndarray
    sign: int = +1

    def __post_init__(self):
        if self.dim not in (1, 3):
            raise ConfigError("scattering problems support dim 1 and 3")
        if self.sign not in (+1, -1):
            raise ConfigError("branch sign must be +1 or -1")
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[1] != self.dim:
            raise ConfigError("quadrature points must have dim columns")
        q = np.asarray(self.q, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if q.shape != (pts.shape[0],) or w.shape != (pts.shape[0],):
            raise ConfigError("q and weights must be one sample per point")
        if np.any(q < 0):
            raise ConfigError("potential q must be nonnegative")
        if np.any(w <= 0):
            raise ConfigError("quadrature weights must be positive")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "q", q)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def cell_size(self) -> float:
        return float(np.max(self.weights) ** (1.0 / self.dim))


def uniform_problem(dim: int, q, lo, hi, n: int, sign: int = +1) -> ScatteringProblem:
    """Midpoint quadrature grid with n points per axis over the box [lo, hi]."""
    if dim not in (1, 3):
        raise ConfigError("scattering problems support dim 1 and 3")
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (dim,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (dim,))
    if np.any(hi <= lo):
        raise ConfigError("support box must have positive extent")
    if n < 1:
        raise ConfigError("need at least one quadrature point per axis")
    axes = [lo[i] + (np.arange(n) + 0.5) * (hi[i] - lo[i]) / n for i in range(dim)]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    cell = float(np.prod((hi - lo) / n))
    if callable(q):
        qs = np.asarray(q(pts), dtype=float).reshape(-1)
    elif isinstance(q, (int, float)):
        qs = np.full(pts.shape[0], float(q))
    else:
        qs = np.asarray(q, dtype=float).reshape(-1)
    return ScatteringProblem(dim, pts, np.full(pts.shape[0], cell), qs, sign)


@dataclass(eq=False)
class DistortedWave:
    """A solved wave: samples on supp(q) and, optionally, on a grid domain."""

    xi: np.ndarray
    values_on_support: np.ndarray
    values_on_domain: np.ndarray | None
    l2_on_domain: float | None
    residual: float


def _kernel_block(p: ScatteringProblem, k: float, targets: np.ndarray) -> np.ndarray:
    """Kernel times quadrature weight from each source point to each target."""
    d = np.linalg.norm(targets[:, None, :] - p.points[None, :, :], axis=-1)
    if p.dim == 1:
        return (p.sign * 1j / (2.0 * k)) * np.exp(1j * p.sign * k * d) * p.weights[None, :]
    out = np.empty(d.shape, dtype=complex)
    tiny = 1e-9 * p.cell_size
    far = d > tiny
    out[far] = (
        np.exp(1j * p.sign * k * d[far]) / (4.0 * math.pi * d[far])
    ) * np.broadcast_to(p.weights[None, :], d.shape)[far]
    near = ~far
    if np.any(near):
        w_near = np.broadcast_to(p.weights[None, :], d.shape)[near]
        sw = np.array([_self_weight(k, wv) for wv in w_near])
        out[near] = np.conj(sw) if p.sign < 0 else sw
    return out


def solve_lippmann_schwinger(p: ScatteringProblem, xi, domain: GridDomain | None = None) -> DistortedWave:
    """Solve the integral equation at incidence xi and evaluate on a domain.

    Raises SolverError when the collocation matrix is numerically singular
    (condition estimate beyond 1e12), which flags a possible embedded
    resonance at this xi, or when the post-solve residual exceeds 1e-8
    relative.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.shape != (p.dim,):
        raise ConfigError("xi must be a vector of length dim")
    k = float(np.linalg.norm(xi))
    if k <= 0:
        raise ConfigError("xi must be nonzero")

    period_points = (2.0 * math.pi / k) / p.cell_size
    if period_points < MIN_POINTS_PER_PERIOD:
        warnings.warn(
            f"quadrature grid resolves only {period_points:.1f} points per "
            "period; results may be underresolved",
            stacklevel=2,
        )

    phi0 = np.exp(1j * p.points @ xi)
    K = _kernel_block(p, k, p.points)
    A = np.eye(p.n_points, dtype=complex) + K * p.q[None, :]

    anorm = float(np.abs(A).sum(axis=0).max())
    lu, piv = sla.lu_factor(A)
    rcond, info = lapack.zgecon(lu, anorm)
    if info != 0 or not np.isfinite(rcond) or rcond < RESONANCE_RCOND:
        raise SolverError(
            "possible embedded resonance at this xi: collocation matrix "
            f"condition estimate {1.0 / max(rcond, 1e-300):.3e}"
        )
    phi = sla.lu_solve((lu, piv), phi0)

    residual = float(
        np.linalg.norm(A @ phi - phi0) / max(np.linalg.norm(phi0), 1e-300)
    )
    if residual > RESIDUAL_RTOL:
        raise SolverError(
            f"integral-equation residual {residual:.3e} exceeds {RESIDUAL_RTOL:.0e}"
        )

    values_on_domain = None
    l2 = None
    if domain is not None:
        if domain.dim != p.dim:
            raise ConfigError("domain dimension must match the scattering problem")
        x = domain.coordinates()
        Kx = _kernel_block(p, k, x)
        values_on_domain = np.exp(1j * x @ xi) - Kx @ (p.q * phi)
        l2 = float(np.sum(np.abs(values_on_domain) ** 2) * domain.spacing ** domain.dim)

    return DistortedWave(xi, phi, values_on_domain, l2, residual)


@dataclass(eq=False)
class CphiEstimate:
    """Finite-sample lower estimate of sup over xi of the squared L2 norm."""

    cphi: float
    argmax_xi: np.ndarray
    free_field_value: float
    grid_size: int
    records: list


def default_xi_grid(dim: int, n_moduli: int = 8, lo: float = 0.5, hi: float = 40.0):
    """Directions times logarithmically spaced moduli in [lo, hi]."""
    moduli = np.geomspace(lo, hi, n_moduli)
    if dim == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        dirs = np.concatenate([np.eye(3), -np.eye(3)], axis=0)
    return [m * u for u in dirs for m in moduli]


def cphi_estimate(p: ScatteringProblem, d: GridDomain, xi_grid) -> CphiEstimate:
    """Maximize the domain L2 mass of the wave over a finite xi sample.

    A lower estimate of the true supremum; failing xi values are skipped with
    a warning.  For q = 0 every sample equals the domain volume.
    """
    xi_grid = list(xi_grid)
    if not xi_grid:
        raise ConfigError("xi grid must be nonempty")
    best = None
    records = []
    for xi in xi_grid:
        try:
            wave = solve_lippmann_schwinger(p, xi, domain=d)
        except SolverError as exc:
            warnings.warn(f"skipping xi={np.asarray(xi)}: {exc}", stacklevel=2)
            continue
        records.append((np.asarray(xi, dtype=float), wave.l2_on_domain))
        if best is None or wave.l2_on_domain > best[1]:
            best = (np.asarray(xi, dtype=float), wave.l2_on_domain)
    if best is None:
        raise SolverError("no xi in the grid could be solved")
    return CphiEstimate(best[1], best[0], d.volume, len(xi_grid), records)


def write_waves_csv(path, waves, domain: GridDomain) -> None:
    """Columns xi_1..xi_n, x_1..x_n, re_phi, im_phi, one row per domain node."""
    dim = domain.dim
    coords = domain.coordinates()
    head = [f"xi_{i+1}" for i in range(dim)] + [f"x_{i+1}" for i in range(dim)]
    with open(path, "w") as fh:
        fh.write(",".join(head + ["re_phi", "im_phi"]) + "\n")
        for wave in waves:
            if wave.values_on_domain is None:
                raise ConfigError("wave was solved without a domain evaluation")
            for x, v in zip(coords, wave.values_on_domain):
                row = [f"{c:.17g}" for c in wave.xi] + [f"{c:.17g}" for c in x]
                row += [f"{v.real:.17g}", f"{v.imag:.17g}"]
                fh.write(",".join(row) + "\n")


def write_cphi_json(path, est: CphiEstimate) -> None:
    payload = {
        "cphi": est.cphi,
        "argmax_xi": [float(v) for v in est.argmax_xi],
        "free_field_value": est.free_field_value,
        "grid_size": est.grid_size,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
