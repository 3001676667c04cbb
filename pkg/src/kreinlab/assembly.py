"""Discrete operators: the magnetic second-order stencil, its m-fold powers,
the zero-extension Dirichlet matrix, and the buckling pencil blocks.

Conventions
-----------
The second-order expression acts on box grids with link coefficients::

    (T u)[k] = sum_ax ( a_left/h^2 * (u[k] - e^{-i th_left} u[k - e_ax])
                      + a_right/h^2 * (u[k] - e^{+i th_right} u[k + e_ax]) )
             + q[k] u[k]

where ``a_right = a_diag[ax][k]`` and ``th_right = theta[ax][k]`` belong to the
link (k, k + e_ax).  Functions are extended by zero outside the box.  Rows at
the box edge are truncated; this is exact whenever the input vanishes there,
which holds by construction for every power applied to a zero-extended
interior function (the box edge sits at least m layers away from the domain).

Higher order is realized by composing the second-order stencil m times, the
Dirichlet matrix of order 2m is ``F_m = Z^* T^m Z`` with Z the zero-extension
of domain nodes into the fattened box, and the buckling pencil is
``(D_m^* D_m, F_m)`` where ``D_m`` keeps all rows of ``T^m Z`` on the fattened
grid.  Keeping those boundary-layer rows is what separates the pencil from the
plain Dirichlet problem; dropping them would collapse the two spectra.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyError, ConfigError
from .grid import CoefficientField, GridDomain, fatten

__all__ = [
    "HermitianOperator",
    "ExtensionOperator",
    "Tau2Stencil",
    "assemble_tau2",
    "assemble_friedrichs",
    "assemble_krein_pencil",
    "extension_operator",
    "apply_gauge",
    "write_matrix",
]

HERMITICITY_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """Assembled Hermitian matrix with its grid metadata.

    ``order`` is the homogeneity degree: entries scale like length**(-order).
    """

    matrix: sp.csr_matrix
    domain: GridDomain
    order: int
    coeffs: CoefficientField | None = None

    @property
    def shape(self):
        return self.matrix.shape

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


@dataclass(frozen=True, eq=False)
class ExtensionOperator:
    """Extend by zero, apply the stencil power, keep all fattened-grid rows."""

    matrix: sp.csr_matrix
    source: GridDomain
    target: GridDomain

    def apply(self, u: np.ndarray) -> np.ndarray:
        return self.matrix @ u


def _hermitize(M, rtol: float = HERMITICITY_RTOL) -> sp.csr_matrix:
    M = sp.csr_matrix(M)
    scale = abs(M).max() or 1.0
    dev = abs(M - M.getH()).max()
    if dev > rtol * scale:
        raise AssemblyError(
            f"assembled matrix deviates from Hermitian by {dev / scale:.3e} relative"
        )
    M = ((M + M.getH()) * 0.5).tocsr()
    M.sum_duplicates()
    M.sort_indices()
    return M


def _axis_slices(ndim: int, ax: int):
    lo = tuple(slice(None, -1) if i == ax else slice(None) for i in range(ndim))
    hi = tuple(slice(1, None) if i == ax else slice(None) for i in range(ndim))
    return lo, hi


class Tau2Stencil:
    """Applicator of the second-order expression on the coefficient box grid."""

    def __init__(self, coeffs: CoefficientField):
        self.coeffs = coeffs
        self.h = coeffs.spacing
        self.dim = coeffs.dim
        self.shape = tuple(coeffs.box_shape)
        self.dtype = complex if coeffs.is_magnetic else float
        inv_h2 = 1.0 / self.h ** 2
        self._a_link = [a * inv_h2 for a in coeffs.a_diag]
        if coeffs.is_magnetic:
            self._hop = [a * np.exp(1j * t) * inv_h2
                         for a, t in zip(coeffs.a_diag, coeffs.theta)]
        else:
            self._hop = list(self._a_link)

    def apply(self, u: np.ndarray) -> np.ndarray:
        """Apply the stencil with zero padding outside the box.

        Values are exact wherever the full stencil fits inside the box (and on
        edge rows whenever the input vanishes there).
        """
        u = np.asarray(u)
        if u.shape != self.shape:
            raise ConfigError("mismatched sampling grid")
        out = self.coeffs.q * u
        out = out.astype(np.result_type(self.dtype, u.dtype), copy=True)
        for ax in range(self.dim):
            lo, hi = _axis_slices(self.dim, ax)
            a = self._a_link[ax][lo]
            hop = self._hop[ax][lo]
            out[lo] += a * u[lo] - hop * u[hi]
            out[hi] += a * u[hi] - np.conj(hop) * u[lo]
        return out

    def matrix(self) -> sp.csr_matrix:
        """Sparse matrix over box nodes in row-major order."""
        n = int(np.prod(self.shape))
        flat = np.arange(n).reshape(self.shape)
        diag = self.coeffs.q.astype(self.dtype).ravel().copy()
        rows, cols, vals = [], [], []
        for ax in range(self.dim):
            lo, hi = _axis_slices(self.dim, ax)
            i = flat[lo].ravel()
            j = flat[hi].ravel()
            a = self._a_link[ax][lo].ravel()
            hop = self._hop[ax][lo].ravel()
            np.add.at(diag, i, a)
            np.add.at(diag, j, a)
            rows.append(i); cols.append(j); vals.append(-hop)
            rows.append(j); cols.append(i); vals.append(-np.conj(hop))
        rows.append(np.arange(n)); cols.append(np.arange(n)); vals.append(diag)
        M = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n), dtype=self.dtype,
        ).tocsr()
        M.sum_duplicates()
        M.sort_indices()
        return M


def _embed_offset(d: GridDomain, c: CoefficientField, context: str) -> np.ndarray:
    """Integer offset of d's box corner inside the coefficient box."""
    if abs(d.spacing - c.spacing) > 1e-12 * d.spacing:
        raise ConfigError("mismatched sampling grid")
    off = (d.origin - c.box_origin) / d.spacing
    rounded = np.rint(off)
    if np.any(np.abs(off - rounded) > 1e-9):
        raise ConfigError("mismatched sampling grid")
    rounded = rounded.astype(np.int64)
    if np.any(rounded < 0) or np.any(rounded + d.box_shape > c.box_shape):
        raise ConfigError(context)
    return rounded


def assemble_tau2(d: GridDomain, c: CoefficientField) -> Tau2Stencil:
    """Stencil applicator on the full coefficient grid covering the domain."""
    _embed_offset(d, c, "mismatched sampling grid")
    return Tau2Stencil(c)


def _selector(c: CoefficientField, d: GridDomain, offset) -> sp.csr_matrix:
    """Zero-extension matrix mapping domain nodes into the coefficient box."""
    n_box = int(np.prod(c.box_shape))
    flat = np.ravel_multi_index(tuple((d.nodes + offset).T), c.box_shape)
    return sp.csr_matrix(
        (np.ones(d.n_nodes), (flat, np.arange(d.n_nodes))),
        shape=(n_box, d.n_nodes),
    )


def _stencil_power_columns(d: GridDomain, c: CoefficientField, m: int):
    """T^m Z as a sparse matrix from domain nodes to box nodes."""
    if int(m) != m or m < 1:
        raise ConfigError("operator order parameter m must be a positive integer")
    fat = fatten(d, m)
    off_fat = _embed_offset(
        fat, c,
        "extension undefined: coefficient samples do not cover the fattened grid",
    )
    off_d = _embed_offset(d, c, "mismatched sampling grid")
    T = Tau2Stencil(c).matrix()
    Z = _selector(c, d, off_d)
    S = Z
    for _ in range(int(m)):
        S = T @ S
    fat_rows = np.ravel_multi_index(tuple((fat.nodes + off_fat).T), c.box_shape)
    return S, Z, fat, fat_rows


def assemble_friedrichs(d: GridDomain, c: CoefficientField, m: int = 1) -> HermitianOperator:
    """Dirichlet matrix of order 2m: restrict T^m of the zero extension to domain rows.

    For m = 1 this is the standard Dirichlet discretization; it is Hermitian
    positive definite for nonnegative q and elliptic a.
    """
    S, Z, _, _ = _stencil_power_columns(d, c, m)
    F = _hermitize(Z.getH() @ S)
    return HermitianOperator(F, d, 2 * int(m), c)


def extension_operator(d: GridDomain, c: CoefficientField, m: int = 1) -> ExtensionOperator:
    S, _, fat, fat_rows = _stencil_power_columns(d, c, m)
    D = S.tocsr()[fat_rows, :].tocsr()
    return ExtensionOperator(D, d, fat)


def assemble_krein_pencil(d: GridDomain, c: CoefficientField, m: int = 1):
    """Blocks (numerator, denominator) of the discrete buckling pencil.

    The numerator ``D_m^* D_m`` accumulates every row of the extended stencil
    power, including the boundary layer outside the domain; the denominator is
    the Dirichlet matrix ``F_m``.  The numerator dominates ``F_m^2`` in the
    quadratic-form order, hence every pencil eigenvalue dominates the matching
    Dirichlet eigenvalue.
    """
    S, Z, _, fat_rows = _stencil_power_columns(d, c, m)
    D = S.tocsr()[fat_rows, :].tocsr()
    numerator = _hermitize(D.getH() @ D)
    denominator = _hermitize(Z.getH() @ S)
    return (
        HermitianOperator(numerator, d, 4 * int(m), c),
        HermitianOperator(denominator, d, 2 * int(m), c),
    )


def apply_gauge(c: CoefficientField, chi: np.ndarray) -> CoefficientField:
    """Shift link phases by the discrete gradient of a node function.

    Replaces theta on each link by ``theta + chi(head) - chi(tail)``; the
    resulting operators are conjugates of the originals by a diagonal unitary,
    so all spectra are preserved.
    """
    chi = np.asarray(chi, dtype=float)
    if chi.shape != tuple(c.box_shape):
        raise ConfigError("gauge function must be sampled on the coefficient box")
    new_theta = []
    for ax in range(c.dim):
        lo, hi = _axis_slices(c.dim, ax)
        t = c.theta[ax].copy()
        t[lo] = t[lo] + chi[hi] - chi[lo]
        new_theta.append(t)
    return c.with_theta(new_theta)


def write_matrix(path, op) -> None:
    """Dump in coordinate text form: header "N nnz", rows "row col re im"."""
    M = op.matrix if isinstance(op, (HermitianOperator, ExtensionOperator)) else op
    M = sp.csr_matrix(M)
    M.sum_duplicates()
    M.sort_indices()
    coo = M.tocoo()
    with open(path, "w") as fh:
        fh.write(f"{M.shape[0]} {coo.nnz}\n")
        for r, col, v in zip(coo.row, coo.col, coo.data):
            z = complex(v)
            fh.write(f"{r} {col} {z.real:.17g} {z.imag:.17g}\n")
