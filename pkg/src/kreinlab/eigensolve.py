"""Hermitian and generalized (pencil) eigenvalue computation with counting.

Dense LAPACK drivers handle problems up to ``DENSE_LIMIT`` unknowns; larger
problems fall back to shift-invert Lanczos for the smallest eigenvalues.
Every reported eigenpair is residual-checked.  Results are deterministic and
independent of BLAS thread count.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, SolverError
from .grid import GridDomain

__all__ = [
    "Spectrum",
    "hermitian_eigs",
    "pencil_eigs",
    "counting",
    "trust_cutoff",
    "write_spectrum",
]

DENSE_LIMIT = 4000
RESIDUAL_RTOL = 1e-8


@dataclass(eq=False)
class Spectrum:
    """Sorted real eigenvalues with per-pair residuals and a trust cutoff.

    Eigenvalues above ``trust_cutoff`` are flagged unresolved: they are
    dominated by discretization error rather than by the continuum problem.
    """

    values: np.ndarray
    residuals: np.ndarray
    count_computed: int
    trust_cutoff: float = np.inf
    total_dim: int | None = None
    complete_below: float = np.inf

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.residuals = np.asarray(self.residuals, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise SolverError("eigensolver returned non-finite eigenvalues")
        if np.any(np.diff(self.values) < 0):
            raise SolverError("eigenvalues are not sorted")

    def trusted(self) -> np.ndarray:
        return self.values <= self.trust_cutoff

    def is_trusted(self, lam: float) -> bool:
        return lam <= self.trust_cutoff

    def min(self) -> float:
        return float(self.values[0])


def _as_matrix(A):
    from .assembly import HermitianOperator

    if isinstance(A, HermitianOperator):
        return A.matrix
    if sp.issparse(A):
        return A.tocsr()
    return np.asarray(A)


def _norm_est(M) -> float:
    # inf-norm upper-bounds the spectral norm of a Hermitian matrix
    if sp.issparse(M):
        return float(abs(M).sum(axis=1).max())
    return float(np.abs(M).sum(axis=1).max())


def _check_residuals(kind, vals, res, tol):
    worst = float(res.max()) if res.size else 0.0
    if worst > tol:
        j = int(np.argmax(res))
        raise SolverError(
            f"{kind} eigensolver failed its residual contract: "
            f"pair {j} (eigenvalue {vals[j]:.6g}) has residual {worst:.3e} > {tol:.3e}"
        )


def hermitian_eigs(A, k: int | None = None, upto: float | None = None,
                   trust: float = np.inf) -> Spectrum:
    """Smallest eigenvalues of a Hermitian matrix.

    ``k`` requests the k smallest pairs, ``upto`` all pairs below a threshold,
    and neither requests the full spectrum (dense path only).
    """
    M = _as_matrix(A)
    n = M.shape[0]
    if k is not None and not 1 <= k <= n:
        raise ConfigError(f"eigenvalue count k={k} out of range for size {n}")
    scale = _norm_est(M)

    if n <= DENSE_LIMIT or not sp.issparse(M):
        Md = M.toarray() if sp.issparse(M) else M
        if upto is not None:
            vals, vecs = sla.eigh(Md, subset_by_value=(-np.inf, upto))
            complete = upto
        elif k is not None:
            vals, vecs = sla.eigh(Md, subset_by_index=(0, k - 1))
            complete = np.inf if k == n else float(vals[-1])
        else:
            vals, vecs = sla.eigh(Md)
            complete = np.inf
        res = np.linalg.norm(Md @ vecs - vecs * vals, axis=0)
    else:
        sigma = -1e-6 * scale
        if k is None:
            if upto is None:
                raise ConfigError(
                    "full spectra above the dense limit are not supported; "
                    "request k eigenvalues or a value threshold"
                )
            k = 32
        v0 = np.full(n, 1.0 / math.sqrt(n))
        while True:
            try:
                vals, vecs = spla.eigsh(
                    M, k=min(k, n - 1), sigma=sigma, which="LM", v0=v0
                )
            except spla.ArpackNoConvergence as exc:
                raise SolverError(f"shift-invert iteration failed to converge: {exc}")
            order = np.argsort(vals)
            vals, vecs = vals[order], vecs[:, order]
            if upto is None or vals[-1] > upto or k >= n - 1:
                break
            k *= 2
        complete = float(vals[-1])
        if upto is not None:
            keep = vals <= upto
            if np.any(~keep):
                complete = max(complete, upto)
            vals, vecs = vals[keep], vecs[:, keep]
        res = np.linalg.norm(M @ vecs - vecs * vals, axis=0)

    _check_residuals("hermitian", vals, res, RESIDUAL_RTOL * scale)
    return Spectrum(vals, res, len(vals), trust, n, complete)


def pencil_eigs(Anum, B, k: int | None = None, upto: float | None = None,
                trust: float = np.inf) -> Spectrum:
    """Smallest eigenvalues of the generalized problem A u = lambda B u.

    B must be positive definite; the dense path reduces to a standard
    Hermitian problem through a Cholesky factorization of B and returns
    B-orthonormal eigenvectors internally.
    """
    Am, Bm = _as_matrix(Anum), _as_matrix(B)
    n = Am.shape[0]
    if Am.shape != Bm.shape:
        raise ConfigError("pencil blocks must have equal shapes")
    if k is not None and not 1 <= k <= n:
        raise ConfigError(f"eigenvalue count k={k} out of range for size {n}")
    scale_a, scale_b = _norm_est(Am), _norm_est(Bm)

    if n <= DENSE_LIMIT or not sp.issparse(Am):
        Ad = Am.toarray() if sp.issparse(Am) else np.asarray(Am)
        Bd = Bm.toarray() if sp.issparse(Bm) else np.asarray(Bm)
        try:
            np.linalg.cholesky(Bd)
        except np.linalg.LinAlgError:
            raise SolverError("denominator not PD")
        if upto is not None:
            vals, vecs = sla.eigh(Ad, Bd, subset_by_value=(-np.inf, upto))
            complete = upto
        elif k is not None:
            vals, vecs = sla.eigh(Ad, Bd, subset_by_index=(0, k - 1))
            complete = np.inf if k == n else float(vals[-1])
        else:
            vals, vecs = sla.eigh(Ad, Bd)
            complete = np.inf
        res = np.linalg.norm(Ad @ vecs - (Bd @ vecs) * vals, axis=0)
    else:
        if k is None:
            if upto is None:
                raise ConfigError(
                    "full pencil spectra above the dense limit are not "
                    "supported; request k eigenvalues or a value threshold"
                )
            k = 32
        sigma = -1e-6 * scale_a / max(scale_b, 1e-300)
        v0 = np.full(n, 1.0 / math.sqrt(n))
        while True:
            try:
                vals, vecs = spla.eigsh(
                    Am, k=min(k, n - 1), M=Bm, sigma=sigma, which="LM", v0=v0
                )
            except spla.ArpackNoConvergence as exc:
                raise SolverError(f"shift-invert pencil iteration failed: {exc}")
            order = np.argsort(vals)
            vals, vecs = vals[order], vecs[:, order]
            if upto is None or vals[-1] > upto or k >= n - 1:
                break
            k *= 2
        if vals[0] <= 0:
            raise SolverError("denominator not PD")
        complete = float(vals[-1])
        if upto is not None:
            keep = vals <= upto
            if np.any(~keep):
                complete = max(complete, upto)
            vals, vecs = vals[keep], vecs[:, keep]
        res = np.linalg.norm(Am @ vecs - (Bm @ vecs) * vals, axis=0)

    tol = RESIDUAL_RTOL * (scale_a + (np.abs(vals).max() if vals.size else 0.0) * scale_b)
    _check_residuals("pencil", vals, res, tol)
    return Spectrum(vals, res, len(vals), trust, n, complete)


def counting(s: Spectrum, lam: float) -> int:
    """Number of strictly positive eigenvalues strictly below lam.

    Multiplicity counts; an eigenvalue exactly equal to lam does not.
    """
    if not s.is_trusted(lam):
        warnings.warn(
            f"counting evaluated at lambda={lam:g} above the trust cutoff "
            f"{s.trust_cutoff:g}; result is unresolved",
            stacklevel=2,
        )
    if (
        s.total_dim is not None
        and s.count_computed < s.total_dim
        and lam > s.complete_below
    ):
        warnings.warn(
            "counting threshold exceeds the covered part of the spectrum; "
            "the result may undercount",
            stacklevel=2,
        )
    return int(np.count_nonzero((s.values > 0.0) & (s.values < lam)))


def trust_cutoff(d: GridDomain, m: int, fraction: float = 0.1, coeffs=None) -> float:
    """Fraction of the discrete spectral ceiling of the order-2m operator.

    The ceiling of the second-order matrix is bounded by
    ``4 * dim * max(a) / h^2 + max(q)``; composing m times raises it to the
    m-th power.  Eigenvalues below the returned cutoff are trusted to track
    the continuum to discretization accuracy.
    """
    if not 0 < fraction <= 1:
        raise ConfigError("trust fraction must lie in (0, 1]")
    max_a = coeffs.max_a if coeffs is not None else 1.0
    max_q = coeffs.max_q if coeffs is not None else 0.0
    ceiling = 4.0 * d.dim * max_a / d.spacing ** 2 + max_q
    return float(fraction * ceiling ** m)


def write_spectrum(path, s: Spectrum) -> None:
    """CSV dump with columns index,eigenvalue,residual,trusted."""
    trusted = s.trusted()
    with open(path, "w") as fh:
        fh.write("index,eigenvalue,residual,trusted\n")
        for i, (v, r, t) in enumerate(zip(s.values, s.residuals, trusted)):
            fh.write(f"{i},{v:.17g},{r:.17g},{int(t)}\n")
