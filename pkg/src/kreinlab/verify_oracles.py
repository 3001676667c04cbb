"""Reference solutions used by the verify suite."""

from __future__ import annotations

import numpy as np


def square_well_wave(x, k: float, q0: float, radius: float) -> np.ndarray:
    """Transmission solution for a square well q = q0 on [-radius, radius].

    Plane wave e^{ikx} incident from the left, matched by continuity of the
    value and the derivative at both edges.  kappa = sqrt(k^2 - q0) may be
    complex (evanescent interior) without changing the formulas.
    """
    a = float(radius)
    kap = np.sqrt(complex(k * k - q0))
    M = np.array(
        [
            [-np.exp(1j * k * a), np.exp(-1j * kap * a), np.exp(1j * kap * a), 0.0],
            [1j * k * np.exp(1j * k * a), 1j * kap * np.exp(-1j * kap * a),
             -1j * kap * np.exp(1j * kap * a), 0.0],
            [0.0, np.exp(1j * kap * a), np.exp(-1j * kap * a), -np.exp(1j * k * a)],
            [0.0, 1j * kap * np.exp(1j * kap * a), -1j * kap * np.exp(-1j * kap * a),
             -1j * k * np.exp(1j * k * a)],
        ]
    )
    rhs = np.array([np.exp(-1j * k * a), 1j * k * np.exp(-1j * k * a), 0.0, 0.0])
    refl, amp_r, amp_l, trans = np.linalg.solve(M, rhs)
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape, dtype=complex)
    left = x < -a
    mid = (x >= -a) & (x <= a)
    right = x > a
    out[left] = np.exp(1j * k * x[left]) + refl * np.exp(-1j * k * x[left])
    out[mid] = amp_r * np.exp(1j * kap * x[mid]) + amp_l * np.exp(-1j * kap * x[mid])
    out[right] = trans * np.exp(1j * k * x[right])
    return out
