"""Bounded open domains as node masks on a uniform grid, with coefficient sampling.

A domain is the set of grid nodes ``origin + index * h`` that fall inside an
open set.  No regularity of the boundary is assumed: any nonempty finite mask
is a legal domain.  Coefficients are sampled from closed-form field
definitions, on links (midpoints) for the diffusion matrix and the magnetic
phases, and on nodes for the potential.

All values are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import ConfigError

__all__ = [
    "GridDomain",
    "CoefficientField",
    "build_domain",
    "fatten",
    "sample_coefficients",
    "load_mask",
    "save_mask",
]

ELLIPTICITY_TOL = 1e-12


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class GridDomain:
    """An open set realized as a boolean node mask over a bounding box.

    Nodes live at ``origin + index * spacing``.  Row ``i`` of ``nodes`` is the
    multi-index of the node with index ``i``; this fixes the node-index
    bijection.  Fresh domains order nodes row-major; fattened domains keep the
    parent's nodes as a prefix so that matrices indexed by the parent embed
    directly.
    """

    dim: int
    spacing: float
    origin: np.ndarray
    mask: np.ndarray
    nodes: np.ndarray

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ConfigError(f"dim must be 1, 2 or 3, got {self.dim}")
        if not (np.isfinite(self.spacing) and self.spacing > 0):
            raise ConfigError("grid spacing must be positive and finite")
        mask = np.asarray(self.mask, dtype=bool)
        if mask.ndim != self.dim:
            raise ConfigError("mask rank does not match dim")
        nodes = np.asarray(self.nodes, dtype=np.int64)
        n = int(mask.sum())
        if n == 0:
            raise ConfigError("degenerate domain")
        if nodes.shape != (n, self.dim):
            raise ConfigError("node list inconsistent with mask")
        index_grid = np.full(mask.shape, -1, dtype=np.int64)
        index_grid[tuple(nodes.T)] = np.arange(n)
        if not np.array_equal(index_grid >= 0, mask):
            raise ConfigError("node list is not a bijection onto the mask")
        object.__setattr__(self, "origin", _readonly(np.asarray(self.origin, float)))
        object.__setattr__(self, "mask", _readonly(mask))
        object.__setattr__(self, "nodes", _readonly(nodes))
        object.__setattr__(self, "_index_grid", _readonly(index_grid))

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def box_shape(self) -> tuple:
        return self.mask.shape

    @property
    def volume(self) -> float:
        """Exactly ``spacing**dim`` times the mask cardinality."""
        return self.n_nodes * self.spacing ** self.dim

    @property
    def index_grid(self) -> np.ndarray:
        """Node index per box position, -1 outside the mask."""
        return self._index_grid

    def coordinates(self) -> np.ndarray:
        """Physical coordinates of the nodes, shape (n_nodes, dim)."""
        return self.origin + self.nodes * self.spacing

    def flat_indices(self) -> np.ndarray:
        """Row-major flat box index of each node."""
        return np.ravel_multi_index(tuple(self.nodes.T), self.box_shape)


def _from_mask(dim, spacing, origin, mask) -> GridDomain:
    nodes = np.argwhere(mask)
    if nodes.size == 0:
        raise ConfigError("degenerate domain")
    return GridDomain(dim, float(spacing), np.asarray(origin, float), mask, nodes)


def _tighten(mask: np.ndarray, origin: np.ndarray, h: float):
    """Crop the bounding box to the smallest box containing the mask."""
    if not mask.any():
        raise ConfigError("degenerate domain")
    slices = []
    shift = np.zeros(mask.ndim)
    for ax in range(mask.ndim):
        hit = np.nonzero(mask.any(axis=tuple(i for i in range(mask.ndim) if i != ax)))[0]
        slices.append(slice(hit[0], hit[-1] + 1))
        shift[ax] = hit[0]
    return mask[tuple(slices)], origin + shift * h


def build_domain(spec, h: float) -> GridDomain:
    """Rasterize a shape descriptor at spacing h.

    The mask keeps exactly the grid nodes (integer multiples of h) that lie
    strictly inside the open set.  Supported descriptors::

        {"type": "interval", "lo": 0.0, "hi": 1.0}
        {"type": "box", "lo": [...], "hi": [...]}
        {"type": "disk", "center": [...], "radius": r}
        {"type": "mask_file", "path": "domain.mask"}

    A bare path string is treated as a mask file.
    """
    if isinstance(spec, (str, Path)):
        spec = {"type": "mask_file", "path": str(spec)}
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError("domain spec must be a path or a dict with a 'type' key")
    kind = spec["type"]

    if kind == "mask_file":
        d = load_mask(spec["path"])
        if h is not None and abs(d.spacing - h) > 1e-12 * max(abs(h), d.spacing):
            raise ConfigError(
                f"mask file spacing {d.spacing} disagrees with requested h={h}"
            )
        return d

    if h is None or not (np.isfinite(h) and h > 0):
        raise ConfigError("grid spacing h must be positive and finite")

    if kind == "interval":
        lo, hi = [float(spec["lo"])], [float(spec["hi"])]
        dim = 1
    elif kind == "box":
        lo = [float(v) for v in spec["lo"]]
        hi = [float(v) for v in spec["hi"]]
        dim = len(lo)
        if len(hi) != dim:
            raise ConfigError("box lo/hi length mismatch")
    elif kind == "disk":
        center = np.asarray(spec["center"], float)
        radius = float(spec["radius"])
        if radius <= 0:
            raise ConfigError("disk radius must be positive")
        dim = center.size
        lo = list(center - radius)
        hi = list(center + radius)
    else:
        raise ConfigError(f"unknown domain type {kind!r}")
    if dim not in (1, 2, 3):
        raise ConfigError("only 1, 2 and 3 dimensional domains are supported")

    # nodes within 1e-9 * h of the boundary are treated as boundary nodes,
    # so spacings like 1/49 still tile (0, 1) without float leakage
    snap = 1e-9 * h
    axes = []
    for a, b in zip(lo, hi):
        if not b > a:
            raise ConfigError("degenerate domain")
        k0, k1 = math.floor(a / h) - 1, math.ceil(b / h) + 1
        ks = np.array(
            [k for k in range(k0, k1 + 1) if a + snap < k * h < b - snap],
            dtype=np.int64,
        )
        if kind != "disk" and ks.size == 0:
            raise ConfigError("degenerate domain")
        axes.append(ks)

    if kind == "disk":
        if not all(a.size for a in axes):
            raise ConfigError("degenerate domain")
        grids = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g * h for g in grids], axis=-1)
        mask = np.linalg.norm(pts - center, axis=-1) < radius - snap
    else:
        mask = np.ones([a.size for a in axes], dtype=bool)
    origin = np.array([a[0] * h for a in axes], dtype=float)
    mask, origin = _tighten(mask, origin, h)
    return _from_mask(dim, h, origin, mask)


def fatten(d: GridDomain, radius: int) -> GridDomain:
    """Dilate the mask by ``radius`` nodes per axis (sup-norm dilation).

    The original nodes keep their indices as a prefix of the new ordering, so
    restriction-then-fatten round trips are the identity on them.
    """
    r = int(radius)
    if r != radius or r < 1:
        raise ConfigError("fattening radius must be a positive integer")
    pad = np.pad(d.mask, r)
    structure = np.ones((3,) * d.dim, dtype=bool)
    fat = ndimage.binary_dilation(pad, structure=structure, iterations=r)
    parent = d.nodes + r
    taken = np.zeros(fat.shape, dtype=bool)
    taken[tuple(parent.T)] = True
    fresh = np.argwhere(fat & ~taken)
    nodes = np.concatenate([parent, fresh], axis=0)
    return GridDomain(d.dim, d.spacing, d.origin - r * d.spacing, fat, nodes)


# ---------------------------------------------------------------------------
# mask file format: one header line "dim h n1 [n2 [n3]] o1 [o2 [o3]]",
# then row-major 0/1 node flags, whitespace separated.

def save_mask(d: GridDomain, path) -> None:
    with open(path, "w") as fh:
        header = [str(d.dim), repr(float(d.spacing))]
        header += [str(n) for n in d.box_shape]
        header += [repr(float(o)) for o in d.origin]
        fh.write(" ".join(header) + "\n")
        flat = d.mask.astype(np.int8).ravel()
        for start in range(0, flat.size, 40):
            fh.write(" ".join(str(int(v)) for v in flat[start:start + 40]) + "\n")


def load_mask(path) -> GridDomain:
    with open(path) as fh:
        tokens = fh.read().split()
    if not tokens:
        raise ConfigError("degenerate domain")
    dim = int(tokens[0])
    if dim not in (1, 2, 3):
        raise ConfigError(f"mask file dim must be 1, 2 or 3, got {dim}")
    h = float(tokens[1])
    shape = tuple(int(t) for t in tokens[2:2 + dim])
    origin = np.array([float(t) for t in tokens[2 + dim:2 + 2 * dim]])
    body = tokens[2 + 2 * dim:]
    count = int(np.prod(shape))
    if len(body) != count:
        raise ConfigError(
            f"mask file body has {len(body)} entries, expected {count}"
        )
    mask = np.array([int(t) for t in body], dtype=bool).reshape(shape)
    if not mask.any():
        raise ConfigError("degenerate domain")
    mask, origin = _tighten(mask, origin, h)
    return _from_mask(dim, h, origin, mask)


# ---------------------------------------------------------------------------
# coefficient fields

@dataclass(frozen=True, eq=False)
class CoefficientField:
    """Sampled coefficients on the bounding box of a (fattened) domain.

    ``a_diag[ax]`` and ``theta[ax]`` are link samples: the entry at box index
    ``idx`` belongs to the link from ``idx`` to ``idx + e_ax`` and is taken at
    the link midpoint.  ``theta = h * b`` is the magnetic phase per link.
    ``q`` is sampled on nodes.  ``eps_a`` is the sampled minimum of ``a_diag``.
    """

    box_origin: np.ndarray
    box_shape: tuple
    spacing: float
    a_diag: tuple
    theta: tuple
    q: np.ndarray
    eps_a: float
    analytic_spec: dict | None = None

    def __post_init__(self):
        dim = len(self.box_shape)
        if dim not in (1, 2, 3):
            raise ConfigError("coefficient box must be 1, 2 or 3 dimensional")
        if len(self.a_diag) != dim or len(self.theta) != dim:
            raise ConfigError("need one link-sample array per axis")
        for arr in (*self.a_diag, *self.theta, self.q):
            if arr.shape != tuple(self.box_shape):
                raise ConfigError("coefficient sample shape mismatch")
        object.__setattr__(self, "box_origin", _readonly(np.asarray(self.box_origin, float)))
        object.__setattr__(self, "a_diag", tuple(_readonly(a) for a in self.a_diag))
        object.__setattr__(self, "theta", tuple(_readonly(t) for t in self.theta))
        object.__setattr__(self, "q", _readonly(self.q))

    @property
    def dim(self) -> int:
        return len(self.box_shape)

    @property
    def is_magnetic(self) -> bool:
        return any(np.any(t != 0.0) for t in self.theta)

    @property
    def is_free(self) -> bool:
        return (
            not self.is_magnetic
            and all(np.all(a == 1.0) for a in self.a_diag)
            and np.all(self.q == 0.0)
        )

    @property
    def max_a(self) -> float:
        return float(max(a.max() for a in self.a_diag))

    @property
    def max_q(self) -> float:
        return float(self.q.max())

    def with_theta(self, theta) -> "CoefficientField":
        return CoefficientField(
            self.box_origin, self.box_shape, self.spacing,
            self.a_diag, tuple(theta), self.q, self.eps_a, None,
        )


def _indicator(lo, hi, x):
    x = np.asarray(x, dtype=float)
    return np.where((x >= lo) & (x <= hi), 1.0, 0.0)


@lru_cache(maxsize=256)
def _compile_expr(expr: str, dim: int):
    import sympy
    from sympy.parsing.sympy_parser import (
        parse_expr, standard_transformations, convert_xor,
    )

    syms = [sympy.Symbol(f"x{i + 1}") for i in range(dim)]
    local = {s.name: s for s in syms}
    local["indicator"] = sympy.Function("indicator")
    try:
        tree = parse_expr(
            expr,
            local_dict=local,
            transformations=standard_transformations + (convert_xor,),
        )
    except Exception as exc:
        raise ConfigError(f"cannot parse field expression {expr!r}: {exc}") from exc
    stray = tree.free_symbols - set(syms)
    if stray:
        names = ", ".join(sorted(s.name for s in stray))
        raise ConfigError(f"unknown symbols in field expression {expr!r}: {names}")
    return sympy.lambdify(syms, tree, modules=[{"indicator": _indicator}, "numpy"])


def _evaluate_expr(expr, coords, shape) -> np.ndarray:
    """Evaluate an expression string (or number) on broadcastable coord arrays."""
    if isinstance(expr, (int, float)):
        return np.full(shape, float(expr))
    fn = _compile_expr(str(expr), len(coords))
    out = fn(*coords)
    return np.broadcast_to(np.asarray(out, dtype=float), shape).copy()


def _per_axis(value, dim, default):
    if value is None:
        value = default
    if isinstance(value, (list, tuple)):
        if len(value) != dim:
            raise ConfigError("per-axis field list length must equal dim")
        return list(value)
    return [value] * dim


def sample_coefficients(d: GridDomain, spec=None, m: int = 1) -> CoefficientField:
    """Sample a, b, q from closed-form definitions on the m-fattened box.

    ``spec`` maps "a", "b", "q" to expression strings in x1..xn (or numbers);
    "a" and "b" may be per-axis lists.  Omitted fields default to the free
    case a=1, b=0, q=0.  An optional "r0" asserts that a equals 1 on links
    whose midpoint lies at distance >= r0 from the origin.
    """
    spec = dict(spec or {})
    m = int(m)
    if m < 0:
        raise ConfigError("fattening order m must be nonnegative")
    box = fatten(d, m) if m >= 1 else d
    shape = box.box_shape
    h = d.spacing
    dim = d.dim

    node_axes = [
        (box.origin[ax] + np.arange(shape[ax]) * h).reshape(
            tuple(-1 if i == ax else 1 for i in range(dim))
        )
        for ax in range(dim)
    ]

    a_exprs = _per_axis(spec.get("a"), dim, 1)
    b_exprs = _per_axis(spec.get("b"), dim, 0)
    q_expr = spec.get("q", 0)

    a_diag, theta = [], []
    for ax in range(dim):
        mid = [c + (0.5 * h if i == ax else 0.0) for i, c in enumerate(node_axes)]
        a_samples = _evaluate_expr(a_exprs[ax], mid, shape)
        if a_samples.min() < ELLIPTICITY_TOL:
            raise ConfigError("ellipticity violated")
        a_diag.append(a_samples)
        theta.append(h * _evaluate_expr(b_exprs[ax], mid, shape))

    q = _evaluate_expr(q_expr, node_axes, shape)
    if q.min() < 0.0:
        raise ConfigError("sign violated")

    if "r0" in spec:
        r0 = float(spec["r0"])
        for ax in range(dim):
            mid = [c + (0.5 * h if i == ax else 0.0) for i, c in enumerate(node_axes)]
            dist = np.sqrt(sum(np.broadcast_to(c, shape) ** 2 for c in mid))
            outside = dist >= r0
            if np.any(np.abs(a_diag[ax][outside] - 1.0) > 1e-12):
                raise ConfigError(
                    "diffusion coefficient must equal 1 outside radius r0"
                )

    eps_a = float(min(a.min() for a in a_diag))
    return CoefficientField(
        box.origin, shape, h, tuple(a_diag), tuple(theta), q, eps_a, spec or None,
    )
