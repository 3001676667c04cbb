"""Config-driven counting experiments binding assembly, solves, and bounds.

A single experiment assembles the Dirichlet matrix and the buckling pencil
for one domain/coefficient configuration, solves both spectra, evaluates the
counting functions against the closed-form bound curves and the Weyl leading
term on a lambda grid, and emits a CSV table plus a JSON report.  Identical
configs produce byte-identical CSV output.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import bounds as bnd
from .assembly import assemble_krein_pencil
from .eigensolve import counting, hermitian_eigs, pencil_eigs, trust_cutoff
from .errors import ConfigError
from .grid import build_domain, sample_coefficients
from .scattering import cphi_estimate, default_xi_grid, uniform_problem

__all__ = ["ExperimentConfig", "BoundReport", "run_counting_experiment"]

CSV_HEADER = "lambda,N_K,N_F,krein_bound,friedrichs_bound,weyl_leading,trusted"


@dataclass
class ExperimentConfig:
    """Validated description of one counting experiment."""

    domain: dict
    lambda_grid: list
    coefficients: dict | None = None
    m: int = 1
    k: int | None = None
    cphi_source: str = "free_field"
    cphi_value: float | None = None
    scattering: dict | None = None
    trust_fraction: float = 0.1
    allow_untrusted: bool = False
    label: str = "experiment"

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("experiment config must be a JSON object")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            cfg = cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc))
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_mapping(json.load(fh))

    def validate(self) -> None:
        if "h" not in self.domain:
            raise ConfigError("domain spec needs a grid spacing 'h'")
        grid = np.asarray(self.lambda_grid, dtype=float)
        if grid.size == 0:
            raise ConfigError("lambda grid must be nonempty")
        if np.any(grid <= 0):
            raise ConfigError("lambda grid values must be positive")
        if np.any(np.diff(grid) <= 0):
            raise ConfigError("lambda grid must be strictly increasing")
        if int(self.m) != self.m or self.m < 1:
            raise ConfigError("m must be a positive integer")
        if self.cphi_source not in ("free_field", "scattering", "explicit"):
            raise ConfigError(f"unknown cphi source {self.cphi_source!r}")
        if self.cphi_source == "explicit":
            if self.cphi_value is None or self.cphi_value <= 0:
                raise ConfigError("explicit cphi requires a positive cphi_value")
        if self.cphi_source == "scattering" and not self.scattering:
            raise ConfigError("scattering cphi requires a 'scattering' section")
        if not 0 < self.trust_fraction <= 1:
            raise ConfigError("trust_fraction must lie in (0, 1]")


@dataclass
class BoundReport:
    """Per-lambda counting values, bound curves, and the global verdict."""

    rows: list
    passed: bool
    metadata: dict
    violations: list = field(default_factory=list)

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(CSV_HEADER + "\n")
            for row in self.rows:
                fh.write(
                    f"{row['lambda']:.17g},{row['N_K']},{row['N_F']},"
                    f"{row['krein_bound']:.17g},{row['friedrichs_bound']:.17g},"
                    f"{row['weyl_leading']:.17g},{int(row['trusted'])}\n"
                )

    def write_json(self, path) -> None:
        payload = {
            "passed": self.passed,
            "violations": self.violations,
            "metadata": self.metadata,
            "rows": self.rows,
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _resolve_cphi(cfg: ExperimentConfig, d, c) -> float:
    if cfg.cphi_source == "explicit":
        return float(cfg.cphi_value)
    if cfg.cphi_source == "free_field":
        if not c.is_free:
            raise ConfigError(
                "cphi source 'free_field' is only valid for a=1, b=0, q=0; "
                "provide a scattering estimate or an explicit value"
            )
        return d.volume
    sc = dict(cfg.scattering)
    problem = uniform_problem(
        d.dim,
        sc.get("q0", 0.0),
        sc["lo"],
        sc["hi"],
        int(sc.get("n", 64)),
        int(sc.get("sign", +1)),
    )
    if "xi_grid" in sc:
        xi_grid = [np.asarray(x, dtype=float) for x in sc["xi_grid"]]
    else:
        xi_grid = default_xi_grid(d.dim, int(sc.get("n_moduli", 6)))
    return cphi_estimate(problem, d, xi_grid).cphi


def run_counting_experiment(cfg: ExperimentConfig) -> BoundReport:
    """Assemble, solve, and compare counting functions against their bounds.

    Rows above the trust cutoff are dropped unless ``allow_untrusted`` is set,
    in which case they are kept and flagged.  The report fails when any
    trusted row violates N_K <= N_F <= friedrichs_bound or N_K <= krein_bound.
    """
    cfg.validate()
    timings = {}
    t0 = time.perf_counter()

    spec = dict(cfg.domain)
    h = spec.pop("h")
    d = build_domain(spec, h)
    c = sample_coefficients(d, cfg.coefficients, m=int(cfg.m))
    cutoff = trust_cutoff(d, int(cfg.m), cfg.trust_fraction, c)
    timings["setup"] = time.perf_counter() - t0

    grid = [float(v) for v in cfg.lambda_grid]
    kept = [v for v in grid if cfg.allow_untrusted or v <= cutoff]
    if not kept:
        raise ConfigError(
            f"no lambda grid point lies below the trust cutoff {cutoff:g}"
        )
    lam_max = max(kept)

    t0 = time.perf_counter()
    numerator, denominator = assemble_krein_pencil(d, c, m=int(cfg.m))
    timings["assembly"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if cfg.k is not None:
        spec_f = hermitian_eigs(denominator, k=int(cfg.k), trust=cutoff)
        spec_k = pencil_eigs(numerator, denominator, k=int(cfg.k), trust=cutoff)
    else:
        spec_f = hermitian_eigs(denominator, upto=lam_max, trust=cutoff)
        spec_k = pencil_eigs(numerator, denominator, upto=lam_max, trust=cutoff)
    timings["solve"] = time.perf_counter() - t0

    cphi = _resolve_cphi(cfg, d, c)
    n, m = d.dim, int(cfg.m)

    rows, violations = [], []
    for lam in kept:
        trusted = lam <= cutoff
        n_k = counting(spec_k, lam)
        n_f = counting(spec_f, lam)
        kb = bnd.krein_bound(lam, n, m, cphi)
        fb = bnd.friedrichs_bound(lam, n, m, cphi)
        wl = bnd.weyl_leading(lam, d, c, m)
        rows.append(
            {
                "lambda": lam,
                "N_K": n_k,
                "N_F": n_f,
                "krein_bound": kb,
                "friedrichs_bound": fb,
                "weyl_leading": wl,
                "trusted": trusted,
            }
        )
        if trusted:
            if n_k > n_f:
                violations.append(f"lambda={lam:g}: N_K={n_k} > N_F={n_f}")
            if n_k > kb:
                violations.append(f"lambda={lam:g}: N_K={n_k} > krein bound {kb:g}")
            if n_f > fb:
                violations.append(f"lambda={lam:g}: N_F={n_f} > friedrichs bound {fb:g}")

    metadata = {
        "label": cfg.label,
        "h": d.spacing,
        "n_nodes": d.n_nodes,
        "dim": d.dim,
        "m": m,
        "volume": d.volume,
        "cphi": cphi,
        "cphi_source": cfg.cphi_source,
        "trust_cutoff": cutoff,
        "eigenvalues_computed": {
            "friedrichs": spec_f.count_computed,
            "pencil": spec_k.count_computed,
        },
        "timings_s": {k: round(v, 6) for k, v in timings.items()},
    }
    return BoundReport(rows, not violations, metadata, violations)
