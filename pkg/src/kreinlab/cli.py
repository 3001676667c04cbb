"""Command line front end.

Subcommands: bounds, spectrum, buckling, counting, minimize, lswaves, verify.
Exit codes: 0 pass, 2 bound violation (or verified-constant disagreement),
3 solver failure, 4 config error.  Heavy imports happen inside the handlers
so that --threads can cap the BLAS pools before numpy loads.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_VIOLATION = 2
EXIT_SOLVER = 3
EXIT_CONFIG = 4


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_config(path):
    with open(path) as fh:
        return json.load(fh)


def _cmd_counting(args) -> int:
    from .experiment import ExperimentConfig, run_counting_experiment

    data = _load_config(args.config)
    if args.allow_untrusted:
        data["allow_untrusted"] = True
    cfg = ExperimentConfig.from_mapping(data)
    report = run_counting_experiment(cfg)
    out = _out_dir(args)
    report.write_csv(out / f"{cfg.label}.csv")
    report.write_json(out / f"{cfg.label}.json")
    print(f"wrote {out / (cfg.label + '.csv')} ({len(report.rows)} rows)")
    if not report.passed:
        for line in report.violations:
            print(f"bound violation: {line}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def _build_problem(data):
    from .grid import build_domain, sample_coefficients

    domain = dict(data["domain"])
    h = domain.pop("h")
    d = build_domain(domain, h)
    m = int(data.get("m", 1))
    c = sample_coefficients(d, data.get("coefficients"), m=m)
    return d, c, m


def _cmd_spectrum(args) -> int:
    from .assembly import assemble_friedrichs
    from .eigensolve import hermitian_eigs, trust_cutoff, write_spectrum

    data = _load_config(args.config)
    d, c, m = _build_problem(data)
    cutoff = trust_cutoff(d, m, float(data.get("trust_fraction", 0.1)), c)
    spec = hermitian_eigs(
        assemble_friedrichs(d, c, m), k=data.get("k"), trust=cutoff
    )
    out = _out_dir(args) / data.get("label", "spectrum")
    write_spectrum(f"{out}.csv", spec)
    print(f"wrote {out}.csv ({spec.count_computed} eigenvalues, cutoff {cutoff:g})")
    return EXIT_OK


def _cmd_buckling(args) -> int:
    from .assembly import assemble_krein_pencil
    from .eigensolve import pencil_eigs, trust_cutoff, write_spectrum

    data = _load_config(args.config)
    d, c, m = _build_problem(data)
    cutoff = trust_cutoff(d, m, float(data.get("trust_fraction", 0.1)), c)
    num, den = assemble_krein_pencil(d, c, m)
    spec = pencil_eigs(num, den, k=data.get("k"), trust=cutoff)
    out = _out_dir(args) / data.get("label", "buckling")
    write_spectrum(f"{out}.csv", spec)
    print(f"wrote {out}.csv ({spec.count_computed} eigenvalues, cutoff {cutoff:g})")
    return EXIT_OK


def _cmd_bounds(args) -> int:
    from . import bounds as bnd

    n, m, cphi = args.n, args.m, args.cphi
    rows = []
    for lam in args.lambdas:
        rows.append(
            (lam, bnd.krein_bound(lam, n, m, cphi), bnd.friedrichs_bound(lam, n, m, cphi))
        )
    out = _out_dir(args) / f"bounds_n{n}_m{m}.csv"
    with open(out, "w") as fh:
        fh.write("lambda,krein_bound,friedrichs_bound\n")
        for lam, kb, fb in rows:
            fh.write(f"{lam:.17g},{kb:.17g},{fb:.17g}\n")
    print(
        f"n={n} m={m} cphi={cphi:g}: krein shape {bnd.krein_shape_factor(n, m):.12g}, "
        f"friedrichs shape {bnd.friedrichs_shape_factor(n, m):.12g}; wrote {out}"
    )
    return EXIT_OK


def _cmd_minimize(args) -> int:
    from . import bounds as bnd

    closed = bnd.krein_minimum(args.n, args.m)
    oracle = bnd.krein_minimum_oracle(args.n, args.m)
    fr_closed = bnd.friedrichs_minimum(args.n, args.m)
    fr_oracle = bnd.friedrichs_minimum_oracle(args.n, args.m)
    payload = {
        "n": args.n,
        "m": args.m,
        "krein": {
            "closed_form": {"alpha_star": closed.alpha_star, "value": closed.value},
            "oracle": {"alpha_star": oracle.alpha_star, "value": oracle.value},
        },
        "friedrichs": {
            "closed_form": {"alpha_star": fr_closed.alpha_star, "value": fr_closed.value},
            "oracle": {"alpha_star": fr_oracle.alpha_star, "value": fr_oracle.value},
        },
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    ok = (
        abs(oracle.value - closed.value) <= 1e-6 * closed.value
        and abs(fr_oracle.value - fr_closed.value) <= 1e-6 * fr_closed.value
    )
    if not ok:
        print("oracle and closed form disagree beyond 1e-6", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def _cmd_lswaves(args) -> int:
    import numpy as np

    from .grid import build_domain
    from .scattering import (
        cphi_estimate, default_xi_grid, solve_lippmann_schwinger,
        uniform_problem, write_cphi_json, write_waves_csv,
    )

    data = _load_config(args.config)
    domain = dict(data["domain"])
    d = build_domain(domain, domain.pop("h"))
    sc = data["scattering"]
    problem = uniform_problem(
        d.dim, sc.get("q0", 0.0), sc["lo"], sc["hi"],
        int(sc.get("n", 64)), int(sc.get("sign", 1)),
    )
    if "xi_grid" in sc:
        xi_grid = [np.asarray(x, dtype=float) for x in sc["xi_grid"]]
    else:
        xi_grid = default_xi_grid(d.dim, int(sc.get("n_moduli", 6)))
    out = _out_dir(args)
    label = data.get("label", "lswaves")
    waves = [solve_lippmann_schwinger(problem, xi, domain=d) for xi in xi_grid]
    write_waves_csv(out / f"{label}.csv", waves, d)
    est = cphi_estimate(problem, d, xi_grid)
    write_cphi_json(out / f"{label}_cphi.json", est)
    print(f"cphi estimate {est.cphi:.12g} (free field {est.free_field_value:.12g}); "
          f"wrote {out / (label + '.csv')}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    from .verify import run_verify_suite

    ok = run_verify_suite(args.level, collapse_pencil=args.debug_collapse_pencil)
    return EXIT_OK if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kreinlab",
        description="eigenvalue counting bounds for Dirichlet and buckling spectra "
                    "on arbitrary grid domains",
    )
    parser.add_argument("--threads", type=int, default=None,
                        help="cap BLAS thread pools (results are thread-count independent)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("counting", help="run a counting experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=".")
    p.add_argument("--allow-untrusted", action="store_true",
                   help="keep lambda rows above the trust cutoff, flagged")
    p.set_defaults(handler=_cmd_counting)

    p = sub.add_parser("spectrum", help="Dirichlet spectrum to CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=".")
    p.set_defaults(handler=_cmd_spectrum)

    p = sub.add_parser("buckling", help="buckling pencil spectrum to CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=".")
    p.set_defaults(handler=_cmd_buckling)

    p = sub.add_parser("bounds", help="evaluate the closed-form bound curves")
    p.add_argument("-n", type=int, required=True)
    p.add_argument("-m", type=int, required=True)
    p.add_argument("--cphi", type=float, required=True)
    p.add_argument("--lambdas", type=float, nargs="+", required=True)
    p.add_argument("--out", default=".")
    p.set_defaults(handler=_cmd_bounds)

    p = sub.add_parser("minimize", help="closed form vs quadrature oracle")
    p.add_argument("-n", type=int, required=True)
    p.add_argument("-m", type=int, required=True)
    p.set_defaults(handler=_cmd_minimize)

    p = sub.add_parser("lswaves", help="distorted plane waves and the cphi estimate")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=".")
    p.set_defaults(handler=_cmd_lswaves)

    p = sub.add_parser("verify", help="run the preset invariant suite")
    p.add_argument("--level", choices=("fast", "full"), default="fast")
    p.add_argument("--debug-collapse-pencil", action="store_true",
                   help="deliberately break the pencil numerator (mutation test)")
    p.set_defaults(handler=_cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)

    from .errors import ConfigError, SolverError

    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
