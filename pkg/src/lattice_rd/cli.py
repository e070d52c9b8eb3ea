"""Command-line harness.

Subcommands: simulate, converge, kernel, besov, fk. Exit codes: 0 success,
1 I/O or schema error, 2 stability gate refusal, 3 divergence.
Outputs go to ``--out``, else $LATTICE_RD_OUT, else ./out.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .besov import BesovSpec, delta_besov_norm, write_norm_csv
from .boundary import BoundaryPath
from .config import (ConfigError, build_scheme_config, load_json, resolve_config)
from .convergence import run_convergence
from .feynman_kac import fk_estimate, heat_boundary_spec
from .heat_kernel import boundary_solution_u_history, hd_row, write_kernel_csv
from .seeding import derive_seed
from .solver import StabilityError, check_stability, run_direct, run_split

EXIT_OK, EXIT_IO, EXIT_GATE, EXIT_DIVERGED = 0, 1, 2, 3
OUT_ENV = "LATTICE_RD_OUT"


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV, "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump(obj, path: Path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not serialisable: {type(o)}")


def _config_comment(resolved: dict) -> str:
    return "# config: " + json.dumps(resolved, sort_keys=True, default=_json_default)


def _error(msg: str, code: int, out: Path | None = None, extra: dict | None = None) -> int:
    payload = {"status": "error", "exit_code": code, "message": msg, **(extra or {})}
    print(json.dumps(payload, default=_json_default), file=sys.stderr)
    if out is not None:
        _dump(payload, out / "summary.json")
    return code


def _fmt(x: float) -> str:
    return repr(float(x))


def cmd_simulate(args) -> int:
    try:
        raw = load_json(args.config) if args.config else {}
        overrides = {key: getattr(args, key.replace("lambda", "lam")) for key in
                     ("A", "B", "lambda", "eta", "h", "k", "T", "M", "truncation",
                      "snapshots")}
        if args.allow_unstable:
            overrides["allow_unstable"] = True
        if args.solver:
            overrides["solver"] = args.solver
        resolved = resolve_config(raw, overrides, args.seed)
        out = _out_dir(args)
    except StabilityError as exc:
        return _error(str(exc), EXIT_GATE)
    except (ConfigError, OSError) as exc:
        return _error(str(exc), EXIT_IO)
    try:
        sc = build_scheme_config(resolved)
    except ConfigError as exc:
        return _error(str(exc), EXIT_IO, out, {"config": resolved})
    try:
        gate = check_stability(sc)
    except StabilityError as exc:
        return _error(str(exc), EXIT_GATE, out, {"config": resolved})
    summary = {"config": resolved, "seeds": {"root": resolved["seed"],
                                             "psi": resolved["psi_seed"]},
               "gate": gate.to_dict(), "version": __version__}
    if not gate.stable and not sc.allow_unstable:
        summary.update(status="refused", exit_code=EXIT_GATE,
                       message=f"k={sc.k} exceeds k_max={gate.k_max} ({gate.branch})")
        _dump(summary, out / "summary.json")
        print(summary["message"], file=sys.stderr)
        return EXIT_GATE
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        if resolved["solver"] == "split":
            traj = run_split(sc, stride=resolved["snapshots"])
        elif resolved["solver"] == "direct":
            traj = run_direct(sc, stride=resolved["snapshots"])
        else:
            return _error(f"unknown solver {resolved['solver']!r}", EXIT_IO, out)
    x = sc.lattice.x
    with open(out / "trajectory.csv", "w", newline="") as fh:
        fh.write(_config_comment(resolved) + "\n")
        w = csv.writer(fh)
        w.writerow(["n", "t", "m", "x", "s", "c"])
        for i, n in enumerate(traj.steps):
            for m in range(x.size):
                w.writerow([int(n), _fmt(n * sc.k), m, _fmt(x[m]),
                            _fmt(traj.s[i, m]), _fmt(traj.c[i, m])])
    mon = dict(traj.monitors)
    summary.update(monitors=mon, diverged=traj.diverged,
                   psi={"min": float(sc.psi.values.min()), "max": float(sc.psi.values.max()),
                        **{k: v for k, v in sc.psi.meta.items()}},
                   porosity_ge_one=bool(np.any(sc.phi(sc.c0) >= 1)))
    if traj.diverged:
        summary.update(status="diverged", exit_code=EXIT_DIVERGED)
        _dump(summary, out / "summary.json")
        return EXIT_DIVERGED
    summary.update(status="ok", exit_code=EXIT_OK)
    _dump(summary, out / "summary.json")
    return EXIT_OK


def cmd_converge(args) -> int:
    try:
        study = load_json(args.config)
        out = _out_dir(args)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = run_convergence(study, args.seed)
    except StabilityError as exc:
        return _error(str(exc), EXIT_GATE)
    except (ConfigError, OSError) as exc:
        return _error(str(exc), EXIT_IO)
    except RuntimeError as exc:
        return _error(str(exc), EXIT_DIVERGED)
    cols = ["h_coarse", "h_fine", "besov_L2t", "Linf_t_L2x", "Linf_t_L2x_nodal",
            "order_besov_L2t", "order_Linf_t_L2x", "order_Linf_t_L2x_nodal"]
    with open(out / "convergence.csv", "w", newline="") as fh:
        fh.write(_config_comment(res.resolved["study"]) + "\n")
        w = csv.writer(fh)
        w.writerow(cols)
        for row in res.rows:
            w.writerow([_fmt(row.get(c, math.nan)) for c in cols])
    _dump({"status": "ok", "exit_code": EXIT_OK, "config": res.resolved,
           "rows": res.rows, "levels": res.level_info}, out / "convergence.json")
    return EXIT_OK


def cmd_kernel(args) -> int:
    try:
        raw = load_json(args.config) if args.config else {}
        h = float(raw.get("h", 0.1))
        times = [float(t) for t in raw.get("times", [0.01, 0.1, 1.0])]
        n_max = int(raw.get("n_max", 30))
        out = _out_dir(args)
    except (ConfigError, OSError, ValueError) as exc:
        return _error(str(exc), EXIT_IO)
    resolved = {"h": h, "times": times, "n_max": n_max}
    write_kernel_csv(out / "kernel.csv", h, times, n_max)
    with open(out / "kernel_mass.csv", "w", newline="") as fh:
        fh.write(_config_comment(resolved) + "\n")
        w = csv.writer(fh)
        w.writerow(["t", "mass", "mass_residual"])
        for t in times:
            n_full = max(n_max, int(40 * math.sqrt(2 * t) / h) + 40)
            row = hd_row(t, h, n_full)
            mass = h * (row[0] + 2 * row[1:].sum())
            w.writerow([_fmt(t), _fmt(mass), _fmt(abs(mass - 1))])
    _dump({"status": "ok", "config": resolved}, out / "kernel.json")
    return EXIT_OK


def cmd_besov(args) -> int:
    try:
        raw = load_json(args.config) if args.config else {}
        hs = [float(h) for h in raw.get("hs", [0.2, 0.1, 0.05, 0.025])]
        ps = [float(p) for p in raw.get("ps", [1.0, 2.0])]
        offsets = [float(a) for a in raw.get("alpha_offsets", [-0.2, 0.2])]
        q = float(raw.get("q", 2.0))
        out = _out_dir(args)
    except (ConfigError, OSError, ValueError) as exc:
        return _error(str(exc), EXIT_IO)
    resolved = {"sweep": "delta", "hs": hs, "ps": ps, "alpha_offsets": offsets, "q": q}
    rows = []
    for p in ps:
        for off in offsets:
            alpha = 1.0 / p - 1.0 + off
            for h in hs:
                rows.append((h, alpha, p, q, delta_besov_norm(h, BesovSpec(alpha, p, q))))
    write_norm_csv(out / "norms.csv", rows)
    _dump({"status": "ok", "config": resolved}, out / "besov.json")
    return EXIT_OK


def cmd_fk(args) -> int:
    """Heat-with-boundary verification: FK estimates vs the kernel solution."""
    try:
        raw = load_json(args.config) if args.config else {}
        cfg = {"h": 0.1, "t": 0.5, "probes": [1, 2, 3, 4, 5], "n_samples": 100000,
               "psi": {"source": "pearson", "params": {}}, "N": 2000, "eta": 1.0,
               "seed": 0}
        cfg.update(raw)
        if args.seed is not None:
            cfg["seed"] = int(args.seed)
        out = _out_dir(args)
        from .config import build_psi
        psi_seed = derive_seed(cfg["seed"], "psi")
        psi = build_psi(cfg["psi"], float(cfg["t"]), int(cfg["N"]), float(cfg["eta"]), psi_seed)
    except (ConfigError, OSError, ValueError, KeyError) as exc:
        return _error(str(exc), EXIT_IO)
    h, t = float(cfg["h"]), float(cfg["t"])
    M = max(cfg["probes"]) + 2
    from .lattice import Lattice
    u = boundary_solution_u_history(psi, Lattice(h, M))[-1]
    spec = heat_boundary_spec(h, psi, t)
    results = []
    for i, m in enumerate(cfg["probes"]):
        est = fk_estimate(spec, 0.0, m * h, t, int(cfg["n_samples"]),
                          derive_seed(cfg["seed"], f"fk/probe/{i}"))
        d = est.to_dict()
        d["t"] = t
        d.update(deterministic=float(u[m]),
                 within_ci=bool(abs(est.mean - u[m]) <= 3 * est.std / math.sqrt(est.n)))
        results.append(d)
    _dump({"status": "ok", "config": cfg, "seeds": {"root": cfg["seed"], "psi": psi_seed},
           "estimates": results}, out / "fk.json")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lattice-rd", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, needs_config=False):
        p.add_argument("--config", required=needs_config, help="JSON configuration file")
        p.add_argument("--seed", type=int, default=None, help="root seed")
        p.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./out)")

    p = sub.add_parser("simulate", help="run the fully discrete scheme")
    common(p)
    p.add_argument("--allow-unstable", action="store_true",
                   help="run even if k exceeds the stability bound")
    p.add_argument("--solver", choices=["direct", "split"], default=None,
                   help="direct scheme (default) or the split solver")
    for key, typ in (("A", float), ("B", float), ("lam", float), ("eta", float),
                     ("h", float), ("k", float), ("T", float), ("M", int),
                     ("snapshots", int)):
        flag = "--lambda" if key == "lam" else f"--{key}"
        p.add_argument(flag, dest=key, type=typ, default=None)
    p.add_argument("--truncation", choices=["zero", "last"], default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("converge", help="grid refinement study")
    common(p, needs_config=True)
    p.set_defaults(func=cmd_converge)

    for name, func, text in (("kernel", cmd_kernel, "heat kernel table"),
                             ("besov", cmd_besov, "Besov norm sweep of the lattice Dirac mass"),
                             ("fk", cmd_fk, "Feynman-Kac heat-with-boundary check")):
        p = sub.add_parser(name, help=text)
        common(p)
        p.set_defaults(func=func)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
