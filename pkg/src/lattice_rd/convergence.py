"""Grid-refinement study over nested meshes with a common boundary path."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .besov import BesovSpec, TorusGrid, besov_norm_periodic
from .boundary import downsample
from .config import ConfigError, build_psi, build_scheme_config, resolve_config
from .lattice import lp_norm_values
from .solver import Trajectory, run_direct, stability_bound

STUDY_DEFAULTS = {
    "levels": [0.2, 0.1, 0.05],
    "k_factor": 0.9,
    "besov": {"alpha": 0.45, "p": 2.0, "q": 2.0},
    "time_r": 2.0,
}


@dataclass
class ConvergenceResult:
    levels: list
    rows: list
    level_info: list
    resolved: dict
    runtime: float
    trajectories: list = field(default_factory=list, repr=False)


def _nesting(h_coarse: float, h_fine: float) -> int:
    ratio = h_coarse / h_fine
    factor = int(round(ratio))
    if factor < 1 or abs(ratio - factor) > 1e-9 * ratio:
        raise ConfigError(f"levels h={h_coarse} and h={h_fine} are not nested")
    return factor


def resolve_study(study: dict, seed: int | None = None) -> dict:
    unknown = set(study) - set(STUDY_DEFAULTS) - {"base", "seed"}
    if unknown:
        raise ConfigError(f"unknown study keys: {sorted(unknown)}")
    out = {**STUDY_DEFAULTS, **study}
    out["besov"] = {**STUDY_DEFAULTS["besov"], **study.get("besov", {})}
    out["seed"] = int(seed if seed is not None else study.get("seed", 0))
    base = dict(study.get("base", {}))
    for key in ("h", "k", "M"):
        base.pop(key, None)
    if "L" not in base:
        raise ConfigError("study base needs the domain length L")
    out["base"] = base
    levels = [float(h) for h in out["levels"]]
    if len(levels) < 2:
        raise ConfigError("need at least two levels")
    for a, b in zip(levels, levels[1:]):
        _nesting(a, b)
    out["levels"] = levels
    return out


def _level_configs(study: dict):
    """Resolved per-level configs with k_l = k_0 (h_l/h_0)^2."""
    base = study["base"]
    h0 = study["levels"][0]
    first = resolve_config({**base, "h": h0, "k_factor": study["k_factor"]},
                           seed=study["seed"])
    N0 = int(round(first["T"] / first["k"]))
    cfgs = []
    for h in study["levels"]:
        r = _nesting(h0, h)
        cfg = resolve_config({**base, "h": h, "k": first["T"] / (N0 * r * r)},
                             seed=study["seed"])
        cfgs.append(cfg)
    return cfgs, N0


def extend_history(values: np.ndarray, h_from: float, h_to: float, n_nodes: int) -> np.ndarray:
    factor = _nesting(h_from, h_to)
    out = np.repeat(values, factor, axis=-1)
    if out.shape[-1] < n_nodes:
        raise ConfigError("coarse level does not cover the finest lattice")
    return out[..., :n_nodes]


def level_distances(a: Trajectory, b: Trajectory, h_eval: float, n_eval: int,
                    spec: BesovSpec, r: float, grid: TorusGrid) -> dict:
    """Distances between two levels evaluated on the finest lattice."""
    ea = extend_history(a.s, a.lattice.h, h_eval, n_eval)
    eb = extend_history(b.s, b.lattice.h, h_eval, n_eval)
    d = eb - ea
    t = a.times
    besov = np.array([besov_norm_periodic(grid.embed(row), grid, spec) for row in d])
    integrand = besov**r
    d_besov = float(np.sum(0.5 * np.diff(t) * (integrand[1:] + integrand[:-1])) ** (1.0 / r))
    d_l2 = float(max(lp_norm_values(row, h_eval, 2.0) for row in d))
    # injection onto the coarse nodes of the pair
    factor = _nesting(a.lattice.h, b.lattice.h)
    n = min(a.s.shape[1], b.s[:, ::factor].shape[1])
    dn = b.s[:, ::factor][:, :n] - a.s[:, :n]
    d_nodal = float(max(lp_norm_values(row, a.lattice.h, 2.0) for row in dn))
    return {"besov_L2t": d_besov, "Linf_t_L2x": d_l2, "Linf_t_L2x_nodal": d_nodal}


def run_convergence(study_raw: dict, seed: int | None = None) -> ConvergenceResult:
    """Run every level and tabulate distances between consecutive levels.

    The boundary path is generated once on the finest time grid and
    downsampled to each level. Snapshots are taken on the coarsest time grid.
    """
    t_start = time.perf_counter()
    study = resolve_study(study_raw, seed)
    cfgs, N0 = _level_configs(study)
    N_fin = int(round(cfgs[-1]["T"] / cfgs[-1]["k"]))
    fin = cfgs[-1]
    psi_fine = build_psi(fin["psi"], fin["T"], N_fin, fin["eta"], fin["psi_seed"])
    trajs, info = [], []
    for cfg in cfgs:
        N = int(round(cfg["T"] / cfg["k"]))
        psi = downsample(psi_fine, N_fin // N)
        sc = build_scheme_config(cfg, psi)
        traj = run_direct(sc, stride=N // N0)
        if traj.diverged:
            raise RuntimeError(f"level h={cfg['h']} diverged at {traj.diverged}")
        trajs.append(traj)
        c0 = sc.c0
        k_max = stability_bound(sc.A, sc.B, sc.lam, sc.eta, sc.h, c0.min(), c0.max())[0]
        info.append({
            "h": cfg["h"], "k": cfg["k"], "M": cfg["M"], "N": N, "k_max": k_max,
            "psi_min": float(psi.values.min()), "psi_max": float(psi.values.max()),
            "psi_bounded": bool(psi.values.min() >= 0 and psi.values.max() <= sc.eta),
            "psi_clamps": int(psi.meta.get("clamps", 0)),
            "range_violations": traj.monitors["range_violations"],
            "energy": traj.monitors["energy"],
            "tail_ratio": traj.monitors["tail_ratio"],
        })
    spec = BesovSpec(**study["besov"])
    h_eval = cfgs[-1]["h"]
    n_eval = cfgs[-1]["M"] + 1
    grid = TorusGrid.for_length(h_eval, n_eval)
    rows = []
    for i in range(len(trajs) - 1):
        d = level_distances(trajs[i], trajs[i + 1], h_eval, n_eval, spec,
                            study["time_r"], grid)
        rows.append({"h_coarse": cfgs[i]["h"], "h_fine": cfgs[i + 1]["h"], **d})
    for prev, row in zip(rows, rows[1:]):
        for key in ("besov_L2t", "Linf_t_L2x", "Linf_t_L2x_nodal"):
            ratio = prev[key] / row[key] if row[key] > 0 else math.inf
            row[f"order_{key}"] = math.log2(ratio) if ratio > 0 else math.nan
            row[f"ratio_{key}"] = ratio
    return ConvergenceResult(study["levels"], rows, info,
                             {"study": study, "levels": cfgs},
                             time.perf_counter() - t_start, trajs)
