"""JSON run configurations: defaults, field families and boundary sources.

A configuration is a dict with keys

    A, B, lambda, eta, h, k, T, M, truncation,
    s0: {family, params}, c0: {family, params},
    psi: {source, params, seed}, snapshots, allow_unstable, solver

``resolve_config`` fills defaults and derives k when it is missing; the
resolved dict reproduces a run exactly.
"""

from __future__ import annotations

import copy
import json
import math
import warnings

import numpy as np

from .boundary import (BoundaryPath, PearsonParams, deterministic_path, read_path_csv,
                       simulate_pearson)
from .seeding import derive_seed
from .solver import SchemeConfig, StabilityError, stability_bound

DEFAULTS = {
    "A": 1.0,
    "B": -1.0,
    "lambda": 1.0,
    "eta": 1.0,
    "h": 0.1,
    "k": None,
    "k_factor": 0.9,
    "T": 1.0,
    "M": 100,
    "truncation": "zero",
    "general_b": False,
    "s0": {"family": "zero", "params": {}},
    "c0": {"family": "constant", "params": {"value": 0.5}},
    "psi": {"source": "zero", "params": {}, "seed": 0},
    "snapshots": 1,
    "allow_unstable": False,
    "solver": "direct",
    "variant": "balanced",
}

SCALAR_KEYS = ("A", "B", "lambda", "eta", "h", "k", "T", "M", "truncation", "snapshots")


class ConfigError(ValueError):
    """Malformed configuration (schema or value error)."""


def load_json(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    return data


def s0_field(family: str, params: dict, x: np.ndarray, eta: float) -> np.ndarray:
    """Initial pollutant profile at the nodes ``x``.

    zero; sin_bump (amp, width): amp sin^2(pi x/width) on [0, width];
    values (values): explicit node values.
    """
    if family == "zero":
        return np.zeros_like(x)
    if family == "sin_bump":
        amp = float(params.get("amp", 0.5 * eta))
        width = float(params.get("width", 1.0))
        return np.where(x <= width, amp * np.sin(np.pi * x / width) ** 2, 0.0)
    if family == "values":
        v = np.asarray(params["values"], dtype=float)
        if v.size != x.size:
            raise ConfigError("s0 values length must be M+1")
        return v
    raise ConfigError(f"unknown s0 family {family!r}")


def c0_field(family: str, params: dict, x: np.ndarray) -> np.ndarray:
    """Initial calcite profile.

    constant (value); exp_profile (c_far, c_near, scale):
    c_far - (c_far - c_near) exp(-x/scale); values (values).
    """
    if family == "constant":
        return np.full_like(x, float(params.get("value", 0.5)))
    if family == "exp_profile":
        far = float(params.get("c_far", 0.5))
        near = float(params.get("c_near", 0.3))
        scale = float(params.get("scale", 1.0))
        return far - (far - near) * np.exp(-x / scale)
    if family == "values":
        v = np.asarray(params["values"], dtype=float)
        if v.size != x.size:
            raise ConfigError("c0 values length must be M+1")
        return v
    raise ConfigError(f"unknown c0 family {family!r}")


def psi_seed(resolved: dict) -> int:
    return derive_seed(resolved["seed"], "psi")


def build_psi(spec: dict, T: float, N: int, eta: float, seed: int) -> BoundaryPath:
    """Boundary path on N steps over [0, T] from a ``psi`` config block.

    Sources: zero; constant (value); power (beta, scale); sine_ramp (amp):
    amp sin^2(pi t/(2T)); pearson (nu1, nu2, gamma, psi0, scheme, eps);
    csv (path).
    """
    src = spec.get("source", "zero")
    p = spec.get("params", {}) or {}
    if src == "zero":
        return deterministic_path("zero", T, N)
    if src == "constant":
        return deterministic_path("constant", T, N, value=float(p.get("value", 0.0)))
    if src == "power":
        return deterministic_path("power", T, N, beta=float(p.get("beta", 0.5)),
                                  scale=float(p.get("scale", 1.0)))
    if src == "sine_ramp":
        amp = float(p.get("amp", 0.5 * eta))
        return deterministic_path("callable", T, N,
                                  fn=lambda t: amp * np.sin(np.pi * t / (2 * T)) ** 2)
    if src == "pearson":
        params = PearsonParams(nu1=float(p.get("nu1", 2.0)), nu2=float(p.get("nu2", 0.5)),
                               gamma=float(p.get("gamma", 0.5 * eta)), eta=eta,
                               psi0=float(p.get("psi0", 0.0)))
        return simulate_pearson(params, T, N, seed, scheme=p.get("scheme", "lamperti"),
                                eps=float(p.get("eps", 1e-3)))
    if src == "csv":
        path = read_path_csv(p["path"])
        if not math.isclose(path.T, T) or path.N % N:
            raise ConfigError("csv path grid incompatible with T and k")
        return path
    raise ConfigError(f"unknown psi source {src!r}")


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def resolve_config(raw: dict, overrides: dict | None = None,
                   seed: int | None = None) -> dict:
    """Defaults < config file < overrides. Derives k when missing."""
    unknown = set(raw) - set(DEFAULTS) - {"seed", "L", "psi_seed"}
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    cfg = _merge(DEFAULTS, raw)
    # a field or boundary block names its own family; do not mix in default params
    for key in ("s0", "c0", "psi"):
        if key in raw:
            if not isinstance(raw[key], dict):
                raise ConfigError(f"{key} must be an object")
            if key != "psi" and "family" not in raw[key]:
                raise ConfigError(f"{key} needs a family")
            cfg[key] = {"params": {}, **copy.deepcopy(raw[key])}
    for key, val in (overrides or {}).items():
        if val is not None:
            cfg[key] = val
    if seed is not None:
        cfg["seed"] = int(seed)
    else:
        cfg["seed"] = int(cfg.get("seed", cfg["psi"].get("seed", 0)))
    try:
        for key in ("A", "B", "lambda", "eta", "h", "T", "k_factor"):
            cfg[key] = float(cfg[key])
        if "L" in cfg:
            cfg["M"] = int(round(float(cfg.pop("L")) / cfg["h"]))
        cfg["M"] = int(cfg["M"])
        cfg["snapshots"] = int(cfg["snapshots"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad scalar value: {exc}") from exc
    x = cfg["h"] * np.arange(cfg["M"] + 1)
    if cfg["k"] is None:
        c0 = c0_field(cfg["c0"]["family"], cfg["c0"].get("params", {}), x)
        try:
            k_max, _, _ = stability_bound(cfg["A"], cfg["B"], cfg["lambda"], cfg["eta"],
                                          cfg["h"], float(c0.min()), float(c0.max()))
        except StabilityError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        N = math.ceil(cfg["T"] / (cfg["k_factor"] * k_max))
        cfg["k"] = cfg["T"] / N
    cfg["k"] = float(cfg["k"])
    cfg["psi_seed"] = psi_seed(cfg)
    return cfg


def build_scheme_config(cfg: dict, psi: BoundaryPath | None = None) -> SchemeConfig:
    """SchemeConfig from a resolved configuration."""
    x = cfg["h"] * np.arange(cfg["M"] + 1)
    s0 = s0_field(cfg["s0"]["family"], cfg["s0"].get("params", {}), x, cfg["eta"])
    c0 = c0_field(cfg["c0"]["family"], cfg["c0"].get("params", {}), x)
    n = cfg["T"] / cfg["k"]
    N = int(round(n))
    if N < 1 or abs(n - N) > 1e-9 * n:
        raise ConfigError(f"T/k = {n} is not an integer")
    if psi is None:
        substeps = int(cfg["psi"].get("params", {}).get("substeps", 1))
        psi = build_psi(cfg["psi"], cfg["T"], N * substeps, cfg["eta"], cfg["psi_seed"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        try:
            return SchemeConfig(A=cfg["A"], B=cfg["B"], lam=cfg["lambda"], eta=cfg["eta"],
                                h=cfg["h"], k=cfg["k"], T=cfg["T"], M=cfg["M"], s0=s0, c0=c0,
                                psi=psi, truncation=cfg["truncation"],
                                general_b=bool(cfg["general_b"]),
                                allow_unstable=bool(cfg["allow_unstable"]),
                                variant=cfg["variant"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
