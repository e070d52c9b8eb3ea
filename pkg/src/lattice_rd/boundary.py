"""Boundary paths: Pearson diffusion on [0, eta], deterministic families, diagnostics.

The Pearson SDE

    dpsi = nu1 (gamma - psi) dt + nu2 sqrt(psi (eta - psi)) dW

is simulated through the Lamperti variable Z = arcsin(2 psi/eta - 1), for
which the diffusion coefficient is the constant nu2 and

    dZ = [nu1 (2 gamma/eta - 1 - sin Z) + (nu2^2/2) sin Z] / cos Z dt + nu2 dW.

The 1/cos Z singularity at the barriers is smoothed by replacing cos Z with
sqrt(cos^2 Z + w^2), w = max(eps, sqrt(dt)). The sqrt(dt) floor keeps a step
taken at the barrier of size O(sqrt(dt)), the exit scale of the exact
process, instead of O(dt/eps). After every Euler step Z is folded back into
[-pi/2, pi/2] with arcsin(sin Z), which leaves psi unchanged, so every sample
lies in [0, eta] by construction.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .seeding import derive_seed


@dataclass(frozen=True)
class PearsonParams:
    nu1: float
    nu2: float
    gamma: float
    eta: float
    psi0: float = 0.0

    def __post_init__(self):
        if self.nu1 <= 0:
            raise ValueError("nu1 must be positive")
        if self.nu2 < 0:
            raise ValueError("nu2 must be nonnegative")
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if not 0 < self.gamma <= self.eta:
            raise ValueError("gamma must lie in (0, eta]")
        if not 0 <= self.psi0 <= self.eta:
            raise ValueError("psi0 must lie in [0, eta]")

    @property
    def bounded_regime(self) -> bool:
        lhs = min(2 * self.nu1 * self.gamma, 2 * self.nu1 * (self.eta - self.gamma))
        return lhs >= self.nu2**2 * self.eta


@dataclass(frozen=True)
class BoundaryPath:
    """Values psi(t_n) on the uniform grid t_n = n T/N."""

    times: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape:
            raise ValueError("times and values must be 1-d arrays of equal length")
        if t.size < 1 or t[0] != 0.0:
            raise ValueError("time grid must start at 0")
        if not np.all(np.isfinite(v)):
            raise ValueError("path values must be finite")
        if t.size > 1:
            dt = np.diff(t)
            if np.any(dt <= 0) or np.max(np.abs(dt - dt[0])) > 1e-9 * t[-1]:
                raise ValueError("time grid must be uniform and increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def N(self) -> int:
        return self.times.size - 1

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def dt(self) -> float:
        return self.T / self.N

    def __call__(self, t):
        """Piecewise-linear interpolation of the path."""
        return np.interp(t, self.times, self.values)


def uniform_grid(T: float, N: int) -> np.ndarray:
    if N < 1:
        raise ValueError("N must be >= 1")
    if T <= 0:
        raise ValueError("T must be positive")
    return T * np.arange(N + 1) / N


def _lamperti_drift(z, p: PearsonParams, eps: float):
    sz = np.sin(z)
    cos_eff = np.sqrt(np.cos(z) ** 2 + eps**2)
    num = p.nu1 * (2 * p.gamma / p.eta - 1.0 - sz) + 0.5 * p.nu2**2 * sz
    return num / cos_eff


def _integrate(params: PearsonParams, dW: np.ndarray, dt: float, scheme: str, eps: float):
    """Euler steps for paths along axis 0 of dW (shape (N, n_paths))."""
    n_steps, n_paths = dW.shape
    out = np.empty((n_steps + 1, n_paths))
    out[0] = params.psi0
    clamps = np.zeros(n_paths, dtype=np.int64)
    eta = params.eta
    if scheme == "lamperti":
        z = np.full(n_paths, np.arcsin(np.clip(2 * params.psi0 / eta - 1, -1, 1)))
        width = max(eps, np.sqrt(dt))
        for n in range(n_steps):
            z = z + _lamperti_drift(z, params, width) * dt + params.nu2 * dW[n]
            z = np.arcsin(np.sin(z))
            psi = 0.5 * eta * (1.0 + np.sin(z))
            bad = (psi < 0) | (psi > eta)
            clamps += bad
            out[n + 1] = np.clip(psi, 0.0, eta)
    elif scheme == "projected":
        psi = out[0].copy()
        for n in range(n_steps):
            diff = params.nu2 * np.sqrt(np.maximum(psi * (eta - psi), 0.0))
            psi = psi + params.nu1 * (params.gamma - psi) * dt + diff * dW[n]
            bad = (psi < 0) | (psi > eta)
            clamps += bad
            psi = np.clip(psi, 0.0, eta)
            out[n + 1] = psi
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return out, clamps


def _increments(seed: int, n_steps: int, dt: float) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    return rng.standard_normal(n_steps) * np.sqrt(dt)


def simulate_pearson(params: PearsonParams, T: float, N: int, seed: int,
                     scheme: str = "lamperti", eps: float = 1e-3) -> BoundaryPath:
    """Simulate one Pearson path on N uniform steps over [0, T].

    Parameters
    ----------
    scheme : {"lamperti", "projected"}
        Transformed Euler scheme (default) or Euler-Maruyama clamped to
        [0, eta].
    eps : float
        Lower bound of the smoothing width of the drift singularity in the
        Lamperti variable; the width used is max(eps, sqrt(T/N)).

    Returns
    -------
    BoundaryPath
        ``meta`` holds the seed, scheme, clamp count and whether the
        parameters are in the bounded regime (``certified``).
    """
    t = uniform_grid(T, N)
    dt = T / N
    dW = _increments(seed, N, dt)[:, None]
    vals, clamps = _integrate(params, dW, dt, scheme, eps)
    certified = params.bounded_regime
    if not certified:
        warnings.warn("Pearson parameters outside the bounded regime; path not certified",
                      RuntimeWarning, stacklevel=2)
    meta = {"generator": "pearson", "seed": int(seed), "scheme": scheme, "eps": eps,
            "clamps": int(clamps[0]), "certified": certified, "eta": params.eta}
    return BoundaryPath(t, vals[:, 0], meta)


def path_seed(seed: int, index: int) -> int:
    """Seed of path ``index`` in an ensemble rooted at ``seed``."""
    return derive_seed(seed, f"path/{index}")


def simulate_pearson_ensemble(params: PearsonParams, T: float, N: int, seed: int,
                              n_paths: int, scheme: str = "lamperti",
                              eps: float = 1e-3):
    """Simulate ``n_paths`` independent paths, vectorised over paths.

    Path i uses seed ``path_seed(seed, i)`` and is bit-identical to
    ``simulate_pearson(params, T, N, path_seed(seed, i))``.

    Returns
    -------
    times : ndarray, shape (N+1,)
    values : ndarray, shape (N+1, n_paths)
    clamps : ndarray, shape (n_paths,)
    """
    dt = T / N
    dW = np.column_stack([_increments(path_seed(seed, i), N, dt) for i in range(n_paths)])
    vals, clamps = _integrate(params, dW, dt, scheme, eps)
    return uniform_grid(T, N), vals, clamps


def deterministic_path(family: str, T: float, N: int, value: float = 0.0,
                       beta: float = 0.5, scale: float = 1.0,
                       fn: Callable | None = None) -> BoundaryPath:
    """Exact evaluations of a deterministic family on the grid.

    Families: ``zero``, ``constant`` (``value``), ``power`` (scale * t^beta),
    ``callable`` (``fn`` vectorised over times).
    """
    t = uniform_grid(T, N)
    if family == "zero":
        v = np.zeros_like(t)
    elif family == "constant":
        v = np.full_like(t, value)
    elif family == "power":
        if not 0 < beta <= 1:
            raise ValueError("beta must lie in (0, 1]")
        v = scale * t**beta
    elif family == "callable":
        if fn is None:
            raise ValueError("callable family needs fn")
        v = np.asarray(fn(t), dtype=float) * np.ones_like(t)
    else:
        raise ValueError(f"unknown family {family!r}")
    meta = {"generator": family}
    if family == "constant":
        meta["value"] = value
    if family == "power":
        meta.update(beta=beta, scale=scale)
    return BoundaryPath(t, v, meta)


def holder_seminorm(path: BoundaryPath, beta: float, block: int = 2048) -> float:
    """max_{n<m} |psi_m - psi_n| / (t_m - t_n)^beta over all grid pairs."""
    if path.times.size < 2:
        raise ValueError("need at least two grid points")
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")
    t, v = path.times, path.values
    best = 0.0
    for i0 in range(0, t.size, block):
        ti = t[i0:i0 + block, None]
        vi = v[i0:i0 + block, None]
        dt = t[None, :] - ti
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.abs(v[None, :] - vi) / np.abs(dt) ** beta
        q[dt <= 0] = 0.0
        best = max(best, float(q.max()))
    return best


def downsample(path: BoundaryPath, factor: int) -> BoundaryPath:
    if factor < 1 or path.N % factor:
        raise ValueError(f"factor {factor} does not divide N={path.N}")
    meta = dict(path.meta)
    meta["downsample"] = meta.get("downsample", 1) * factor
    return BoundaryPath(path.times[::factor], path.values[::factor], meta)


def write_path_csv(path: BoundaryPath, filename) -> None:
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "psi"])
        for t, v in zip(path.times, path.values):
            w.writerow([repr(float(t)), repr(float(v))])


def read_path_csv(filename) -> BoundaryPath:
    data = np.genfromtxt(filename, delimiter=",", names=True)
    return BoundaryPath(np.atleast_1d(data["t"]), np.atleast_1d(data["psi"]),
                        {"generator": "csv", "source": str(filename)})
