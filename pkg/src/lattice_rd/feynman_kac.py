"""Lattice Feynman-Kac Monte Carlo.

A nearest-neighbour chain on h*Z jumps x -> x + h at rate C+(t, x)/h and
x -> x - h at rate C-(t, x)/h. Paths are generated exactly in law by
thinning against Lambda >= sup (C+ + C-)/h, vectorised over samples. The
estimator for

    E[ exp(-int_t^{tau ^ T} V(r, X_r) dr) (F0(X_T) 1{tau > T} + phi(tau) 1{tau <= T}) ]

stops each path at tau, the first time it enters x <= 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .seeding import derive_seed


@dataclass(frozen=True)
class GeneratorSpec:
    """Coefficients of the backward generator C+ D+ - C- D- - V.

    ``C_plus``, ``C_minus`` and ``V`` are vectorised callables (t, x) -> array.
    ``rate_bound`` must dominate (C+ + C-)/h on the region explored.
    ``V_integral(a, b, x)``, when given, returns int_a^b V(r, x) dr exactly
    and replaces the trapezoid rule.
    """

    h: float
    C_plus: Callable
    C_minus: Callable
    rate_bound: float
    V: Callable | None = None
    F0: Callable = field(default=lambda x: np.zeros_like(x))
    phi: Callable = field(default=lambda t: np.zeros_like(t))
    V_integral: Callable | None = None
    v_substep: float = 1e-3

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("h must be positive")
        if not np.isfinite(self.rate_bound) or self.rate_bound < 0:
            raise ValueError("rate bound must be finite and nonnegative")


def heat_spec(h: float, F0=None, phi=None) -> GeneratorSpec:
    """Generator of Delta_h: C+ = C- = 1/h, total jump rate 2/h^2."""
    one = lambda t, x: np.full(np.shape(x), 1.0 / h)
    kw = {}
    if F0 is not None:
        kw["F0"] = F0
    if phi is not None:
        kw["phi"] = phi
    return GeneratorSpec(h, one, one, 2.0 / h**2, **kw)


@dataclass
class CtmcPath:
    jump_times: np.ndarray
    positions: np.ndarray
    tau: float


def _rates(spec: GeneratorSpec, t, idx):
    x = idx * spec.h
    cp = np.asarray(spec.C_plus(t, x), dtype=float) / spec.h
    cm = np.asarray(spec.C_minus(t, x), dtype=float) / spec.h
    if np.any(cp < 0) or np.any(cm < 0):
        raise ValueError("negative jump rate")
    if np.any(cp + cm > spec.rate_bound * (1 + 1e-12)):
        raise ValueError("jump rates exceed the declared bound")
    return cp, cm


def simulate_ctmc(spec: GeneratorSpec, t0: float, x0: float, T: float,
                  seed: int) -> CtmcPath:
    """One path on [t0, T] by thinning; stops at the boundary set x <= 0."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    idx = int(round(x0 / spec.h))
    times, pos = [t0], [idx]
    if idx <= 0:
        return CtmcPath(np.array(times), np.array(pos) * spec.h, t0)
    lam = spec.rate_bound
    t = t0
    tau = math.inf
    while lam > 0:
        t += rng.exponential(1.0 / lam)
        if t >= T:
            break
        cp, cm = _rates(spec, t, np.array([idx]))
        u = rng.random() * lam
        if u < cp[0]:
            idx += 1
        elif u < cp[0] + cm[0]:
            idx -= 1
        else:
            continue
        times.append(t)
        pos.append(idx)
        if idx <= 0:
            tau = t
            break
    return CtmcPath(np.array(times), np.array(pos) * spec.h, tau)


def _v_integral(spec: GeneratorSpec, a, b, idx):
    if spec.V is None:
        return np.zeros_like(a)
    x = idx * spec.h
    if spec.V_integral is not None:
        return np.asarray(spec.V_integral(a, b, x), dtype=float)
    width = b - a
    n_sub = max(1, int(math.ceil(np.max(width, initial=0.0) / spec.v_substep)))
    acc = np.zeros_like(a)
    for i in range(n_sub):
        l = a + width * i / n_sub
        r = a + width * (i + 1) / n_sub
        acc += 0.5 * (r - l) * (np.asarray(spec.V(l, x)) + np.asarray(spec.V(r, x)))
    return acc


@dataclass(frozen=True)
class BatchResult:
    """Per-sample outcome of a batch of chains."""

    tau: np.ndarray
    final_index: np.ndarray
    log_weight: np.ndarray
    jumps: np.ndarray


def simulate_batch(spec: GeneratorSpec, t0: float, x0: float, T: float,
                   n: int, rng: np.random.Generator) -> BatchResult:
    """Vectorised thinning for ``n`` chains started at (t0, x0)."""
    idx = np.full(n, int(round(x0 / spec.h)), dtype=np.int64)
    t = np.full(n, float(t0))
    tau = np.full(n, math.inf)
    logw = np.zeros(n)
    jumps = np.zeros(n, dtype=np.int64)
    active = idx > 0
    tau[~active] = t0
    lam = spec.rate_bound
    if lam == 0:
        logw -= _v_integral(spec, t, np.full(n, float(T)), idx) * active
        return BatchResult(tau, idx, logw, jumps)
    while np.any(active):
        ids = np.flatnonzero(active)
        cur = t[ids]
        nxt = cur + rng.exponential(1.0 / lam, size=ids.size)
        done = nxt >= T
        end = np.where(done, T, nxt)
        logw[ids] -= _v_integral(spec, cur, end, idx[ids])
        t[ids] = end
        active[ids[done]] = False
        go = ids[~done]
        if go.size == 0:
            break
        tn = t[go]
        cp, cm = _rates(spec, tn, idx[go])
        u = rng.random(go.size) * lam
        up = u < cp
        down = ~up & (u < cp + cm)
        idx[go[up]] += 1
        idx[go[down]] -= 1
        jumps[go[up | down]] += 1
        hit = go[down & (idx[go] <= 0)]
        tau[hit] = t[hit]
        active[hit] = False
    return BatchResult(tau, idx, logw, jumps)


@dataclass(frozen=True)
class FKEstimate:
    t: float
    x: float
    mean: float
    ci95: float
    std: float
    n: int

    def to_dict(self) -> dict:
        return {"t": self.t, "x": self.x, "mean": self.mean, "ci95": self.ci95,
                "std": self.std, "n": self.n}


def _pairwise_mean(a: np.ndarray) -> float:
    # numpy's sum is a deterministic pairwise reduction
    return float(np.sum(a) / a.size)


def fk_samples(spec: GeneratorSpec, t: float, x: float, T: float, n_samples: int,
               seed: int, batch: int = 20000) -> np.ndarray:
    """Per-sample values of the Feynman-Kac functional.

    Batch b draws from the stream derive_seed(seed, f"fk/batch/{b}"), so the
    result depends only on (seed, n_samples, batch).
    """
    out = np.empty(n_samples)
    for b, start in enumerate(range(0, n_samples, batch)):
        m = min(batch, n_samples - start)
        rng = np.random.default_rng(np.random.SeedSequence(derive_seed(seed, f"fk/batch/{b}")))
        res = simulate_batch(spec, t, x, T, m, rng)
        hit = res.tau <= T
        payoff = np.where(hit, spec.phi(np.where(hit, res.tau, T)),
                          spec.F0(res.final_index * spec.h))
        out[start:start + m] = np.exp(res.log_weight) * payoff
    return out


def fk_estimate(spec: GeneratorSpec, t: float, x: float, T: float, n_samples: int,
                seed: int) -> FKEstimate:
    """Monte Carlo mean and 95% half-width of the Feynman-Kac functional."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    vals = fk_samples(spec, t, x, T, n_samples, seed)
    mean = _pairwise_mean(vals)
    std = float(np.std(vals, ddof=1)) if n_samples > 1 else 0.0
    return FKEstimate(t, x, mean, 1.96 * std / math.sqrt(n_samples), std, n_samples)


def heat_boundary_spec(h: float, psi: Callable, t: float) -> GeneratorSpec:
    """u(t, x) = E[psi(t - tau) 1{tau <= t}] for the chain started at time 0.

    The chain runs forward on [0, t]; a path absorbed at time tau contributes
    psi(t - tau).
    """
    spec = heat_spec(h)
    return GeneratorSpec(h, spec.C_plus, spec.C_minus, spec.rate_bound,
                         phi=lambda r: np.asarray(psi(t - r), dtype=float))


def _history_lookup(hist: np.ndarray, times: np.ndarray, t, idx):
    """Left value in time, last-value extension in space."""
    n = np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 1)
    m = np.clip(idx, 0, hist.shape[1] - 1)
    return hist[n, m]


def s_tilde_spec(A: float, B: float, lam: float, h: float, g_hist: np.ndarray,
                 f_hist: np.ndarray, times: np.ndarray, s0: np.ndarray,
                 psi: Callable, t: float) -> GeneratorSpec:
    """Time-reversed chain for the linearised pollutant equation.

    Forward equation on the lattice:
        d_t s = Delta_h s + b_g (D+g D+s + D-g D-s) + Gamma s,
        b_g = B / (2 (A + B g)),  Gamma = lambda g (B f - 1) <= 0.
    Rewritten as C+ D+ s - C- D- s + Gamma s with
        C+ = 1/h + b_g D+g,  C- = 1/h - b_g D-g,
    and run in reversed time r = t - sigma, so V(r, x) = -Gamma(t - r, x).
    g, f are piecewise constant in time (left value) on ``times``.
    """
    g_hist = np.asarray(g_hist, dtype=float)
    f_hist = np.asarray(f_hist, dtype=float)
    times = np.asarray(times, dtype=float)
    g_ext = np.concatenate([g_hist, g_hist[:, -1:]], axis=1)
    dplus = np.diff(g_ext, axis=1) / h
    dminus = np.zeros_like(g_hist)
    dminus[:, 1:] = np.diff(g_hist, axis=1) / h
    bg = B / (2.0 * (A + B * g_hist))
    cplus = 1.0 / h + bg * dplus
    cminus = 1.0 / h - bg * dminus
    if np.any(cplus < 0) or np.any(cminus < 0):
        raise ValueError("negative jump rate: drift exceeds the diffusion for these histories")
    gamma = lam * g_hist * (B * f_hist - 1.0)
    potential = -gamma
    if np.any(potential < 0):
        raise ValueError("potential must be nonnegative (needs B f <= 1)")
    bound = float(np.max(cplus + cminus)) / h
    # cumulative int_0^r Gamma over forward time, piecewise linear in r
    dt = np.diff(times)
    cum = np.zeros_like(potential)
    cum[1:] = np.cumsum(potential[:-1] * dt[:, None], axis=0)

    def cum_at(r, idx):
        n = np.clip(np.searchsorted(times, r, side="right") - 1, 0, len(times) - 1)
        m = np.clip(idx, 0, potential.shape[1] - 1)
        return cum[n, m] + potential[n, m] * (r - times[n])

    def Cp(sig, x):
        return _history_lookup(cplus, times, t - sig, np.rint(x / h).astype(np.int64))

    def Cm(sig, x):
        return _history_lookup(cminus, times, t - sig, np.rint(x / h).astype(np.int64))

    def V(sig, x):
        return _history_lookup(potential, times, t - sig, np.rint(x / h).astype(np.int64))

    def V_int(a, b, x):
        idx = np.rint(x / h).astype(np.int64)
        return cum_at(t - a, idx) - cum_at(t - b, idx)

    s0 = np.asarray(s0, dtype=float)

    def F0(x):
        idx = np.rint(np.asarray(x) / h).astype(np.int64)
        inside = idx < s0.size
        return np.where(inside, s0[np.clip(idx, 0, s0.size - 1)], 0.0)

    # in reversed time the chain leaves at tau; the boundary value is psi(t - tau)
    return GeneratorSpec(h, Cp, Cm, bound, V=V,
                         F0=F0, phi=lambda r: np.asarray(psi(t - r), dtype=float),
                         V_integral=V_int)


def fk_verify_s_tilde(A: float, B: float, lam: float, h: float, g_hist, f_hist, times,
                      s0, psi: Callable, t: float, x: float, n_samples: int,
                      seed: int) -> FKEstimate:
    """Monte Carlo value of the linearised pollutant solution at (t, x)."""
    spec = s_tilde_spec(A, B, lam, h, g_hist, f_hist, times, s0, psi, t)
    return fk_estimate(spec, 0.0, x, t, n_samples, seed)
