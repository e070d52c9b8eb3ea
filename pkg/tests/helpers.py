"""Shared builders for solver tests."""

import warnings

import numpy as np

from lattice_rd.boundary import (BoundaryPath, PearsonParams, deterministic_path,
                                 simulate_pearson)
from lattice_rd.solver import SchemeConfig, stability_bound


def make_config(A=1.0, B=-1.0, lam=1.0, eta=1.0, h=0.1, M=60, T=0.2, k=None, s0=None,
                c0=None, psi=None, k_factor=0.9, **kw):
    x = h * np.arange(M + 1)
    if s0 is None:
        s0 = np.zeros(M + 1)
    if c0 is None:
        c0 = np.full(M + 1, 0.5)
    if k is None:
        k_max, _, _ = stability_bound(A, B, lam, eta, h, float(np.min(c0)), float(np.max(c0)))
        N = int(np.ceil(T / (k_factor * k_max)))
    else:
        N = int(round(T / k))
    k = T / N
    if psi is None:
        psi = deterministic_path("zero", T, N)
    elif callable(psi) and not isinstance(psi, BoundaryPath):
        psi = deterministic_path("callable", T, N, fn=psi)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return SchemeConfig(A=A, B=B, lam=lam, eta=eta, h=h, k=k, T=T, M=M,
                            s0=np.asarray(s0, float), c0=np.asarray(c0, float), psi=psi, **kw)


def smooth_profile(rng, x, lo, hi):
    """Random profile with values in [lo, hi]: constant, ramp, exponential or sines."""
    kind = rng.integers(4)
    L = x[-1]
    if kind == 0:
        r = np.full_like(x, rng.random())
    elif kind == 1:
        r = x / L if rng.random() < 0.5 else 1 - x / L
    elif kind == 2:
        r = 1 - np.exp(-x / rng.uniform(0.5, 2.0))
    else:
        r = sum(rng.random() * np.sin(rng.uniform(0.2, 2.0) * x + rng.uniform(0, 6))
                for _ in range(3))
        r = (r - r.min()) / (np.ptp(r) or 1.0)
    return lo + (hi - lo) * r


def random_stable_config(rng, B, rough=False):
    """Random admissible data in the scaled regime, k drawn under the gate."""
    h = float(rng.choice([0.1, 0.2, 0.25]))
    M = int(rng.integers(20, 50))
    x = h * np.arange(M + 1)
    lam = float(rng.uniform(0.0, 5.0))
    if B < 0:
        eta = float(rng.uniform(0.3, 1.0))
        A = float(rng.uniform(0.6, 1.0))
        c_hi = float(rng.uniform(0.05, A - 0.05))
    else:
        eta = float(rng.uniform(0.3, 0.95))
        A = float(rng.uniform(0.05, 0.5))
        c_hi = float(rng.uniform(0.05, 0.95 - A))
    c_lo = float(rng.uniform(0.01, c_hi))
    if rough:
        c0 = c_lo + (c_hi - c_lo) * rng.random(M + 1)
    else:
        c0 = smooth_profile(rng, x, c_lo, c_hi)
    s0 = eta * rng.random(M + 1) * (rng.random() < 0.7)
    s0 *= x < rng.uniform(0.5, 0.8) * x[-1]
    T = 0.1
    k_max, _, _ = stability_bound(A, B, lam, eta, h, c0.min(), c0.max())
    N = int(np.ceil(T / (rng.uniform(0.3, 1.0) * k_max)))
    # the node-0 value is taken from psi, so start s0 there
    pear = PearsonParams(nu1=float(rng.uniform(1.0, 4.0)), nu2=0.5, gamma=0.5 * eta, eta=eta,
                         psi0=float(s0[0]))
    if not pear.bounded_regime:
        pear = PearsonParams(nu1=4.0, nu2=0.3, gamma=0.5 * eta, eta=eta, psi0=float(s0[0]))
    psi = simulate_pearson(pear, T, N, int(rng.integers(2**31)))
    return make_config(A=A, B=B, lam=lam, eta=eta, h=h, M=M, T=T, k=T / N, s0=s0, c0=c0,
                       psi=psi)
