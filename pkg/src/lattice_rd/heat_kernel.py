"""Discrete heat kernel on h*Z, its half-line odd reflection, and the
boundary-driven heat solution.

H(t, nh) = (1/2 pi) int_{-pi/h}^{pi/h} exp(i xi n h) exp(-(4t/h^2) sin^2(h xi/2)) d xi

is evaluated with the periodic trapezoid rule on Q nodes. Substituting
theta = h xi, the rule is a discrete Fourier sum, so a whole row
n = -Q/2..Q/2-1 comes from one FFT.
"""

from __future__ import annotations

import csv
import math
import threading
import warnings

import numpy as np
from scipy.signal import fftconvolve

from .boundary import BoundaryPath
from .lattice import Lattice, LatticeField


def quadrature_nodes(t: float, h: float, n: int) -> int:
    """Q = max(64, 8 ceil(sqrt(4t/h^2)) + 8|n|), rounded up to even."""
    q = max(64, 8 * math.ceil(math.sqrt(4.0 * t / h**2)) + 8 * abs(int(n)))
    return q + (q % 2)


def _row(t: float, h: float, Q: int) -> np.ndarray:
    """Trapezoid values for n = 0..Q-1 (index n mod Q) via one FFT."""
    theta = 2.0 * np.pi * np.arange(Q) / Q
    sym = np.exp(-(4.0 * t / h**2) * np.sin(theta / 2.0) ** 2)
    # (1/2pi) * (2pi/(Qh)) * sum_q e^{i theta_q n} sym_q
    return np.real(np.fft.ifft(sym)) / h


class KernelEval:
    """Row cache of H for a fixed mesh; thread safe.

    Rows are stored per t with enough quadrature nodes for the largest |n|
    requested so far.
    """

    def __init__(self, h: float):
        if h <= 0:
            raise ValueError("h must be positive")
        self.h = float(h)
        self._rows: dict[float, tuple[int, np.ndarray]] = {}
        self._lock = threading.Lock()

    def row(self, t: float, n_max: int) -> np.ndarray:
        """H(t, nh) for n = 0..n_max (even in n)."""
        if t < 0:
            raise ValueError("t must be >= 0")
        t = float(t)
        if t == 0.0:
            out = np.zeros(n_max + 1)
            out[0] = 1.0 / self.h
            return out
        Q = quadrature_nodes(t, self.h, n_max)
        Q = max(Q, 2 * n_max + 2)
        with self._lock:
            cached = self._rows.get(t)
            if cached is None or cached[0] < Q:
                cached = (Q, _row(t, self.h, Q))
                self._rows[t] = cached
        return cached[1][: n_max + 1].copy()

    def __call__(self, t: float, n: int) -> float:
        return float(self.row(t, abs(int(n)))[abs(int(n))])


def hd(t: float, n: int, h: float, Q: int | None = None) -> float:
    """H(t, nh) by periodic trapezoid quadrature; exact delta at t = 0."""
    if t < 0:
        raise ValueError("t must be >= 0")
    n = abs(int(n))
    if t == 0:
        return 1.0 / h if n == 0 else 0.0
    if Q is None:
        Q = quadrature_nodes(t, h, n)
    if Q % 2 or Q < 64:
        raise ValueError("Q must be even and >= 64")
    theta = 2.0 * np.pi * np.arange(Q) / Q
    integrand = np.cos(n * theta) * np.exp(-(4.0 * t / h**2) * np.sin(theta / 2.0) ** 2)
    return float(integrand.sum() / (Q * h))


def hd_row(t: float, h: float, n_max: int) -> np.ndarray:
    """H(t, nh) for n = 0..n_max from a single FFT."""
    return KernelEval(h).row(t, n_max)


def gd(t: float, n: int, m: int, h: float) -> float:
    """Half-line Dirichlet kernel H(t,(n-m)h) - H(t,(n+m)h)."""
    if n < 0 or m < 0:
        raise ValueError("n and m must be >= 0")
    row = hd_row(t, h, n + m)
    return float(row[abs(n - m)] - row[n + m])


def gd_matrix(t: float, lattice: Lattice) -> np.ndarray:
    """G[n, m] = gd(t, n, m, h) for n, m = 0..M."""
    M = lattice.M
    row = hd_row(t, lattice.h, 2 * M)
    n = np.arange(M + 1)
    return row[np.abs(n[:, None] - n[None, :])] - row[n[:, None] + n[None, :]]


def _check_tail(values: np.ndarray, tol: float, what: str, left: bool = True):
    sup = np.max(np.abs(values))
    if sup == 0:
        return
    tail = max(abs(values[0]) if left else 0.0, abs(values[-1]))
    if tail > tol * sup:
        warnings.warn(f"{what}: edge value {tail:.3e} exceeds {tol:g} of sup; "
                      "truncation may be insufficient", RuntimeWarning, stacklevel=3)


def semigroup_apply(f: LatticeField, t: float, odd: bool = False) -> LatticeField:
    """(e^{t Delta_h} f)(x) = h sum_y H(t, x - y) f(y), truncated convolution.

    Parameters
    ----------
    f : LatticeField
        With ``odd=False`` the stored nodes are read as a window of the full
        line, zero outside the window. With ``odd=True`` f is a half-line
        field that is odd-extended, which gives the Dirichlet half-line
        semigroup (kernel ``gd``).
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return f
    v = f.values
    M = v.size - 1
    if odd:
        # the odd reflection is exact at node 0, only the far edge truncates
        _check_tail(v, 1e-10, "semigroup_apply", left=False)
        return f.with_values(f.h * gd_matrix(t, f.lattice) @ v)
    _check_tail(v, 1e-10, "semigroup_apply")
    row = hd_row(t, f.h, M)
    full = np.concatenate([row[:0:-1], row])
    out = f.h * fftconvolve(v, full, mode="full")[M:2 * M + 1]
    return f.with_values(out)


def boundary_solution_u_history(psi: BoundaryPath, lattice: Lattice,
                                n_steps: int | None = None) -> np.ndarray:
    """u(t_n, x_m) for every path time t_n (rows) and node m (columns).

    u(t, x) = int_0^t K(t - tau, x) psi(tau) d tau with
    K(s, x) = (H(s, x - h) - H(s, x + h))/h, the lattice normal derivative of
    the half-line kernel at the boundary; K(0, x) = delta_{x, h}/h^2. The time
    integral is the composite trapezoid rule on the path grid; the integrand
    is bounded on the lattice so no singular treatment is needed.
    u(t, 0) = psi(t).
    """
    N = psi.N if n_steps is None else n_steps
    if N > psi.N:
        raise ValueError("requested time exceeds path horizon")
    dt = psi.dt
    h = lattice.h
    M = lattice.M
    cache = KernelEval(h)
    # K[j, m] = K(j dt, x_m) for j = 0..N
    K = np.empty((N + 1, M + 1))
    for j in range(N + 1):
        row = cache.row(j * dt, M + 1)
        m = np.arange(M + 1)
        K[j] = (row[np.abs(m - 1)] - row[m + 1]) / h
    K[:, 0] = 0.0
    w = psi.values[: N + 1].copy()
    # trapezoid: u_n = dt * (sum_{j=0}^n K[n-j] w_j - (K[n] w_0 + K[0] w_n)/2)
    if N <= 400:
        conv = np.array([K[n::-1].T @ w[: n + 1] for n in range(N + 1)])
    else:
        conv = fftconvolve(K, w[:, None], mode="full", axes=0)[: N + 1]
    u = dt * (conv - 0.5 * (K * w[0] + K[0][None, :] * w[:, None]))
    u[0] = 0.0
    u[:, 0] = w
    return u


def boundary_solution_u(psi: BoundaryPath, t: float, lattice: Lattice,
                        truncation: str = "zero") -> LatticeField:
    """Boundary-driven heat solution u(t, .) on the lattice."""
    n = t / psi.dt
    n_int = int(round(n))
    if abs(n - n_int) > 1e-9 * max(1.0, n):
        raise ValueError("t must lie on the path grid")
    if n_int > psi.N:
        raise ValueError("t exceeds path horizon")
    if psi.values[0] != 0:
        warnings.warn("psi(0) != 0", RuntimeWarning, stacklevel=2)
    u = boundary_solution_u_history(psi, lattice, n_int)
    return LatticeField(lattice, u[n_int], truncation)


def write_kernel_csv(filename, h: float, times, n_max: int) -> None:
    """CSV ``t,n,value`` of H on n = -n_max..n_max."""
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "n", "value"])
        for t in times:
            row = hd_row(t, h, n_max)
            for n in range(-n_max, n_max + 1):
                w.writerow([repr(float(t)), n, repr(float(row[abs(n)]))])
