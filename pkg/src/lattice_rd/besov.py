"""Fourier analysis on the lattice, Littlewood-Paley blocks and Besov norms.

Transforms follow

    F f(xi) = h sum_z exp(i xi z) f(z),
    F^{-1} g(z) = (1/2 pi) int_{-pi/h}^{pi/h} exp(-i z xi) g(xi) d xi,

sampled on the torus grid xi_q = 2 pi q/(Q h), so that both reduce to FFTs of
length Q (periodic trapezoid rule, exact for fields supported on Q nodes).

Dyadic partition: with the smooth step S(r) = e^{-1/r}/(e^{-1/r} + e^{-1/(1-r)}),

    chi(xi) = 1 - S((|xi| - 3/4) / (4/3 - 3/4))      (1 on |xi| <= 3/4, 0 on |xi| >= 4/3)
    phi_{-1} = chi,  phi_j(xi) = chi(xi / 2^{j+1}) - chi(xi / 2^j),  j >= 0.

supp phi_j lies in the annulus 3/4 2^j <= |xi| <= 8/3 2^j. The last index
J_h is the first j whose support leaves [-pi/h, pi/h]; its block is
1 - chi(xi / 2^{J_h}), so the blocks sum to 1 exactly.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .lattice import LatticeField, lp_norm_values

CHI_INNER = 0.75
CHI_OUTER = 4.0 / 3.0


def _smooth_step(r):
    r = np.clip(r, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(r > 0, np.exp(-1.0 / np.where(r > 0, r, 1.0)), 0.0)
        b = np.where(r < 1, np.exp(-1.0 / np.where(r < 1, 1.0 - r, 1.0)), 0.0)
    return a / (a + b)


def chi(xi):
    r = (np.abs(xi) - CHI_INNER) / (CHI_OUTER - CHI_INNER)
    return 1.0 - _smooth_step(r)


def block_symbol(j: int, xi):
    if j == -1:
        return chi(xi)
    return chi(xi / 2.0 ** (j + 1)) - chi(xi / 2.0**j)


def j_max(h: float) -> int:
    """J_h = min{j >= -1 : supp phi_j not inside [-pi/h, pi/h]}."""
    bound = math.pi / h
    if CHI_OUTER > bound:
        return -1
    j = 0
    while CHI_OUTER * 2.0 ** (j + 1) <= bound:
        j += 1
    return j


@dataclass(frozen=True)
class BesovSpec:
    alpha: float
    p: float = 2.0
    q: float = 2.0

    def __post_init__(self):
        if self.p < 1 or self.q < 1:
            raise ValueError("p and q must be >= 1")


@dataclass(frozen=True)
class TorusGrid:
    """Q equispaced frequencies on [-pi/h, pi/h), stored in FFT order."""

    h: float
    Q: int

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("h must be positive")
        if self.Q < 2 or self.Q % 2:
            raise ValueError("Q must be even and >= 2")

    @property
    def xi(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.Q, d=self.h)

    @property
    def d_xi(self) -> float:
        return 2.0 * np.pi / (self.Q * self.h)

    @classmethod
    def for_length(cls, h: float, n_support: int) -> "TorusGrid":
        """Default grid: Q >= 8 x support and wide enough for the low blocks."""
        need = max(8 * n_support, int(math.ceil(256.0 / h)), 64)
        return cls(h, 1 << (need - 1).bit_length())

    def embed(self, f) -> np.ndarray:
        """Half-line field (node n at position n) zero-extended to the torus."""
        v = np.asarray(getattr(f, "values", f), dtype=float)
        if v.size > self.Q // 4:
            warnings.warn("field support exceeds Q/4; aliasing possible",
                          RuntimeWarning, stacklevel=3)
        if v.size > self.Q:
            raise ValueError("field longer than the torus")
        out = np.zeros(self.Q)
        out[: v.size] = v
        return out

    def dft(self, periodic: np.ndarray) -> np.ndarray:
        """h sum_n exp(i xi_q n h) f_n for a length-Q periodic array."""
        return self.h * self.Q * np.fft.ifft(periodic)

    def idft(self, g: np.ndarray) -> np.ndarray:
        """Periodic trapezoid of the inverse transform; length-Q complex array."""
        return np.fft.fft(g) / (self.Q * self.h)

    @cached_property
    def partition(self) -> "DyadicPartition":
        return DyadicPartition(self)


@dataclass(frozen=True)
class DyadicPartition:
    grid: TorusGrid
    blocks: np.ndarray = field(init=False, repr=False)
    J: int = field(init=False)

    def __post_init__(self):
        J = j_max(self.grid.h)
        xi = self.grid.xi
        rows = [block_symbol(j, xi) for j in range(-1, J)]
        rows.append(1.0 - chi(xi / 2.0**J) if J >= 0 else np.ones_like(xi))
        if J == -1:
            rows = [np.ones_like(xi)]
        blocks = np.array(rows)
        blocks.setflags(write=False)
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "J", J)

    @property
    def indices(self) -> range:
        return range(-1, self.J + 1)

    def symbol(self, j: int) -> np.ndarray:
        if j < -1 or j > self.J:
            raise ValueError(f"block index {j} outside [-1, {self.J}]")
        return self.blocks[j + 1]

    def residual(self) -> float:
        return float(np.max(np.abs(self.blocks.sum(axis=0) - 1.0)))


def _grid_for(f, grid: TorusGrid | None) -> TorusGrid:
    if grid is not None:
        return grid
    return TorusGrid.for_length(f.h, f.values.size)


def dft(f: LatticeField, grid: TorusGrid | None = None) -> np.ndarray:
    """F f at the grid frequencies (FFT order, see ``TorusGrid.xi``)."""
    grid = _grid_for(f, grid)
    return grid.dft(grid.embed(f))


def idft(g: np.ndarray, grid: TorusGrid, n_nodes: int | None = None) -> np.ndarray:
    """Real part of the inverse transform at nodes 0..n_nodes-1 (all Q nodes
    by default; indices >= Q/2 stand for negative positions)."""
    z = np.real(grid.idft(g))
    return z if n_nodes is None else z[:n_nodes]


def blocks_periodic(periodic: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """All Littlewood-Paley blocks of a periodic field, shape (J+2, Q)."""
    F = grid.dft(periodic)
    part = grid.partition
    return np.real(np.fft.fft(part.blocks * F[None, :], axis=1)) / (grid.Q * grid.h)


def lp_block(f: LatticeField, j: int, grid: TorusGrid | None = None) -> np.ndarray:
    """j-th block Delta_j f on the whole torus (FFT node order)."""
    grid = _grid_for(f, grid)
    sym = grid.partition.symbol(j)
    return idft(sym * dft(f, grid), grid)


def besov_norm_periodic(periodic: np.ndarray, grid: TorusGrid, spec: BesovSpec) -> float:
    blocks = blocks_periodic(periodic, grid)
    norms = np.array([lp_norm_values(b, grid.h, spec.p) for b in blocks])
    weights = 2.0 ** (spec.alpha * np.arange(-1, grid.partition.J + 1))
    terms = weights * norms
    if np.isinf(spec.q):
        return float(terms.max())
    return float(np.sum(terms**spec.q) ** (1.0 / spec.q))


def besov_norm(f: LatticeField, spec: BesovSpec, grid: TorusGrid | None = None) -> float:
    """(sum_j (2^{j alpha} ||Delta_j f||_p)^q)^{1/q}, max over j for q = inf."""
    grid = _grid_for(f, grid)
    return besov_norm_periodic(grid.embed(f), grid, spec)


def delta_besov_norm(h: float, spec: BesovSpec, grid: TorusGrid | None = None) -> float:
    """Besov norm of the lattice Dirac mass 1/h at node 0."""
    grid = grid or TorusGrid.for_length(h, 1)
    d = np.zeros(grid.Q)
    d[0] = 1.0 / h
    return besov_norm_periodic(d, grid, spec)


def _norms_over_time(diff: np.ndarray, h: float, spec: BesovSpec, grid: TorusGrid | None):
    grid = grid or TorusGrid.for_length(h, diff.shape[1])
    return grid, np.array([besov_norm_periodic(grid.embed(d), grid, spec) for d in diff])


def spacetime_besov_distance(traj_a: np.ndarray, traj_b: np.ndarray, times: np.ndarray,
                             h: float, bar_alpha: float, spec: BesovSpec, r: float = 2.0,
                             grid: TorusGrid | None = None) -> float:
    """Difference-characterisation norm of a - b on a uniform time grid.

        ( int ||D(t)||_B^r dt )^{1/r}
        + ( int int_{0<|s|<1} ||D(t+s) - D(t)||_B^r / |s|^{1 + r bar_alpha} ds dt )^{1/r}

    with D = a - b. The first integral is the trapezoid rule; the double
    integral uses left endpoints in t and the grid shifts s = +-j dt, j >= 1.
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    if not 0 < bar_alpha < 1:
        raise ValueError("bar_alpha must lie in (0, 1); the shift integral diverges otherwise")
    a = np.asarray(traj_a, dtype=float)
    b = np.asarray(traj_b, dtype=float)
    if a.shape != b.shape or a.shape[0] != len(times):
        raise ValueError("trajectories must share the time grid")
    t = np.asarray(times, dtype=float)
    D = a - b
    grid, norms = _norms_over_time(D, h, spec, grid)
    if t.size == 1:
        return 0.0 if norms[0] == 0 else float("nan")
    dt = np.diff(t)
    if np.max(np.abs(dt - dt[0])) > 1e-9 * t[-1]:
        raise ValueError("time grid must be uniform")
    dt = float(dt[0])
    first = np.sum(0.5 * dt * (norms[1:] ** r + norms[:-1] ** r)) ** (1.0 / r)
    n = t.size
    jmax = min(n - 1, int(math.ceil(1.0 / dt)) - 1)
    acc = 0.0
    for j in range(1, jmax + 1):
        w = dt * dt / (j * dt) ** (1.0 + r * bar_alpha)
        diffs = D[j:] - D[:-j]
        norms_j = np.array([besov_norm_periodic(grid.embed(d), grid, spec) for d in diffs])
        # shift +j: left endpoints t_i, i = 0..n-1-j; shift -j: i = j..n-2
        acc += w * (np.sum(norms_j**r) + np.sum(norms_j[: n - 1 - j] ** r))
    second = acc ** (1.0 / r)
    return float(first + second)


def write_norm_csv(filename, rows) -> None:
    """CSV ``h,alpha,p,q,value`` from an iterable of 5-tuples."""
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["h", "alpha", "p", "q", "value"])
        for row in rows:
            w.writerow([repr(float(x)) for x in row])
