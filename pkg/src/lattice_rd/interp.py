"""Lattice <-> continuum bridge: piecewise-constant extension, cell averages,
their duality, and distances between solutions on nested meshes."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .besov import BesovSpec, TorusGrid, besov_norm_periodic
from .lattice import Lattice, LatticeField, lp_norm_values


@dataclass(frozen=True)
class PiecewiseConstant:
    """f(x) = values[i] on [breaks[i], breaks[i+1]), 0 outside."""

    breaks: np.ndarray
    values: np.ndarray

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.breaks, x, side="right") - 1
        inside = (idx >= 0) & (idx < self.values.size)
        out = np.zeros_like(x)
        out[inside] = self.values[idx[inside]]
        return out

    def integral(self) -> float:
        return float(np.sum(np.diff(self.breaks) * self.values))

    def antiderivative(self, x):
        """int_{breaks[0]}^x f, piecewise linear and constant outside."""
        x = np.asarray(x, dtype=float)
        cum = np.concatenate([[0.0], np.cumsum(np.diff(self.breaks) * self.values)])
        return np.interp(x, self.breaks, cum)

    def lp_norm(self, p: float = 2.0) -> float:
        widths = np.diff(self.breaks)
        a = np.abs(self.values)
        if np.isinf(p):
            return float(a.max())
        return float(np.sum(widths * a**p) ** (1.0 / p))


def extend(f: LatticeField) -> PiecewiseConstant:
    """E_h f(x) = f(z) for x in [z, z + h)."""
    h = f.h
    breaks = h * np.arange(f.values.size + 1)
    return PiecewiseConstant(breaks, f.values.copy())


def discretize(g: Callable, lattice: Lattice, samples_per_cell: int = 16,
               truncation: str = "zero") -> LatticeField:
    """Cell averages (1/h) int_z^{z+h} g by composite Simpson per cell.

    ``g`` is a vectorised callable on the continuum. A ``PiecewiseConstant``
    is averaged exactly through its antiderivative, so discretize(extend(f))
    returns f.
    """
    if samples_per_cell < 16 or samples_per_cell % 2:
        raise ValueError("need an even number >= 16 of subintervals per cell")
    h = lattice.h
    if isinstance(g, PiecewiseConstant):
        F = g.antiderivative(np.append(lattice.x, lattice.x[-1] + h))
        return LatticeField(lattice, np.diff(F) / h, truncation)
    n = samples_per_cell
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w /= 3.0 * n
    # sample offsets within a cell, shape (cells, n+1)
    x = lattice.x[:, None] + h * np.arange(n + 1)[None, :] / n
    vals = np.asarray(g(x), dtype=float)
    return LatticeField(lattice, vals @ w, truncation)


def discretize_samples(samples: np.ndarray, lattice: Lattice,
                       truncation: str = "zero") -> LatticeField:
    """Cell averages from fine-grid samples.

    ``samples`` has length M*n + n + 1 with n >= 16 even: the values of g on
    the uniform grid of spacing h/n covering [0, (M+1)h].
    """
    total = samples.size - 1
    cells = lattice.M + 1
    if total % cells:
        raise ValueError("sample grid is not aligned with the cells")
    n = total // cells
    if n < 16 or n % 2:
        raise ValueError("need an even number >= 16 of samples per cell")
    idx = np.arange(cells)[:, None] * n + np.arange(n + 1)[None, :]
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w /= 3.0 * n
    return LatticeField(lattice, samples[idx] @ w, truncation)


def duality_residual(f: LatticeField, g: Callable, n_gauss: int = 8) -> float:
    """|int g E_h f dx - h sum D_h(g) f|.

    The continuum side is integrated cell by cell with Gauss-Legendre
    quadrature, independently of the Simpson rule inside ``discretize``.
    """
    h = f.h
    xg, wg = np.polynomial.legendre.leggauss(n_gauss)
    x = f.x[:, None] + 0.5 * h * (xg[None, :] + 1.0)
    cell_int = (np.asarray(g(x), dtype=float) @ wg) * 0.5 * h
    lhs = float(np.dot(cell_int, f.values))
    rhs = float(h * np.dot(discretize(g, f.lattice).values, f.values))
    return abs(lhs - rhs)


def refine_values(values: np.ndarray, factor: int) -> np.ndarray:
    """Piecewise-constant refinement: each coarse value fills ``factor`` fine nodes."""
    return np.repeat(np.asarray(values, dtype=float), factor, axis=-1)


def _nesting(h_coarse: float, h_fine: float) -> int:
    ratio = h_coarse / h_fine
    factor = int(round(ratio))
    if factor < 1 or abs(ratio - factor) > 1e-9 * ratio:
        raise ValueError(f"meshes h={h_coarse} and h={h_fine} are not nested")
    return factor


def to_common_lattice(f_coarse: np.ndarray, h_coarse: float, f_fine: np.ndarray,
                      h_fine: float):
    """Extend the coarse values to the fine lattice and truncate both to the
    common length. Works on the last axis (fields or field histories)."""
    factor = _nesting(h_coarse, h_fine)
    a = refine_values(f_coarse, factor)
    b = np.asarray(f_fine, dtype=float)
    n = min(a.shape[-1], b.shape[-1])
    return a[..., :n], b[..., :n]


def intergrid_distance(f_h: LatticeField, f_h2: LatticeField, norm: str = "L2",
                       spec: BesovSpec | None = None, p: float = 2.0,
                       grid: TorusGrid | None = None) -> float:
    """Distance between E_h f_h and E_{h'} f_h2 on the finer lattice.

    ``norm`` is ``"Lp"`` (lattice l^p with exponent ``p``; ``"L2"`` is p = 2)
    or ``"besov"`` (``spec`` required, evaluated on the fine lattice).
    """
    a, b = to_common_lattice(f_h.values, f_h.h, f_h2.values, f_h2.h)
    d = b - a
    h = f_h2.h
    if norm == "L2":
        return lp_norm_values(d, h, 2.0)
    if norm == "Lp":
        return lp_norm_values(d, h, p)
    if norm == "besov":
        if spec is None:
            raise ValueError("besov norm needs a BesovSpec")
        grid = grid or TorusGrid.for_length(h, d.size)
        return besov_norm_periodic(grid.embed(d), grid, spec)
    raise ValueError(f"unknown norm {norm!r}")


def intergrid_history_distance(s_coarse: np.ndarray, h_coarse: float, s_fine: np.ndarray,
                               h_fine: float, times: np.ndarray, norm: str = "L2",
                               spec: BesovSpec | None = None, time_p: float = 2.0,
                               nodal: bool = False) -> float:
    """Time-integrated intergrid distance on a common snapshot grid.

    Rows of the histories are the snapshot times. ``time_p`` is the time
    exponent (``inf`` for a sup over snapshots); the time integral uses the
    trapezoid rule. With ``nodal=True`` the comparison is restricted to the
    coarse nodes (injection) instead of the piecewise-constant extension.
    """
    if nodal:
        factor = _nesting(h_coarse, h_fine)
        b = np.asarray(s_fine)[:, ::factor]
        n = min(b.shape[1], s_coarse.shape[1])
        d = b[:, :n] - np.asarray(s_coarse)[:, :n]
        h = h_coarse
    else:
        a, b = to_common_lattice(s_coarse, h_coarse, s_fine, h_fine)
        d = b - a
        h = h_fine
    if norm == "besov":
        if spec is None:
            raise ValueError("besov norm needs a BesovSpec")
        grid = TorusGrid.for_length(h, d.shape[1])
        vals = np.array([besov_norm_periodic(grid.embed(row), grid, spec) for row in d])
    elif norm == "L2":
        vals = np.array([lp_norm_values(row, h, 2.0) for row in d])
    else:
        raise ValueError(f"unknown norm {norm!r}")
    if np.isinf(time_p):
        return float(vals.max())
    t = np.asarray(times, dtype=float)
    integrand = vals**time_p
    return float(np.sum(0.5 * np.diff(t) * (integrand[1:] + integrand[:-1])) ** (1.0 / time_p))
