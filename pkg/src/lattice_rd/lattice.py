"""Half-line lattice, lattice fields and divided-difference operators.

The lattice is {0, h, 2h, ..., Mh}. Node 0 is the Dirichlet boundary node.
Operators that need a value at x_{M+1} use the field's truncation policy:
``"zero"`` extends by 0 and ``"last"`` repeats the value at x_M.
Backward differences at node 0 would need x_{-1}; they are reported as 0
there, so that every operator is defined on the whole stored range.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TRUNCATION_POLICIES = ("zero", "last")


@dataclass(frozen=True)
class Lattice:
    """Truncated half-line lattice x_m = m*h, m = 0..M."""

    h: float
    M: int

    def __post_init__(self):
        if not np.isfinite(self.h) or self.h <= 0:
            raise ValueError(f"h must be positive, got {self.h}")
        if int(self.M) != self.M or self.M < 2:
            raise ValueError(f"M must be an integer >= 2, got {self.M}")
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "M", int(self.M))

    @property
    def n_nodes(self) -> int:
        return self.M + 1

    @property
    def x(self) -> np.ndarray:
        return self.h * np.arange(self.M + 1)

    @property
    def length(self) -> float:
        return self.h * self.M

    def field(self, values, truncation: str = "zero") -> "LatticeField":
        return LatticeField(self, values, truncation)

    def zeros(self, truncation: str = "zero") -> "LatticeField":
        return LatticeField(self, np.zeros(self.M + 1), truncation)

    def delta(self, node: int = 0, truncation: str = "zero") -> "LatticeField":
        """Lattice Dirac mass: 1/h at ``node``, 0 elsewhere."""
        v = np.zeros(self.M + 1)
        v[node] = 1.0 / self.h
        return LatticeField(self, v, truncation)

    def sample(self, fn, truncation: str = "zero") -> "LatticeField":
        """Evaluate a vectorised callable at the nodes."""
        return LatticeField(self, np.asarray(fn(self.x), dtype=float), truncation)


@dataclass(frozen=True)
class LatticeField:
    """Real values at the nodes of a Lattice.

    Parameters
    ----------
    lattice : Lattice
    values : array_like, length M+1
    truncation : {"zero", "last"}
        Right-edge extension used by difference operators.
    diverged : bool
        Set when the field holds non-finite values on purpose.
    """

    lattice: Lattice
    values: np.ndarray
    truncation: str = "zero"
    diverged: bool = field(default=False, compare=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size != self.lattice.M + 1:
            raise ValueError(
                f"values must have length M+1={self.lattice.M + 1}, got shape {v.shape}")
        if self.truncation not in TRUNCATION_POLICIES:
            raise ValueError(f"unknown truncation policy {self.truncation!r}")
        if not self.diverged and not np.all(np.isfinite(v)):
            raise ValueError("field has non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def h(self) -> float:
        return self.lattice.h

    @property
    def x(self) -> np.ndarray:
        return self.lattice.x

    def with_values(self, values) -> "LatticeField":
        return LatticeField(self.lattice, values, self.truncation)

    def right_ghost(self) -> float:
        return 0.0 if self.truncation == "zero" else float(self.values[-1])

    def shift(self) -> "LatticeField":
        """(tau_h f)(x) = f(x + h), right edge per policy."""
        return self.with_values(np.append(self.values[1:], self.right_ghost()))

    def _check(self, other: "LatticeField"):
        if not isinstance(other, LatticeField):
            return
        if other.lattice != self.lattice:
            raise ValueError("lattice mismatch between operands")

    def _binary(self, other, op):
        if isinstance(other, LatticeField):
            self._check(other)
            other = other.values
        return self.with_values(op(self.values, other))

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __rsub__(self, other):
        return self.with_values(other - self.values)

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binary(other, np.divide)

    def __neg__(self):
        return self.with_values(-self.values)


def _same_lattice(*fields: LatticeField) -> Lattice:
    lat = fields[0].lattice
    for f in fields[1:]:
        if f.lattice != lat:
            raise ValueError("lattice mismatch between operands")
    return lat


def d_plus(f: LatticeField) -> LatticeField:
    """Forward divided difference (f(x+h) - f(x))/h."""
    v = f.values
    ext = np.append(v, f.right_ghost())
    return f.with_values(np.diff(ext) / f.h)


def d_minus(f: LatticeField) -> LatticeField:
    """Backward divided difference (f(x) - f(x-h))/h; 0 at node 0."""
    v = f.values
    out = np.empty_like(v)
    out[0] = 0.0
    out[1:] = np.diff(v) / f.h
    return f.with_values(out)


def laplacian_h(f: LatticeField) -> LatticeField:
    """Discrete Laplacian (f(x+h) - 2f(x) + f(x-h))/h^2; 0 at node 0."""
    v = f.values
    out = np.empty_like(v)
    out[0] = 0.0
    right = np.append(v[2:], f.right_ghost())
    out[1:] = (right - 2.0 * v[1:] + v[:-1]) / f.h**2
    return f.with_values(out)


def lp_norm(f: LatticeField, p: float = 2.0) -> float:
    """h-weighted l^p norm (h sum |f|^p)^(1/p); sup norm for p = inf."""
    return lp_norm_values(f.values, f.h, p)


def lp_norm_values(values, h: float, p: float = 2.0) -> float:
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    a = np.abs(np.asarray(values, dtype=float))
    if np.isinf(p):
        return float(a.max()) if a.size else 0.0
    if p == 1:
        return float(h * a.sum())
    if p == 2:
        return float(np.sqrt(h * np.dot(a, a)))
    return float((h * np.sum(a**p)) ** (1.0 / p))


def inner_product(f: LatticeField, g: LatticeField, start: int = 0) -> float:
    """h sum_{m >= start} f(x_m) g(x_m).

    ``start=1`` gives the integral over the open half-line (nodes m >= 1).
    """
    _same_lattice(f, g)
    return float(f.h * np.dot(f.values[start:], g.values[start:]))
