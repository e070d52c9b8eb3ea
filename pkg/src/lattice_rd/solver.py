"""Fully discrete explicit scheme for the pollutant/calcite system.

With D = k/h^2, phi = A + B c evaluated at time level n, the update is

    s_m^{n+1} = a_m s_{m+1} + b_m s_{m-1} + e_m s_m
    a_m = D (1 + (phi_{m+1} - phi_m) / (2 phi_m))
    b_m = D (1 - (phi_m - phi_{m-1}) / (2 phi_m))
    e_m = 1 - D - D (phi_{m+1} + phi_{m-1}) / (2 phi_m) - lambda k c_m (1 - B s_m)
    c_m^{n+1} = c_m exp(-lambda k s_m phi(c_m))

with s_0^{n+1} = psi^{n+1} and the node-0 calcite driven by psi^n. The three
coefficients sum to 1 - lambda k c (1 - B s); for phi constant they reduce to
FTCS (D, 1 - 2D, D).

The split solver writes s = u + v, where u is the boundary-driven heat
solution and v carries the nonlinearity with zero boundary data.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .boundary import BoundaryPath, downsample
from .heat_kernel import boundary_solution_u_history
from .lattice import Lattice, LatticeField, lp_norm_values

DIVERGENCE_FACTOR = 10.0
TAIL_TOLERANCE = 1e-8


class StabilityError(ValueError):
    """Raised when a configuration fails or cannot be submitted to the gate."""


@dataclass(frozen=True)
class SchemeConfig:
    """Physical data, meshes and initial/boundary data of one run.

    ``s0`` and ``c0`` are arrays of length M+1. ``psi`` must live on [0, T]
    with a number of steps that is a multiple of N = T/k; it is downsampled
    to the solver grid. ``variant="balanced"`` uses the centre coefficient
    1 - D - D(phi+ + phi-)/(2 phi) - ..., so the five coefficients sum to the
    reaction factor; ``"two_d"`` uses 1 - 2D - ... instead.
    """

    A: float
    B: float
    lam: float
    eta: float
    h: float
    k: float
    T: float
    M: int
    s0: np.ndarray
    c0: np.ndarray
    psi: BoundaryPath
    truncation: str = "zero"
    general_b: bool = False
    allow_unstable: bool = False
    variant: str = "balanced"

    def __post_init__(self):
        s0 = np.asarray(getattr(self.s0, "values", self.s0), dtype=float).copy()
        c0 = np.asarray(getattr(self.c0, "values", self.c0), dtype=float).copy()
        object.__setattr__(self, "s0", s0)
        object.__setattr__(self, "c0", c0)
        lat = Lattice(self.h, self.M)
        if s0.shape != (lat.n_nodes,) or c0.shape != (lat.n_nodes,):
            raise ValueError("s0 and c0 must have length M+1")
        if self.A <= 0:
            raise ValueError("A must be positive")
        if not self.general_b and self.B not in (1, -1, 1.0, -1.0):
            raise ValueError("B must be +1 or -1 unless general_b is set")
        if self.B == 0:
            raise ValueError("B must be nonzero")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.k <= 0 or self.T <= 0:
            raise ValueError("k and T must be positive")
        if self.truncation not in ("zero", "last"):
            raise ValueError(f"unknown truncation policy {self.truncation!r}")
        if self.variant not in ("balanced", "two_d"):
            raise ValueError(f"unknown scheme variant {self.variant!r}")
        if np.any(~np.isfinite(s0)) or np.any(s0 < 0) or np.any(s0 > self.eta):
            raise ValueError("s0 must lie in [0, eta]")
        if np.any(~np.isfinite(c0)) or np.any(c0 <= 0):
            raise ValueError("c0 must be positive")
        phi0 = self.A + self.B * c0
        if np.any(phi0 <= 0):
            raise ValueError("porosity A + B c0 must be positive")
        if np.any(phi0 >= 1):
            warnings.warn("porosity A + B c0 >= 1 on some nodes", RuntimeWarning, stacklevel=3)
        self.N  # validates T/k
        if self.psi.T != self.T and not math.isclose(self.psi.T, self.T, rel_tol=1e-12):
            raise ValueError("psi horizon must equal T")
        if self.psi.N % self.N:
            raise ValueError(f"psi has {self.psi.N} steps, not a multiple of N={self.N}")
        if s0[0] != self.psi.values[0]:
            warnings.warn("s0(0) differs from psi(0); node 0 starts at psi(0)",
                          RuntimeWarning, stacklevel=3)

    @property
    def N(self) -> int:
        n = self.T / self.k
        N = int(round(n))
        if N < 1 or abs(n - N) > 1e-9 * n:
            raise ValueError(f"T/k = {n} is not an integer")
        return N

    @property
    def lattice(self) -> Lattice:
        return Lattice(self.h, self.M)

    @property
    def times(self) -> np.ndarray:
        return self.T * np.arange(self.N + 1) / self.N

    @property
    def psi_grid(self) -> np.ndarray:
        return downsample(self.psi, self.psi.N // self.N).values

    def phi(self, c):
        return self.A + self.B * np.asarray(c)

    def with_k(self, k: float) -> "SchemeConfig":
        """Same data with a new time step; psi is downsampled when possible,
        otherwise linearly interpolated onto the new grid."""
        N = int(round(self.T / k))
        psi = self.psi
        if psi.N % N:
            t = self.T * np.arange(N + 1) / N
            meta = dict(psi.meta, resampled=True)
            psi = BoundaryPath(t, psi(t), meta)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return replace(self, k=k, psi=psi)


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    k_max: float
    branch: str
    k: float
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"stable": self.stable, "k_max": self.k_max, "branch": self.branch,
                "k": self.k, **self.details}


def stability_bound(A: float, B: float, lam: float, eta: float, h: float,
                    c0_min: float, c0_max: float) -> tuple[float, str, dict]:
    """Largest admissible k for positivity and boundedness of the scheme."""
    if B < 0:
        k_max = min(h**2 / 2, h**2 / (2 + lam * c0_max * h**2 * (1 - B * eta)))
        return k_max, "B<0", {}
    if B * eta >= 1:
        raise StabilityError(f"B={B} with B*eta={B * eta} >= 1 is not admissible")
    phi_max = A + B * c0_max
    phi_min = A + B * c0_min
    ratio = phi_max / phi_min
    k_max = min(h**2 / 2, h**2 / (2 + ratio + lam * c0_max * h**2))
    return k_max, "0<B<1/eta", {"phi_ratio": ratio}


def check_stability(config: SchemeConfig) -> StabilityReport:
    c0 = config.c0
    k_max, branch, det = stability_bound(config.A, config.B, config.lam, config.eta,
                                         config.h, float(c0.min()), float(c0.max()))
    return StabilityReport(config.k <= k_max, k_max, branch, config.k, det)


def _coefficients(config: SchemeConfig, s: np.ndarray, c: np.ndarray):
    """(a, b, e) for interior nodes m = 1..M."""
    D = config.k / config.h**2
    phi = config.A + config.B * np.append(c, c[-1])
    pm, pp, pl = phi[1:-1], phi[2:], phi[:-2]
    a = D * (1.0 + (pp - pm) / (2.0 * pm))
    b = D * (1.0 - (pm - pl) / (2.0 * pm))
    centre = 1.0 - 2.0 * D if config.variant == "two_d" else 1.0 - D
    e = (centre - D * (pp + pl) / (2.0 * pm)
         - config.lam * config.k * c[1:] * (1.0 - config.B * s[1:]))
    return a, b, e


def _ghost(config: SchemeConfig, f: np.ndarray) -> float:
    return 0.0 if config.truncation == "zero" else f[-1]


def _c_update(config: SchemeConfig, s: np.ndarray, c: np.ndarray) -> np.ndarray:
    return c * np.exp(-config.lam * config.k * s * config.phi(c))


@dataclass
class SchemeState:
    n: int
    s: np.ndarray
    c: np.ndarray


def initial_state(config: SchemeConfig) -> SchemeState:
    s = config.s0.copy()
    s[0] = config.psi_grid[0]
    return SchemeState(0, s, config.c0.copy())


def step_direct(state: SchemeState, config: SchemeConfig,
                psi_next: float | None = None) -> SchemeState:
    """One step of the fully discrete scheme from level n to n+1."""
    s, c = state.s, state.c
    if psi_next is None:
        psi_next = config.psi_grid[state.n + 1]
    a, b, e = _coefficients(config, s, c)
    right = np.append(s[2:], _ghost(config, s))
    s_new = np.empty_like(s)
    s_new[1:] = a * right + b * s[:-1] + e * s[1:]
    s_new[0] = psi_next
    return SchemeState(state.n + 1, s_new, _c_update(config, s, c))


def c_explicit(c0, s_time_integral, config: SchemeConfig):
    """c = A c0 / (phi(c0) exp(lambda A int s) - B c0)."""
    c0 = np.asarray(getattr(c0, "values", c0), dtype=float)
    I = np.asarray(getattr(s_time_integral, "values", s_time_integral), dtype=float)
    denom = config.phi(c0) * np.exp(config.lam * config.A * I) - config.B * c0
    if np.any(denom <= 0):
        raise ValueError("nonpositive denominator in the explicit calcite formula")
    return config.A * c0 / denom


@dataclass
class Trajectory:
    """Snapshots of a run plus monitored invariants."""

    lattice: Lattice
    steps: np.ndarray
    times: np.ndarray
    s: np.ndarray
    c: np.ndarray
    monitors: dict
    gate: StabilityReport
    diverged: dict | None = None
    extra: dict = field(default_factory=dict)

    def field(self, i: int, which: str = "s", truncation: str = "zero") -> LatticeField:
        return LatticeField(self.lattice, getattr(self, which)[i], truncation)


class _Monitor:
    def __init__(self, config: SchemeConfig, track_violations: int = 20):
        self.config = config
        self.s_min = np.inf
        self.s_max = -np.inf
        self.c_min = np.inf
        self.c_max = -np.inf
        self.c0_max = float(config.c0.max())
        self.violations = 0
        self.examples: list = []
        self.coef_min = np.inf
        self.c_increase = 0
        self.sup_l2 = 0.0
        self.grad_sum = 0.0
        self.sup_abs = 0.0
        self.tail = 0.0
        self.track = track_violations

    def observe(self, n: int, s: np.ndarray, c: np.ndarray):
        cfg = self.config
        self.s_min = min(self.s_min, float(s.min()))
        self.s_max = max(self.s_max, float(s.max()))
        self.c_min = min(self.c_min, float(c.min()))
        self.c_max = max(self.c_max, float(c.max()))
        bad_s = (s < 0) | (s >= cfg.eta)
        bad_c = (c < 0) | (c > self.c0_max)
        nbad = int(bad_s.sum() + bad_c.sum())
        if nbad:
            self.violations += nbad
            for m in np.flatnonzero(bad_s | bad_c)[: max(0, self.track - len(self.examples))]:
                self.examples.append({"n": n, "m": int(m), "s": float(s[m]), "c": float(c[m])})
        self.sup_l2 = max(self.sup_l2, lp_norm_values(s, cfg.h, 2) ** 2)
        self.sup_abs = max(self.sup_abs, float(np.abs(s).max()))
        self.tail = max(self.tail, float(abs(s[-1])))

    def observe_step(self, s: np.ndarray, c: np.ndarray, c_new: np.ndarray, coef):
        cfg = self.config
        ds = np.diff(np.append(s, _ghost(cfg, s))) / cfg.h
        self.grad_sum += cfg.k * lp_norm_values(ds, cfg.h, 2) ** 2
        self.coef_min = min(self.coef_min, min(float(x.min()) for x in coef))
        self.c_increase += int(np.sum((c_new > c) & (s >= 0)))

    def finalize(self) -> dict:
        tail_ratio = self.tail / self.sup_abs if self.sup_abs > 0 else 0.0
        return {
            "s_min": self.s_min, "s_max": self.s_max,
            "c_min": self.c_min, "c_max": self.c_max, "c0_max": self.c0_max,
            "range_violations": self.violations,
            "violation_examples": self.examples,
            "coefficient_min": self.coef_min,
            "c_increase_count": self.c_increase,
            "energy": self.sup_l2 + self.grad_sum,
            "energy_sup_l2": self.sup_l2,
            "energy_grad_sum": self.grad_sum,
            "tail_ratio": tail_ratio,
            "truncation_ok": tail_ratio <= TAIL_TOLERANCE,
        }


def _divergence(config: SchemeConfig, s: np.ndarray, c: np.ndarray):
    bad = ~np.isfinite(s) | ~np.isfinite(c) | (np.abs(s) > DIVERGENCE_FACTOR * config.eta)
    if np.any(bad):
        return int(np.flatnonzero(bad)[0])
    return None


def _gate(config: SchemeConfig) -> StabilityReport:
    rep = check_stability(config)
    if not rep.stable and not config.allow_unstable:
        raise StabilityError(
            f"k={config.k:.6g} exceeds k_max={rep.k_max:.6g} ({rep.branch})")
    return rep


def _snapshot_steps(N: int, stride: int) -> set:
    if stride < 1:
        raise ValueError("snapshot stride must be >= 1")
    return set(range(0, N + 1, stride)) | {N}


def run_direct(config: SchemeConfig, stride: int = 1, monitor: bool = True) -> Trajectory:
    """Run the fully discrete scheme over N = T/k steps.

    Raises StabilityError when the gate fails and ``allow_unstable`` is not
    set. A divergent run stops early and reports ``diverged = {n, m}``.
    """
    gate = _gate(config)
    N = config.N
    psi = config.psi_grid
    keep = _snapshot_steps(N, stride)
    mon = _Monitor(config)
    state = initial_state(config)
    snaps_n, snaps_s, snaps_c = [], [], []
    diverged = None
    for n in range(N + 1):
        if n in keep:
            snaps_n.append(n)
            snaps_s.append(state.s.copy())
            snaps_c.append(state.c.copy())
        if monitor:
            mon.observe(n, state.s, state.c)
        if n == N:
            break
        new = step_direct(state, config, psi[n + 1])
        if monitor:
            mon.observe_step(state.s, state.c, new.c, _coefficients(config, state.s, state.c))
        m_bad = _divergence(config, new.s, new.c)
        if m_bad is not None:
            diverged = {"n": n + 1, "m": m_bad}
            snaps_n.append(n + 1)
            snaps_s.append(new.s.copy())
            snaps_c.append(new.c.copy())
            break
        state = new
    steps = np.array(snaps_n)
    return Trajectory(config.lattice, steps, steps * config.k, np.array(snaps_s),
                      np.array(snaps_c), mon.finalize() if monitor else {}, gate, diverged)


@dataclass
class SplitState:
    n: int
    u: np.ndarray
    v: np.ndarray
    c: np.ndarray
    s_integral: np.ndarray


def _u_ftcs(config: SchemeConfig, u: np.ndarray, psi_next: float) -> np.ndarray:
    D = config.k / config.h**2
    right = np.append(u[2:], _ghost(config, u))
    out = np.empty_like(u)
    out[1:] = u[1:] + D * (right - 2.0 * u[1:] + u[:-1])
    out[0] = psi_next
    return out


def step_split(state: SplitState, u_next: np.ndarray, config: SchemeConfig,
               c_update: str = "scheme") -> SplitState:
    """Advance v (and c) one step given u at levels n and n+1.

    The v update is the direct scheme applied to v plus the source terms that
    u produces in the s equation, so u + v obeys the direct scheme up to the
    difference between the supplied u and one FTCS step of u.
    """
    u, v, c = state.u, state.v, state.c
    s = u + v
    a, b, e = _coefficients(config, s, c)
    D = config.k / config.h**2
    v_right = np.append(v[2:], _ghost(config, v))
    u_right = np.append(u[2:], _ghost(config, u))
    react = config.lam * config.k * c[1:] * (1.0 - config.B * s[1:])
    src = (a - D) * u_right + (b - D) * u[:-1] - ((a - D) + (b - D)) * u[1:] - react * u[1:]
    v_new = np.empty_like(v)
    v_new[1:] = (a * v_right + b * v[:-1] + e * v[1:]) + src
    v_new[0] = 0.0
    s_new = u_next + v_new
    integral = state.s_integral + 0.5 * config.k * (s + s_new)
    if c_update == "scheme":
        c_new = _c_update(config, s, c)
    elif c_update == "explicit":
        c_new = c_explicit(config.c0, integral, config)
    else:
        raise ValueError(f"unknown c_update {c_update!r}")
    return SplitState(state.n + 1, u_next, v_new, c_new, integral)


def run_split(config: SchemeConfig, u_provider: str = "ftcs", c_update: str = "explicit",
              stride: int = 1) -> Trajectory:
    """Split solver s = u + v.

    Parameters
    ----------
    u_provider : {"ftcs", "kernel"}
        FTCS heat steps with the same k (default) or the kernel convolution
        evaluated at every grid time.
    c_update : {"scheme", "explicit"}
        Exponential update as in the direct scheme, or the closed-form
        calcite formula with a trapezoid time integral of s.
    """
    gate = _gate(config)
    N = config.N
    psi = config.psi_grid
    if psi[0] != 0:
        warnings.warn("split solver run with psi(0) != 0", RuntimeWarning, stacklevel=2)
    if u_provider == "kernel":
        path = BoundaryPath(config.times, psi, {})
        U = boundary_solution_u_history(path, config.lattice)
    elif u_provider != "ftcs":
        raise ValueError(f"unknown u_provider {u_provider!r}")
    u0 = np.zeros(config.M + 1)
    u0[0] = psi[0]
    v0 = config.s0.copy()
    v0[0] = 0.0
    state = SplitState(0, u0, v0, config.c0.copy(), np.zeros(config.M + 1))
    keep = _snapshot_steps(N, stride)
    mon = _Monitor(config)
    rec = {"n": [], "s": [], "c": [], "u": [], "v": []}
    diverged = None
    for n in range(N + 1):
        s = state.u + state.v
        if n in keep:
            for key, val in (("n", n), ("s", s), ("c", state.c), ("u", state.u), ("v", state.v)):
                rec[key].append(np.copy(val))
        mon.observe(n, s, state.c)
        if n == N:
            break
        u_next = U[n + 1] if u_provider == "kernel" else _u_ftcs(config, state.u, psi[n + 1])
        state = step_split(state, u_next, config, c_update)
        m_bad = _divergence(config, state.u + state.v, state.c)
        if m_bad is not None:
            diverged = {"n": n + 1, "m": m_bad}
            break
    steps = np.array(rec["n"])
    return Trajectory(config.lattice, steps, steps * config.k, np.array(rec["s"]),
                      np.array(rec["c"]), mon.finalize(), gate, diverged,
                      {"u": np.array(rec["u"]), "v": np.array(rec["v"])})


@dataclass(frozen=True)
class LTEResult:
    k: float
    k_reference: float
    residual: np.ndarray

    @property
    def max(self) -> float:
        return float(self.residual.max())


def local_truncation_error(config: SchemeConfig, refine: int = 8) -> LTEResult:
    """Residual of a finer-k reference run inserted into the coarse update.

    tau^n = (s_ref(t_{n+1}) - S_k(s_ref(t_n), c_ref(t_n))) / k on interior
    nodes, where S_k is one coarse step. Returns max_m |tau^n| per step.
    """
    ref_cfg = config.with_k(config.k / refine)
    ref_cfg = replace(ref_cfg, allow_unstable=True)
    ref = run_direct(ref_cfg, stride=refine, monitor=False)
    if ref.diverged:
        raise RuntimeError("reference run diverged")
    psi = config.psi_grid
    res = np.empty(config.N)
    for n in range(config.N):
        st = SchemeState(n, ref.s[n], ref.c[n])
        pred = step_direct(st, config, psi[n + 1])
        res[n] = np.max(np.abs(ref.s[n + 1][1:] - pred.s[1:])) / config.k
    return LTEResult(config.k, ref_cfg.k, res)
