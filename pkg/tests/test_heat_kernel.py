import numpy as np
import pytest
from scipy.linalg import expm
from scipy.special import ive

from lattice_rd.boundary import BoundaryPath, deterministic_path, simulate_pearson, PearsonParams
from lattice_rd.heat_kernel import (KernelEval, boundary_solution_u, boundary_solution_u_history,
                                    gd, gd_matrix, hd, hd_row, semigroup_apply, write_kernel_csv)
from lattice_rd.lattice import Lattice, laplacian_h


def bessel(t, n, h):
    # H(t, nh) = e^{-2t/h^2} I_n(2t/h^2) / h
    return ive(n, 2 * t / h**2) / h


def dirichlet_matrix(M, h):
    """Delta_h on nodes 1..M with zero values at nodes 0 and M+1."""
    L = (np.diag(-2.0 * np.ones(M)) + np.diag(np.ones(M - 1), 1) + np.diag(np.ones(M - 1), -1))
    return L / h**2


@pytest.mark.parametrize("h", [0.1, 0.05])
@pytest.mark.parametrize("t", [0.01, 0.1, 1.0])
def test_kernel_matches_bessel(h, t):
    row = hd_row(t, h, 30)
    ref = bessel(t, np.arange(31), h)
    assert np.max(np.abs(row - ref)) <= 1e-10
    for n in (0, 7, 30):
        assert hd(t, n, h) == pytest.approx(ref[n], abs=1e-10)


def test_kernel_examples():
    assert hd(0.0, 0, 0.1) == pytest.approx(10.0)
    assert hd(0.0, 3, 0.1) == 0.0
    assert hd(0.5, -4, 0.2) == hd(0.5, 4, 0.2)
    with pytest.raises(ValueError):
        hd(-1.0, 0, 0.1)
    with pytest.raises(ValueError):
        hd(0.1, 0, 0.1, Q=63)


@pytest.mark.parametrize("t", [0.01, 0.1, 1.0])
def test_kernel_mass_and_positivity(t):
    h = 0.1
    row = hd_row(t, h, 400)
    mass = h * (row[0] + 2 * row[1:].sum())
    assert abs(mass - 1.0) <= 1e-10
    assert np.all(row >= -1e-15)
    assert np.all(np.diff(row) <= 1e-15)


def test_kernel_solves_lattice_heat_equation():
    h, t, dt = 0.1, 0.2, 1e-6
    n = np.arange(0, 40)
    lap = (bessel(t, np.abs(n - 1), h) - 2 * bessel(t, n, h) + bessel(t, n + 1, h)) / h**2
    dH = (hd_row(t + dt, h, 40)[:40] - hd_row(t - dt, h, 40)[:40]) / (2 * dt)
    assert np.max(np.abs(dH - lap)) < 1e-5 * np.max(np.abs(lap))


def test_kernel_cache_is_consistent():
    ev = KernelEval(0.1)
    small = ev.row(0.3, 5)
    big = ev.row(0.3, 200)
    assert np.allclose(big[:6], small, atol=1e-15)
    assert ev(0.3, 7) == pytest.approx(big[7], abs=1e-15)


def test_dirichlet_kernel():
    h, t = 0.1, 0.05
    assert gd(t, 0, 3, h) == 0.0
    assert gd(t, 4, 0, h) == 0.0
    assert gd(t, 2, 5, h) == pytest.approx(gd(t, 5, 2, h), abs=1e-15)
    G = gd_matrix(t, Lattice(h, 20))
    assert np.allclose(G, G.T, atol=1e-14)
    assert G[3, 4] == pytest.approx(bessel(t, 1, h) - bessel(t, 7, h), abs=1e-12)


@pytest.mark.parametrize("t", [0.01, 0.3, 1.0])
def test_semigroup_matches_matrix_exponential(t):
    h, M = 0.1, 400
    lat = Lattice(h, M)
    x = lat.x
    f = lat.field(np.exp(-((x - 10.0) ** 2)) * (np.abs(x - 10.0) < 6))
    ref = np.zeros(M + 1)
    ref[1:] = expm(t * dirichlet_matrix(M, h)) @ f.values[1:]
    got = semigroup_apply(f, t, odd=True).values
    assert np.max(np.abs(got - ref)) <= 1e-8
    # full-line route agrees away from the origin for data far from it
    full = semigroup_apply(f, t).values
    assert np.max(np.abs(full - ref)) <= 1e-8


def test_semigroup_properties():
    h = 0.1
    lat = Lattice(h, 300)
    f = lat.field(np.exp(-((lat.x - 15.0) ** 2)))
    a = semigroup_apply(semigroup_apply(f, 0.2), 0.3).values
    b = semigroup_apply(f, 0.5).values
    assert np.max(np.abs(a - b)) < 1e-12
    assert semigroup_apply(f, 0.0) is f
    # generator: (e^{t Delta} f - f)/t -> Delta f
    t = 1e-5
    d = (semigroup_apply(f, t).values - f.values) / t
    assert np.max(np.abs(d[1:-1] - laplacian_h(f).values[1:-1])) < 1e-3


def test_semigroup_warns_on_truncated_data():
    lat = Lattice(0.1, 50)
    with pytest.warns(RuntimeWarning):
        semigroup_apply(lat.field(np.ones(51)), 0.1)


def heat_ftcs_reference(psi_fn, T, h, M, n_steps):
    """Fine FTCS with Dirichlet data psi at node 0 and a far zero wall."""
    k = T / n_steps
    D = k / h**2
    u = np.zeros(M + 1)
    for n in range(n_steps):
        new = u.copy()
        new[1:-1] = u[1:-1] + D * (u[2:] - 2 * u[1:-1] + u[:-2])
        new[-1] = u[-1] + D * (0 - 2 * u[-1] + u[-2])
        new[0] = psi_fn((n + 1) * k)
        u = new
    return u


def test_boundary_solution_matches_ftcs_for_smooth_data():
    h, T, M = 0.1, 0.5, 80
    fn = lambda t: np.sin(np.pi * t) ** 2
    psi = deterministic_path("callable", T, 4000, fn=fn)
    u = boundary_solution_u(psi, T, Lattice(h, M)).values
    ref = heat_ftcs_reference(fn, T, h, M, 40_000)
    assert u[0] == pytest.approx(fn(T), abs=1e-12)
    assert np.max(np.abs(u - ref)) < 2e-3


def test_boundary_solution_zero_and_constant_data():
    lat = Lattice(0.1, 60)
    zero = deterministic_path("zero", 1.0, 200)
    assert np.all(boundary_solution_u_history(zero, lat) == 0)
    # constant psi = 1 switched on at t = 0+: u increases in time towards 1
    const = BoundaryPath(np.linspace(0, 1, 2001), np.r_[0.0, np.ones(2000)])
    U = boundary_solution_u_history(const, lat)
    assert np.all(np.diff(U[:, 3]) >= -1e-3)
    assert 0 < U[-1, 3] < 1


def test_max_principle_on_pearson_paths():
    lat = Lattice(0.1, 40)
    p = PearsonParams(2.0, 0.5, 0.5, 1.0)
    for seed in range(10):
        psi = simulate_pearson(p, 0.5, 1000, seed)
        U = boundary_solution_u_history(psi, lat)
        assert np.max(np.abs(U)) <= np.max(np.abs(psi.values)) + 1e-8
        assert U.min() >= -1e-8


def test_boundary_solution_rejects_off_grid_time():
    psi = deterministic_path("zero", 1.0, 10)
    with pytest.raises(ValueError):
        boundary_solution_u(psi, 0.15, Lattice(0.1, 10))
    with pytest.raises(ValueError):
        boundary_solution_u(psi, 2.0, Lattice(0.1, 10))


def test_write_kernel_csv(tmp_path):
    write_kernel_csv(tmp_path / "k.csv", 0.1, [0.1], 3)
    lines = (tmp_path / "k.csv").read_text().splitlines()
    assert lines[0] == "t,n,value"
    assert len(lines) == 1 + 7
    t, n, v = lines[4].split(",")
    assert int(n) == 0 and float(v) == pytest.approx(bessel(0.1, 0, 0.1), abs=1e-12)
