"""Tests for the half-plane reference computations.

Special functions against series oracles, the rectangle and slit maps
against quadrature and discrete-harmonic oracles, the imaginary-geometry
boundary data against a lattice Dirichlet solve, Green functions against a
discrete inverse Laplacian, and the determinant martingale at start.
"""

import math

import numpy as np
import pytest
import scipy.integrate
import scipy.sparse
import scipy.sparse.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from dimertree.conformal import (
    CHI,
    LAMBDA,
    LAMBDA_PRIME,
    SlitRectMap,
    boundary_data_in_domain,
    boundary_data_u,
    elliptic_2f1,
    elliptic_2f1_prime,
    green_dirichlet,
    hij_matrix,
    rect_map,
    slit_rect_map,
)
from dimertree.domains import make_wired_graph
from dimertree.errors import (
    BoundaryPoint,
    CoincidentPoints,
    DegenerateQuad,
    DomainError,
)
from dimertree.harmonic import arc_field, solve_dirichlet_neumann


def series_2f1(m, terms=800):
    """Truncated Gauss series sum_k ((1/2)_k / k!)^2 m^k."""
    total, coeff = 0.0, 1.0
    for k in range(terms):
        total += coeff * m**k
        coeff *= ((k + 0.5) / (k + 1.0)) ** 2
    return total


def series_2f1_prime(m, terms=800):
    total, coeff = 0.0, 1.0
    for k in range(terms):
        if k:
            total += coeff * k * m ** (k - 1)
        coeff *= ((k + 0.5) / (k + 1.0)) ** 2
    return total


# ---------------------------------------------------------------------------
# elliptic 2F1


def test_elliptic_2f1_endpoint_values():
    assert elliptic_2f1(0.0) == 1.0
    assert abs(elliptic_2f1(0.5) - series_2f1(0.5)) < 1e-14
    assert abs(elliptic_2f1(0.9) - series_2f1(0.9)) < 1e-10


def test_elliptic_2f1_agm_matches_series_on_grid():
    for m in np.linspace(0.0, 0.9, 100):
        assert abs(elliptic_2f1(m) - series_2f1(float(m))) < 1e-12


def test_elliptic_2f1_monotone_increasing():
    grid = [elliptic_2f1(m) for m in np.linspace(0.0, 0.99, 200)]
    assert all(b > a for a, b in zip(grid, grid[1:]))


def test_elliptic_2f1_rejects_out_of_range():
    for bad in (-0.1, 1.0, 1.5):
        with pytest.raises(DomainError):
            elliptic_2f1(bad)
        with pytest.raises(DomainError):
            elliptic_2f1_prime(bad)


def test_elliptic_2f1_prime_matches_series_derivative():
    for m in np.linspace(0.0, 0.9, 50):
        assert abs(elliptic_2f1_prime(m) - series_2f1_prime(float(m))) < 1e-10


def test_elliptic_2f1_prime_matches_finite_difference():
    h = 1e-6
    for m in (0.1, 0.4, 0.7, 0.95):
        fd = (elliptic_2f1(m + h) - elliptic_2f1(m - h)) / (2.0 * h)
        assert abs(elliptic_2f1_prime(m) - fd) < 1e-7 * max(1.0, abs(fd))


# ---------------------------------------------------------------------------
# rectangle map


def quad_side_length(y, p):
    """Adaptive quadrature of the 4-point density over (y[p], y[p+1])."""
    a, b = y[p], y[p + 1]
    rest = [y[l] for l in range(4) if l != p and l != p + 1]

    def f(u):
        return 1.0 / math.sqrt(abs((u - rest[0]) * (u - rest[1])))

    val, err = scipy.integrate.quad(f, a, b, weight="alg", wvar=(-0.5, -0.5))
    assert err < 1e-10
    return val


def test_rect_map_symmetric_configuration_has_unit_modulus():
    s = math.sqrt(2.0)
    K, _ = rect_map([0.0, s, 2.0, 2.0 + s])
    assert abs(K - 1.0) < 1e-12


def test_rect_map_modulus_matches_adaptive_quadrature():
    y = np.array([0.0, 1.0, 2.0, 3.0])
    K, _ = rect_map(y)
    oracle = quad_side_length(y, 1) / quad_side_length(y, 0)
    assert abs(K - oracle) < 1e-8


def test_rect_map_corner_and_interior_images():
    y = np.array([0.0, 1.0, 2.0, 3.0])
    K, phi = rect_map(y)
    # corners of the free arc go to the ends of the unit bottom edge
    assert abs(phi(y[0] + 1e-9j)) < 5e-3
    assert abs(phi(y[1] + 1e-9j) - 1.0) < 5e-3
    w = phi(1.2 + 0.8j)
    assert 0.0 < w.real < 1.0 and 0.0 < w.imag < K


def test_rect_map_modulus_monotone_under_collapse():
    # shrinking the free arc stretches the rectangle, shrinking the wired
    # arc flattens it
    grow = [rect_map([0.0, eps, 2.0, 3.0])[0] for eps in (0.5, 0.1, 0.02)]
    assert grow[0] < grow[1] < grow[2]
    flat = [rect_map([0.0, 1.0, 1.0 + eps, 3.0])[0] for eps in (0.5, 0.1, 0.02)]
    assert flat[0] > flat[1] > flat[2]


def test_rect_map_rejects_malformed_input():
    with pytest.raises(DegenerateQuad):
        rect_map([0.0, 2.0, 1.0, 3.0])
    with pytest.raises(DegenerateQuad):
        rect_map([0.0, 1.0, 2.0])
    with pytest.raises(DegenerateQuad):
        rect_map([0.0, 1.0, 2.0, 3.0, 4.0, 5.0])


# ---------------------------------------------------------------------------
# slit maps


def test_slit_map_n2_reduces_to_rect_map():
    y = np.array([0.0, 1.0, 2.0, 3.0])
    K, phi = rect_map(y)
    sm = slit_rect_map(y, 1)
    assert len(sm.mu) == 0
    assert abs(sm.K - 1.0 / K) < 1e-10
    # same map up to the rotation taking the wired arc to the bottom edge
    for z in (1.2 + 0.8j, 0.4 + 0.2j, 2.5 + 1.5j):
        assert abs(sm.phi(z) - 1j * (1.0 - phi(z))) < 1e-8
    sm2 = slit_rect_map(y, 2)
    for z in (1.2 + 0.8j, 0.4 + 0.2j):
        assert abs(sm2.phi(z) - (K + 1j * phi(z))) < 1e-8


FIXTURE_N3 = np.array([-3.0, -2.0, -0.5, 0.5, 2.0, 3.0])


def test_slit_map_residuals_below_tolerance():
    for j in (1, 2, 3):
        sm = slit_rect_map(FIXTURE_N3, j)
        assert sm.residuals is not None
        assert np.max(np.abs(sm.residuals)) < 1e-10


def test_slit_map_boundary_values():
    y = FIXTURE_N3
    eps = 1e-7
    for j in (1, 2, 3):
        sm = slit_rect_map(y, j)
        for i in range(1, 3):  # finite wired arcs (y_2i, y_2i+1)
            lo, hi = y[2 * i - 1], y[2 * i]
            for t in np.linspace(lo + 0.05, hi - 0.05, 5):
                want = 0.0 if i == j else 1.0
                assert abs(sm.im_phi(t + eps * 1j) - want) < 1e-3
        # the n-th wired arc runs through infinity
        for t in (y[-1] + 1.0, y[0] - 1.0, y[-1] + 20.0):
            want = 0.0 if j == 3 else 1.0
            assert abs(sm.im_phi(t + eps * 1j) - want) < 1e-3
        # slit tips hang strictly below the top edge
        for mu in sm.mu:
            tip = sm.im_phi(mu + 1e-5j)
            assert 0.05 < tip < 0.999


def lattice_disk_graph(radius, thetas):
    """Wired lattice disk with arcs between consecutive angle pairs."""
    pts = [
        (i, j)
        for i in range(-radius, radius + 1)
        for j in range(-radius, radius + 1)
        if i * i + j * j <= radius * radius
    ]
    index = {p: k for k, p in enumerate(pts)}
    edges = []
    for (i, j) in pts:
        for di, dj in ((1, 0), (0, 1)):
            q = (i + di, j + dj)
            if q in index:
                edges.append((index[(i, j)], index[q]))
    def on_hull(p):
        i, j = p
        return any(
            (i + di, j + dj) not in index
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1))
        )
    hull = [p for p in pts if on_hull(p)]

    def in_arc(a, lo, hi):
        return lo < a < hi if lo <= hi else (a > lo or a < hi)

    wired = []
    for k in range(len(thetas) // 2):
        lo, hi = thetas[(2 * k + 1) % len(thetas)], thetas[(2 * k + 2) % len(thetas)]
        arc = [index[p] for p in hull if in_arc(math.atan2(p[1], p[0]), lo, hi)]
        wired.append(arc)
    g = make_wired_graph(np.array(pts, dtype=float), edges, wired)
    return g, index


def test_slit_map_matches_discrete_harmonic_measure():
    # hitting probabilities of the wired arcs on a 128-diameter lattice
    # disk, carried to the half-plane by the Moebius map, against
    # 1 - Im(phi_j)
    radius = 64
    thetas = [-2.4, -1.2, -0.4, 0.6, 1.5, 2.3]
    y = np.array([math.tan(t / 2.0) for t in thetas])
    g, index = lattice_disk_graph(radius, thetas)
    probes = [(0, 0), (20, 10), (-15, 25), (10, -30), (-25, -10),
              (30, 20), (0, 40), (-35, 5), (12, 18), (-8, -22)]
    for j in (1, 2, 3):
        sm = slit_rect_map(y, j)
        field = arc_field(g, j - 1)
        worst = 0.0
        for p in probes:
            w = complex(p[0], p[1]) / radius
            z = 1j * (1.0 - w) / (1.0 + w)
            cont = 1.0 - sm.im_phi(z)
            disc = field[g.index[index[p]]]
            worst = max(worst, abs(cont - disc))
        assert worst <= 0.02


def test_slit_map_rejects_malformed_input():
    with pytest.raises(DegenerateQuad):
        slit_rect_map([-3.0, -2.0, 0.5, -0.5, 2.0, 3.0], 1)
    with pytest.raises(DegenerateQuad):
        slit_rect_map(FIXTURE_N3, 0)
    with pytest.raises(DegenerateQuad):
        slit_rect_map(FIXTURE_N3, 4)
    with pytest.raises(DegenerateQuad):
        slit_rect_map(FIXTURE_N3[:-1], 1)


# ---------------------------------------------------------------------------
# boundary data


def test_counterflow_data_antisymmetric_about_mark():
    assert abs(boundary_data_u(1j, (0.0,), kind="counterflow")) < 1e-14
    for z in (0.5 + 0.3j, 2.0 + 1.0j, -1.0 + 4.0j):
        left = boundary_data_u(z, (0.0,), kind="counterflow")
        right = boundary_data_u(complex(-z.real, z.imag), (0.0,),
                                kind="counterflow")
        assert abs(left + right) < 1e-14
    # near the boundary far from the mark the data values are recovered
    assert abs(boundary_data_u(-50.0 + 1e-3j, (0.0,), kind="counterflow")
               - LAMBDA_PRIME) < 1e-4
    assert abs(boundary_data_u(50.0 + 1e-3j, (0.0,), kind="counterflow")
               + LAMBDA_PRIME) < 1e-4


def test_flow_data_recovers_interval_values():
    x = (-2.0, -1.0, 1.0, 2.0)
    z1 = 0.25
    eps = 1e-6
    cases = [(-5.0, LAMBDA), (-1.5, 0.0), (-0.3, -LAMBDA),
             (0.7, LAMBDA), (1.5, 0.0), (4.0, -LAMBDA)]
    for t, want in cases:
        got = boundary_data_u(t + eps * 1j, x, (z1,))
        assert abs(got - want) < 1e-4


def test_flow_data_vanishes_on_symmetry_axis():
    # mirror-symmetric marks with the branch point at the center: the
    # +lambda and -lambda contributions cancel on the vertical axis
    x = (-2.0, -1.0, 1.0, 2.0)
    for h in (0.2, 1.0, 5.0):
        assert abs(boundary_data_u(h * 1j, x, (0.0,))) < 1e-13


def test_boundary_data_is_harmonic():
    x = (-2.0, -1.0, 0.5, 2.0)
    h = 1e-3
    for z in (0.3 + 0.8j, -1.2 + 0.5j, 1.0 + 2.0j):
        u0 = boundary_data_u(z, x, (-0.2,))
        lap = (boundary_data_u(z + h, x, (-0.2,))
               + boundary_data_u(z - h, x, (-0.2,))
               + boundary_data_u(z + h * 1j, x, (-0.2,))
               + boundary_data_u(z - h * 1j, x, (-0.2,))
               - 4.0 * u0) / (h * h)
        assert abs(lap) < 1e-3


def test_boundary_data_matches_discrete_dirichlet_solve():
    # lattice Dirichlet problem on a box: exact step data on the bottom,
    # far-field values from the harmonic extension on the other sides
    x = (-2.0, -1.0, 1.0, 2.0)
    zm = (0.0,)
    step = 1.0 / 16.0
    nx, ny = 321, 129
    coords, index = [], {}
    for a in range(nx):
        for b in range(ny):
            index[(a, b)] = len(coords)
            coords.append((-10.0 + a * step, b * step))
    edges = []
    for (a, b), k in index.items():
        for da, db in ((1, 0), (0, 1)):
            q = (a + da, b + db)
            if q in index:
                edges.append((k, index[q]))
    dirichlet = {}
    for (a, b), k in index.items():
        px, py = -10.0 + a * step, b * step
        if b == 0:
            breaks = [x[0], x[1], zm[0], x[2], x[3]]
            vals = [LAMBDA, 0.0, -LAMBDA, LAMBDA, 0.0, -LAMBDA]
            pos = sum(px > t + 1e-9 for t in breaks)
            dirichlet[k] = vals[pos]
            if any(abs(px - t) < 1e-9 for t in breaks):
                # node sitting exactly on a jump takes the two-sided mean
                dirichlet[k] = 0.5 * (vals[pos] + vals[pos + 1])
        elif a in (0, nx - 1) or b == ny - 1:
            dirichlet[k] = boundary_data_u(complex(px, py), x, zm)
    g = make_wired_graph(np.array(coords), edges, [list(dirichlet)])
    field = solve_dirichlet_neumann(
        g, {g.index[k]: v for k, v in dirichlet.items()})
    for probe in ((0.5, 1.5), (-1.5, 2.0), (1.0, 1.0), (-0.25, 3.0)):
        a = round((probe[0] + 10.0) / step)
        b = round(probe[1] / step)
        got = field[g.index[index[(a, b)]]]
        want = boundary_data_u(complex(-10.0 + a * step, b * step), x, zm)
        assert abs(got - want) < 1e-3


def test_boundary_data_in_domain_affine_map():
    # an affine map with positive slope leaves arg(phi') = 0, so the
    # pullback only relabels coordinates
    x = (-2.0, -1.0, 1.0, 2.0)
    phi = lambda w: 2.0 * w - 1.0
    dphi = lambda w: 2.0
    for w in (0.5 + 0.5j, -0.3 + 1.2j):
        assert abs(boundary_data_in_domain(w, phi, dphi, x, (0.0,))
                   - boundary_data_u(phi(w), x, (0.0,))) < 1e-14
    # a rotation contributes the winding term -chi * theta
    theta = 0.3
    rot = lambda w: w * complex(math.cos(theta), math.sin(theta))
    drot = lambda w: complex(math.cos(theta), math.sin(theta))
    w = 0.4 + 0.9j
    assert abs(boundary_data_in_domain(w, rot, drot, x, (0.0,))
               - (boundary_data_u(rot(w), x, (0.0,)) - CHI * theta)) < 1e-14


def test_boundary_data_input_validation():
    with pytest.raises(BoundaryPoint):
        boundary_data_u(1.0, (-1.0, 0.0, 1.0, 2.0), (0.5,))
    with pytest.raises(BoundaryPoint):
        boundary_data_u(1.0 - 1j, (0.0,), kind="counterflow")
    with pytest.raises(DegenerateQuad):
        boundary_data_u(1j, (-1.0, 0.0, 1.0, 2.0), (3.0,))
    with pytest.raises(DegenerateQuad):
        boundary_data_u(1j, (-1.0, 0.0, 1.0, 2.0), ())


# ---------------------------------------------------------------------------
# Green functions


def test_green_disk_from_center():
    for r in (0.2, 0.5, 0.9):
        assert abs(green_dirichlet(("disk",), 0.0, r) + math.log(r)) < 1e-14


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 10**6))
def test_green_symmetric_in_arguments(i, j):
    rng = np.random.default_rng(97 * i + j)
    a = rng.uniform(0.1, 0.9) * np.exp(2j * np.pi * rng.uniform())
    b = rng.uniform(0.1, 0.9) * np.exp(2j * np.pi * rng.uniform())
    if abs(a - b) > 1e-6:
        assert abs(green_dirichlet(("disk",), a, b)
                   - green_dirichlet(("disk",), b, a)) < 1e-12
    W, H = 3.0, 2.0
    p = complex(rng.uniform(0.2, W - 0.2), rng.uniform(0.2, H - 0.2))
    q = complex(rng.uniform(0.2, W - 0.2), rng.uniform(0.2, H - 0.2))
    if abs(p - q) > 1e-6:
        assert abs(green_dirichlet(("rectangle", W, H), p, q)
                   - green_dirichlet(("rectangle", W, H), q, p)) < 1e-10


def test_green_coincident_points_rejected():
    with pytest.raises(CoincidentPoints):
        green_dirichlet(("disk",), 0.3 + 0.2j, 0.3 + 0.2j)
    with pytest.raises(CoincidentPoints):
        green_dirichlet(("rectangle", 1.0, 1.0), 0.5 + 0.5j, 0.5 + 0.5j)


def test_green_rectangle_matches_discrete_laplacian():
    # 2 pi times the inverse five-point Laplacian on a 256^2 grid
    n = 256
    W = H = 1.0
    h = W / n
    m = n - 1  # interior nodes per side
    main = 4.0 * np.ones(m * m)
    lap = scipy.sparse.diags(
        [main, -np.ones(m * m - 1), -np.ones(m * m - 1),
         -np.ones(m * (m - 1)), -np.ones(m * (m - 1))],
        [0, 1, -1, m, -m], format="lil")
    for row in range(1, m):  # sever wrap-around couplings
        lap[row * m, row * m - 1] = 0.0
        lap[row * m - 1, row * m] = 0.0
    lap = (lap / (h * h)).tocsc()
    src = (0.4, 0.5)
    si = round(src[0] / h) - 1
    sj = round(src[1] / h) - 1
    rhs = np.zeros(m * m)
    rhs[sj * m + si] = 2.0 * math.pi / (h * h)
    sol = scipy.sparse.linalg.spsolve(lap, rhs)
    y = complex(round(src[0] / h) * h, round(src[1] / h) * h)
    for probe in ((0.2, 0.3), (0.7, 0.6), (0.5, 0.2), (0.8, 0.8)):
        pi_ = round(probe[0] / h) - 1
        pj = round(probe[1] / h) - 1
        disc = sol[pj * m + pi_]
        x = complex((pi_ + 1) * h, (pj + 1) * h)
        cont = green_dirichlet(("rectangle", W, H), x, y)
        assert abs(disc - cont) <= 0.01 * abs(cont)


# ---------------------------------------------------------------------------
# determinant martingale


def test_hij_start_value_finite_and_positive():
    # branch points z_i sit on the wired arcs (y_2i, y_2i+1)
    cases = [
        (FIXTURE_N3, [-1.0, 1.0]),
        (FIXTURE_N3, [-1.8, 0.6]),
        (np.array([0.0, 1.0, 2.0, 3.0, 5.0, 7.0]), [1.5, 4.0]),
        (np.array([-7.0, -6.0, -3.0, -2.0, 0.5, 1.5, 4.0, 5.0]),
         [-4.0, -0.5, 4.5]),
    ]
    for y, tips in cases:
        n = len(y) // 2
        h, M = hij_matrix(y, tips, [-1] * (n - 1), [1.0] * (n - 1))
        assert h.shape == (n - 1, n)
        assert np.isfinite(M) and M > 0.0


def test_hij_n2_reduces_to_elliptic_ratio():
    # with four marked points there are no slits and the closing integrals
    # collapse to complete elliptic integrals: both free-arc integrals
    # equal pi F(m) / sqrt((y3-y1)(y4-y2)), the single-ratio normalization
    # of the two-arc martingale
    for y in (np.array([0.0, 1.0, 2.0, 3.0]),
              np.array([-5.0, -1.0, 0.3, 7.0])):
        U = 0.5 * (y[1] + y[2])
        h, M = hij_matrix(y, [U], [-1], [1.0])
        assert M == 1.0
        assert abs(abs(h[0, 0] / h[0, 1]) - 1.0) < 1e-12
        den = math.prod(math.sqrt(abs(U - t)) for t in y)
        closing = 1.0 / (abs(h[0, 0]) * den)
        m = (y[1] - y[0]) * (y[3] - y[2]) / ((y[2] - y[0]) * (y[3] - y[1]))
        q = math.sqrt((y[2] - y[0]) * (y[3] - y[1]))
        assert abs(closing - math.pi * elliptic_2f1(m) / q) < 1e-10


def test_hij_gprime_factors_scale_the_martingale():
    y = FIXTURE_N3
    _, base = hij_matrix(y, [-2.5, 0.0], [-1, -1], [1.0, 1.0])
    _, scaled = hij_matrix(y, [-2.5, 0.0], [-1, -1], [1.0, 1.7])
    assert abs(scaled - 1.7 * base) < 1e-12 * base
