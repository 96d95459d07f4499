"""Continuum reference computations on the upper half-plane.

Special functions (complete elliptic integrals via the arithmetic-geometric
mean), Schwarz-Christoffel maps onto rectangles and rectangles with vertical
slits, the piecewise-constant imaginary-geometry boundary data and its
harmonic extension, Dirichlet Green functions on the disk and rectangle, and
the hitting-probability determinant martingale used to reweight reference
Loewner evolutions.

Conventions.  Marked reals y_1 < ... < y_2n on the line split the boundary
into wired arcs (y_2i, y_2i+1) (cyclically, the n-th runs through infinity)
and free arcs (y_2i-1, y_2i).  The slit map phi_j sends the half-plane onto
{0 < Im < 1} with the j-th wired arc on Im = 0, the other wired arcs on
Im = 1, the two free arcs adjacent to arc j onto the vertical sides, and the
remaining n-2 free arcs onto vertical slits hanging from the top; mu_l is
the pre-image of the l-th slit tip and is pinned down by requiring the two
sides of each slit to close up (a vanishing arc integral per slit).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BoundaryPoint,
    CoincidentPoints,
    DegenerateQuad,
    DomainError,
    NewtonDiverged,
    SlitSolveFailed,
)

KAPPA = 2.0
KAPPA_PRIME = 8.0
LAMBDA = math.pi / math.sqrt(2.0)
LAMBDA_PRIME = math.pi / math.sqrt(8.0)
CHI = 1.0 / math.sqrt(2.0)

_M_CAP = 0.999999


# ---------------------------------------------------------------------------
# hypergeometric / elliptic special functions


def elliptic_2f1(m):
    """2F1(1/2, 1/2, 1; m) through the arithmetic-geometric mean.

    Equals (2/pi) K(m) with K the complete elliptic integral of the first
    kind in the parameter (m = k^2) convention.
    """
    if not (0.0 <= m <= _M_CAP):
        raise DomainError(f"2F1(1/2,1/2,1;m) evaluated outside [0, {_M_CAP}]: {m}")
    a, b = 1.0, math.sqrt(1.0 - m)
    for _ in range(60):
        if abs(a - b) <= 4e-16 * a:
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return 1.0 / a


def elliptic_2f1_prime(m):
    """d/dm of 2F1(1/2, 1/2, 1; m), via K and E in the same convention."""
    if not (0.0 <= m <= _M_CAP):
        raise DomainError(f"2F1' evaluated outside [0, {_M_CAP}]: {m}")
    if m == 0.0:
        return 0.25  # series: F = 1 + m/4 + ...
    a, b, c = 1.0, math.sqrt(1.0 - m), math.sqrt(m)
    csum = 0.5 * c * c
    k = 0
    while abs(c) > 4e-16 * a and k < 60:
        a, b, c = 0.5 * (a + b), math.sqrt(a * b), 0.5 * (a - b)
        k += 1
        csum += 2.0 ** (k - 1) * c * c
    K = math.pi / (2.0 * a)
    E = K * (1.0 - csum)
    # dK/dm = (E - (1-m) K) / (2 m (1-m))
    return (2.0 / math.pi) * (E - (1.0 - m) * K) / (2.0 * m * (1.0 - m))


# ---------------------------------------------------------------------------
# Schwarz-Christoffel machinery

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(48)
_CHEB_N = 256
_CHEB_T = np.cos((np.arange(_CHEB_N) + 0.5) * math.pi / _CHEB_N)


def _sc_density(u, y, mu):
    """P(u) / prod (u - y_k)^{1/2}, analytic on the open upper half-plane."""
    u = np.asarray(u, dtype=np.complex128)
    num = np.ones_like(u)
    for m in mu:
        num = num * (u - m)
    den = np.exp(0.5 * np.sum(np.log(u[..., None] - y), axis=-1))
    return num / den


def _arc_integral(y, mu, p):
    """Integral of the SC density over the boundary arc (y[p], y[p+1]).

    Gauss-Chebyshev absorbs the inverse-square-root endpoint singularities;
    the constant phase on the arc is i per marked point above it.
    """
    a, b = y[p], y[p + 1]
    u = 0.5 * (a + b) + 0.5 * (b - a) * _CHEB_T
    num = np.ones_like(u)
    for m in mu:
        num = num * (u - m)
    rest = np.ones_like(u)
    for k in range(len(y)):
        if k == p or k == p + 1:
            continue
        rest = rest * np.abs(u - y[k])
    # Chebyshev rule: int_a^b f(u) du / sqrt((u-a)(b-u)) = (pi/N) sum f(u_k);
    # each marked point above the arc contributes a factor 1/i to the density
    val = math.pi / _CHEB_N * np.sum(num / np.sqrt(rest))
    return val * (-1j) ** (len(y) - 1 - p)


def _ray_integral(y, mu, a, z, panels=12):
    """Integral of the SC density from the marked point a to z along a ray.

    The substitution u = a + s^2 (z - a) removes the endpoint singularity;
    the ray stays inside the half-plane for Im z > 0.
    """
    total = 0.0 + 0.0j
    edges = np.linspace(0.0, 1.0, panels + 1)
    for lo, hi in zip(edges[:-1], edges[1:]):
        s = 0.5 * (lo + hi) + 0.5 * (hi - lo) * _GL_NODES
        u = a + s**2 * (z - a)
        vals = _sc_density(u, y, mu) * 2.0 * s * (z - a)
        total += 0.5 * (hi - lo) * np.sum(_GL_WEIGHTS * vals)
    return total


def _path_integral(y, mu, a, z):
    """Integral of the SC density from the marked point a to z in H.

    Routes through an apex high above a so the path never hugs the real
    axis, where the other marked-point singularities live.
    """
    z = complex(z)
    span = max(np.max(y) - np.min(y), 1.0)
    apex = a + 1j * span
    if abs(z - a) < 1e-12:
        return 0.0 + 0.0j
    return _ray_integral(y, mu, a, apex) + _segment_integral(y, mu, apex, z)


def _segment_integral(y, mu, a, b, panels=12):
    """Integral of the SC density along the straight segment a -> b in H."""
    total = 0.0 + 0.0j
    edges = np.linspace(0.0, 1.0, panels + 1)
    for lo, hi in zip(edges[:-1], edges[1:]):
        s = 0.5 * (lo + hi) + 0.5 * (hi - lo) * _GL_NODES
        u = a + s * (b - a)
        vals = _sc_density(u, y, mu) * (b - a)
        total += 0.5 * (hi - lo) * np.sum(_GL_WEIGHTS * vals)
    return total


def _check_sorted(y, want=None):
    y = np.asarray(y, dtype=np.float64)
    if want is not None and len(y) != want:
        raise DegenerateQuad(f"expected {want} marked points, got {len(y)}")
    if len(y) < 4 or len(y) % 2:
        raise DegenerateQuad(f"need an even number >= 4 of marked points")
    if not np.all(np.diff(y) > 0):
        raise DegenerateQuad("marked points must be strictly increasing")
    return y


def rect_map(y):
    """Conformal map of the half-plane quadrilateral onto (0,1) x (0,K).

    The four marked reals go to the corners 0, 1, 1+iK, iK; the modulus K is
    the 2F1 ratio of the complementary cross-ratios.
    """
    y = _check_sorted(y, want=4)
    m = (y[1] - y[0]) * (y[3] - y[2]) / ((y[2] - y[0]) * (y[3] - y[1]))
    K = elliptic_2f1(1.0 - m) / elliptic_2f1(m)
    mu = np.empty(0)
    norm = _arc_integral(y, mu, 0)

    def phi(z):
        return _path_integral(y, mu, y[0], z) / norm

    return K, phi


@dataclass
class SlitRectMap:
    """Half-plane to slit-rectangle map for 2n marked boundary points.

    phi sends the j-th wired arc to the bottom edge (Im = 0), the other
    wired arcs to the top (Im = 1) with n-2 vertical slits, and the two
    adjacent free arcs to the vertical sides.  K is the modulus: the height
    of the image rectangle rescaled to unit bottom width.
    """

    y: np.ndarray
    j: int
    mu: np.ndarray
    norm: complex
    K: float
    residuals: np.ndarray = field(default=None, repr=False)

    def phi(self, z):
        a = self.y[2 * self.j - 1]  # y_{2j}: bottom-left pre-image
        return 1j * _path_integral(self.y, self.mu, a, z) / self.norm

    def dphi(self, z):
        return 1j * complex(_sc_density(complex(z), self.y, self.mu)) / self.norm

    def im_phi(self, z):
        return float(np.imag(self.phi(z)))


def _constraint_arcs(n, j):
    """Free-arc indices carrying a slit parameter for target arc j."""
    skip = {j, j + 1 if j < n else 1}
    return [i for i in range(1, n + 1) if i not in skip]


def slit_rect_map(y, j, mu0=None):
    """Solve the slit-rectangle map for target wired arc j (1-based).

    The n-2 slit parameters are found by damped Newton on the vanishing
    integrals over the slit free arcs, initialized at the arc midpoints.
    """
    y = _check_sorted(y)
    n = len(y) // 2
    if not 1 <= j <= n:
        raise DegenerateQuad(f"target arc {j} outside 1..{n}")
    arcs = _constraint_arcs(n, j)
    lo = np.array([y[2 * i - 2] for i in arcs])
    hi = np.array([y[2 * i - 1] for i in arcs])

    def residual(mu):
        r = np.empty(len(arcs))
        jac = np.empty((len(arcs), len(arcs)))
        for a in range(len(arcs)):
            p = 2 * arcs[a] - 2
            aa, bb = y[p], y[p + 1]
            u = 0.5 * (aa + bb) + 0.5 * (bb - aa) * _CHEB_T
            rest = np.ones_like(u)
            for k in range(len(y)):
                if k in (p, p + 1):
                    continue
                rest = rest * np.abs(u - y[k])
            w = 1.0 / np.sqrt(rest)
            num = np.ones_like(u)
            for m in mu:
                num = num * (u - m)
            r[a] = math.pi / _CHEB_N * np.sum(num * w)
            for b in range(len(arcs)):
                part = np.ones_like(u)
                for c, m in enumerate(mu):
                    if c != b:
                        part = part * (u - m)
                jac[a, b] = -math.pi / _CHEB_N * np.sum(part * w)
        return r, jac

    def solve(mu):
        scale = np.max(hi) - np.min(lo) if len(arcs) else 1.0
        r, jac = residual(mu) if len(arcs) else (np.empty(0), np.empty((0, 0)))
        for _ in range(80):
            if not len(arcs) or np.max(np.abs(r)) < 1e-12 * scale:
                return mu, r
            step = np.linalg.solve(jac, r)
            lam = 1.0
            while lam > 1e-8:
                trial = mu - lam * step
                trial = np.clip(trial, lo + 1e-12 * (hi - lo),
                                hi - 1e-12 * (hi - lo))
                r2, jac2 = residual(trial)
                if np.linalg.norm(r2) < np.linalg.norm(r):
                    mu, r, jac = trial, r2, jac2
                    break
                lam *= 0.5
            else:
                break
        return mu, r

    mu = np.asarray(mu0, dtype=np.float64) if mu0 is not None else 0.5 * (lo + hi)
    mu, r = solve(mu)
    scale = (np.max(y) - np.min(y)) if len(arcs) else 1.0
    if len(arcs) and np.max(np.abs(r)) >= 1e-10 * scale:
        if mu0 is not None:  # retry from midpoints before giving up
            mu, r = solve(0.5 * (lo + hi))
        if np.max(np.abs(r)) >= 1e-10 * scale:
            raise NewtonDiverged("slit parameter solve did not converge",
                                 residuals=r)

    norm = _arc_integral(y, mu, 2 * j if 2 * j < len(y) else 0)
    # width of the bottom edge in the Im-height-1 normalization
    if 2 * j < len(y):
        bottom = _arc_integral(y, mu, 2 * j - 1)
    else:
        # target arc runs through infinity; the density decays like u^-2,
        # so its integral is minus the sum over all finite segments
        bottom = -sum(_arc_integral(y, mu, p) for p in range(len(y) - 1))
    width = abs(bottom / norm)
    return SlitRectMap(y=y, j=j, mu=mu, norm=norm, K=1.0 / width,
                       residuals=r)


# ---------------------------------------------------------------------------
# imaginary-geometry boundary data


def _piecewise_harmonic(z, points, values):
    """Harmonic extension of piecewise-constant boundary data on the line.

    values[k] holds on (points[k-1], points[k]) with values[0] on
    (-inf, points[0]) and values[-1] on (points[-1], inf).
    """
    theta = [math.atan2(z.imag, z.real - t) for t in points]
    u = values[0] * theta[0]
    for k in range(1, len(points)):
        u += values[k] * (theta[k] - theta[k - 1])
    u += values[-1] * (math.pi - theta[-1])
    return u / math.pi


def boundary_data_u(z, x, z_marks=(), kind="flow"):
    """The imaginary-geometry harmonic function at z in the half-plane.

    kind="flow": x are 2n marked reals and z_marks the n-1 branch starting
    points with x_2i <= z_i <= x_2i+1; the data is 0 on the free arcs,
    -lambda right of each x_2i up to z_i and right of x_2n, +lambda left of
    x_1 and from z_i to x_2i+1.  kind="counterflow": x = (a,) and the data
    is +lambda' left of a, -lambda' right.
    """
    z = complex(z)
    if z.imag <= 0.0:
        raise BoundaryPoint(f"evaluation point {z} not in the open half-plane")
    if kind == "counterflow":
        (a,) = x
        return _piecewise_harmonic(z, [float(a)], [LAMBDA_PRIME, -LAMBDA_PRIME])
    x = _check_sorted(x)
    n = len(x) // 2
    if len(z_marks) != n - 1:
        raise DegenerateQuad(f"need {n - 1} branch points, got {len(z_marks)}")
    points = [x[0]]
    values = [LAMBDA]
    for i in range(1, n):
        zi = float(z_marks[i - 1])
        if not x[2 * i - 1] <= zi <= x[2 * i]:
            raise DegenerateQuad(f"branch point {zi} outside its free arc")
        points += [x[2 * i - 1], zi, x[2 * i]]
        values += [0.0, -LAMBDA, LAMBDA]
    points += [x[2 * n - 1]]
    values += [0.0, -LAMBDA]
    return _piecewise_harmonic(z, points, values)


def boundary_data_in_domain(w, phi, dphi, x, z_marks=(), kind="flow"):
    """Pull the half-plane data back through a conformal map phi: domain -> H.

    Applies the coordinate change u o phi - chi arg phi'.
    """
    return (boundary_data_u(phi(w), x, z_marks, kind)
            - CHI * math.atan2(complex(dphi(w)).imag, complex(dphi(w)).real))


# ---------------------------------------------------------------------------
# Green functions


def green_dirichlet(domain, x, y):
    """Dirichlet Green function, normalized G = -log|x-y| + O(1).

    domain is ("disk",) for the unit disk (complex arguments) or
    ("rectangle", W, H) for (0,W) x (0,H) via the mixed eigen-series summed
    along the axis with the larger separation.
    """
    if domain[0] == "disk":
        x, y = complex(x), complex(y)
        if abs(x - y) < 1e-12:
            raise CoincidentPoints("Green function at coincident points")
        return math.log(abs(1.0 - np.conj(x) * y)) - math.log(abs(x - y))
    if domain[0] != "rectangle":
        raise DomainError(f"unsupported Green domain {domain[0]}")
    _, W, H = domain
    x, y = complex(x), complex(y)
    if abs(x - y) < 1e-12:
        raise CoincidentPoints("Green function at coincident points")
    # sum sine modes across the axis with the larger gap along the other axis
    if abs(x.imag - y.imag) / H >= abs(x.real - y.real) / W:
        a1, a2, b1, b2, L, M = x.real, y.real, x.imag, y.imag, W, H
    else:
        a1, a2, b1, b2, L, M = x.imag, y.imag, x.real, y.real, H, W
    lo, hi = min(b1, b2), max(b1, b2)
    gap = hi - lo
    total = 0.0
    for mode in range(1, 200001):
        k = mode * math.pi / L
        bound = (4.0 * math.pi / (L * k)) * math.exp(-k * gap)
        if bound < 1e-15 and mode > 10:
            break
        # 2 sinh(k lo) sinh(k (M-hi)) / sinh(k M) in overflow-safe form
        frac = (math.exp(-k * gap) - math.exp(-k * (lo + hi))) \
            * (1.0 - math.exp(-2.0 * k * (M - hi))) \
            / (1.0 - math.exp(-2.0 * k * M))
        total += (4.0 * math.pi / (L * k)) \
            * math.sin(k * a1) * math.sin(k * a2) * 0.5 * frac
    return total


# ---------------------------------------------------------------------------
# hitting-probability determinant martingale


def hij_matrix(y, tips, exclude, gprime):
    """Hitting-ratio matrix h_ij and the determinant martingale M.

    y: current images of the 2n marked points; tips[i-1] = U_i, the image of
    the i-th branch point (U_1 is the driving value W_t); exclude[i-1] is
    the index into y coinciding with U_i (or -1); gprime[i-1] = g_t'(U_i)
    for i >= 2 (gprime[0] unused).  h_ij follows the slit-map derivative at
    U_i normalized by the j-th closing integral; M = det(h)/h_11 times the
    product of the g' factors.
    """
    y = np.asarray(y, dtype=np.float64)
    n = len(y) // 2
    tips = np.asarray(tips, dtype=np.float64)
    maps = []
    for j in range(1, n + 1):
        try:
            maps.append(slit_rect_map(y, j))
        except NewtonDiverged as e:
            raise SlitSolveFailed(f"slit solve failed for arc {j}: {e}") from e
    # real branch: square roots and closing integrals by absolute value, so
    # that only the real polynomial factors carry signs.  The discarded
    # branch phases are constant along a Loewner evolution (the point
    # ordering is preserved), so ratios M_t/M_0 are unaffected.
    h = np.empty((n - 1, n))
    for i in range(n - 1):
        U = tips[i]
        den = 1.0
        for l in range(2 * n):
            if l != exclude[i]:
                den *= math.sqrt(abs(U - y[l]))
        for j in range(n):
            num = float(np.prod(U - maps[j].mu)) if len(maps[j].mu) else 1.0
            h[i, j] = num / den / abs(maps[j].norm)
    hh = h[:, : n - 1]
    if hh[0, 0] == 0.0:
        raise SlitSolveFailed("h_11 vanished; degenerate marked configuration")
    M = abs(np.linalg.det(hh) / hh[0, 0])
    for i in range(1, n - 1):
        M *= gprime[i]
    return h, float(M)
