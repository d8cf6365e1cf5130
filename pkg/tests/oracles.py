"""Independent oracles used by the test suite.

Every routine here deliberately avoids the implementation paths inside
``conekit`` (no calls into :mod:`conekit.specfun` etc.), relying only on
the standard library, numpy primitives, and scipy quadrature, so that
agreement between package and oracle is a genuine two-route check.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad


def abs_gamma_sq_weierstrass(x: float, y: float, n_terms: int = 200_000) -> float:
    """|Gamma(x+iy)|^2 via the Weierstrass-product identity.

    Uses |Gamma(x+iy)|^2 = Gamma(x)^2 * prod_{n>=0} (x+n)^2/((x+n)^2+y^2),
    summed in log form with an Euler-Maclaurin tail correction, so the
    truncation error is far below 1e-12 relative for |y| <= ~200.
    """
    if x <= 0:
        raise ValueError("oracle restricted to x > 0")
    n = np.arange(n_terms, dtype=float)
    u = x + n
    head = math.fsum(np.log1p((y * y) / (u * u)).tolist())
    big = x + n_terms
    # integral_{big}^inf log(1+y^2/u^2) du = pi*|y| - F(big),
    # F(u) = u log(1+y^2/u^2) + 2|y| arctan(u/|y|)
    ya = abs(y)
    f_big = big * math.log1p((ya * ya) / (big * big)) + 2.0 * ya * math.atan(big / ya)
    tail_int = math.pi * ya - f_big
    g_big = math.log1p((ya * ya) / (big * big))
    gp_big = -2.0 * ya * ya / (big * (big * big + ya * ya))
    tail = tail_int + 0.5 * g_big - gp_big / 12.0
    log_total = 2.0 * math.lgamma(x) - head - tail
    return math.exp(log_total)


def kummer_m_by_quadrature(a: float, b: float, z: float) -> float:
    """M(a, b, z) for real parameters with 0 < a < b via the Euler integral.

    M(a,b,z) = Gamma(b)/(Gamma(a)Gamma(b-a)) * int_0^1 e^{zt} t^{a-1} (1-t)^{b-a-1} dt.
    Endpoint power singularities are removed by quartic substitutions so
    plain adaptive quadrature reaches ~1e-13 absolute.
    """
    if not (0 < a < b):
        raise ValueError("oracle needs 0 < a < b")
    p = a - 1.0
    q = b - a - 1.0

    # t in [0, 1/2] with t = s^4: dt = 4 s^3 ds
    def left(s):
        t = s ** 4
        return math.exp(z * t) * (s ** (4.0 * p + 3.0)) * (1.0 - t) ** q * 4.0

    # t in [1/2, 1] with 1-t = u^4
    def right(u):
        t = 1.0 - u ** 4
        return math.exp(z * t) * t ** p * (u ** (4.0 * q + 3.0)) * 4.0

    s_max = 0.5 ** 0.25
    i1, _ = quad(left, 0.0, s_max, epsabs=1e-14, epsrel=1e-13, limit=200)
    i2, _ = quad(right, 0.0, s_max, epsabs=1e-14, epsrel=1e-13, limit=200)
    pref = math.gamma(b) / (math.gamma(a) * math.gamma(b - a))
    return pref * (i1 + i2)


def hyp2f1_partial_sum(a: float, b: float, c: float, x: float, n_terms: int = 10_000) -> float:
    """Brute-force partial sum of the 2F1 series with exact accumulation."""
    terms = []
    t = 1.0
    for n in range(n_terms):
        terms.append(t)
        t = t * (a + n) * (b + n) * x / ((c + n) * (n + 1.0))
    return math.fsum(terms)


def cosine_expansion_transform(f, lam: float, length: float) -> float:
    """Forward spectral transform for the flat half-line problem (p=r=1,
    Neumann at 0) computed by direct cosine quadrature:
    int_0^L f(x) cos(sqrt(lam) x) dx.
    """
    s = math.sqrt(max(lam, 0.0))
    val, _ = quad(lambda x: f(x) * math.cos(s * x), 0.0, length,
                  epsabs=1e-12, epsrel=1e-12, limit=400)
    return val


def flat_half_line_heat_kernel(t: float, x1: float, x2: float) -> float:
    """Neumann heat kernel on [0, inf) with A == 1 by the image method:
    (4 pi t)^{-1/2} (e^{-(x1-x2)^2/4t} + e^{-(x1+x2)^2/4t}).
    """
    c = 1.0 / math.sqrt(4.0 * math.pi * t)
    return c * (math.exp(-((x1 - x2) ** 2) / (4.0 * t))
                + math.exp(-((x1 + x2) ** 2) / (4.0 * t)))


def wrapped_gaussian(t: float, dtheta: float, n_images: int = 60) -> float:
    """Heat kernel on the unit-circumference torus at time t:
    sum_m (4 pi t)^{-1/2} e^{-(dtheta+m)^2/4t}  (image sum), or the
    equivalent Fourier form sum_j e^{-(2 pi j)^2 t} e^{i 2 pi j dtheta}.
    """
    c = 1.0 / math.sqrt(4.0 * math.pi * t)
    m = np.arange(-n_images, n_images + 1, dtype=float)
    return float(c * np.exp(-((dtheta + m) ** 2) / (4.0 * t)).sum())


def sqrt_profile_c_by_quadrature(x: float) -> float:
    """Cumulative integral int_0^x dy / sqrt(y) by adaptive quadrature
    (closed form 2 sqrt(x), but computed blind for cross-checking)."""
    val, _ = quad(lambda y: y ** -0.5, 0.0, x, epsabs=1e-13, epsrel=1e-12,
                  limit=200)
    return val


def cosh_profile_spectrum(L: float, n: int):
    """Neumann eigenvalues and weights on [0, L] for p = r = cosh(2 pi x)^2.

    The substitution w = cosh(2 pi x) u turns -(B u')' = lam B u into
    w'' + (lam - 4 pi^2) w = 0 exactly (the induced potential
    psi'/2 + psi^2/4 with psi = 4 pi tanh(2 pi x) is the constant
    4 pi^2), so with tau = sqrt(lam - 4 pi^2) the eigenvalues solve
    tan(tau L) = -2 pi tanh(2 pi L) / tau and the squared norms are
    int cos(tau x)^2 dx = L/2 + sin(2 tau L)/(4 tau).

    Below the barrier the only eigenvalue is lam = 0 (u constant,
    w = cosh(2 pi x)), with weight 1 / int_0^L cosh(2 pi x)^2 dx;
    sigma tanh(sigma L) is strictly increasing so sigma = 2 pi is the
    unique sub-barrier root.  Returns (eigenvalues, weights) for the
    ground state plus the n lowest positive-tau roots.
    """
    from scipy.optimize import brentq

    g = 2.0 * math.pi * math.tanh(2.0 * math.pi * L)
    norm0 = L / 2.0 + math.sinh(4.0 * math.pi * L) / (8.0 * math.pi)
    lams, wts = [0.0], [1.0 / norm0]
    for j in range(1, n + 1):
        lo = (j - 0.5) * math.pi / L + 1e-12
        hi = (j + 0.5) * math.pi / L - 1e-12
        tau = brentq(lambda t: math.tan(t * L) + g / t, lo, hi, xtol=1e-13)
        norm = L / 2.0 + math.sin(2.0 * tau * L) / (4.0 * tau)
        lams.append(4.0 * math.pi ** 2 + tau * tau)
        wts.append(1.0 / norm)
    return np.asarray(lams), np.asarray(wts)


def rayleigh_quotient(profile_a, u, du, L: float) -> float:
    """Rayleigh quotient int p (u')^2 / int r u^2 with p = r = A for a
    trial function u on [0, L]; upper-bounds the lowest nonzero Neumann
    eigenvalue when u is orthogonal to constants in L^2(A dx)."""
    num, _ = quad(lambda x: profile_a(x) * du(x) ** 2, 0.0, L, limit=300)
    den, _ = quad(lambda x: profile_a(x) * u(x) ** 2, 0.0, L, limit=300)
    return num / den


def bessel_j_normalized_by_jv(nu: float, z: float) -> float:
    """Even-normalized Bessel function Gamma(nu+1) (2/z)^nu J_nu(z),
    equal to 1 at z = 0, evaluated through scipy's J_nu."""
    from scipy.special import jv

    if z == 0.0:
        return 1.0
    return math.gamma(nu + 1.0) * (2.0 / z) ** nu * float(jv(nu, z))


def bessel_product_density(beta: float, x1: float, x2: float, x3) -> np.ndarray:
    """Closed-form density of the power-metric product measure:
    const * [(x3^2-(x1-x2)^2)((x1+x2)^2-x3^2)]^(beta/2-1) (x1 x2)^(1-beta) x3
    with const = 2^(2-beta) Gamma((beta+1)/2) / (sqrt(pi) Gamma(beta/2)).
    """
    x3 = np.asarray(x3, dtype=float)
    const = (2.0 ** (2.0 - beta) * math.gamma((beta + 1.0) / 2.0)
             / (math.sqrt(math.pi) * math.gamma(beta / 2.0)))
    delta, sigma = abs(x1 - x2), x1 + x2
    core = (x3 * x3 - delta * delta) * (sigma * sigma - x3 * x3)
    return (const * (x1 * x2) ** (1.0 - beta)
            * core ** (beta / 2.0 - 1.0) * x3)


def jacobi_hypergroup_eigenfunction(alpha: float, beta: float, tau: float,
                                    x: float) -> float:
    """Jacobi function phi_tau^(a,b)(x) through scipy's 2F1:
    2F1((s+i tau)/2... real form 2F1((s + i tau)/2, (s - i tau)/2; a+1;
    -sinh(x)^2) with s = a + b + 1; real for real tau since the two
    upper parameters are conjugate.  Evaluated by the Euler integral to
    sidestep complex parameters: uses the quadrature form
    phi = c int_0^1 u^{a-1/2}(1-u)^{-1/2} ... -- in practice scipy's
    hyp2f1 accepts only real parameters, so this routine sums the
    defining Gauss series with conjugate-pair terms combined (real
    arithmetic, converges for sinh(x)^2 < 1 after a Pfaff map).
    """
    s = alpha + beta + 1.0
    z = -math.sinh(x) ** 2
    # Pfaff: 2F1(p, q; c; z) = (1-z)^{-p} 2F1(p, c-q; c; z/(z-1))
    w = z / (z - 1.0)  # in [0, 1) for all real x
    p = complex(s, tau) / 2.0
    q = complex(s, -tau) / 2.0
    c = alpha + 1.0
    # series in w for 2F1(p, c-q; c; w); terms are conjugate-symmetric
    # in tau so the sum is real
    term = complex(1.0)
    total = complex(1.0)
    for n in range(2000):
        term *= (p + n) * (c - q + n) / ((c + n) * (n + 1.0)) * w
        total += term
        if abs(term) < 1e-17 * max(1.0, abs(total)):
            break
    val = (1.0 - z) ** (-p) * total
    return float(val.real)


def square_profile_eigenfunction(x, tau: float) -> np.ndarray:
    """k = 0 eigenfunction of the (1+x)^2 metric at lam = tau^2:
    (cos(tau x) + sin(tau x)/tau) / (1+x)."""
    x = np.asarray(x, dtype=float)
    return (np.cos(tau * x) + np.sin(tau * x) / tau) / (1.0 + x)


def sqrt_profile_heat_density(t: float, x) -> np.ndarray:
    """Density (including the r = sqrt(x) weight) of the origin-started
    diffusion for the square-root metric:
    2 sqrt(x) exp(-x^2/4t) / ((4t)^(3/4) Gamma(3/4)).

    Scaling route: the mode-0 operator is the Bessel operator of index
    -1/4 in disguise; its transform of exp(-t lam) is the Gamma-integral
    int_0^inf J(x sqrt(lam)) e^{-t lam} lam^{-1/4} dlam / (2^{3/2} pi^2 ...)
    which closes to the stated Gaussian-with-weight form; normalization
    fixed by total mass 1.
    """
    x = np.asarray(x, dtype=float)
    return (2.0 * np.sqrt(np.maximum(x, 0.0)) * np.exp(-x * x / (4.0 * t))
            / ((4.0 * t) ** 0.75 * math.gamma(0.75)))


def stable_half_subordinated_density(t: float, x) -> np.ndarray:
    """Density (with the sqrt(x) weight) of the q = 1/2 stable
    subordination of that diffusion:
    2 Gamma(5/4) t sqrt(x) / (sqrt(pi) Gamma(3/4) (t^2+x^2)^(5/4)).

    Obtained by integrating the Gaussian family against the inverse-
    Gaussian subordinator density t e^{-t^2/4s} / (2 sqrt(pi) s^{3/2});
    the s-integral is a Gamma integral in u = 1/s.
    """
    x = np.asarray(x, dtype=float)
    c = 2.0 * math.gamma(1.25) * t / (math.sqrt(math.pi) * math.gamma(0.75))
    return c * np.sqrt(np.maximum(x, 0.0)) / (t * t + x * x) ** 1.25


def stable_half_window_mass(t: float, x_max: float) -> float:
    """Mass of that subordinated law on [0, x_max]: the regularized
    incomplete beta I(3/4, 1/2; x^2/(t^2+x^2))."""
    from scipy.special import betainc

    z = x_max * x_max / (t * t + x_max * x_max)
    return float(betainc(0.75, 0.5, z))
