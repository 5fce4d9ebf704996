"""Independent reference computations used to derive frozen test values.

Everything here uses mpmath at 30 significant digits and shares no code with
the package. Running this module prints the values frozen in the tests.
"""
import mpmath as mp

mp.mp.dps = 30


def ln_gamma(x):
    # Euler integral, not mpmath's own loggamma
    return mp.log(mp.quad(lambda t: t ** (x - 1) * mp.exp(-t), [0, 1, x, 4 * x, mp.inf]))


def bessel_k(order, x):
    """K_v(x) = int_0^inf exp(-x cosh t) cosh(v t) dt."""
    # beyond x cosh t = 150 + |v| t the integrand is below e^-150
    x = mp.mpf(x)
    top = mp.acosh((150 + 40 * abs(order)) / x) + 1
    pts = [0] + [p for p in (1, 3, 6) if p < top] + [top]
    return mp.quad(lambda t: mp.exp(-x * mp.cosh(t)) * mp.cosh(order * t), pts)


def norm_cdf(x):
    """Phi(x) from the Maclaurin series of erf."""
    z = mp.mpf(x) / mp.sqrt(2)
    total, term, n = mp.mpf(0), z, 0
    while abs(term) > mp.mpf(10) ** -35:
        total += term / (2 * n + 1)
        n += 1
        term = -term * z * z / n
    return (1 + 2 / mp.sqrt(mp.pi) * total) / 2


def psi(a, b, g):
    """E[Phi(a / sqrt(U) + b sqrt(U))], U ~ Gamma(g, 1), integrated in v = log u."""
    a, b, g = mp.mpf(a), mp.mpf(b), mp.mpf(g)

    def f(v):
        u = mp.exp(v)
        return mp.ncdf(a / mp.sqrt(u) + b * mp.sqrt(u)) * mp.exp(g * v - u - mp.loggamma(g))

    # small shapes put mass e^{g v} far into the left tail (panelled evenly)
    # and leave a right tail well past u = e^{centre + 6}
    centre = mp.log(g)
    lo = centre - 60 / g - 10
    pts = sorted({lo + k * (centre - 5 - lo) / 40 for k in range(41)}
                 | {centre - 1, centre, centre + 1, centre + 3, centre + 6,
                    mp.log(g + 80 * mp.sqrt(g) + 300)})
    return mp.quad(f, pts)


def gk_call_by_payoff(spot, strike, t, r_d, r_f, sigma):
    """e^{-r_d T} E[max(S_T - K, 0)] by integrating over the standard normal."""
    spot, strike, t = mp.mpf(spot), mp.mpf(strike), mp.mpf(t)
    drift = (r_d - r_f - sigma ** 2 / 2) * t
    vol = sigma * mp.sqrt(t)
    z0 = (mp.log(strike / spot) - drift) / vol

    def f(z):
        return (spot * mp.exp(drift + vol * z) - strike) * mp.npdf(z)

    return mp.exp(-r_d * t) * mp.quad(f, [z0, z0 + 1, z0 + 4, z0 + 12, z0 + 40])


def vg_call_by_mixing(spot, strike, t, r_d, r_f, sigma, nu, theta):
    """VG call: Black-type conditional price integrated over gamma time."""
    spot, strike, t = mp.mpf(spot), mp.mpf(strike), mp.mpf(t)
    sigma, nu, theta = mp.mpf(sigma), mp.mpf(nu), mp.mpf(theta)
    om = mp.log(1 - theta * nu - sigma ** 2 * nu / 2) / nu
    shape = t / nu

    def f(g):
        fwd = spot * mp.exp((r_d - r_f + om) * t + (theta + sigma ** 2 / 2) * g)
        vol = sigma * mp.sqrt(g)
        d1 = mp.log(fwd / strike) / vol + vol / 2
        black = fwd * mp.ncdf(d1) - strike * mp.ncdf(d1 - vol)
        dens = g ** (shape - 1) * mp.exp(-g / nu) / (mp.gamma(shape) * nu ** shape)
        return black * dens

    mean = t
    # the gamma tail past 40 means plus 300 scale lengths is below e^-300
    top = 40 * mean + 300 * nu
    return mp.exp(-r_d * t) * mp.quad(f, [0, mean / 100, mean / 10, mean, 3 * mean, 10 * mean,
                                          40 * mean, top])


def vg_density_by_mixing(x, t, sigma, nu, theta):
    """Density of theta*g + sigma*W(g) with g ~ Gamma(t/nu, nu)."""
    x, t = mp.mpf(x), mp.mpf(t)
    sigma, nu, theta = mp.mpf(sigma), mp.mpf(nu), mp.mpf(theta)
    shape = t / nu

    def f(v):
        g = mp.exp(v)
        normal = mp.exp(-(x - theta * g) ** 2 / (2 * sigma ** 2 * g)) / mp.sqrt(2 * mp.pi * sigma ** 2 * g)
        return normal * mp.exp(shape * v - g / nu) / (mp.gamma(shape) * nu ** shape)

    # the conditional normal peaks where sigma^2 g is of order x^2
    v0 = mp.log(x * x / sigma ** 2)
    pts = sorted({mp.log(t) - 400, v0 - 20, v0 - 5, v0, v0 + 5, mp.log(nu) + 2, mp.log(nu) + 5})
    return mp.quad(f, pts)


def omega(sigma, nu, theta):
    return mp.log(1 - theta * nu - sigma ** 2 * nu / 2) / nu


if __name__ == "__main__":
    print("ln_gamma(7.3)", mp.nstr(ln_gamma(7.3), 20))
    for v, x in [(0.8, 1.3), (2.5, 0.1), (10.3, 7.0), (0.0, 50.0), (0.3, 1e-3)]:
        print(f"K_{v}({x})", mp.nstr(bessel_k(v, x), 20))
    print("norm_cdf(1)", mp.nstr(norm_cdf(1), 20))
    print("norm_cdf(-3.5)", mp.nstr(norm_cdf(-3.5), 20))
    for args in [(0.3, -0.2, 4.0), (1.5, 0.1, 0.0188), (-0.4, 0.05, 0.75), (0.02, 0.3, 250.0)]:
        print("psi", args, mp.nstr(psi(*args), 20))
    print("omega HV", mp.nstr(omega(0.1044, 0.211, -0.00118), 20))
    print("gk", mp.nstr(gk_call_by_payoff(45.5, 45, 30 / 365, 0.08, 0.005, 0.10), 20))
    print("vg ATM", mp.nstr(vg_call_by_mixing(50, 50, 30 / 365, 0.08, 0.02, 0.116, 0.099, 0.0026), 20))
    print("vg ITM 90d", mp.nstr(vg_call_by_mixing(50, 45, 90 / 365, 0.08, 0.02, 0.116, 0.099, -0.01), 20))
    print("density HV x=0.001", mp.nstr(vg_density_by_mixing(0.001, 1 / 252, 0.1044, 0.211, -0.00118), 20))
    print("density t=nu x=0.05", mp.nstr(vg_density_by_mixing(0.05, 0.2, 0.2, 0.2, 0.1), 20))
