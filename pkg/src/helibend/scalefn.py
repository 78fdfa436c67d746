"""Scale functions lambda(sigma), pinching checks, and the z <-> sigma map.

The local helicoid scale along the axis is a positive profile lambda(sigma)
of the height sigma in [sigma_min, sigma_max], pinched in the sense that its
first three derivatives are dominated by C1 * lambda**epsilon.  The natural
coordinate for the bent helicoid is z with sigma'(z) = lambda(z); this module
owns that change of variables and the domain quantities it induces (the strip
half-width ell(z), the derived exponents, the good-interval constant).

Notation: dot = d/dsigma, prime = d/dz, so phi' = lambda * phi_dot.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import interpolate


# ---------------------------------------------------------------------------
# scale functions


@dataclass(frozen=True, eq=False)
class ScaleFunction:
    """Positive scale profile lambda(sigma) with three sigma-derivatives.

    kind is "constant", "power" (c * sigma**p) or "table" (spline through
    user samples).  epsilon, c0, c1 are the pinching data: lambda < c0,
    |dlam|, |d2lam*lam|, |d3lam*lam^2| all <= c1 * lambda**epsilon.
    """

    kind: str
    epsilon: float
    c0: float
    c1: float
    sigma_min: float
    sigma_max: float
    c: float = 1.0
    p: float = 0.0
    splines: tuple = None  # table kind: (S, S', S'', S''')

    def dn(self, sigma, n=0):
        """n-th sigma-derivative of lambda, n in {0, 1, 2, 3}."""
        sigma = np.asarray(sigma, dtype=float)
        if self.kind == "constant":
            return np.full_like(sigma, self.c if n == 0 else 0.0)
        if self.kind == "power":
            coef = self.c
            for k in range(n):
                coef *= self.p - k
            if coef == 0.0:
                return np.zeros_like(sigma)
            return coef * sigma ** (self.p - n)
        return np.asarray(self.splines[n](sigma), dtype=float)

    def lam(self, sigma):
        return self.dn(sigma, 0)

    def dlam(self, sigma):
        return self.dn(sigma, 1)

    def d2lam(self, sigma):
        return self.dn(sigma, 2)

    def d3lam(self, sigma):
        return self.dn(sigma, 3)


def make_scale(kind, *, c=None, p=None, sigma=None, values=None,
               epsilon=None, c0=1.0, c1=None,
               sigma_min=1e-3, sigma_max=1.0, n_samples=2048):
    """Build a ScaleFunction.

    kind "constant": lambda = c.
    kind "power":    lambda = c * sigma**p on [sigma_min, sigma_max], p >= 0.
    kind "table":    spline through (sigma, values), quintic when the table
                     has at least 6 rows (three usable derivatives).

    epsilon defaults to (p-1)/p for power profiles with p > 1, which the
    profile saturates exactly, else 0.5.  c1 defaults to the sampled worst
    derivative ratio padded by 2 percent, so the auto-built function always
    validates on its own domain.
    """
    if kind in ("constant", "power"):
        if c is None or c <= 0:
            raise ValueError("amplitude c must be positive")
        if kind == "power":
            if p is None or p < 0:
                raise ValueError("power exponent p must be >= 0")
        else:
            p = 0.0
    elif kind == "table":
        sigma = np.asarray(sigma, dtype=float)
        values = np.asarray(values, dtype=float)
        if sigma.ndim != 1 or sigma.shape != values.shape or sigma.size < 2:
            raise ValueError("table needs matching 1d sigma/values arrays")
        if np.any(np.diff(sigma) <= 0):
            raise ValueError("table sigma must be strictly increasing")
        if np.any(values <= 0):
            raise ValueError("table values must be strictly positive")
        sigma_min = float(sigma[0])
        sigma_max = float(sigma[-1])
    else:
        raise ValueError(f"unknown scale kind {kind!r}")
    if not 0 < sigma_min < sigma_max:
        raise ValueError("need 0 < sigma_min < sigma_max")

    splines = None
    if kind == "table":
        k = 5 if sigma.size >= 6 else min(3, sigma.size - 1)
        base = interpolate.make_interp_spline(sigma, values, k=k)
        splines = (base, base.derivative(1), base.derivative(2),
                   base.derivative(3) if k >= 3 else (lambda x: np.zeros_like(np.asarray(x, float))))

    if epsilon is None:
        epsilon = (p - 1.0) / p if (kind == "power" and p > 1) else 0.5
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")

    sf = ScaleFunction(kind=kind, epsilon=float(epsilon), c0=float(c0),
                       c1=1.0, sigma_min=float(sigma_min),
                       sigma_max=float(sigma_max),
                       c=float(c) if c is not None else 1.0,
                       p=float(p) if p is not None else 0.0,
                       splines=splines)
    if c1 is None:
        grid = np.linspace(sigma_min, sigma_max, n_samples)
        worst = _derivative_ratios(sf, grid, c1=1.0)
        slope = max(worst["dlam"], worst["d2lam"], worst["d3lam"])
        c1 = 1.02 * slope if slope > 0 else 1.0
    return ScaleFunction(kind=sf.kind, epsilon=sf.epsilon, c0=sf.c0,
                         c1=float(c1), sigma_min=sf.sigma_min,
                         sigma_max=sf.sigma_max, c=sf.c, p=sf.p,
                         splines=sf.splines)


def _derivative_ratios(sf, grid, c1):
    lam = sf.lam(grid)
    rhs = c1 * lam ** sf.epsilon
    return {
        "dlam": float(np.max(np.abs(sf.dlam(grid)) / rhs)),
        "d2lam": float(np.max(np.abs(sf.d2lam(grid) * lam) / rhs)),
        "d3lam": float(np.max(np.abs(sf.d3lam(grid) * lam ** 2) / rhs)),
    }


@dataclass
class ValidationReport:
    passed: bool
    worst_ratio: dict
    n_samples: int


def validate_pinching(sf: ScaleFunction, n_samples=10_000) -> ValidationReport:
    """Sample the four pinching inequalities; ratios are lhs/rhs.

    cap:   lambda / c0                      (needs < 1)
    dlam:  |dlam| / (c1 lambda^eps)         (needs <= 1)
    d2lam: |d2lam * lam| / (c1 lambda^eps)
    d3lam: |d3lam * lam^2| / (c1 lambda^eps)
    """
    if n_samples < 100:
        raise ValueError("n_samples must be >= 100")
    grid = np.linspace(sf.sigma_min, sf.sigma_max, n_samples)
    lam = sf.lam(grid)
    if np.any(lam <= 0):
        return ValidationReport(False, {"cap": np.inf}, n_samples)
    worst = _derivative_ratios(sf, grid, sf.c1)
    worst["cap"] = float(np.max(lam) / sf.c0)
    # saturated profiles sit exactly at ratio 1; allow roundoff slack
    passed = worst["cap"] < 1.0 and all(
        worst[k] <= 1.0 + 1e-9 for k in ("dlam", "d2lam", "d3lam"))
    return ValidationReport(passed, worst, n_samples)


# ---------------------------------------------------------------------------
# the z <-> sigma change of variables


@dataclass(frozen=True, eq=False)
class Reparametrization:
    """Monotone pair z(sigma), sigma(z) with dsigma/dz = lambda.

    z(sigma_min) = 0; z_max = z(sigma_max).  Closed forms for constant and
    power profiles, spline antiderivative plus Newton inversion otherwise.
    """

    sf: ScaleFunction
    z_max: float
    _z_of_sigma: Callable
    _sigma_of_z: Callable

    def z_of_sigma(self, sigma):
        return self._z_of_sigma(np.asarray(sigma, dtype=float))

    def sigma_of_z(self, z):
        return self._sigma_of_z(np.asarray(z, dtype=float))

    def lam_of_z(self, z):
        return self.sf.lam(self.sigma_of_z(z))

    def derivs_of_z(self, z):
        """The chain-rule ladder at z (dot = d/dsigma, prime = d/dz).

        Returns dict with lam, lam_dot, lam_ddot, lam_dddot and the
        z-derivatives lam_p = lam*lam_dot, lam_pp = lam*(lam_dot^2 +
        lam*lam_ddot), dot_p = (lam_dot)' = lam*lam_ddot, dot_pp =
        lam*lam_dot*lam_ddot + lam^2*lam_dddot.
        """
        sg = self.sigma_of_z(z)
        lam = self.sf.lam(sg)
        ld = self.sf.dlam(sg)
        ldd = self.sf.d2lam(sg)
        l3 = self.sf.d3lam(sg)
        return {
            "sigma": sg,
            "lam": lam,
            "lam_dot": ld,
            "lam_ddot": ldd,
            "lam_dddot": l3,
            "lam_p": lam * ld,
            "lam_pp": lam * (ld * ld + lam * ldd),
            "dot_p": lam * ldd,
            "dot_pp": lam * ld * ldd + lam * lam * l3,
        }


def build_reparametrization(sf: ScaleFunction, quad_tol=1e-12) -> Reparametrization:
    """z(sigma) = integral of 1/lambda from sigma_min; inverse by Newton."""
    a, b = sf.sigma_min, sf.sigma_max
    if sf.kind == "constant":
        c = sf.c
        z_max = (b - a) / c
        z_of = lambda sg: (sg - a) / c
        sg_of = lambda z: np.clip(a + c * z, a, b)
        return Reparametrization(sf, z_max, z_of, sg_of)
    if sf.kind == "power":
        c, p = sf.c, sf.p
        if p == 1.0:
            z_of = lambda sg: np.log(sg / a) / c
            sg_of = lambda z: np.clip(a * np.exp(c * z), a, b)
            return Reparametrization(sf, float(np.log(b / a) / c), z_of, sg_of)
        q = 1.0 - p
        z_of = lambda sg: (sg ** q - a ** q) / (c * q)
        sg_of = lambda z: np.clip((a ** q + c * q * z) ** (1.0 / q), a, b)
        return Reparametrization(sf, float(z_of(np.asarray(b))), z_of, sg_of)

    # general kind: antiderivative of a spline through 1/lambda, refined
    # until the quadrature is stable to quad_tol
    n = 2049
    z_max_prev = None
    for _ in range(5):
        sg_dense = np.linspace(a, b, n)
        w = 1.0 / sf.lam(sg_dense)
        anti = interpolate.make_interp_spline(sg_dense, w, k=5).antiderivative()
        z_max = float(anti(b) - anti(a))
        if z_max_prev is not None and abs(z_max - z_max_prev) <= quad_tol:
            break
        z_max_prev = z_max
        n = 2 * n - 1

    z0 = float(anti(a))

    def z_of(sg):
        return np.asarray(anti(sg), dtype=float) - z0

    zi = z_of(sg_dense)
    guess = interpolate.PchipInterpolator(zi, sg_dense)

    def sg_of(z):
        z = np.asarray(z, dtype=float)
        sg = np.clip(np.asarray(guess(np.clip(z, 0.0, z_max)), dtype=float), a, b)
        for _ in range(4):  # Newton on z_of(sg) = z; d z_of/d sg = 1/lambda
            sg = np.clip(sg - (z_of(sg) - z) * sf.lam(sg), a, b)
        return sg

    return Reparametrization(sf, z_max, z_of, sg_of)


# ---------------------------------------------------------------------------
# good intervals and the induced domain quantities


def _band_holds(rep, z0, r, lo, hi, n=512):
    zs = np.linspace(max(0.0, z0 - r), min(rep.z_max, z0 + r), n)
    ratio = rep.lam_of_z(zs) / rep.lam_of_z(np.asarray(z0))
    return bool(np.all(ratio >= lo) and np.all(ratio <= hi))


def good_interval_radius(rep: Reparametrization, z0, lo=0.5, hi=1.5,
                         iters=50) -> float:
    """Largest radius r with lambda(z)/lambda(z0) in [lo, hi] on
    |z - z0| <= r (clipped to the z-domain), found by bisection."""
    if not 0.0 <= z0 <= rep.z_max:
        raise ValueError("z0 outside the reparametrized domain")
    r_hi = max(z0, rep.z_max - z0)
    if r_hi == 0.0:
        raise ValueError("degenerate domain at z0")
    if _band_holds(rep, z0, r_hi, lo, hi):
        return float(r_hi)
    r_lo = 0.0
    for _ in range(iters):
        mid = 0.5 * (r_lo + r_hi)
        if _band_holds(rep, z0, mid, lo, hi):
            r_lo = mid
        else:
            r_hi = mid
    return float(r_lo)


def sigma_good_interval_radius(sf: ScaleFunction, sigma0, lo=0.5, hi=1.5,
                               iters=50) -> float:
    """Same band certificate measured in the sigma variable."""
    a, b = sf.sigma_min, sf.sigma_max
    if not a <= sigma0 <= b:
        raise ValueError("sigma0 outside domain")

    def holds(d):
        ss = np.linspace(max(a, sigma0 - d), min(b, sigma0 + d), 512)
        ratio = sf.lam(ss) / sf.lam(np.asarray(sigma0))
        return bool(np.all(ratio >= lo) and np.all(ratio <= hi))

    d_hi = max(sigma0 - a, b - sigma0)
    if holds(d_hi):
        return float(d_hi)
    d_lo = 0.0
    for _ in range(iters):
        mid = 0.5 * (d_lo + d_hi)
        if holds(mid):
            d_lo = mid
        else:
            d_hi = mid
    return float(d_lo)


@dataclass(frozen=True, eq=False)
class DomainSpec:
    """Derived exponents and the strip half-width profile ell(z).

    eps0 = (1-2 tau) eps, eps1 = (1-10 tau) eps0, eps2 = (1-20 tau) eps0;
    inhomogeneities are weighted by lambda^eps0, solutions by lambda^eps2.
    A_window is the measured good-interval constant: the band radius at z0
    is at least A_window * lambda(z0)**(-eps).
    """

    tau: float
    eps0: float
    eps1: float
    eps2: float
    A_window: float
    rep: Reparametrization

    @property
    def sf(self):
        return self.rep.sf

    def ell_of_z(self, z):
        return self.rep.lam_of_z(z) ** (-self.tau * self.sf.epsilon)

    def weight(self, z, exponent):
        return self.rep.lam_of_z(z) ** exponent


def make_domain_spec(rep: Reparametrization, tau=0.025,
                     n_window_samples=17) -> DomainSpec:
    eps = rep.sf.epsilon
    if not 0 < tau < 0.05:
        raise ValueError("tau must satisfy 0 < tau and 1 - 20 tau > 0")
    eps0 = (1.0 - 2.0 * tau) * eps
    eps1 = (1.0 - 10.0 * tau) * eps0
    eps2 = (1.0 - 20.0 * tau) * eps0
    # sample interior z0's; the domain-clipped radius only overestimates,
    # so the min over interior samples is a usable uniform constant
    z0s = np.linspace(0.05 * rep.z_max, 0.95 * rep.z_max, n_window_samples)
    A = np.inf
    for z0 in z0s:
        r = good_interval_radius(rep, float(z0))
        A = min(A, r * float(rep.lam_of_z(np.asarray(z0))) ** eps)
    return DomainSpec(tau=tau, eps0=eps0, eps1=eps1, eps2=eps2,
                      A_window=float(A), rep=rep)
