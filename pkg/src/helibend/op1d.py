"""The half-line model operator Ltilde = d2/ds2 + 2 sech^2(s).

tanh(s) spans the Robin-compatible kernel; omega(s) = s*tanh(s) - 1 is the
growing dual kernel element, normalized so the Wronskian tanh*omega' -
tanh'*omega equals 1.  The explicit inverse is variation of parameters in
that basis and preserves the double zero u(0) = u'(0) = 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import interpolate, linalg
from scipy.integrate import simpson

from .fields import sech


@dataclass(eq=False)
class Profile1D:
    """Samples on a uniform s-grid over [0, ell]."""

    s: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.s.shape != self.values.shape or self.s.ndim != 1:
            raise ValueError("profile needs matching 1d grids")

    @property
    def ell(self):
        return float(self.s[-1])

    @property
    def h_s(self):
        return float(self.s[1] - self.s[0])

    def at(self, x):
        """Cubic off-grid evaluation."""
        spl = interpolate.make_interp_spline(self.s, self.values, k=3)
        return np.asarray(spl(x), dtype=float)


def make_grid(ell, h_s):
    n = int(round(ell / h_s))
    return np.linspace(0.0, ell, n + 1)


def tanh_profile(ell, h_s):
    s = make_grid(ell, h_s)
    return Profile1D(s, np.tanh(s))


def omega_profile(ell, h_s):
    s = make_grid(ell, h_s)
    return Profile1D(s, s * np.tanh(s) - 1.0)


def _deriv4(u, h):
    """First derivative, fourth order, one-sided at the two edge pairs."""
    d = np.empty_like(u)
    d[2:-2] = (u[:-4] - 8 * u[1:-3] + 8 * u[3:-1] - u[4:]) / (12 * h)
    d[0] = (-25 * u[0] + 48 * u[1] - 36 * u[2] + 16 * u[3] - 3 * u[4]) / (12 * h)
    d[1] = (-3 * u[0] - 10 * u[1] + 18 * u[2] - 6 * u[3] + u[4]) / (12 * h)
    d[-1] = (25 * u[-1] - 48 * u[-2] + 36 * u[-3] - 16 * u[-4] + 3 * u[-5]) / (12 * h)
    d[-2] = (3 * u[-1] + 10 * u[-2] - 18 * u[-3] + 6 * u[-4] - u[-5]) / (12 * h)
    return d


def apply_Ltilde(f: Profile1D) -> Profile1D:
    """Second-order difference application of d2/ds2 + 2 sech^2."""
    if f.ell < 1.0:
        raise ValueError("need ell >= 1")
    if f.h_s > 0.01 + 1e-15:
        raise ValueError("grid too coarse for the O(h^2) contract")
    u, h = f.values, f.h_s
    out = np.empty_like(u)
    out[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / h ** 2
    # second-order one-sided stencils keep the edge rows consistent
    out[0] = (2 * u[0] - 5 * u[1] + 4 * u[2] - u[3]) / h ** 2
    out[-1] = (2 * u[-1] - 5 * u[-2] + 4 * u[-3] - u[-4]) / h ** 2
    return Profile1D(f.s, out + 2.0 * sech(f.s) ** 2 * u)


def _cumint(s, g):
    """Cumulative integral from 0 by quintic-spline antiderivative."""
    k = min(5, s.size - 1)
    anti = interpolate.make_interp_spline(s, g, k=k).antiderivative()
    return np.asarray(anti(s) - anti(s[0]), dtype=float)


def invert_Ltilde(f: Profile1D) -> Profile1D:
    """u with Ltilde u = f and u(0) = u'(0) = 0.

    Variation of parameters in the (tanh, omega) kernel basis with unit
    Wronskian:  u = omega * int_0^s tanh*f + tanh * int_0^s (1 - x tanh x)*f.
    """
    s, g = f.s, f.values
    th = np.tanh(s)
    om = s * th - 1.0
    u = om * _cumint(s, th * g) + th * _cumint(s, (1.0 - s * th) * g)
    u[0] = 0.0
    return Profile1D(s, u)


@lru_cache(maxsize=64)
def u0_profile(ell, h_s=1e-3) -> Profile1D:
    """u0 = Ltilde^{-1}(tanh), the slow-growth particular solution."""
    if ell < 1.0:
        raise ValueError("need ell >= 1")
    return invert_Ltilde(tanh_profile(ell, h_s))


@dataclass
class EnergyReport:
    e_ell: float
    l2_weighted: float
    alpha: float


def energy(f: Profile1D) -> EnergyReport:
    """e_ell(f) = int f'^2 - 2 int f^2 sech^2 - f(ell)^2 sech^2(ell)/tanh(ell).

    alpha is the kernel coefficient in the sech^2-weighted inner product.
    """
    if f.values[0] != 0.0:
        raise ValueError("energy needs f(0) = 0")
    s, u, h = f.s, f.values, f.h_s
    w = sech(s) ** 2
    du = _deriv4(u, h)
    e = (simpson(du ** 2, dx=h) - 2.0 * simpson(u ** 2 * w, dx=h)
         - u[-1] ** 2 * w[-1] / np.tanh(s[-1]))
    th = np.tanh(s)
    alpha = simpson(u * th * w, dx=h) / simpson(th ** 2 * w, dx=h)
    return EnergyReport(e_ell=float(e),
                        l2_weighted=float(simpson(u ** 2 * w, dx=h)),
                        alpha=float(alpha))


def decompose(f: Profile1D):
    """f = alpha*tanh + g with g weighted-orthogonal to tanh; returns (alpha, g)."""
    alpha = energy(f).alpha
    return alpha, Profile1D(f.s, f.values - alpha * np.tanh(f.s))


def poincare_beta(ell, h_s=None) -> float:
    """Smallest Rayleigh quotient e_ell(f)/||f||^2_{L2(sech^2)} over the
    discrete subspace {f(0) = 0, f weighted-orthogonal to tanh}.

    P1 stiffness plus lumped weight matrices; the orthogonality constraint
    is imposed by a large quadratic penalty along the tanh direction.
    """
    if not 2.0 <= ell <= 50.0:
        raise ValueError("poincare_beta supports ell in [2, 50]")
    if h_s is None:
        h_s = ell / 1000.0
    s = make_grid(ell, h_s)
    h = float(s[1] - s[0])
    si = s[1:]  # unknowns after dropping the Dirichlet node
    n = si.size
    w = sech(si) ** 2
    lump = np.full(n, h)
    lump[-1] = h / 2.0

    main = np.full(n, 2.0 / h)
    main[-1] = 1.0 / h
    A = np.diag(main) + np.diag(np.full(n - 1, -1.0 / h), 1) \
        + np.diag(np.full(n - 1, -1.0 / h), -1)
    A += np.diag(-2.0 * w * lump)
    A[-1, -1] -= w[-1] / np.tanh(ell)

    m = w * lump
    c = np.tanh(si) * m
    c = c / np.linalg.norm(c)
    kappa = 1e6 * np.abs(A).max()
    A = A + kappa * np.outer(c, c)
    A = 0.5 * (A + A.T)

    # The weight decays like exp(-2s), so normalizing by M^{-1/2} is
    # hopeless on long domains.  A is positive definite on the penalized
    # subspace, so invert the pencil instead: the largest mu with
    # M f = mu A f is 1/beta and involves no division by the weight.
    M = np.diag(m)
    n = si.size
    mu = linalg.eigh(M, A, subset_by_index=(n - 1, n - 1),
                     eigvals_only=True)[0]
    return float(1.0 / mu)
