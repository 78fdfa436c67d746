"""Grid-sampled fields and finite-difference utilities shared by the solvers."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import RectBivariateSpline


def sech(x):
    return 1.0 / np.cosh(x)


def smoothstep01(x):
    """C-infinity ramp: exactly 0 for x <= 0, exactly 1 for x >= 1,
    strictly increasing in between, with S(x) + S(1-x) = 1."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.where(x >= 1.0, 1.0, 0.0)
    mid = (x > 0.0) & (x < 1.0)
    if mid.any():
        xm = x[mid]
        a = np.exp(-1.0 / xm)
        b = np.exp(-1.0 / (1.0 - xm))
        out[mid] = a / (a + b)
    return float(out[0]) if scalar else out


@dataclass(eq=False)
class ScalarField:
    """Samples of u(s, z) on a tensor grid, s along axis 0, z along axis 1.

    Fields are treated as immutable once built (the off-grid spline view is
    cached on first use).  Build a new field instead of mutating values.
    """

    s: np.ndarray
    z: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.s = np.ascontiguousarray(self.s, dtype=float)
        self.z = np.ascontiguousarray(self.z, dtype=float)
        self.values = np.ascontiguousarray(self.values, dtype=float)
        if self.values.shape != (self.s.size, self.z.size):
            raise ValueError(
                f"values shape {self.values.shape} does not match grid "
                f"({self.s.size}, {self.z.size})"
            )

    @property
    def h_s(self):
        return float(self.s[1] - self.s[0])

    @property
    def h_z(self):
        return float(self.z[1] - self.z[0])

    @cached_property
    def _spline(self):
        kx = min(3, self.s.size - 1)
        ky = min(3, self.z.size - 1)
        return RectBivariateSpline(self.s, self.z, self.values, kx=kx, ky=ky)

    def __call__(self, s, z, ds=0, dz=0):
        """Pointwise (off-grid) evaluation, broadcasting over array inputs."""
        s = np.asarray(s, dtype=float)
        z = np.asarray(z, dtype=float)
        s_b, z_b = np.broadcast_arrays(s, z)
        out = self._spline(s_b.ravel(), z_b.ravel(), dx=ds, dy=dz, grid=False)
        if s_b.shape == ():
            return float(out[0])
        return out.reshape(s_b.shape)

    def on_grid(self, s, z, ds=0, dz=0):
        """Tensor-product evaluation; returns shape (len(s), len(z))."""
        return self._spline(np.asarray(s, float), np.asarray(z, float),
                            dx=ds, dy=dz, grid=True)

    def zeros_like(self):
        return ScalarField(self.s, self.z, np.zeros_like(self.values))

    def jet2(self):
        """Grid partials through second order by centered differences
        (second-order one-sided at the boundary rows and columns)."""
        u = self.values
        us = np.gradient(u, self.s, axis=0, edge_order=2)
        uz = np.gradient(u, self.z, axis=1, edge_order=2)
        return {
            "u": u,
            "us": us,
            "uz": uz,
            "uss": np.gradient(us, self.s, axis=0, edge_order=2),
            "usz": np.gradient(us, self.z, axis=1, edge_order=2),
            "uzz": np.gradient(uz, self.z, axis=1, edge_order=2),
        }

    def sup(self, weight_z=None):
        """sup |u| / w(z); weight_z is sampled on the field's z grid."""
        if weight_z is None:
            return float(np.max(np.abs(self.values)))
        w = np.asarray(weight_z, dtype=float)[None, :]
        return float(np.max(np.abs(self.values) / w))

    def c2_sup(self, weight_z=None):
        """Discrete weighted C2 norm: sup over partials |a|<=2 of |D^a u|/w(z)."""
        jet = self.jet2()
        if weight_z is None:
            return max(float(np.max(np.abs(t))) for t in jet.values())
        w = np.asarray(weight_z, dtype=float)[None, :]
        return max(float(np.max(np.abs(t) / w)) for t in jet.values())


# Centered difference stencils: accuracy -> (coefficients, reach).
D1_STENCILS = {
    2: (np.array([-0.5, 0.0, 0.5]), 1),
    4: (np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0, 2),
    6: (np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / 60.0, 3),
}
D2_STENCILS = {
    2: (np.array([1.0, -2.0, 1.0]), 1),
    4: (np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0, 2),
    6: (np.array([2.0, -27.0, 270.0, -490.0, 270.0, -27.0, 2.0]) / 180.0, 3),
}


def fd_partial(fun, s, z, var, order, h, acc=4):
    """Centered finite-difference partial of fun(s, z) in one variable.

    fun maps broadcastable point arrays to an array whose leading axes match
    the input shape; var is "s" or "z", order 1 or 2, acc in {2, 4, 6}.
    """
    table = D1_STENCILS if order == 1 else D2_STENCILS
    coeffs, reach = table[acc]
    total = None
    for k, c in zip(range(-reach, reach + 1), coeffs):
        if c == 0.0:
            continue
        if var == "s":
            term = c * np.asarray(fun(s + k * h, z))
        else:
            term = c * np.asarray(fun(s, z + k * h))
        total = term if total is None else total + term
    return total / h ** order


def fd_mixed(fun, s, z, h, acc=4):
    """d2/(ds dz) by nesting first-derivative stencils."""
    coeffs, reach = D1_STENCILS[acc]
    total = None
    for k, c in zip(range(-reach, reach + 1), coeffs):
        if c == 0.0:
            continue
        term = c * fd_partial(fun, s, z + k * h, "s", 1, h, acc=acc)
        total = term if total is None else total + term
    return total / h
