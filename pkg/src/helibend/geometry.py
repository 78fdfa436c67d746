"""Closed-form geometry of the bent scaled helicoid and its normal graphs.

The base immersion is F*(s,z) = sigma(z) e_z + lambda(z) sinh(s) e_r(z)
with e_r(z) = (sin z, cos z, 0) and sigma'(z) = lambda(z); normal graphs
are F*[u] = F* + lambda(z) u(s,z) nu*(s,z) over the unit normal
nu* = -sech(s) e_r'(z) + tanh(s) e_z.

Everything exists twice: hand closed forms, and an independent
finite-difference oracle that rebuilds metric, second fundamental form and
mean curvature from raw position samples.  Conventions: H = tr(g^{-1}A)
(round unit sphere has |H| = 2); the normal is normalize(X_z x X_s), which
equals +nu* at u = 0; the normalized mean curvature is Htilde[u] =
lambda(z) cosh^2(s) H[F*[u]], so Htilde[0] = lam_dot tanh(s).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .fields import ScalarField, fd_mixed, fd_partial, sech
from .scalefn import Reparametrization


# ---------------------------------------------------------------------------
# frames and immersions


def _er(z):
    z = np.asarray(z, dtype=float)
    out = np.zeros(z.shape + (3,))
    out[..., 0] = np.sin(z)
    out[..., 1] = np.cos(z)
    return out


def _erp(z):
    z = np.asarray(z, dtype=float)
    out = np.zeros(z.shape + (3,))
    out[..., 0] = np.cos(z)
    out[..., 1] = -np.sin(z)
    return out


_EZ = np.array([0.0, 0.0, 1.0])


def _of_z(fn, z):
    # spline-backed reparametrizations only take 1-d input
    z = np.asarray(z, dtype=float)
    return np.asarray(fn(z.ravel()), dtype=float).reshape(z.shape)


def _derivs_grid(rep: Reparametrization, z):
    z = np.asarray(z, dtype=float)
    d = rep.derivs_of_z(z.ravel())
    return {k: np.asarray(v, dtype=float).reshape(z.shape) for k, v in d.items()}


def helicoid_point(s, z):
    """Standard helicoid F(s,z) = sinh(s) e_r(z) + z e_z."""
    s, z = np.broadcast_arrays(np.asarray(s, float), np.asarray(z, float))
    return np.sinh(s)[..., None] * _er(z) + z[..., None] * _EZ


def bent_helicoid_point(rep: Reparametrization, s, z):
    """F*(s,z) = sigma(z) e_z + lambda(z) sinh(s) e_r(z)."""
    s, z = np.broadcast_arrays(np.asarray(s, float), np.asarray(z, float))
    lam = _of_z(rep.lam_of_z, z)
    sg = _of_z(rep.sigma_of_z, z)
    return sg[..., None] * _EZ + (lam * np.sinh(s))[..., None] * _er(z)


def nu_star(s, z):
    """Unit normal of F*: -sech(s) e_r'(z) + tanh(s) e_z (lambda-free)."""
    s, z = np.broadcast_arrays(np.asarray(s, float), np.asarray(z, float))
    return -sech(s)[..., None] * _erp(z) + np.tanh(s)[..., None] * _EZ


@dataclass(eq=False)
class ImmersionField:
    """Position map (s,z) -> R^3 plus the finite-difference step used by
    the numeric oracle.  eval must broadcast over arrays."""

    eval: Callable
    mode: str = "closed_form"
    fd_step: float = 1e-3
    acc: int = 2  # base stencil accuracy; second derivatives get Richardson


def helicoid_immersion() -> ImmersionField:
    return ImmersionField(eval=helicoid_point, mode="closed_form")


def bent_immersion(rep: Reparametrization) -> ImmersionField:
    return ImmersionField(eval=lambda s, z: bent_helicoid_point(rep, s, z),
                          mode="closed_form")


def graph_immersion(rep: Reparametrization, u: ScalarField) -> ImmersionField:
    """F*[u] = F* + lambda u nu*; off-grid u by bicubic interpolation."""

    def ev(s, z):
        s_b, z_b = np.broadcast_arrays(np.asarray(s, float), np.asarray(z, float))
        lam = _of_z(rep.lam_of_z, z_b)
        base = bent_helicoid_point(rep, s_b, z_b)
        return base + (lam * u(s_b, z_b))[..., None] * nu_star(s_b, z_b)

    return ImmersionField(eval=ev, mode="graph")


# ---------------------------------------------------------------------------
# pointwise geometry


@dataclass(eq=False)
class GeometryAtPoint:
    """Metric, normal, second fundamental form and invariants; every field
    is an array over the sample shape (the normal has a trailing 3-axis)."""

    g_ss: np.ndarray
    g_zz: np.ndarray
    g_sz: np.ndarray
    nu: np.ndarray
    A_ss: np.ndarray
    A_zz: np.ndarray
    A_sz: np.ndarray
    normA2: np.ndarray
    H: np.ndarray
    conformality: np.ndarray

    @property
    def det_g(self):
        return self.g_ss * self.g_zz - self.g_sz ** 2


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def geometry_from_jets(Xs, Xz, Xss, Xsz, Xzz) -> GeometryAtPoint:
    """Assemble the full pointwise geometry from first and second
    derivative arrays of shape (..., 3).  dtype-polymorphic so that
    complex-step directional derivatives pass through."""
    g_ss = _dot(Xs, Xs)
    g_zz = _dot(Xz, Xz)
    g_sz = _dot(Xs, Xz)
    det = g_ss * g_zz - g_sz ** 2
    n = np.cross(Xz, Xs)
    nu = n / np.sqrt(_dot(n, n))[..., None]
    A_ss = _dot(Xss, nu)
    A_sz = _dot(Xsz, nu)
    A_zz = _dot(Xzz, nu)
    H = (g_zz * A_ss - 2.0 * g_sz * A_sz + g_ss * A_zz) / det
    s11 = (g_zz * A_ss - g_sz * A_sz) / det
    s12 = (g_zz * A_sz - g_sz * A_zz) / det
    s21 = (g_ss * A_sz - g_sz * A_ss) / det
    s22 = (g_ss * A_zz - g_sz * A_sz) / det
    normA2 = s11 ** 2 + 2.0 * s12 * s21 + s22 ** 2
    fraka = 2.0 * np.sqrt(det) / (g_ss + g_zz)
    return GeometryAtPoint(g_ss=g_ss, g_zz=g_zz, g_sz=g_sz, nu=nu,
                           A_ss=A_ss, A_zz=A_zz, A_sz=A_sz,
                           normA2=normA2, H=H, conformality=fraka)


def closed_form_geometry(rep: Reparametrization, s, z) -> GeometryAtPoint:
    """The derivative-table geometry of F*."""
    s, z = np.broadcast_arrays(np.asarray(s, float), np.asarray(z, float))
    d = _derivs_grid(rep, z)
    lam, ld = d["lam"], d["lam_dot"]
    ch, sh, th = np.cosh(s), np.sinh(s), np.tanh(s)
    se = sech(s)
    g_ss = lam ** 2 * ch ** 2
    g_zz = lam ** 2 * (ch ** 2 + ld ** 2 * sh ** 2)
    g_sz = ld * lam ** 2 * sh * ch
    nu = nu_star(s, z)
    A_ss = np.zeros_like(g_ss)
    A_sz = -lam * np.ones_like(g_ss)
    A_zz = -lam * ld * th
    # tr(S^2) with S = g^{-1}A: S11 = ld th se^2/lam, S12 = S21 = -se^2/lam,
    # S22 = 0, so |A|^2 = se^4 (2 + ld^2 th^2)/lam^2
    normA2 = se ** 4 * (2.0 + ld ** 2 * th ** 2) / lam ** 2
    H = ld * th * se ** 2 / lam
    fraka = 2.0 * ch ** 2 / (2.0 * ch ** 2 + ld ** 2 * sh ** 2)
    return GeometryAtPoint(g_ss=g_ss, g_zz=g_zz, g_sz=g_sz, nu=nu,
                           A_ss=A_ss, A_zz=A_zz, A_sz=A_sz,
                           normA2=normA2, H=H, conformality=fraka)


def numeric_geometry(im: ImmersionField, s, z) -> GeometryAtPoint:
    """Independent oracle: differentiate the raw position map.

    Base stencils of accuracy im.acc at steps h and h/2, combined by one
    Richardson step, keep the roundoff floor of second derivatives near
    1e-9 at the default h = 1e-3.
    """
    s, z = np.broadcast_arrays(np.asarray(s, float), np.asarray(z, float))
    h = im.fd_step
    p = 2 ** im.acc

    def rich(fine, coarse):
        return (p * fine - coarse) / (p - 1.0)

    jets = {}
    for var in ("s", "z"):
        for order in (1, 2):
            fine = fd_partial(im.eval, s, z, var, order, h / 2, acc=im.acc)
            coarse = fd_partial(im.eval, s, z, var, order, h, acc=im.acc)
            jets[var * order] = rich(fine, coarse)
    jets["sz"] = rich(fd_mixed(im.eval, s, z, h / 2, acc=im.acc),
                      fd_mixed(im.eval, s, z, h, acc=im.acc))
    geo = geometry_from_jets(jets["s"], jets["z"], jets["ss"], jets["sz"],
                             jets["zz"])
    if np.any(geo.conformality <= 0.5):
        raise ValueError("degenerate immersion stencil (conformality <= 1/2)")
    return geo


# ---------------------------------------------------------------------------
# graph jets and the normalized mean curvature


@dataclass(eq=False)
class GraphJet:
    """Derivatives of a graph function u through second order, as callables
    evaluated on tensor grids: jet(s, z) -> shape (len(s), len(z))."""

    u: Callable
    us: Callable
    uz: Callable
    uss: Callable
    usz: Callable
    uzz: Callable

    @classmethod
    def from_field(cls, f: ScalarField) -> "GraphJet":
        def part(ds, dz):
            return lambda s, z: f.on_grid(s, z, ds=ds, dz=dz)
        return cls(u=part(0, 0), us=part(1, 0), uz=part(0, 1),
                   uss=part(2, 0), usz=part(1, 1), uzz=part(0, 2))

    @classmethod
    def from_callables(cls, u, us, uz, uss, usz, uzz) -> "GraphJet":
        def grid(f):
            return lambda s, z: f(np.asarray(s, float)[:, None],
                                  np.asarray(z, float)[None, :])
        return cls(u=grid(u), us=grid(us), uz=grid(uz),
                   uss=grid(uss), usz=grid(usz), uzz=grid(uzz))


def graph_jets_grid(rep: Reparametrization, jet: GraphJet, s, z):
    """Exact first/second derivatives of F*[u] on the tensor grid s x z,
    given the derivatives of u.  Returns (Xs, Xz, Xss, Xsz, Xzz), each of
    shape (len(s), len(z), 3)."""
    s = np.asarray(s, dtype=float)
    z = np.asarray(z, dtype=float)
    d = _derivs_grid(rep, z)
    lam, lam_p, lam_pp = d["lam"], d["lam_p"], d["lam_pp"]

    sh, ch, th = np.sinh(s), np.cosh(s), np.tanh(s)
    se = sech(s)
    er, erp = _er(z), _erp(z)
    ez = _EZ

    u = jet.u(s, z)
    us = jet.us(s, z)
    uz = jet.uz(s, z)
    uss = jet.uss(s, z)
    usz = jet.usz(s, z)
    uzz = jet.uzz(s, z)

    def outer(a_s, a_z, frame):
        # a_s(s) * a_z(z) * frame(z); frame has shape (nz, 3)
        return (a_s[:, None] * a_z[None, :])[..., None] * frame[None, :, :]

    def outer_z(a_s, a_z):
        return (a_s[:, None] * a_z[None, :])[..., None] * ez

    one_s = np.ones_like(s)
    one_z = np.ones_like(z)

    # base immersion derivatives
    Fs = outer(ch, lam, er)
    Fz = outer(sh, lam_p, er) + outer(sh, lam, erp) + outer_z(one_s, lam)
    Fss = outer(sh, lam, er)
    Fsz = outer(ch, lam_p, er) + outer(ch, lam, erp)
    Fzz = (outer(sh, lam_pp - lam, er) + outer(sh, 2.0 * lam_p, erp)
           + outer_z(one_s, lam_p))

    # normal frame derivatives
    nu = outer(-se, one_z, erp) + outer_z(th, one_z)
    nus = outer(se * th, one_z, erp) + outer_z(se ** 2, one_z)
    nuz = outer(se, one_z, er)
    nuss = outer(se * (se ** 2 - th ** 2), one_z, erp) \
        + outer_z(-2.0 * se ** 2 * th, one_z)
    nusz = outer(-se * th, one_z, er)
    nuzz = outer(se, one_z, erp)

    lam_b = lam[None, :]
    lam_pb = lam_p[None, :]
    lam_ppb = lam_pp[None, :]

    w = (lam_b * u)[..., None]
    Xs = Fs + (lam_b * us)[..., None] * nu + w * nus
    Xz = Fz + (lam_pb * u + lam_b * uz)[..., None] * nu + w * nuz
    Xss = Fss + (lam_b * uss)[..., None] * nu \
        + 2.0 * (lam_b * us)[..., None] * nus + w * nuss
    Xsz = Fsz + (lam_pb * us + lam_b * usz)[..., None] * nu \
        + (lam_b * us)[..., None] * nuz \
        + (lam_pb * u + lam_b * uz)[..., None] * nus + w * nusz
    Xzz = Fzz + (lam_ppb * u + 2.0 * lam_pb * uz + lam_b * uzz)[..., None] * nu \
        + 2.0 * (lam_pb * u + lam_b * uz)[..., None] * nuz + w * nuzz
    return Xs, Xz, Xss, Xsz, Xzz


def htilde_grid(rep: Reparametrization, jet: GraphJet, s, z,
                check_immersion=True):
    """Htilde[u] = lambda cosh^2(s) H[F*[u]] on the tensor grid s x z."""
    s = np.asarray(s, dtype=float)
    z = np.asarray(z, dtype=float)
    geo = geometry_from_jets(*graph_jets_grid(rep, jet, s, z))
    if check_immersion and np.any(np.real(geo.conformality) <= 0.5):
        raise ValueError("graph too large: immersion degenerate")
    lam = _of_z(rep.lam_of_z, z)
    return lam[None, :] * np.cosh(s)[:, None] ** 2 * geo.H


def htilde(rep: Reparametrization, u: ScalarField) -> ScalarField:
    """Normalized mean curvature of the graph of u, on u's own grid."""
    vals = htilde_grid(rep, GraphJet.from_field(u), u.s, u.z)
    return ScalarField(u.s, u.z, vals)


# ---------------------------------------------------------------------------
# operator coefficient tables


@dataclass(eq=False)
class OperatorCoefficients:
    """Coefficients of a second-order operator
    c_ss dss + c_zz dzz + c_sz dsz + c_s ds + c_z dz + c_0."""

    c_ss: np.ndarray
    c_zz: np.ndarray
    c_sz: np.ndarray
    c_s: np.ndarray
    c_z: np.ndarray
    c_0: np.ndarray

    def apply(self, u, us, uz, uss, usz, uzz):
        return (self.c_ss * uss + self.c_zz * uzz + self.c_sz * usz
                + self.c_s * us + self.c_z * uz + self.c_0 * u)


def flat_coefficients(s, z) -> OperatorCoefficients:
    """Ltilde = dss + dzz + 2 sech^2(s)."""
    s, z = np.broadcast_arrays(np.asarray(s, float), np.asarray(z, float))
    one = np.ones_like(s)
    zero = np.zeros_like(s)
    return OperatorCoefficients(c_ss=one, c_zz=one.copy(), c_sz=zero,
                                c_s=zero.copy(), c_z=zero.copy(),
                                c_0=2.0 * sech(s) ** 2)


def perturbation_coefficients(rep: Reparametrization, s, z) -> OperatorCoefficients:
    """E with lam^2 cosh^2 (Delta* + |A*|^2) = Ltilde + E; all coefficients
    carry a factor lam_dot or lam*lam_ddot and vanish for constant scale."""
    s, z = np.broadcast_arrays(np.asarray(s, float), np.asarray(z, float))
    d = _derivs_grid(rep, z)
    ld, dot_p = d["lam_dot"], d["dot_p"]
    th = np.tanh(s)
    se2 = sech(s) ** 2
    return OperatorCoefficients(
        c_ss=ld ** 2 * th ** 2,
        c_zz=np.zeros_like(th),
        c_sz=-2.0 * ld * th,
        c_s=2.0 * ld ** 2 * th * se2 - dot_p * th,
        c_z=-ld * se2,
        c_0=ld ** 2 * th ** 2 * se2,
    )


def operator_coefficients(rep: Reparametrization, s, z):
    """(full, perturbation) coefficient tables of lam^2 cosh^2 (Delta* + |A*|^2)."""
    flat = flat_coefficients(s, z)
    pert = perturbation_coefficients(rep, s, z)
    full = OperatorCoefficients(*(getattr(flat, f) + getattr(pert, f)
                                  for f in ("c_ss", "c_zz", "c_sz",
                                            "c_s", "c_z", "c_0")))
    return full, pert


def linearization_coefficients(rep: Reparametrization, s, z) -> OperatorCoefficients:
    """Exact first variation of Htilde at u = 0.

    The graph displacement is lambda(z) u nu*, so beyond Ltilde + E the
    variation picks up the commutator with lambda(z):
        + 2 lam_dot dz - 2 lam_dot^2 tanh ds
        + (lam_dot^2 tanh^2 + lam lam_ddot).
    All extras vanish for constant scale, leaving exactly Ltilde.
    """
    s, z = np.broadcast_arrays(np.asarray(s, float), np.asarray(z, float))
    d = _derivs_grid(rep, z)
    ld, lam, ldd = d["lam_dot"], d["lam"], d["lam_ddot"]
    th = np.tanh(s)
    full, _ = operator_coefficients(rep, s, z)
    return OperatorCoefficients(
        c_ss=full.c_ss,
        c_zz=full.c_zz,
        c_sz=full.c_sz,
        c_s=full.c_s - 2.0 * ld ** 2 * th,
        c_z=full.c_z + 2.0 * ld,
        c_0=full.c_0 + ld ** 2 * th ** 2 + lam * ldd,
    )


# ---------------------------------------------------------------------------
# exports


def export_obj(path, points):
    """Wavefront OBJ of a (ns, nz, 3) vertex grid, row-major in (s, z),
    quads split into two triangles."""
    pts = np.asarray(points, dtype=float)
    ns, nz, _ = pts.shape
    with open(path, "w") as fh:
        flat = pts.reshape(-1, 3)
        fh.write("".join(f"v {x:.10g} {y:.10g} {c:.10g}\n" for x, y, c in flat))
        idx = np.arange(ns * nz).reshape(ns, nz) + 1  # OBJ is 1-based
        a = idx[:-1, :-1].ravel()
        b = idx[1:, :-1].ravel()
        c = idx[1:, 1:].ravel()
        e = idx[:-1, 1:].ravel()
        tri = np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, e], 1)])
        fh.write("".join(f"f {i} {j} {k}\n" for i, j, k in tri))


def dump_geometry_csv(path, rep: Reparametrization, s, z):
    """CSV dump with header s,z,g_ss,g_zz,g_sz,A_sz,normA2,H."""
    s = np.asarray(s, dtype=float)
    z = np.asarray(z, dtype=float)
    S, Z = np.meshgrid(s, z, indexing="ij")
    geo = closed_form_geometry(rep, S, Z)
    cols = np.column_stack([S.ravel(), Z.ravel(), geo.g_ss.ravel(),
                            geo.g_zz.ravel(), geo.g_sz.ravel(),
                            geo.A_sz.ravel(), geo.normA2.ravel(),
                            geo.H.ravel()])
    header = "s,z,g_ss,g_zz,g_sz,A_sz,normA2,H"
    np.savetxt(path, cols, delimiter=",", header=header, comments="")
