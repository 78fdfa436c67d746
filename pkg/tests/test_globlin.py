import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helibend.fields import ScalarField, smoothstep01
from helibend.globlin import (MASS_RADIUS, apply_interior, build_cutoffs,
                              build_decomposition, kernel_gauge_normalize,
                              project_corrections, psi0, psi_ab,
                              residual_field, solve_global, solve_piece,
                              strong_orthogonalize, write_field_csv,
                              write_iteration_report)
from helibend.scalefn import (build_reparametrization, make_domain_spec,
                              make_scale)


def power_domain(c, sigma_min):
    sf = make_scale("power", c=c, p=1.5, sigma_min=sigma_min)
    return make_domain_spec(build_reparametrization(sf))


@pytest.fixture(scope="module")
def mini():
    """Small but genuinely layered domain: 23 strips, both end modes."""
    ds = power_domain(0.1, 0.05)
    dec = build_decomposition(ds, h_s=2.5 / 40, n_zsub=12)
    return ds, dec


@pytest.fixture(scope="module")
def short():
    """Domain shorter than two window mass radii: middle strip is 'full'."""
    ds = power_domain(0.1, 0.5)
    dec = build_decomposition(ds, h_s=2.5 / 40, n_zsub=12)
    return ds, dec


def generic_E(dec):
    """Interior-row inhomogeneity mixing a kernel-free bump with a strong
    tanh component, spread over the whole z-range."""
    s_full = dec.op.s_full
    E = np.outer(np.exp(-(s_full - 1.0) ** 2) * s_full,
                 np.sin(1.7 * dec.z) + 0.4 * np.cos(0.3 * dec.z))
    E += 0.3 * np.outer(np.tanh(s_full), np.cos(2.3 * dec.z))
    return E[1:-1]


def window_piece(dec, j, E_int):
    stp = dec.strips[j]
    return dec.psi[j][stp.phys][None, :] * E_int[:, stp.phys]


@pytest.fixture(scope="module")
def recovery(mini):
    """Manufactured solution w with compact s-support and exactly vanishing
    per-column tanh moment, solved from its own discrete image."""
    ds, dec = mini
    s_full = dec.op.s_full
    eta_raw = (smoothstep01((s_full - 0.15) / 0.5)
               * smoothstep01((2.15 - s_full) / 0.5))
    eta2 = (smoothstep01((s_full - 0.8) / 0.5)
            * smoothstep01((2.15 - s_full) / 0.4)) * s_full
    om, t = dec.op.omega, dec.op.kernel
    eta = eta_raw - ((om * t) @ eta_raw[1:] / ((om * t) @ eta2[1:])) * eta2
    gz = np.sin(0.9 * dec.z) + 0.6 * np.cos(2.1 * dec.z) + 0.3
    w = np.outer(eta, gz)
    E_w = apply_interior(dec.op, w, dec.h_z)
    E_full = np.vstack([np.zeros(dec.z.size), E_w, np.zeros(dec.z.size)])
    gs = solve_global(E_full, ds, dec=dec, rtol=1e-10, max_iter=40)
    return dec, w, E_full, gs


@pytest.fixture(scope="module")
def contraction_runs():
    """The physical workload E = lambda'(z) tanh(s) on the two descent
    profiles the contraction study compares."""
    out = {}
    for c in (0.1, 0.05):
        ds = power_domain(c, 0.02)
        dec = build_decomposition(ds)
        lam_p = ds.rep.derivs_of_z(dec.z)["lam_p"]
        E = np.outer(np.tanh(dec.op.s_full), lam_p)
        out[c] = solve_global(E, ds, dec=dec)
    return out


class TestCutoffs:
    def test_smoothstep_plateaus_exact(self):
        x = np.array([-2.0, 0.0, 1.0, 3.0])
        assert np.all(smoothstep01(x) == np.array([0.0, 0.0, 1.0, 1.0]))
        assert smoothstep01(0.5) == 0.5
        xs = np.linspace(0.01, 0.99, 99)
        assert np.all(np.diff(smoothstep01(xs)) >= 0)
        # strictly increasing away from the float-saturated ends
        core = np.linspace(0.1, 0.9, 81)
        assert np.all(np.diff(smoothstep01(core)) > 0)
        assert np.max(np.abs(smoothstep01(xs) + smoothstep01(1 - xs) - 1)) < 1e-15
        assert isinstance(smoothstep01(0.3), float)

    def test_psi_ab_middle_third(self):
        f = psi_ab(0.0, 3.0)
        assert f(1.0) == 0.0 and f(0.5) == 0.0
        assert f(2.0) == 1.0 and f(2.7) == 1.0
        assert 0.0 < f(1.5) < 1.0
        g = psi_ab(3.0, 0.0)
        xs = np.linspace(-1, 4, 101)
        assert np.max(np.abs(f(xs) + g(xs) - 1.0)) < 1e-15
        with pytest.raises(ValueError):
            psi_ab(1.0, 1.0)
        assert psi0(-1.0) == 0.0 and psi0(1.0) == 1.0

    def test_partition_identities(self, mini):
        _, dec = mini
        psi = dec.psi
        z = dec.z
        assert np.max(np.abs(psi.sum(axis=0) - 1.0)) < 1e-14
        assert psi.min() > -1e-15
        for j in range(dec.J + 1):
            assert psi[j][j * 12] == 1.0
        # interior members vanish identically beyond 5pi/6
        for j in (3, 7):
            far = np.abs(z - j * np.pi) >= 5 * np.pi / 6 + 1e-9
            assert np.max(np.abs(psi[j][far])) == 0.0
        # translating by one period maps member j to member j-1
        for j in range(2, dec.J):
            assert np.max(np.abs(psi[j][12:] - psi[j - 1][:-12])) < 1e-12

    def test_dual_cutoff_plateau_and_slope(self):
        cut = build_cutoffs()
        for rho in (4 * np.pi, 16 * np.pi):
            d = cut.dual(rho)
            zb = np.linspace(-2 * rho, 2 * rho, 40001)
            y = d(zb)
            assert np.all(y[np.abs(zb) <= 2 * rho / 3 - 1e-9] == 1.0)
            assert np.all(y[np.abs(zb) >= 5 * rho / 6 + 1e-9] == 0.0)
            slope = np.max(np.abs(np.gradient(y, zb)))
            # the transition is an exact rescaling: max slope is 12/rho
            assert slope == pytest.approx(12.0 / rho, rel=1e-3)


class TestDecomposition:
    def test_modes_and_floor(self, mini):
        ds, dec = mini
        modes = [stp.mode for stp in dec.strips]
        assert modes[:2] == ["reflect_lo", "reflect_lo"]
        assert modes[-2:] == ["reflect_hi", "reflect_hi"]
        assert set(modes[2:-2]) == {"interior"}
        # raw window formula is far below the floor on this profile
        for stp in dec.strips:
            assert stp.rho_j == pytest.approx(5 * np.pi)
        nz = dec.z.size
        for stp in dec.strips:
            assert np.all(stp.phys >= 0) and np.all(stp.phys <= nz - 1)
            assert np.array_equal(stp.phys[stp.mask], stp.vcols[stp.mask])
            if stp.symmetric:
                # virtual window is symmetric about the reflected end
                ref = 0 if stp.mode == "reflect_lo" else nz - 1
                assert stp.vcols[0] + stp.vcols[-1] == 2 * ref
                assert stp.M.shape == (1, 1) and stp.M[0, 0] > 0

    def test_short_domain_modes(self, short):
        _, dec = short
        assert [stp.mode for stp in dec.strips] == \
            ["reflect_lo", "full", "reflect_hi"]

    def test_cofunction_flux_near_one(self, mini):
        _, dec = mini
        wt = (dec.op.omega * dec.op.kernel)[:-1]
        W = wt @ dec._Tphi
        assert abs(W - 1.0) < 5e-4
        # the defect shrinks at second order with the s-step
        dec2 = build_decomposition(mini[0], h_s=2.5 / 80, n_zsub=12)
        wt2 = (dec2.op.omega * dec2.op.kernel)[:-1]
        assert abs(wt2 @ dec2._Tphi - 1.0) < 0.35 * abs(W - 1.0)

    def test_moment_matrix_structure(self, mini):
        _, dec = mini
        for stp in dec.strips:
            if stp.mode != "interior":
                continue
            M = stp.M
            # off-diagonals vanish by parity of the correction profiles
            assert abs(M[0, 1]) < 1e-10 * M[0, 0]
            assert abs(M[1, 0]) < 1e-10 * M[0, 0]
            # flux * cutoff mass: close to 3 pi by construction
            assert M[0, 0] == pytest.approx(3 * np.pi, rel=5e-3)
            assert 60.0 < M[1, 1] < 80.0

    def test_local_finiteness(self, mini):
        _, dec = mini
        rho_max = max(stp.rho_j for stp in dec.strips)
        bound = 2 * (5 * rho_max / 6) / np.pi + 2
        for zk in dec.z[::5]:
            n = sum(1 for stp in dec.strips
                    if abs(zk - stp.z_j) <= 5 * stp.rho_j / 6)
            assert n <= bound

    def test_validation_errors(self, mini):
        ds, dec = mini
        with pytest.raises(ValueError, match="z-grid"):
            build_decomposition(ds, n_zsub=5)
        with pytest.raises(ValueError, match="s_top"):
            build_decomposition(ds, s_top=2.0)
        with pytest.raises(ValueError, match="rho_floor"):
            build_decomposition(ds, rho_floor=2.0 * np.pi)
        with pytest.raises(ValueError, match="rho_cap"):
            build_decomposition(ds, rho_cap=4.0 * np.pi,
                                rho_floor=6.0 * np.pi)
        with pytest.raises(ValueError, match="too short"):
            build_decomposition(power_domain(0.1, 0.8))
        with pytest.raises(ValueError, match="does not match"):
            solve_global(np.zeros((3, 4)), ds, dec=dec)


class TestPieces:
    def test_exactness_every_mode(self, mini, short):
        cases = []
        for ds, dec in (mini, short):
            E_int = generic_E(dec)
            seen = set()
            for stp in dec.strips:
                if stp.mode in seen:
                    continue
                seen.add(stp.mode)
                cases.append((dec, stp.j, window_piece(dec, stp.j, E_int)))
        assert len(cases) == 6   # 3 modes on mini, 3 on short (incl. full)
        assert {dec.strips[j].mode for dec, j, _ in cases} == \
            {"interior", "reflect_lo", "reflect_hi", "full"}
        for dec, j, E_j in cases:
            piece = solve_piece(dec, j, E_j, with_certs=True)
            c = piece.certificates
            scale = max(1.0, float(np.max(np.abs(E_j))))
            assert c["residual"] < 1e-10 * scale
            assert abs(c["moments_after"][0]) < 1e-12 * scale
            assert abs(c["moments_after"][1]) < 1e-11 * scale
            if dec.strips[j].mode != "full":
                assert abs(c["A_end"]) < 1e-10 * scale

    def test_reflected_restriction_matches_global_stencil(self, mini):
        """At a domain end the window solve must agree with the global
        mirror closure after restriction; the folded correction profiles
        make that exact, not just O(h^2)."""
        _, dec = mini
        E_int = generic_E(dec)
        for j, col in ((0, 0), (dec.J, dec.z.size - 1)):
            stp = dec.strips[j]
            E_j = window_piece(dec, j, E_int)
            piece = solve_piece(dec, j, E_j)
            W = np.zeros((dec.op.s_full.size, dec.z.size))
            W[:, stp.vcols[stp.mask]] += piece.v_star[:, stp.mask]
            gres = apply_interior(dec.op, W, dec.h_z)
            k = int(np.where(stp.vcols == col)[0][0])
            assert np.max(np.abs(gres[:, col] - E_j[:, k])) < 1e-10

    def test_piece_linearity(self, mini):
        _, dec = mini
        E_int = generic_E(dec)
        rng = np.random.default_rng(3)
        E2 = rng.standard_normal(E_int.shape)
        j = 9
        Ea = window_piece(dec, j, E_int)
        Eb = window_piece(dec, j, E2)
        va = solve_piece(dec, j, Ea).v
        vb = solve_piece(dec, j, Eb).v
        vab = solve_piece(dec, j, 2.0 * Ea - 0.5 * Eb).v
        err = np.max(np.abs(vab - 2.0 * va + 0.5 * vb))
        assert err < 1e-11 * max(1.0, np.max(np.abs(vab)))

    def test_projection_parity(self, mini):
        _, dec = mini
        j = 10
        stp = dec.strips[j]
        f = np.exp(-(dec.op.s_full[1:-1] - 1.0) ** 2)
        compact = build_cutoffs().dual(3.0)(stp.zbar)
        g_even = np.exp(-stp.zbar ** 2) * compact
        g_odd = stp.zbar * g_even
        ce = project_corrections(dec, j, np.outer(f, g_even))
        co = project_corrections(dec, j, np.outer(f, g_odd))
        assert abs(ce.bbar) < 1e-10 * (abs(ce.abar) + 1e-30)
        assert abs(co.abar) < 1e-10 * (abs(co.bbar) + 1e-30)

    def test_lift_obstruction_errors(self, mini, short):
        _, dec = mini
        j = next(stp.j for stp in dec.strips if stp.mode == "interior")
        nwin = dec.strips[j].vcols.size
        bad = np.outer(dec.op.kernel[:-1], np.ones(nwin))
        with pytest.raises(ValueError, match="lift"):
            strong_orthogonalize(dec, j, bad)
        _, decf = short
        jf = next(stp.j for stp in decf.strips if stp.mode == "full")
        badf = np.outer(decf.op.kernel[:-1], np.ones(decf.strips[jf].vcols.size))
        with pytest.raises(ValueError, match="lift"):
            strong_orthogonalize(decf, jf, badf)

    @settings(max_examples=8, deadline=None)
    @given(seed=st.integers(0, 2 ** 31 - 1))
    def test_exactness_random_pieces(self, mini, seed):
        _, dec = mini
        rng = np.random.default_rng(seed)
        s_i = dec.op.s_full[1:-1]
        modes = rng.standard_normal(3)
        prof = (modes[0] * np.exp(-(s_i - rng.uniform(0.3, 2.0)) ** 2)
                + modes[1] * np.tanh(s_i))
        gz = np.cos(rng.uniform(0.2, 3.0) * dec.z + rng.uniform(0, 6.0))
        E_int = np.outer(prof, gz) + modes[2] * 0.1
        j = int(rng.integers(0, dec.J + 1))
        E_j = window_piece(dec, j, E_int)
        piece = solve_piece(dec, j, E_j, with_certs=True)
        scale = max(1.0, float(np.max(np.abs(E_j))))
        assert piece.certificates["residual"] < 1e-9 * scale


class TestGlobal:
    def test_manufactured_recovery(self, recovery):
        dec, w, _, gs = recovery
        assert gs.converged
        assert len(gs.iterations) <= 5
        assert gs.delta_bar < 1e-5
        diff = kernel_gauge_normalize(dec.op, gs.u.values - w)
        assert np.max(np.abs(diff)) < 1e-7 * np.max(np.abs(w))

    def test_telescope_identity(self, recovery):
        dec, _, E_full, gs = recovery
        R = residual_field(gs, E_full)
        assert np.max(np.abs(R - gs.final_residual)) < 1e-11
        assert gs.certificates["final_gamma"] <= 1e-10 * gs.gamma0

    def test_gauge_normalize_kills_moment(self, mini):
        _, dec = mini
        rng = np.random.default_rng(1)
        U = rng.standard_normal((dec.op.s_full.size, dec.z.size))
        m = dec.op.moment(kernel_gauge_normalize(dec.op, U)[1:])
        assert np.max(np.abs(m)) < 1e-13

    def test_zero_inhomogeneity(self, mini):
        ds, dec = mini
        Z = np.zeros((dec.op.s_full.size, dec.z.size))
        gs = solve_global(Z, ds, dec=dec)
        assert gs.converged and gs.iterations == []
        assert np.max(np.abs(gs.u.values)) == 0.0

    def test_field_and_array_inputs_agree(self, mini):
        ds, dec = mini
        s_full, z = dec.op.s_full, dec.z
        vals = np.outer(np.exp(-(s_full - 1.0) ** 2) * s_full,
                        np.exp(-(z - 30.0) ** 2))
        g1 = solve_global(ScalarField(s_full, z, vals), ds, dec=dec)
        g2 = solve_global(vals, ds, dec=dec)
        assert np.max(np.abs(g1.u.values - g2.u.values)) < 1e-14

    def test_short_domain_single_sweep(self, short):
        """When the whole z-range sits inside every dual plateau the cut
        solutions are never truncated and one sweep is exact."""
        ds, dec = short
        E_int = generic_E(dec)
        E = np.vstack([np.zeros(dec.z.size), E_int, np.zeros(dec.z.size)])
        gs = solve_global(E, ds, dec=dec, rtol=1e-9)
        assert gs.converged and len(gs.iterations) == 1
        assert gs.delta_bar < 1e-9

    def test_contraction_study(self, contraction_runs):
        d1 = contraction_runs[0.1]
        d2 = contraction_runs[0.05]
        assert d1.converged and d2.converged
        assert d1.delta_bar < 1e-3 and d2.delta_bar < 1e-3
        # slower profile descent means weaker coupling between strips
        assert d2.delta_bar < d1.delta_bar

    def test_no_contraction_raises(self):
        """Coarse z-grid plus the minimal dual radius: the cutoff smear
        reaches the correction fields and the sweep amplifies instead."""
        ds = power_domain(0.1, 0.05)
        dec = build_decomposition(ds, s_top=2.2, h_s=2.2 / 36, n_zsub=8,
                                  rho_floor=2.75 * np.pi)
        lam_p = ds.rep.derivs_of_z(dec.z)["lam_p"]
        E = np.outer(np.tanh(dec.op.s_full), lam_p)
        E += 0.01 * np.outer(np.exp(-(dec.op.s_full - 0.9) ** 2),
                             np.sin(1.1 * dec.z))
        with pytest.raises(RuntimeError, match="no contraction"):
            solve_global(E, ds, dec=dec)


class TestArtifacts:
    def test_iteration_report_roundtrip(self, recovery, tmp_path):
        _, _, _, gs = recovery
        path = tmp_path / "report.json"
        write_iteration_report(gs, path)
        rep = json.loads(path.read_text())
        assert rep["converged"] is True
        assert rep["gamma0"] == gs.gamma0
        assert len(rep["rho"]) == gs.dec.J + 1
        assert len(rep["iterations"]) == len(gs.iterations)
        assert {"gamma_i", "delta_i", "active_strips"} <= \
            set(rep["iterations"][0])
        assert rep["grid"]["n_strips"] == gs.dec.J + 1

    def test_field_csv(self, recovery, tmp_path):
        _, _, _, gs = recovery
        path = tmp_path / "u.csv"
        write_field_csv(gs.u, path)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "s,z,u"
        assert len(lines) == 1 + gs.u.s.size * gs.u.z.size
        s0, z0, u0 = lines[1].split(",")
        assert float(s0) == 0.0 and float(z0) == 0.0
        assert float(u0) == pytest.approx(gs.u.values[0, 0])
