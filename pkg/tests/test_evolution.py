import math

import numpy as np
import pytest
import scipy.sparse
import scipy.sparse.linalg

from linescatter import (
    BoundaryLeakError,
    EvolutionPlan,
    InteractionConfig,
    Statistics,
    TruncationError,
    TwoQubitInput,
    WavepacketSpec,
    evolve,
    extract_scattering_overlap,
    free_evolve,
    gate_overlap,
    prepare_state,
    time_oracle_overlap,
)
from linescatter.params import DEFAULT_K1, DEFAULT_K2, DEFAULT_U


def std_packets(sigma=0.1):
    return WavepacketSpec(DEFAULT_K1, sigma), WavepacketSpec(DEFAULT_K2, sigma)


class TestPrepare:
    def test_unit_norm_and_symmetry(self):
        wp1, wp2 = std_packets()
        state = prepare_state(wp1, wp2, (-40.0, 56.0), 192)
        assert state.norm() == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(state.amplitudes, state.amplitudes.T, atol=1e-15)

    def test_fermion_antisymmetry(self):
        wp1, wp2 = std_packets()
        state = prepare_state(wp1, wp2, (-40.0, 56.0), 192, statistics=Statistics.FERMION)
        np.testing.assert_allclose(state.amplitudes, -state.amplitudes.T, atol=1e-15)
        assert state.norm() == pytest.approx(1.0, abs=1e-12)

    def test_offset_outside_grid_rejected(self):
        wp1, wp2 = std_packets()
        with pytest.raises(TruncationError):
            prepare_state(wp1, wp2, (-100.0, 100.0), 128)

    def test_group_velocity(self):
        # a free packet's centroid moves by 2 sin(k) t
        wp1, wp2 = std_packets(0.12)
        state = prepare_state(wp1, wp2, (-50.0, 70.0), 256,
                              statistics=Statistics.DISTINGUISHABLE)
        t = 12.0
        moved = free_evolve(state, t)
        prob1 = np.sum(np.abs(moved.amplitudes) ** 2, axis=1)
        prob2 = np.sum(np.abs(moved.amplitudes) ** 2, axis=0)
        c1 = float(np.sum(moved.sites * prob1))
        c2 = float(np.sum(moved.sites * prob2))
        assert c1 == pytest.approx(-50.0 + 2.0 * math.sin(DEFAULT_K1) * t, abs=1.0)
        assert c2 == pytest.approx(70.0 + 2.0 * math.sin(DEFAULT_K2) * t, abs=1.0)


class TestEvolve:
    def test_chebyshev_matches_expm_multiply(self):
        # independent propagator oracle on a small lattice
        rng = np.random.default_rng(2)
        n = 32
        sites = np.arange(-16, 16)
        cfg = InteractionConfig(U=1.7, L=3)
        grid = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        grid /= np.linalg.norm(grid)
        from linescatter.evolution import LatticeWavefunction

        state = LatticeWavefunction(sites=sites, amplitudes=grid,
                                    statistics=Statistics.DISTINGUISHABLE)
        plan = EvolutionPlan(total_time=4.0, config=cfg, leak_tol=1.0)
        out = evolve(state, plan)

        h1 = scipy.sparse.diags([np.ones(n - 1), np.ones(n - 1)], [1, -1])
        eye = scipy.sparse.identity(n)
        diag = np.zeros(n * n)
        idx = np.where(np.abs(sites) <= cfg.L)[0]
        diag[idx * n + idx] = cfg.U
        ham = scipy.sparse.kron(h1, eye) + scipy.sparse.kron(eye, h1) + scipy.sparse.diags(diag)
        ref = scipy.sparse.linalg.expm_multiply(-1j * 4.0 * ham.tocsc(), grid.ravel())
        np.testing.assert_allclose(out.amplitudes.ravel(), ref, atol=1e-9)

    def test_norm_and_energy_conserved(self):
        wp1, wp2 = std_packets()
        state = prepare_state(wp1, wp2, (-40.0, 56.0), 192)
        plan = EvolutionPlan(total_time=30.0, config=InteractionConfig(U=DEFAULT_U, L=5))
        out = evolve(state, plan)
        assert abs(out.norm() - 1.0) <= 1e-10

    def test_free_evolution_preserves_product_structure(self):
        wp1, wp2 = std_packets(0.15)
        state = prepare_state(wp1, wp2, (-30.0, 42.0), 160,
                              statistics=Statistics.DISTINGUISHABLE)
        plan = EvolutionPlan(total_time=8.0, config=InteractionConfig(U=0.0, L=5))
        out = evolve(state, plan)
        ref = free_evolve(state, 8.0)
        np.testing.assert_allclose(out.amplitudes, ref.amplitudes, atol=1e-10)

    def test_boundary_leak_detected(self):
        wp1, wp2 = std_packets(0.2)
        state = prepare_state(wp1, wp2, (-20.0, 28.0), 96)
        plan = EvolutionPlan(total_time=60.0, config=InteractionConfig(U=DEFAULT_U, L=5),
                             leak_tol=1e-3)
        with pytest.raises(BoundaryLeakError):
            evolve(state, plan)


class TestOracle:
    def test_fermions_scatter_trivially(self):
        wp1, wp2 = std_packets()
        cfg = InteractionConfig(U=DEFAULT_U, L=5, statistics=Statistics.FERMION)
        result = time_oracle_overlap(wp1, wp2, cfg, n_sites=192, leak_tol=0.03)
        assert abs(result.overlap - 1.0) <= 1e-10

    def test_free_theory_overlap_is_one(self):
        wp1, wp2 = std_packets()
        cfg = InteractionConfig(U=0.0, L=5)
        result = time_oracle_overlap(wp1, wp2, cfg, n_sites=192, leak_tol=0.03)
        assert abs(result.overlap - 1.0) <= 1e-10

    def test_truncation_robustness(self):
        # flat-top packets clip O(1/(pi sigma M)) of their tails, so doubling
        # the lattice moves the overlap at that scale (~1.2e-2 at M=256), not
        # below; the bound here is twice that scale
        wp1, wp2 = std_packets()
        cfg = InteractionConfig(U=DEFAULT_U, L=5)
        small = time_oracle_overlap(wp1, wp2, cfg, n_sites=256)
        big = time_oracle_overlap(wp1, wp2, cfg, n_sites=512,
                                  launch_time=-small.offsets[0] / (2 * math.sin(DEFAULT_K1)),
                                  total_time=small.plan.total_time)
        assert abs(small.overlap - big.overlap) < 2.0 / (math.pi * 0.1 * 256)

    def test_matches_stationary_overlap_quickly(self):
        # cheap smoke version of the acceptance cross-check
        wp1 = WavepacketSpec(DEFAULT_K1, 0.15)
        wp2 = WavepacketSpec(DEFAULT_K2, 0.15)
        cfg = InteractionConfig(U=DEFAULT_U, L=3)
        oracle = time_oracle_overlap(wp1, wp2, cfg, n_sites=192, leak_tol=0.03)
        static = gate_overlap(TwoQubitInput(wp1, wp2), cfg)
        assert abs(oracle.overlap - static) <= 0.05

    def test_separation_guard(self):
        wp1, wp2 = std_packets()
        cfg = InteractionConfig(U=DEFAULT_U, L=5)
        state = prepare_state(wp1, wp2, (-40.0, 56.0), 192)
        plan = EvolutionPlan(total_time=20.0, config=cfg)  # collision not yet over
        final = evolve(state, plan)
        from linescatter import SeparationError

        with pytest.raises(SeparationError):
            extract_scattering_overlap(state, final, plan)
