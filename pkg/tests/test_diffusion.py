import math

import numpy as np
import pytest

from ccgsim import (CCGParams, DiffusionTensor, MCSettings, ParticleConfig,
                    diffusion_far, diffusion_mc)

from conftest import rand_config


def two_body(separation, m=1.0):
    return ParticleConfig(np.array([m, m]),
                          np.array([[0.0, 0.0, 0.0], [separation, 0.0, 0.0]]))


class TestFarField:
    def test_two_body_hand_expansion(self, unit_params):
        # for two masses the kicks are equal and opposite, so every
        # block is the same rank-one dyadic up to sign
        m1, m2, r = 2.0, 3.0, 7.0
        cfg = ParticleConfig(np.array([m1, m2]),
                             np.array([[0, 0, 0], [r, 0, 0.0]]))
        a = diffusion_far(cfg, unit_params)
        qmag = unit_params.G * m1 * m2 / (unit_params.gamma * r**2)
        dyad = np.zeros((3, 3))
        dyad[0, 0] = (qmag / unit_params.hbar)**2
        assert np.allclose(a.blocks[0, 0], dyad, rtol=1e-14)
        assert np.allclose(a.blocks[1, 1], dyad, rtol=1e-14)
        assert np.allclose(a.blocks[0, 1], -dyad, rtol=1e-14)
        assert np.allclose(a.blocks[1, 0], -dyad, rtol=1e-14)

    def test_psd_and_symmetry(self, unit_params):
        rng = np.random.default_rng(2)
        for n in (2, 3, 5):
            cfg = rand_config(rng, n)
            a = diffusion_far(cfg, unit_params)
            assert a.symmetry_defect() <= 1e-15 * np.max(np.abs(a.full()))
            assert a.is_psd()

    def test_coincident_rejected(self, unit_params):
        cfg = ParticleConfig(np.array([1.0, 1.0]), np.zeros((2, 3)))
        with pytest.raises(ValueError):
            diffusion_far(cfg, unit_params)

    def test_exchange_symmetry(self, unit_params):
        rng = np.random.default_rng(4)
        pos = rng.uniform(-4, 4, size=(3, 3))
        masses = np.array([1.5, 1.5, 3.0])
        a = diffusion_far(ParticleConfig(masses, pos), unit_params)
        b = diffusion_far(ParticleConfig(masses, pos[[1, 0, 2]]), unit_params)
        perm = [1, 0, 2]
        assert np.allclose(a.blocks[np.ix_(perm, perm)], b.blocks, rtol=1e-14)


class TestMonteCarlo:
    def test_single_particle_zero(self, unit_params):
        cfg = ParticleConfig(np.array([1.0]), np.zeros((1, 3)))
        est = diffusion_mc(cfg, unit_params, MCSettings(n_samples=100, seed=1))
        assert np.array_equal(est.value, np.zeros((1, 1, 3, 3)))
        assert np.array_equal(est.std_error, np.zeros((1, 1, 3, 3)))

    def test_fixed_seed_bit_identical(self, unit_params):
        cfg = two_body(5.0)
        mc = MCSettings(n_samples=4000, seed=99)
        a = diffusion_mc(cfg, unit_params, mc)
        b = diffusion_mc(cfg, unit_params, mc)
        assert np.array_equal(a.value, b.value)
        assert np.array_equal(a.std_error, b.std_error)

    def test_thread_count_invariance(self, unit_params):
        cfg = two_body(5.0)
        a = diffusion_mc(cfg, unit_params,
                         MCSettings(n_samples=40000, seed=7, threads=1))
        b = diffusion_mc(cfg, unit_params,
                         MCSettings(n_samples=40000, seed=7, threads=8))
        assert np.array_equal(a.value, b.value)

    def test_near_field_finite_and_error_scaling(self, unit_params):
        # regularized kicks keep the estimate finite at a tenth of the
        # resolution, and the error shrinks like 1/sqrt(2) per doubling
        cfg = two_body(0.1)
        e1 = diffusion_mc(cfg, unit_params, MCSettings(n_samples=20000, seed=3))
        e2 = diffusion_mc(cfg, unit_params, MCSettings(n_samples=40000, seed=3))
        assert np.all(np.isfinite(e1.value))
        r = e2.std_error[0, 0, 0, 0] / e1.std_error[0, 0, 0, 0]
        assert r == pytest.approx(1.0 / math.sqrt(2.0), rel=0.05)

    def test_far_field_agreement(self, unit_params):
        # heavy masses so the pair resolution is far below the
        # separation; the rank-one far form then sits inside the noise
        # of the dominant entries, and the transverse variance entries
        # it drops stay below the dominant-entry error band
        cfg = two_body(20.0, m=1000.0)
        est = diffusion_mc(cfg, unit_params, MCSettings(n_samples=100000, seed=42))
        far = diffusion_far(cfg, unit_params)
        diff = np.abs(est.value - far.blocks)
        se_max = float(np.max(est.std_error))
        assert float(np.max(diff)) <= 3.0 * se_max
        xx = np.s_[:, :, 0, 0]
        assert np.all(diff[xx] <= 3.0 * est.std_error[xx])

    def test_mean_psd(self, unit_params):
        cfg = two_body(1.5)
        est = diffusion_mc(cfg, unit_params, MCSettings(n_samples=30000, seed=12))
        t = DiffusionTensor(est.value)
        assert t.min_eigenvalue() >= -1e-10 * np.max(np.linalg.eigvalsh(t.full()))
        assert t.symmetry_defect() <= 1e-12 * np.max(np.abs(t.full()))

    def test_sample_floor(self, unit_params):
        with pytest.raises(ValueError):
            diffusion_mc(two_body(3.0), unit_params, MCSettings(n_samples=1, seed=0))


def test_blocks_shape_validation():
    with pytest.raises(ValueError):
        DiffusionTensor(np.zeros((2, 3, 3, 3)))
