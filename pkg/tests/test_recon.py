import numpy as np
import pytest

from parallax.errors import ConfigError, InputError, NumericalError
from parallax.fourier import fft2c
from parallax.metrics import ssim
from parallax.phantom import PhantomSpec, fully_sampled_mask, make_phantom, simulate_acquisition
from parallax.recon import (
    SensitivityMaps,
    cs_tv_reconstruct,
    estimate_sensitivities,
    rss,
    tv_grad,
    tv_value,
    zero_filled_recon,
)
from parallax.sampling import make_equispaced_mask, make_random_mask
from parallax.grappa import grappa_reconstruct

from oracles import rss_scalar


def _phantom_kspace(seed=0, noise=0.0, shape=(64, 64), coils=8):
    spec = PhantomSpec(h=shape[0], w=shape[1], n_coils=coils, seed=seed, noise_std=noise)
    x, maps = make_phantom(spec)
    k_full = simulate_acquisition(x, maps, fully_sampled_mask(spec.w), noise, seed)
    return x, maps, k_full


class TestRss:
    def test_single_coil_is_magnitude(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((1, 6, 6)) + 1j * rng.standard_normal((1, 6, 6))
        assert np.allclose(rss(x), np.abs(x[0]), atol=1e-14)

    def test_three_four_five(self):
        imgs = np.stack([np.full((4, 4), 3.0 + 0j), np.full((4, 4), 4j)])
        assert np.allclose(rss(imgs), 5.0, atol=1e-14)

    def test_scalar_loop_oracle(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((4, 8, 8)) + 1j * rng.standard_normal((4, 8, 8))
        assert np.max(np.abs(rss(x) - rss_scalar(x))) < 1e-12

    def test_nonnegative_and_phase_invariant(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((3, 8, 8)) + 1j * rng.standard_normal((3, 8, 8))
        assert np.all(rss(x) >= 0)
        phases = np.exp(1j * rng.uniform(0, 2 * np.pi, size=3))[:, None, None]
        assert np.allclose(rss(phases * x), rss(x), atol=1e-12)


class TestZeroFilled:
    def test_fully_sampled_recovers_ground_truth(self):
        x, maps, k_full = _phantom_kspace(seed=1)
        zf = zero_filled_recon(k_full)
        assert np.max(np.abs(zf - np.abs(x))) < 1e-10

    def test_zero_kspace_gives_zero_image(self):
        assert np.all(zero_filled_recon(np.zeros((2, 8, 8), complex)) == 0)

    def test_worse_than_grappa_r2(self):
        x, maps, k_full = _phantom_kspace(seed=2)
        gt = zero_filled_recon(k_full)
        m4 = make_random_mask(64, 4, 0.125, seed=2)
        zf4 = zero_filled_recon(np.where(m4.sampled, k_full, 0))
        m2 = make_equispaced_mask(64, 2, 0.25, seed=2)
        g2 = zero_filled_recon(grappa_reconstruct(np.where(m2.sampled, k_full, 0), m2, accel=2))
        rng = float(np.max(gt))
        assert ssim(zf4, gt, rng) < ssim(g2, gt, rng)


class TestSensitivities:
    def test_matches_true_maps(self):
        spec = PhantomSpec(seed=3)
        x, maps = make_phantom(spec)
        k_full = simulate_acquisition(x, maps, fully_sampled_mask(spec.w), 0.0, 3)
        m = make_equispaced_mask(spec.w, 2, 24 / spec.w, seed=3)
        est = estimate_sensitivities(np.where(m.sampled, k_full, 0), m)
        region = est.support & (np.abs(x) > 0)
        mae = float(np.mean(np.abs(est.maps - maps.maps)[:, region]))
        assert mae < 0.05

    def test_rss_normalized_on_support(self):
        _, _, k_full = _phantom_kspace(seed=4)
        m = make_equispaced_mask(64, 2, 0.25, seed=4)
        est = estimate_sensitivities(np.where(m.sampled, k_full, 0), m)
        vals = rss(est.maps)[est.support]
        assert np.max(np.abs(vals - 1.0)) < 1e-6
        assert np.all(rss(est.maps)[~est.support] == 0)

    def test_single_coil_map_is_one(self):
        spec = PhantomSpec(h=64, w=64, n_coils=1, seed=5)
        x, maps = make_phantom(spec)
        k = simulate_acquisition(x, maps, fully_sampled_mask(64), 0.0, 5)
        m = make_equispaced_mask(64, 2, 0.25, seed=5)
        est = estimate_sensitivities(np.where(m.sampled, k, 0), m)
        assert np.allclose(np.abs(est.maps[0][est.support]), 1.0, atol=1e-9)

    def test_empty_acs_rejected(self):
        m = make_equispaced_mask(64, 2, 0.0, seed=0)
        with pytest.raises(ConfigError):
            estimate_sensitivities(np.ones((2, 8, 64), complex), m)


class TestTv:
    def test_constant_image_has_zero_tv(self):
        x = np.full((16, 16), 2.3 + 1.1j)
        assert tv_value(x) < 1e-6 * 16 * 16
        assert tv_value(x) == 0.0

    def test_nonconstant_has_positive_tv(self):
        x = np.zeros((8, 8), complex)
        x[4:, :] = 1.0
        assert tv_value(x) > 0

    def test_gradient_matches_finite_differences(self):
        # tv_grad returns the paired-real gradient in complex form:
        # d tv / d Re(x) = Re(g), d tv / d Im(x) = Im(g), matching the
        # convention of the data-term gradient A^H r
        rng = np.random.default_rng(6)
        x = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
        g = tv_grad(x)
        h = 1e-6
        for idx in [(0, 0), (2, 3), (5, 5), (3, 1)]:
            for comp, part in ((1.0, np.real), (1j, np.imag)):
                e = np.zeros_like(x)
                e[idx] = comp * h
                num = (tv_value(x + e) - tv_value(x - e)) / (2 * h)
                assert num == pytest.approx(part(g[idx]), rel=1e-5, abs=1e-8)


class TestCsTv:
    def test_unregularized_consistent_system(self):
        x, maps, k_full = _phantom_kspace(seed=7)
        m = fully_sampled_mask(64)
        sol, trace = cs_tv_reconstruct(k_full, m, maps, tv_weight=0.0, iters=5)
        pred = np.where(m.sampled, fft2c(maps.maps * sol), 0)
        resid = float(np.sqrt(np.sum(np.abs(pred - k_full) ** 2)))
        assert resid < 1e-8

    def test_trace_nonincreasing_r4(self):
        x, maps, k_full = _phantom_kspace(seed=8)
        m = make_random_mask(64, 4, 0.125, seed=8)
        k_u = np.where(m.sampled, k_full, 0)
        est = estimate_sensitivities(k_u, m)
        _, trace = cs_tv_reconstruct(k_u, m, est, iters=50)
        totals = [row[3] for row in trace]
        assert all(b <= a for a, b in zip(totals, totals[1:]))
        assert len(trace) == 51

    def test_beats_zero_filled_on_piecewise_constant_phantom(self):
        spec = PhantomSpec(h=64, w=64, n_coils=8, seed=9)
        x, maps = make_phantom(spec)
        k_full = simulate_acquisition(x, maps, fully_sampled_mask(64), 0.0, 9)
        gt = zero_filled_recon(k_full)
        m = make_random_mask(64, 4, 0.125, seed=9)
        k_u = np.where(m.sampled, k_full, 0)
        sol, _ = cs_tv_reconstruct(k_u, m, maps, iters=150)
        rng = float(np.max(gt))
        assert ssim(np.abs(sol), gt, rng) > ssim(zero_filled_recon(k_u), gt, rng)

    def test_divergent_input_raises(self):
        maps = SensitivityMaps(np.ones((1, 8, 8), complex), np.ones((8, 8), bool))
        k = np.zeros((1, 8, 8), complex)
        k[0, 0, 0] = np.inf
        m = fully_sampled_mask(8)
        with pytest.raises(NumericalError):
            cs_tv_reconstruct(k, m, maps, tv_weight=0.0, iters=3)

    def test_bad_iters_rejected(self):
        maps = SensitivityMaps(np.ones((1, 8, 8), complex), np.ones((8, 8), bool))
        with pytest.raises(InputError):
            cs_tv_reconstruct(np.zeros((1, 8, 8), complex), fully_sampled_mask(8), maps, iters=0)
