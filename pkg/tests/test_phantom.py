import json

import numpy as np
import pytest

from parallax.errors import InputError
from parallax.fileio import load_manifest, read_cfl
from parallax.fourier import ifft2c
from parallax.grappa import grappa_reconstruct
from parallax.metrics import nmse
from parallax.phantom import (
    PhantomSpec,
    fully_sampled_mask,
    make_dataset,
    make_phantom,
    simulate_acquisition,
)
from parallax.recon import rss, zero_filled_recon
from parallax.sampling import make_equispaced_mask


class TestMakePhantom:
    def test_rss_of_maps_is_one(self):
        _, maps = make_phantom(PhantomSpec(seed=0))
        assert np.max(np.abs(rss(maps.maps) - 1.0)) < 1e-10

    def test_deterministic(self):
        a_img, a_maps = make_phantom(PhantomSpec(seed=42))
        b_img, b_maps = make_phantom(PhantomSpec(seed=42))
        assert np.array_equal(a_img, b_img)
        assert np.array_equal(a_maps.maps, b_maps.maps)

    def test_single_coil_unit_map(self):
        img, maps = make_phantom(PhantomSpec(h=64, w=64, n_coils=1, seed=1))
        sup = np.abs(img) > 0
        assert np.all(maps.maps[0][sup] == 1.0)

    def test_piecewise_constant_magnitude(self):
        img, _ = make_phantom(PhantomSpec(h=64, w=64, n_coils=4, seed=2))
        mags = np.round(np.abs(img), 12)
        assert len(np.unique(mags)) < 40  # few distinct levels, not a texture

    def test_size_validation(self):
        with pytest.raises(InputError):
            PhantomSpec(h=16, w=64)
        with pytest.raises(InputError):
            PhantomSpec(n_coils=0)
        with pytest.raises(InputError):
            PhantomSpec(contrast="t2")


class TestSimulate:
    def test_noiseless_roundtrip(self):
        spec = PhantomSpec(h=64, w=64, n_coils=6, seed=3)
        x, maps = make_phantom(spec)
        k = simulate_acquisition(x, maps, fully_sampled_mask(64), 0.0, 3)
        recovered = rss(ifft2c(k))
        assert np.max(np.abs(recovered - np.abs(x))) < 1e-10

    def test_noise_scaling(self):
        spec = PhantomSpec(h=64, w=64, n_coils=4, seed=4)
        x, maps = make_phantom(spec)
        m = fully_sampled_mask(64)
        clean = simulate_acquisition(x, maps, m, 0.0, 4)
        n1 = simulate_acquisition(x, maps, m, 0.01, 4) - clean
        n2 = simulate_acquisition(x, maps, m, 0.02, 4) - clean
        assert np.std(n2.view(np.float64)) == pytest.approx(2 * np.std(n1.view(np.float64)), rel=1e-12)
        assert np.std(n1.view(np.float64)) == pytest.approx(0.01, rel=0.02)

    def test_grappa_headline_small_batch(self):
        # 10-seed spot check of the 100-seed acceptance criterion
        passes = 0
        for seed in range(10):
            spec = PhantomSpec(seed=seed)
            x, maps = make_phantom(spec)
            k_full = simulate_acquisition(x, maps, fully_sampled_mask(spec.w), 0.0, seed)
            gt = zero_filled_recon(k_full)
            m = make_equispaced_mask(spec.w, 2, 24 / spec.w, seed=seed)
            rec = grappa_reconstruct(np.where(m.sampled, k_full, 0), m, accel=2)
            if nmse(rss(ifft2c(rec)), gt) < 1e-3:
                passes += 1
        assert passes == 10


class TestMakeDataset:
    def test_split_arithmetic_and_determinism(self, tmp_path):
        spec = PhantomSpec(h=32, w=32, n_coils=2, n_ellipses=3, seed=0)
        man_a = make_dataset(10, 4, spec, seed=5, out_dir=tmp_path / "a")
        man_b = make_dataset(10, 4, spec, seed=5, out_dir=tmp_path / "b")
        splits = [s["split"] for s in man_a["samples"]]
        assert len(splits) == 40
        assert splits.count("train") == 28 and splits.count("val") == 6 and splits.count("test") == 6
        a_san = json.dumps(man_a["samples"])
        b_san = json.dumps(man_b["samples"])
        assert a_san == b_san
        for s in man_a["samples"][:3]:
            ka = (tmp_path / "a" / s["kspace_path"]).read_bytes()
            kb = (tmp_path / "b" / s["kspace_path"]).read_bytes()
            assert ka == kb

    def test_manifest_loads_and_validates(self, tmp_path):
        spec = PhantomSpec(h=32, w=32, n_coils=2, n_ellipses=3, seed=0)
        make_dataset(2, 2, spec, seed=7, out_dir=tmp_path)
        manifest = load_manifest(tmp_path / "manifest.json")
        assert len(manifest["samples"]) == 4

    def test_noiseless_roundtrip_per_sample(self, tmp_path):
        spec = PhantomSpec(h=32, w=32, n_coils=3, n_ellipses=3, seed=0, noise_std=0.0)
        manifest = make_dataset(2, 2, spec, seed=9, out_dir=tmp_path)
        for s in manifest["samples"]:
            k = read_cfl(tmp_path / s["kspace_path"])
            img = read_cfl(tmp_path / s["image_path"]).real
            assert np.max(np.abs(rss(ifft2c(k)) - img)) < 1e-5  # float32 storage
