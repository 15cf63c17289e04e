import numpy as np
import pytest

from krylov_qfi.ensembles import (
    EnsembleSpec,
    draw,
    maximally_mixed,
    noise_mixture,
    random_fullrank,
    random_pure,
    random_rank_r,
)
from krylov_qfi.errors import ConfigError, NotPure


@pytest.mark.parametrize("dim,r", [(4, 1), (8, 2), (16, 3), (16, 16)])
def test_rank_and_validity(dim, r):
    rho = random_rank_r(dim, r, 0)
    assert rho.spectrum.rank == r
    assert np.trace(rho.data).real == pytest.approx(1.0, abs=1e-12)


def test_seed_reproducibility():
    np.testing.assert_array_equal(random_fullrank(8, 3).data, random_fullrank(8, 3).data)
    assert not np.allclose(random_fullrank(8, 3).data, random_fullrank(8, 4).data)
    ss = np.random.SeedSequence(5, spawn_key=(2,))
    np.testing.assert_array_equal(random_pure(4, ss).data, random_pure(4, ss).data)


def test_hilbert_schmidt_mean_purity():
    # E[tr rho^2] = 2d / (d^2 + 1) for the Hilbert-Schmidt measure
    d = 4
    purities = [random_fullrank(d, s).purity() for s in range(2000)]
    assert np.mean(purities) == pytest.approx(2 * d / (d * d + 1), rel=0.02)


def test_haar_pure_mean_overlap():
    d = 8
    overlaps = [np.real(random_pure(d, s).data[0, 0]) for s in range(4000)]
    assert np.mean(overlaps) == pytest.approx(1 / d, rel=0.05)


def test_noise_mixture():
    psi = random_pure(4, 1)
    sigma = maximally_mixed(4)
    rho = noise_mixture(psi, sigma, 0.2)
    np.testing.assert_allclose(rho.data, 0.8 * psi.data + 0.05 * np.eye(4), atol=1e-15)
    np.testing.assert_allclose(noise_mixture(psi, sigma, 0.0).data, psi.data, atol=1e-15)
    with pytest.raises(NotPure):
        noise_mixture(random_fullrank(4, 0), sigma, 0.1)
    with pytest.raises(ValueError):
        noise_mixture(psi, sigma, 1.5)


def test_spec_validation():
    with pytest.raises(ConfigError):
        EnsembleSpec(kind="wishart")
    with pytest.raises(ConfigError):
        EnsembleSpec(kind="rank_r", dim=4)
    with pytest.raises(ConfigError):
        EnsembleSpec(kind="noise_mixture", dim=4)
    with pytest.raises(ConfigError):
        EnsembleSpec(kind="rank_r", dim=4, r=5)


def test_draw_dispatch():
    assert draw(EnsembleSpec("fullrank_hs", 8)).spectrum.rank == 8
    assert draw(EnsembleSpec("rank_r", 8, r=2)).spectrum.rank == 2
    assert draw(EnsembleSpec("haar_pure", 8)).spectrum.rank == 1
    spec = EnsembleSpec("noise_mixture", 8, epsilon=0.1, noise_kind="maximally_mixed")
    rho = draw(spec, seed=3)
    assert rho.spectrum.rank == 8
    assert rho.spectrum.p_min == pytest.approx(0.1 / 8)
    np.testing.assert_array_equal(draw(spec, 3).data, rho.data)
