import math

import numpy as np
import pytest
import scipy.linalg

from fbmflow import (
    FbmPath,
    FbmSamplingError,
    TimeGrid,
    fbm_covariance,
    holder_norm,
    read_path_csv,
    sample_paths,
    write_path_csv,
)
from fbmflow.fbm import (
    CHOLESKY_STEP_LIMIT,
    _circulant_draw,
    _unit_cholesky_factor,
    _unit_circulant_sqrt_eigs,
    fgn_autocovariance,
)

GRID = TimeGrid(1.0, 64)


# ---------------------------------------------------------------------------
# covariance function
# ---------------------------------------------------------------------------


def test_covariance_golden_values():
    # 0.5 * (1 + 2^1.5 - 1) = sqrt(2)
    assert fbm_covariance(1.0, 2.0, 0.75) == pytest.approx(math.sqrt(2.0), rel=1e-14)
    assert fbm_covariance(1.0, 1.0, 0.6) == pytest.approx(1.0, rel=1e-14)
    # H = 1/2 is Brownian motion: cov = min(s, t)
    assert fbm_covariance(0.3, 0.7, 0.5) == pytest.approx(0.3, rel=1e-14)
    assert fbm_covariance(0.0, 0.7, 0.9) == 0.0


def test_covariance_symmetry_and_diagonal():
    rng = np.random.Generator(np.random.Philox(key=1))
    for _ in range(50):
        s, t = rng.uniform(0.0, 3.0, size=2)
        hurst = rng.uniform(0.05, 0.95)
        assert fbm_covariance(s, t, hurst) == fbm_covariance(t, s, hurst)
        assert fbm_covariance(t, t, hurst) == pytest.approx(t ** (2 * hurst), rel=1e-12)


def test_covariance_rejects_bad_inputs():
    with pytest.raises(FbmSamplingError):
        fbm_covariance(1.0, 2.0, 1.0)
    with pytest.raises(FbmSamplingError):
        fbm_covariance(-1.0, 2.0, 0.5)


def test_fgn_autocovariance_identities():
    # lag 0 variance is 1; H = 1/2 noise is white
    assert fgn_autocovariance(0, 0.8) == pytest.approx(1.0, rel=1e-14)
    assert np.allclose(fgn_autocovariance(np.arange(1, 10), 0.5), 0.0, atol=1e-15)
    # telescoping: the full covariance matrix sums to Var B(n) = n^2H
    for hurst in (0.55, 0.75, 0.9):
        n = 20
        cov = scipy.linalg.toeplitz(fgn_autocovariance(np.arange(n), hurst))
        assert np.sum(cov) == pytest.approx(n ** (2 * hurst), rel=1e-12)


# ---------------------------------------------------------------------------
# generators reproduce the covariance exactly (no Monte Carlo needed)
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("n,hurst", [(16, 0.6), (16, 0.9), (250, 0.75)])
def test_cholesky_factor_gram_matches_covariance(n, hurst):
    target = scipy.linalg.toeplitz(fgn_autocovariance(np.arange(n), hurst))
    factor = _unit_cholesky_factor(n, hurst)
    assert np.max(np.abs(factor @ factor.T - target)) < 1e-10


class _FeedGenerator:
    """Stand-in for a Generator that returns a preset normal-draw vector."""

    def __init__(self, vector):
        self.vector = np.asarray(vector, dtype=float)
        self.cursor = 0

    def standard_normal(self, count):
        out = self.vector[self.cursor : self.cursor + count]
        self.cursor += count
        return np.array(out)


@pytest.mark.parametrize("n,hurst", [(8, 0.6), (33, 0.75), (64, 0.9)])
def test_circulant_draw_is_an_exact_covariance_factor(n, hurst):
    # the draw is linear in its normals, so feeding the identity matrix
    # materialises the linear map; its gram must be the fGn covariance
    sqrt_eigs = _unit_circulant_sqrt_eigs(n, hurst)
    draws = 2 + 2 * (n - 1)
    basis = np.eye(draws)
    columns = [_circulant_draw(sqrt_eigs, _FeedGenerator(basis[i]), n) for i in range(draws)]
    gen = np.column_stack(columns)
    target = scipy.linalg.toeplitz(fgn_autocovariance(np.arange(n), hurst))
    assert np.max(np.abs(gen @ gen.T - target)) < 1e-10


# ---------------------------------------------------------------------------
# sampling contract
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("method", ["cholesky", "circulant"])
def test_sampling_is_deterministic(method):
    a = sample_paths(GRID, 0.75, channels=3, seed=11, method=method)
    b = sample_paths(GRID, 0.75, channels=3, seed=11, method=method)
    assert np.array_equal(a.values, b.values)
    c = sample_paths(GRID, 0.75, channels=3, seed=12, method=method)
    assert not np.array_equal(a.values, c.values)


def test_regression_pin_seed_zero():
    # frozen snapshot of the documented Philox key map; a change here breaks
    # every previously written report
    p = sample_paths(GRID, 0.75, channels=1, seed=0, method="cholesky")
    assert p.values[-1, 0] == pytest.approx(-1.028183622940411, rel=1e-14)
    q = sample_paths(GRID, 0.75, channels=1, seed=0, method="circulant")
    assert q.values[-1, 0] == pytest.approx(0.9106192358190232, rel=1e-14)


@pytest.mark.parametrize("method", ["cholesky", "circulant"])
def test_channel_key_is_seed_xor_channel(method):
    # channel 1 under seed s must replay bit for bit as channel 0 under
    # seed s XOR 1; this is the isolated-regeneration contract
    a = sample_paths(GRID, 0.7, channels=2, seed=6, method=method)
    b = sample_paths(GRID, 0.7, channels=1, seed=6 ^ 1, method=method)
    assert np.array_equal(a.values[:, 1], b.values[:, 0])


def test_paths_start_at_zero_and_are_finite():
    path = sample_paths(GRID, 0.6, channels=2, seed=4)
    assert np.all(path.values[0] == 0.0)
    assert np.all(np.isfinite(path.values))
    assert path.values.shape == (65, 2)


def test_self_similarity_under_horizon_scaling():
    # same unit-spacing draws, so values scale exactly by (T2/T1)^H
    a = sample_paths(TimeGrid(1.0, 128), 0.8, seed=21)
    b = sample_paths(TimeGrid(2.0, 128), 0.8, seed=21)
    assert np.allclose(b.values, 2.0**0.8 * a.values, rtol=1e-13, atol=1e-15)


def test_brownian_indistinguishable_increment_lag_correlation():
    # H = 1/2: increments are white, so the sample lag-1 autocorrelation of a
    # long path is small (pure statistics, generous bound)
    path = sample_paths(TimeGrid(1.0, 4096), 0.5, seed=33, method="circulant")
    inc = np.diff(path.values[:, 0])
    corr = np.corrcoef(inc[:-1], inc[1:])[0, 1]
    assert abs(corr) < 0.08


def test_refinement_keeps_one_realisation():
    path = sample_paths(GRID, 0.75, seed=9, refinement=4)
    assert path.fine_values.shape == (257, 1)
    assert np.array_equal(path.values, path.fine_values[::4])
    # stride counts cells per coarse cell: 1 is coarse, refinement is finest
    assert path.increments(stride=1).shape == (64, 1)
    assert path.increments(stride=4).shape == (256, 1)
    assert np.allclose(path.increments(stride=1), np.diff(path.values, axis=0))
    with pytest.raises(FbmSamplingError):
        path.increments(stride=3)


def test_sampling_rejects_bad_parameters():
    with pytest.raises(FbmSamplingError):
        sample_paths(GRID, 1.2, seed=0)
    with pytest.raises(FbmSamplingError):
        sample_paths(GRID, 0.75, channels=0)
    with pytest.raises(FbmSamplingError):
        sample_paths(GRID, 0.75, seed=-1)
    with pytest.raises(FbmSamplingError):
        sample_paths(GRID, 0.75, method="spectral")
    with pytest.raises(FbmSamplingError):
        sample_paths(GRID, 0.75, refinement=0)


def test_cholesky_cell_limit_points_at_circulant():
    big = TimeGrid(1.0, CHOLESKY_STEP_LIMIT * 2)
    with pytest.raises(FbmSamplingError, match="circulant"):
        sample_paths(big, 0.75, method="cholesky")
    path = sample_paths(big, 0.75, method="circulant")
    assert path.values.shape == (big.steps + 1, 1)


def test_path_container_invariants():
    values = np.zeros((65, 1))
    values[0, 0] = 0.5
    with pytest.raises(FbmSamplingError):
        FbmPath(grid=GRID, hurst=0.75, channels=1, values=values, seed=0, method="cholesky")
    with pytest.raises(FbmSamplingError):
        FbmPath(
            grid=GRID, hurst=0.75, channels=2, values=np.zeros((65, 1)), seed=0, method="cholesky"
        )


# ---------------------------------------------------------------------------
# grid Hölder norm
# ---------------------------------------------------------------------------


def test_holder_norm_constant_is_zero():
    t = np.linspace(0.0, 1.0, 101)
    assert holder_norm(t, np.full(101, 3.2), 0.5) == 0.0


def test_holder_norm_identity_is_one():
    t = np.linspace(0.0, 1.0, 101)
    assert holder_norm(t, t.copy(), 1.0) == pytest.approx(1.0, rel=1e-13)
    # at exponent 1/2 the identity attains (t-s)^(1/2) <= 1 at the full span
    assert holder_norm(t, t.copy(), 0.5) == pytest.approx(1.0, rel=1e-13)


def test_holder_norm_square_golden():
    # sup over [0,1] of (t^2 - s^2)/(t-s)^(1/2) = (4/3) sqrt(2/3), at s = 1/3
    t = np.linspace(0.0, 1.0, 513)
    golden = (4.0 / 3.0) * math.sqrt(2.0 / 3.0)
    assert holder_norm(t, t**2, 0.5) == pytest.approx(golden, rel=2e-6)


def test_holder_norm_vector_scales_euclidean():
    t = np.linspace(0.0, 1.0, 65)
    curve = np.column_stack([t, t])
    scalar = holder_norm(t, t.copy(), 0.7)
    assert holder_norm(t, curve, 0.7) == pytest.approx(math.sqrt(2.0) * scalar, rel=1e-13)


def test_holder_norm_window_restricts_pairs():
    t = np.linspace(0.0, 1.0, 101)
    full = holder_norm(t, t**2, 0.5)
    head = holder_norm(t, t**2, 0.5, window=(0.0, 0.3))
    assert head < full


def test_holder_norm_rejects_bad_exponent():
    t = np.linspace(0.0, 1.0, 11)
    for exponent in (0.0, -0.5, 1.5):
        with pytest.raises(Exception):
            holder_norm(t, t.copy(), exponent)


def test_path_holder_norms_per_channel():
    path = sample_paths(GRID, 0.75, channels=2, seed=5)
    norms = path.holder_norms(0.6875)
    assert norms.shape == (2,)
    assert np.all(norms > 0.0)
    assert norms[0] == holder_norm(path.times, path.values[:, 0], 0.6875)


# ---------------------------------------------------------------------------
# delimited round trip
# ---------------------------------------------------------------------------


def test_csv_round_trip_is_value_exact(tmp_path):
    path = sample_paths(GRID, 0.75, channels=2, seed=17, method="circulant")
    dest = str(tmp_path / "path.csv")
    meta = write_path_csv(path, dest)
    assert meta.endswith(".meta")
    again = read_path_csv(dest)
    assert np.array_equal(again.values, path.values)
    assert again.grid == path.grid
    assert again.hurst == path.hurst
    assert again.seed == path.seed


def test_csv_reader_rejects_mismatched_grid(tmp_path):
    path = sample_paths(GRID, 0.75, seed=3)
    dest = str(tmp_path / "path.csv")
    write_path_csv(path, dest)
    meta = tmp_path / "path.csv.meta"
    meta.write_text(meta.read_text().replace("steps = 64", "steps = 32"))
    with pytest.raises(FbmSamplingError):
        read_path_csv(dest)
