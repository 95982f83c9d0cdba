"""Exact sampling of multi-channel fractional Brownian motion on uniform grids.

Two generators are provided.  The default factorises the increment
covariance matrix (Cholesky), which is exact for any Hurst index but costs
O(N^2) memory; it is capped at N = 4096 cells.  The alternative embeds the
increment covariance in a circulant matrix and samples through the FFT,
which is also exact whenever the embedding is nonnegative definite (always
the case for fractional Gaussian noise up to roundoff) and scales to large
N.

Randomness comes from the counter-based Philox generator.  Channel
``gamma`` of a path with seed ``s`` draws from ``Philox(key = s XOR gamma)``,
so channels are independent streams and any channel can be regenerated in
isolation.  Outputs are bit-identical for identical
``(grid, hurst, channels, seed, method, refinement)``.
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.linalg

from .grid import GridError, TimeGrid

__all__ = [
    "FbmPath",
    "FbmSamplingError",
    "fbm_covariance",
    "fgn_autocovariance",
    "holder_norm",
    "read_path_csv",
    "sample_paths",
    "write_path_csv",
]

CHOLESKY_STEP_LIMIT = 4096

_METHODS = ("cholesky", "circulant")


class FbmSamplingError(RuntimeError):
    """Sampling failed (bad parameters or covariance factorisation trouble)."""


def _check_hurst(hurst: float) -> float:
    hurst = float(hurst)
    if not (0.0 < hurst < 1.0) or not np.isfinite(hurst):
        raise FbmSamplingError(f"hurst index must lie in (0, 1), got {hurst!r}")
    return hurst


def fbm_covariance(s, t, hurst: float):
    """Covariance E[B(s) B(t)] = (t^2H + s^2H - |t - s|^2H) / 2 of one channel.

    Accepts scalars or broadcastable arrays of nonnegative times.
    """
    hurst = _check_hurst(hurst)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0.0) or np.any(t < 0.0):
        raise FbmSamplingError("covariance times must be nonnegative")
    two_h = 2.0 * hurst
    out = 0.5 * (np.abs(t) ** two_h + np.abs(s) ** two_h - np.abs(t - s) ** two_h)
    return out if out.ndim else float(out)


def fgn_autocovariance(lags, hurst: float):
    """Autocovariance of unit-spacing fractional Gaussian noise at integer lags."""
    hurst = _check_hurst(hurst)
    j = np.abs(np.asarray(lags, dtype=float))
    two_h = 2.0 * hurst
    return 0.5 * ((j + 1.0) ** two_h - 2.0 * j**two_h + np.abs(j - 1.0) ** two_h)


# ---------------------------------------------------------------------------
# cached generator state (unit spacing; the h^H scale is applied afterwards)
# ---------------------------------------------------------------------------

_cache_lock = threading.Lock()
_unit_cache: OrderedDict[tuple, np.ndarray] = OrderedDict()
_UNIT_CACHE_MAX = 4


def _cache_get(key: tuple, build):
    with _cache_lock:
        if key in _unit_cache:
            _unit_cache.move_to_end(key)
            return _unit_cache[key]
    value = build()
    with _cache_lock:
        _unit_cache[key] = value
        _unit_cache.move_to_end(key)
        while len(_unit_cache) > _UNIT_CACHE_MAX:
            _unit_cache.popitem(last=False)
    return value


def _unit_cholesky_factor(n: int, hurst: float) -> np.ndarray:
    def build() -> np.ndarray:
        cov = scipy.linalg.toeplitz(fgn_autocovariance(np.arange(n), hurst))
        try:
            factor = scipy.linalg.cholesky(cov, lower=True, check_finite=False)
        except scipy.linalg.LinAlgError as exc:
            # LAPACK reports the failing leading minor in the message.
            raise FbmSamplingError(
                f"increment covariance for H={hurst}, N={n} is not numerically "
                f"positive definite: {exc}"
            ) from exc
        factor.setflags(write=False)
        return factor

    return _cache_get(("chol", n, round(hurst, 15)), build)


def _unit_circulant_sqrt_eigs(n: int, hurst: float) -> np.ndarray:
    def build() -> np.ndarray:
        gamma = fgn_autocovariance(np.arange(n + 1), hurst)
        row = np.concatenate([gamma[:-1], gamma[-1:], gamma[-2:0:-1]])  # length 2n
        eigs = np.fft.fft(row).real
        floor = -1e-8 * eigs.max()
        if eigs.min() < floor:
            raise FbmSamplingError(
                f"circulant embedding for H={hurst}, N={n} has negative eigenvalue "
                f"{eigs.min():.3e} beyond tolerance {floor:.3e}"
            )
        sqrt_eigs = np.sqrt(np.clip(eigs, 0.0, None))
        sqrt_eigs.setflags(write=False)
        return sqrt_eigs

    return _cache_get(("circ", n, round(hurst, 15)), build)


def _circulant_draw(sqrt_eigs: np.ndarray, rng: np.random.Generator, n: int) -> np.ndarray:
    """One exact stationary fGn draw of length n from the 2n-point embedding.

    Builds a Hermitian Gaussian spectrum Y with E|Y_k|^2 = eig_k and returns
    Re(fft(Y)) / sqrt(2n); the resulting vector has exactly the embedded
    circulant covariance, of which the first n entries are the target fGn.
    """
    m = 2 * n
    ends = rng.standard_normal(2)
    re = rng.standard_normal(n - 1)
    im = rng.standard_normal(n - 1)
    spectrum = np.empty(m, dtype=complex)
    spectrum[0] = sqrt_eigs[0] * ends[0]
    spectrum[n] = sqrt_eigs[n] * ends[1]
    half = sqrt_eigs[1:n] / np.sqrt(2.0)
    spectrum[1:n] = half * (re + 1j * im)
    spectrum[n + 1 :] = np.conj(spectrum[1:n][::-1])
    return np.fft.fft(spectrum).real[:n] / np.sqrt(m)


# ---------------------------------------------------------------------------
# path container
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FbmPath:
    """Sampled multi-channel fBm path plus the sampling provenance.

    ``values`` has shape (steps + 1, channels) with B(0) = 0 in every
    channel.  When ``refinement > 1`` the path was drawn on a grid with
    ``refinement``-fold more cells and ``values`` is the restriction of
    ``fine_values`` to the coarse nodes; the fine path is kept so that flow
    integrators can consume sub-resolution increments of the *same*
    realisation.
    """

    grid: TimeGrid
    hurst: float
    channels: int
    values: np.ndarray
    seed: int
    method: str
    refinement: int = 1
    fine_values: np.ndarray | None = None

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape != (self.grid.steps + 1, self.channels):
            raise FbmSamplingError(
                f"values shape {values.shape} does not match grid/channels "
                f"({self.grid.steps + 1}, {self.channels})"
            )
        if not np.all(np.isfinite(values)):
            raise FbmSamplingError("path values must be finite")
        if np.any(values[0] != 0.0):
            raise FbmSamplingError("paths must start at the origin")
        fine = self.fine_values if self.fine_values is not None else values
        fine = np.asarray(fine, dtype=float)
        if fine.shape != (self.grid.steps * self.refinement + 1, self.channels):
            raise FbmSamplingError("fine_values shape does not match refinement")
        values.setflags(write=False)
        fine.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "fine_values", fine)

    @property
    def times(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def fine_times(self) -> np.ndarray:
        return self.grid.refined(self.refinement).nodes

    def channel(self, gamma: int) -> np.ndarray:
        return self.values[:, gamma]

    def increments(self, stride: int = 1) -> np.ndarray:
        """Increments on the grid with ``stride`` cells per coarse cell.

        ``stride = 1`` gives the coarse increments, ``stride = refinement``
        the finest stored ones; ``stride`` must divide the refinement.
        """
        if self.refinement % stride != 0:
            raise FbmSamplingError(
                f"stride {stride} does not divide the stored refinement {self.refinement}"
            )
        return np.diff(self.fine_values[:: self.refinement // stride], axis=0)

    def holder_norms(self, exponent: float, window: tuple[float, float] | None = None) -> np.ndarray:
        """Grid Hölder norm of each channel; shape (channels,)."""
        return np.array(
            [
                holder_norm(self.times, self.values[:, g], exponent, window=window)
                for g in range(self.channels)
            ]
        )


def sample_paths(
    grid: TimeGrid,
    hurst: float,
    channels: int = 1,
    seed: int = 0,
    method: Literal["cholesky", "circulant"] = "cholesky",
    refinement: int = 1,
) -> FbmPath:
    """Draw one multi-channel fBm path on ``grid`` (exact finite-dimensional law).

    Parameters
    ----------
    grid:
        Coarse output grid on [0, T].
    hurst:
        Hurst index in (0, 1).  Flow integration additionally requires > 1/2.
    channels:
        Number of independent channels (columns of the output).
    seed:
        Base seed; channel gamma uses the Philox key ``seed XOR gamma``.
    method:
        "cholesky" (exact, N <= 4096) or "circulant" (exact via FFT embedding).
    refinement:
        Draw on a ``refinement``-fold finer grid and restrict.  The restriction
        is a single consistent realisation: restricting a refined draw has the
        same law as drawing on the coarse grid directly.
    """
    hurst = _check_hurst(hurst)
    if not isinstance(channels, (int, np.integer)) or channels < 1:
        raise FbmSamplingError(f"channels must be a positive integer, got {channels!r}")
    if not isinstance(seed, (int, np.integer)) or seed < 0:
        raise FbmSamplingError(f"seed must be a nonnegative integer, got {seed!r}")
    if method not in _METHODS:
        raise FbmSamplingError(f"unknown method {method!r}; expected one of {_METHODS}")
    if not isinstance(refinement, (int, np.integer)) or refinement < 1:
        raise FbmSamplingError(f"refinement must be a positive integer, got {refinement!r}")
    channels = int(channels)
    seed = int(seed)
    refinement = int(refinement)

    fine_grid = grid.refined(refinement)
    n = fine_grid.steps
    h = fine_grid.step

    if method == "cholesky":
        if n > CHOLESKY_STEP_LIMIT:
            raise FbmSamplingError(
                f"cholesky method is limited to {CHOLESKY_STEP_LIMIT} cells "
                f"(requested {n}); use method='circulant'"
            )
        factor = _unit_cholesky_factor(n, hurst)
        increments = np.empty((n, channels))
        for gamma in range(channels):
            rng = np.random.Generator(np.random.Philox(key=seed ^ gamma))
            # one matvec per channel: a batched matmul would tie each
            # channel's floats to the channel count and break isolated replay
            increments[:, gamma] = factor @ rng.standard_normal(n)
    else:
        sqrt_eigs = _unit_circulant_sqrt_eigs(n, hurst)
        increments = np.empty((n, channels))
        for gamma in range(channels):
            rng = np.random.Generator(np.random.Philox(key=seed ^ gamma))
            increments[:, gamma] = _circulant_draw(sqrt_eigs, rng, n)

    increments *= h**hurst
    fine_values = np.vstack([np.zeros((1, channels)), np.cumsum(increments, axis=0)])
    values = fine_values[::refinement]
    return FbmPath(
        grid=grid,
        hurst=hurst,
        channels=channels,
        values=values,
        seed=seed,
        method=method,
        refinement=refinement,
        fine_values=fine_values,
    )


# ---------------------------------------------------------------------------
# grid Hölder norm
# ---------------------------------------------------------------------------


def holder_norm(
    times: np.ndarray,
    values: np.ndarray,
    exponent: float,
    window: tuple[float, float] | None = None,
) -> float:
    """Grid Hölder norm: max over node pairs of |f(t) - f(s)| / (t - s)^exponent.

    ``values`` may be (m,) scalar samples or (m, d) curves in R^d (Euclidean
    norm of the increment).  The scan is exact over all O(m^2) node pairs and
    lower-bounds the continuum Hölder norm of the sampled function.
    """
    exponent = float(exponent)
    if not (0.0 < exponent <= 1.0):
        raise GridError(f"Hölder exponent must lie in (0, 1], got {exponent!r}")
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.ndim != 1 or len(times) < 2:
        raise GridError("need at least two nodes for a Hölder norm")
    if values.shape[0] != times.shape[0]:
        raise GridError("times and values length mismatch")
    if window is not None:
        lo, hi = window
        pad = 1e-12 * max(1.0, abs(times[-1]))
        keep = (times >= lo - pad) & (times <= hi + pad)
        if keep.sum() < 2:
            raise GridError(f"window {window} contains fewer than two grid nodes")
        times = times[keep]
        values = values[keep]
    best = 0.0
    m = len(times)
    for lag in range(1, m):
        diff = values[lag:] - values[:-lag]
        if diff.ndim == 1:
            mags = np.abs(diff)
        else:
            mags = np.sqrt(np.sum(diff * diff, axis=-1))
        dt = times[lag:] - times[:-lag]
        best = max(best, float(np.max(mags / dt**exponent)))
    return best


# ---------------------------------------------------------------------------
# delimited output
# ---------------------------------------------------------------------------


def write_path_csv(path: FbmPath, dest: str) -> str:
    """Write ``t, channel_0, ...`` at full double precision plus a ``.meta`` sidecar."""
    header = "t," + ",".join(f"channel_{g}" for g in range(path.channels))
    with open(dest, "w", encoding="utf-8", newline="\n") as fout:
        print(header, file=fout)
        for k, t in enumerate(path.times):
            row = [format(t, ".17g")] + [format(v, ".17g") for v in path.values[k]]
            print(",".join(row), file=fout)
    meta = dest + ".meta"
    with open(meta, "w", encoding="utf-8", newline="\n") as fout:
        print(f"hurst = {path.hurst!r}", file=fout)
        print(f"steps = {path.grid.steps}", file=fout)
        print(f"horizon = {path.grid.horizon!r}", file=fout)
        print(f"channels = {path.channels}", file=fout)
        print(f"seed = {path.seed}", file=fout)
        print(f"method = {path.method}", file=fout)
        print(f"refinement = {path.refinement}", file=fout)
        print("rng = philox4x64, key = seed xor channel", file=fout)
    return meta


def _parse_meta(meta_path: str) -> dict[str, str]:
    entries: dict[str, str] = {}
    with open(meta_path, "r", encoding="utf-8") as fin:
        for line in fin:
            line = line.strip()
            if not line or line.startswith("#") or "=" not in line:
                continue
            key, _, value = line.partition("=")
            entries[key.strip()] = value.strip()
    return entries


def read_path_csv(csv_path: str, meta_path: str | None = None) -> FbmPath:
    """Rebuild an :class:`FbmPath` from a CSV written by :func:`write_path_csv`.

    Round-trips are value-exact: 17 significant digits reproduce every float64.
    The restriction to the coarse grid is what was exported, so a reloaded
    refined path carries ``refinement = 1``.
    """
    data = np.genfromtxt(csv_path, delimiter=",", names=True)
    names = list(data.dtype.names or ())
    if not names or names[0] != "t":
        raise FbmSamplingError(f"{csv_path}: expected a 't' column followed by channels")
    times = np.asarray(data["t"], dtype=float)
    values = np.column_stack([np.asarray(data[name], dtype=float) for name in names[1:]])
    meta = _parse_meta(meta_path or csv_path + ".meta")
    grid = TimeGrid(float(meta["horizon"]), int(meta["steps"]))
    if len(times) != grid.steps + 1 or not np.allclose(times, grid.nodes, atol=1e-12):
        raise FbmSamplingError(f"{csv_path}: node column does not match the declared grid")
    return FbmPath(
        grid=grid,
        hurst=float(meta["hurst"]),
        channels=values.shape[1],
        values=values,
        seed=int(meta.get("seed", "0")),
        method=meta.get("method", "imported"),
    )
