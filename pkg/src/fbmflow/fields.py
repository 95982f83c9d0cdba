"""Driving vector fields with analytic regularity constants.

A :class:`VectorFieldSet` bundles one field U_gamma : R^n -> R^n per channel
together with three per-channel constants used by the bound machinery:

* ``sup_bounds``      componentwise sup |U^i|,
* ``lip_bounds``      componentwise Lipschitz constant of U^i,
* ``grad_lip_bounds`` componentwise Lipschitz constant of the gradient rows.

The built-in kinds keep these constants exact rather than estimated:

``sine``           U^i(x) = A_i sin(<w_i, x> + phi_i)  (bounded, smooth)
``gaussian_bump``  U^i(x) = A_i exp(-|x - c|^2 / (2 sigma^2))
``constant``       U(x) = c  (gradient identically zero)
``linear_test``    U(x) = rate * x; unbounded, hence flagged non-conforming.
                   Scalar channels admit the closed form x_0 exp(B(t)), which
                   makes this kind the reference for convergence tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = ["FieldError", "VectorFieldSet", "finite_difference_jacobian", "make_field"]

# successive phase offsets use the golden angle so that no two components or
# channels are trivially in or out of phase with each other
GOLDEN_ANGLE = 2.399963229728653

_KINDS = ("sine", "gaussian_bump", "constant", "linear_test")


class FieldError(ValueError):
    """Bad field construction parameters."""


@dataclass(frozen=True)
class VectorFieldSet:
    """Per-channel vector fields plus exact regularity constants.

    ``evaluate(x)`` maps points of shape (..., dim) to values of shape
    (channels, ..., dim); ``jacobian(x)`` to (channels, ..., dim, dim) with
    entry [gamma, ..., i, j] = d U^i_gamma / d x_j.  ``conforms`` records
    whether the fields are bounded with two bounded derivatives, the standing
    regularity the growth bounds assume.
    """

    kind: str
    dim: int
    channels: int
    sup_bounds: np.ndarray
    lip_bounds: np.ndarray
    grad_lip_bounds: np.ndarray
    conforms: bool
    params: dict = field(repr=False)
    _evaluate: Callable = field(repr=False)
    _jacobian: Callable = field(repr=False)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = self._check_points(x)
        return self._evaluate(x)

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        x = self._check_points(x)
        return self._jacobian(x)

    def _check_points(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise FieldError(f"points have dimension {x.shape[-1]}, field expects {self.dim}")
        return x

    def channel(self, gamma: int) -> Callable[[np.ndarray], np.ndarray]:
        """Single-channel evaluator, mostly for tests and plotting."""
        if not (0 <= gamma < self.channels):
            raise FieldError(f"channel {gamma} out of range")
        return lambda x: self.evaluate(x)[gamma]


def _tile_per_component(value, channels: int, dim: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full((channels, dim), float(arr))
    elif arr.shape == (dim,):
        arr = np.tile(arr, (channels, 1))
    elif arr.shape != (channels, dim):
        raise FieldError(
            f"{name} must be a scalar, shape ({dim},) or ({channels}, {dim}); got {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise FieldError(f"{name} must be finite")
    return arr


def _expand_phase(phase, channels: int, dim: int) -> np.ndarray:
    arr = np.asarray(phase, dtype=float)
    if arr.ndim == 0:
        offsets = GOLDEN_ANGLE * np.arange(channels * dim, dtype=float)
        return float(arr) + offsets.reshape(channels, dim)
    if arr.shape != (channels, dim):
        raise FieldError(f"phase must be scalar or shape ({channels}, {dim}); got {arr.shape}")
    return arr


def _broadcast_to_points(per_channel: np.ndarray, x: np.ndarray) -> np.ndarray:
    # (channels, dim) -> (channels, ...point batch..., dim)
    extra = x.ndim - 1
    shape = (per_channel.shape[0],) + (1,) * extra + (per_channel.shape[1],)
    return per_channel.reshape(shape)


def make_field(kind: str, dim: int, channels: int = 1, **params) -> VectorFieldSet:
    """Construct a :class:`VectorFieldSet` of the given kind.

    Parameters common to all kinds are ``dim`` (ambient dimension) and
    ``channels``.  Kind-specific parameters:

    sine:           amplitude (scalar | (dim,) | (channels, dim)),
                    frequency ((dim,) | (channels, dim, dim) row per component),
                    phase (scalar base, golden-angle offsets | (channels, dim)).
    gaussian_bump:  amplitude, center ((dim,) | (channels, dim)), width > 0.
    constant:       value ((dim,) | (channels, dim)).
    linear_test:    rate (scalar | (channels,)).
    """
    if kind not in _KINDS:
        raise FieldError(f"unknown field kind {kind!r}; expected one of {_KINDS}")
    if not (isinstance(dim, (int, np.integer)) and dim >= 1):
        raise FieldError(f"dim must be a positive integer, got {dim!r}")
    if not (isinstance(channels, (int, np.integer)) and channels >= 1):
        raise FieldError(f"channels must be a positive integer, got {channels!r}")
    dim = int(dim)
    channels = int(channels)
    builder = {
        "sine": _make_sine,
        "gaussian_bump": _make_bump,
        "constant": _make_constant,
        "linear_test": _make_linear,
    }[kind]
    return builder(dim, channels, dict(params))


def _make_sine(dim: int, channels: int, params: dict) -> VectorFieldSet:
    amplitude = _tile_per_component(params.pop("amplitude", 1.0), channels, dim, "amplitude")
    frequency = params.pop("frequency", np.ones(dim))
    phase = _expand_phase(params.pop("phase", 0.0), channels, dim)
    if params:
        raise FieldError(f"unknown sine parameters {sorted(params)}")
    freq = np.asarray(frequency, dtype=float)
    if freq.shape == (dim,):
        omega = np.tile(freq, (channels, dim, 1))
    elif freq.shape == (channels, dim, dim):
        omega = freq
    else:
        raise FieldError(
            f"frequency must have shape ({dim},) or ({channels}, {dim}, {dim}); got {freq.shape}"
        )
    if not np.all(np.isfinite(omega)):
        raise FieldError("frequency must be finite")
    if np.all(amplitude == 0.0):
        raise FieldError("sine field with zero amplitude everywhere is degenerate")

    omega_norm = np.sqrt(np.sum(omega * omega, axis=2))  # (channels, dim)
    sup_b = np.max(np.abs(amplitude), axis=1)
    lip_b = np.max(np.abs(amplitude) * omega_norm, axis=1)
    glip_b = np.max(np.abs(amplitude) * omega_norm**2, axis=1)

    def evaluate(x: np.ndarray) -> np.ndarray:
        phases = np.einsum("...j,kij->k...i", x, omega) + _broadcast_to_points(phase, x)
        return _broadcast_to_points(amplitude, x) * np.sin(phases)

    def jacobian(x: np.ndarray) -> np.ndarray:
        phases = np.einsum("...j,kij->k...i", x, omega) + _broadcast_to_points(phase, x)
        rows = _broadcast_to_points(amplitude, x) * np.cos(phases)
        return np.einsum("k...i,kij->k...ij", rows, omega)

    return VectorFieldSet(
        kind="sine",
        dim=dim,
        channels=channels,
        sup_bounds=sup_b,
        lip_bounds=lip_b,
        grad_lip_bounds=glip_b,
        conforms=True,
        params={"amplitude": amplitude, "frequency": omega, "phase": phase},
        _evaluate=evaluate,
        _jacobian=jacobian,
    )


def _make_bump(dim: int, channels: int, params: dict) -> VectorFieldSet:
    amplitude = _tile_per_component(params.pop("amplitude", 1.0), channels, dim, "amplitude")
    center = _tile_per_component(params.pop("center", np.zeros(dim)), channels, dim, "center")
    width = float(params.pop("width", 1.0))
    if params:
        raise FieldError(f"unknown gaussian_bump parameters {sorted(params)}")
    if not (np.isfinite(width) and width > 0.0):
        raise FieldError(f"width must be a positive real, got {width!r}")
    if np.all(amplitude == 0.0):
        raise FieldError("gaussian_bump with zero amplitude everywhere is degenerate")

    sup_b = np.max(np.abs(amplitude), axis=1)
    # sup |grad| of exp(-r^2/2s^2) is e^{-1/2}/s; sup |hessian| row norm is 1/s^2
    lip_b = sup_b * np.exp(-0.5) / width
    glip_b = sup_b / width**2

    def envelope(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        u = x[None, ...] - _broadcast_to_points(center, x)  # (channels, ..., dim)
        r2 = np.sum(u * u, axis=-1)
        return u, np.exp(-0.5 * r2 / width**2)

    def evaluate(x: np.ndarray) -> np.ndarray:
        _, env = envelope(x)
        return _broadcast_to_points(amplitude, x) * env[..., None]

    def jacobian(x: np.ndarray) -> np.ndarray:
        u, env = envelope(x)
        rows = _broadcast_to_points(amplitude, x) * env[..., None]  # (k, ..., i)
        return -np.einsum("k...i,k...j->k...ij", rows, u) / width**2

    return VectorFieldSet(
        kind="gaussian_bump",
        dim=dim,
        channels=channels,
        sup_bounds=sup_b,
        lip_bounds=lip_b,
        grad_lip_bounds=glip_b,
        conforms=True,
        params={"amplitude": amplitude, "center": center, "width": width},
        _evaluate=evaluate,
        _jacobian=jacobian,
    )


def _make_constant(dim: int, channels: int, params: dict) -> VectorFieldSet:
    value = _tile_per_component(params.pop("value", np.zeros(dim)), channels, dim, "value")
    if params:
        raise FieldError(f"unknown constant parameters {sorted(params)}")

    def evaluate(x: np.ndarray) -> np.ndarray:
        out = np.broadcast_to(
            _broadcast_to_points(value, x), (channels,) + x.shape[:-1] + (dim,)
        )
        return np.array(out)

    def jacobian(x: np.ndarray) -> np.ndarray:
        return np.zeros((channels,) + x.shape[:-1] + (dim, dim))

    return VectorFieldSet(
        kind="constant",
        dim=dim,
        channels=channels,
        sup_bounds=np.max(np.abs(value), axis=1),
        lip_bounds=np.zeros(channels),
        grad_lip_bounds=np.zeros(channels),
        conforms=True,
        params={"value": value},
        _evaluate=evaluate,
        _jacobian=jacobian,
    )


def _make_linear(dim: int, channels: int, params: dict) -> VectorFieldSet:
    rate = np.asarray(params.pop("rate", 1.0), dtype=float)
    if params:
        raise FieldError(f"unknown linear_test parameters {sorted(params)}")
    if rate.ndim == 0:
        rate = np.full(channels, float(rate))
    if rate.shape != (channels,) or not np.all(np.isfinite(rate)):
        raise FieldError(f"rate must be a finite scalar or shape ({channels},)")

    eye = np.eye(dim)

    def evaluate(x: np.ndarray) -> np.ndarray:
        return rate.reshape((channels,) + (1,) * x.ndim) * x[None, ...]

    def jacobian(x: np.ndarray) -> np.ndarray:
        shape = (channels,) + x.shape[:-1] + (dim, dim)
        out = np.empty(shape)
        out[...] = rate.reshape((channels,) + (1,) * (len(shape) - 1)) * eye
        return out

    return VectorFieldSet(
        kind="linear_test",
        dim=dim,
        channels=channels,
        sup_bounds=np.full(channels, np.inf),
        lip_bounds=np.abs(rate),
        grad_lip_bounds=np.zeros(channels),
        conforms=False,
        params={"rate": rate},
        _evaluate=evaluate,
        _jacobian=jacobian,
    )


def finite_difference_jacobian(fields: VectorFieldSet, x: np.ndarray, step: float = 1e-6):
    """Central-difference Jacobian, (channels, dim, dim); testing aid."""
    x = np.asarray(x, dtype=float)
    out = np.empty((fields.channels, fields.dim, fields.dim))
    for j in range(fields.dim):
        bump = np.zeros_like(x)
        bump[j] = step
        out[:, :, j] = (fields.evaluate(x + bump) - fields.evaluate(x - bump)) / (2.0 * step)
    return out
