"""Frequency symbols: cone cutoffs, wedge bumps, the eta partition and 1-d profiles.

All symbols are vectorized over the leading axes of ``xi`` (last axis = the
``n`` frequency coordinates). Every abstract bump is realized through one
canonical mollifier, :func:`smooth_step`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .geometry import _check_sigma


def smooth_step(x):
    """C-infinity step: 0 for ``x <= 0``, 1 for ``x >= 1``, ``s(x) + s(1-x) = 1``."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        y = 1.0 - x
        b = np.where(y > 0, np.exp(-1.0 / np.where(y > 0, y, 1.0)), 0.0)
    out = a / (a + b)
    out = np.where(x <= 0, 0.0, np.where(x >= 1, 1.0, out))
    return out[()] if out.ndim == 0 else out


def _reject_zero(xi: np.ndarray, scale: np.ndarray) -> None:
    if np.any(scale == 0):
        raise ValueError("symbol undefined at the zero frequency")


def nsw_omega(xi, n: int | None = None):
    """Degree-0 cone cutoff: 1 where ``|sum xi| < ||xi||_inf / (2n^2)``, 0 where ``>= ||xi||_inf / n^2``."""
    xi = np.asarray(xi, dtype=float)
    n = xi.shape[-1] if n is None else n
    scale = np.abs(xi).max(axis=-1)
    _reject_zero(xi, scale)
    r = np.abs(xi.sum(axis=-1)) / scale
    return 1.0 - smooth_step(2.0 * n * n * r - 1.0)


def nsw_omega_v(xi, v):
    """``nsw_omega`` evaluated at the componentwise product ``(v_1 xi_1, ..., v_n xi_n)``."""
    v = np.asarray(v, dtype=float)
    return nsw_omega(np.asarray(xi, dtype=float) * v, v.shape[-1])


def kappa_profile(s, n: int):
    """Wedge bump: ramps up on ``[1/(2(n+1)), 1/(2n)]``, 1 on ``[1/(2n), n]``, down on ``[n, n+1]``."""
    s = np.asarray(s, dtype=float)
    a, b = 1.0 / (2 * (n + 1)), 1.0 / (2 * n)
    up = smooth_step((s - a) / (b - a))
    down = 1.0 - smooth_step(s - n)
    out = np.where(s <= 0, 0.0, np.minimum(up, down))
    return out[()] if out.ndim == 0 else out


def kappa_sigma_ell(xi, sigma: Sequence[int], ell, n: int | None = None):
    """``kappa(-xi_j / (2**-l xi_k))`` with ``(j, k) = sigma``; 0 where ``xi_k = 0``."""
    xi = np.asarray(xi, dtype=float)
    n = xi.shape[-1] if n is None else n
    j, k = _check_sigma(sigma, xi.shape[-1])
    a = xi[..., j - 1]
    b = xi[..., k - 1]
    safe = np.where(b != 0, b, 1.0)
    arg = np.where(b != 0, -np.ldexp(a, np.asarray(ell)) / safe, -1.0)
    return kappa_profile(arg, n)


def _phi(s):
    # even ramp: 0 on [-1/4, 1/4], 1 off (-1/2, 1/2)
    return smooth_step(4.0 * np.abs(s) - 1.0)


def eta_family(xi, v) -> np.ndarray:
    """The n telescoping symbols ``eta_v^j``; returns an array with a trailing axis of length n."""
    xi = np.asarray(xi, dtype=float)
    v = np.asarray(v, dtype=float)
    n = v.shape[-1]
    vx = xi * v
    scale = np.abs(vx).max(axis=-1)
    _reject_zero(xi, scale)
    phis = _phi(n * vx / scale[..., None])
    out = np.empty(vx.shape)
    remaining = np.ones(vx.shape[:-1])
    for j in range(n - 1):
        out[..., j] = phis[..., j] * remaining
        remaining = remaining * (1.0 - phis[..., j])
    out[..., n - 1] = remaining
    return out


def lp_bump(s, kind: str = "p"):
    """Littlewood-Paley bumps on ``log2|s|``.

    ``p`` is supported in ``1/2 < |s| < 2`` and satisfies ``sum_t p(2**-t s) = 1``;
    ``q`` is supported in ``1/4 < |s| < 4`` and equals 1 on ``[1/2, 2]``.
    """
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore"):
        u = np.log2(np.abs(s))
    if kind == "p":
        out = smooth_step(u + 1.0) - smooth_step(u)
    elif kind == "q":
        out = smooth_step(u + 2.0) - smooth_step(u - 1.0)
    else:
        raise ValueError(f"unknown bump kind {kind!r}")
    out = np.where(s == 0, 0.0, out)
    return out[()] if out.ndim == 0 else out


# --------------------------------------------------------------------------
# one-dimensional Hormander-Mikhlin profiles


@dataclass(frozen=True)
class MultiplierProfile:
    """A named one-variable multiplier ``m``; ``m(0)`` is taken to be 0."""

    name: str
    evaluator: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    alpha_max: int = 3
    continuous_at_zero: bool = True

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.asarray(self.evaluator(s), dtype=complex)
        out = np.where(s == 0, 0.0, out)
        return out[()] if out.ndim == 0 else out


def _analytic_projection(s):
    return (s > 0).astype(float)


def _hilbert_sign(s):
    return -1j * np.sign(s)


def _smooth_odd(scale):
    def m(s):
        y = s / scale
        return y / np.sqrt(1.0 + y * y)
    return m


def _riesz_like(scale):
    def m(s):
        return np.sign(s) * (1.0 - 0.5 * np.exp(-(s / scale) ** 2))
    return m


PROFILE_NAMES = ("analytic_projection", "hilbert_sign", "smooth_odd", "riesz_like")


def hm_profile(name: str, scale: float = 1.0) -> MultiplierProfile:
    """Built-in profiles; ``scale`` rescales the smooth ones (``m(s / scale)``)."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    if name == "analytic_projection":
        return MultiplierProfile(name, _analytic_projection, continuous_at_zero=False)
    if name == "hilbert_sign":
        return MultiplierProfile(name, _hilbert_sign, continuous_at_zero=False)
    if name == "smooth_odd":
        return MultiplierProfile(name, _smooth_odd(scale))
    if name == "riesz_like":
        return MultiplierProfile(name, _riesz_like(scale), continuous_at_zero=False)
    raise ValueError(f"unknown profile {name!r}; expected one of {PROFILE_NAMES}")


def hm_constants(profile: MultiplierProfile, alpha_max: int | None = None,
                 samples: int = 4001, rel_step: float = 1e-3) -> list[float]:
    """Finite-difference estimates of ``sup |s|^a |m^(a)(s)|`` for ``a = 0..alpha_max``.

    Derivatives use central differences with step ``rel_step * |s|`` on a
    geometric grid ``+-[1e-6, 1e6]``; the grid never crosses 0, so profiles
    with a jump at the origin are handled.
    """
    alpha_max = profile.alpha_max if alpha_max is None else alpha_max
    mags = np.geomspace(1e-6, 1e6, samples)
    s = np.concatenate([-mags[::-1], mags])
    h = rel_step * np.abs(s)
    out = []
    for alpha in range(alpha_max + 1):
        # central difference of order alpha: sum_i (-1)^i C(alpha, i) m(s + (alpha/2 - i) h)
        acc = np.zeros(s.shape, dtype=complex)
        for i in range(alpha + 1):
            acc += (-1) ** i * math.comb(alpha, i) * profile(s + (alpha / 2 - i) * h)
        deriv = acc / h ** alpha
        out.append(float(np.max(np.abs(s) ** alpha * np.abs(deriv))))
    return out
