"""Periodic test weights, directional A_2 constants and weighted norms."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from .geometry import DirectionSet
from .spectral import PHYSICAL, GridError, GridFunction

A2_NODES = 64


class WeightError(ValueError):
    """Invalid weight specification or weight values."""


@dataclass(frozen=True)
class Weight:
    """Positive continuous function on the torus; ``evaluator`` maps points ``(..., n)`` to values."""

    evaluator: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    description: str = "weight"

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        vals = np.asarray(self.evaluator(np.mod(x, 1.0)), dtype=float)
        vals = np.broadcast_to(vals, x.shape[:-1])
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            bad = np.argwhere(~(np.isfinite(vals) & (vals > 0)))[0]
            raise WeightError(f"{self.description}: non-positive or non-finite value at {x[tuple(bad)]}")
        return vals

    def __mul__(self, other: "Weight | float") -> "Weight":
        if isinstance(other, Weight):
            a, b = self.evaluator, other.evaluator
            return Weight(lambda x: a(x) * b(x), f"{self.description}*{other.description}")
        lam = float(other)
        if not lam > 0:
            raise WeightError("weights can only be scaled by positive numbers")
        ev = self.evaluator
        return Weight(lambda x: lam * ev(x), f"{lam!r}*{self.description}")

    __rmul__ = __mul__


def constant_weight(c: float = 1.0) -> Weight:
    if not c > 0:
        raise WeightError("constant weight must be positive")
    return Weight(lambda x: np.full(x.shape[:-1], float(c)), f"constant(c={c})")


def sinusoidal_weight(axis: int = 1, base: float = 2.0, amp: float = 1.0) -> Weight:
    """``base + amp * sin(2 pi x_axis)``; positive when ``amp < base``."""
    if not abs(amp) < base:
        raise WeightError("sinusoidal weight needs |amp| < base")
    k = axis - 1
    return Weight(lambda x: base + amp * np.sin(2 * np.pi * x[..., k]),
                  f"sinusoidal(axis={axis},base={base},amp={amp})")


def power_weight(axis: int = 1, a: float = 0.5, center: float = 0.0) -> Weight:
    """``d(x_axis - center)^a`` with ``d`` the distance to the nearest integer, ``-1/2 < a < 1``."""
    if not -0.5 < a < 1:
        raise WeightError("power exponent must lie in (-1/2, 1)")
    k = axis - 1

    def ev(x):
        y = np.mod(x[..., k] - center, 1.0)
        return np.minimum(y, 1.0 - y) ** a
    return Weight(ev, f"power(axis={axis},a={a},center={center})")


_FACTORIES = {"constant": constant_weight, "sinusoidal": sinusoidal_weight, "power": power_weight}
_INT_KEYS = {"axis"}


def weight_from_name(spec: str) -> Weight:
    """Parse ``name[:k=v,...]`` factors joined by ``*``, e.g. ``sinusoidal:axis=1*power:axis=2,a=0.25``."""
    out = None
    for part in spec.split("*"):
        name, _, args = part.strip().partition(":")
        if name not in _FACTORIES:
            raise WeightError(f"unknown weight {name!r}; expected one of {sorted(_FACTORIES)}")
        kwargs = {}
        for item in filter(None, (s.strip() for s in args.split(","))):
            key, eq, val = item.partition("=")
            if not eq:
                raise WeightError(f"malformed weight parameter {item!r}")
            kwargs[key] = int(val) if key in _INT_KEYS else float(val)
        try:
            w = _FACTORIES[name](**kwargs)
        except TypeError as exc:
            raise WeightError(f"bad parameters for {name}: {exc}") from None
        out = w if out is None else out * w
    if out is None:
        raise WeightError("empty weight specification")
    return out


# --------------------------------------------------------------------------
# A_2 constants


@dataclass(frozen=True)
class A2Report:
    """Best-found lower bound for the directional A_2 constant."""

    constant_estimate: float
    x: tuple[float, ...]
    t: float
    v: tuple[float, ...]
    sample_count: int
    running_max: np.ndarray = field(repr=False)


def _trapezoid_weights(nodes: int) -> np.ndarray:
    c = np.ones(nodes)
    c[0] = c[-1] = 0.5
    return c


def a2_constant(w: Weight, Omega: DirectionSet | Sequence, samples: int, radii: Sequence[float],
                seed: int = 0, chunk: int = 256) -> A2Report:
    """``max (avg_I w)(avg_I 1/w)`` over segments ``I = x + [-t, t] v``.

    Centers ``x`` follow a scrambled Halton sequence (prefix-stable, so more
    samples never lower the estimate); every radius and every direction is
    tried at every center. Averages use the trapezoid rule at 64 nodes,
    normalized by the sum of the trapezoid coefficients, so a constant weight
    gives exactly 1.
    """
    if samples < 1:
        raise WeightError("samples must be >= 1")
    radii = [float(r) for r in radii]
    if not radii or any(r <= 0 for r in radii):
        raise WeightError("radii must be a nonempty list of positive numbers")
    V = Omega.vectors if isinstance(Omega, DirectionSet) else np.atleast_2d(np.asarray(Omega, float))
    n = V.shape[1]
    centers = qmc.Halton(d=n, scramble=True, seed=seed).random(samples)
    c = _trapezoid_weights(A2_NODES)
    csum = c.sum()
    tau = np.linspace(-1.0, 1.0, A2_NODES)
    R = np.asarray(radii)
    # offsets[r, v, node, :] = t_r * tau_node * v
    offsets = R[:, None, None, None] * tau[None, None, :, None] * V[None, :, None, :]
    best = np.empty(samples)
    top, arg = -np.inf, (0, 0, 0)
    for start in range(0, samples, chunk):
        xs = centers[start:start + chunk]
        pts = xs[:, None, None, None, :] + offsets[None]
        wv = w(pts)
        prod = ((wv @ c) / csum) * (((1.0 / wv) @ c) / csum)
        per_center = prod.reshape(len(xs), -1).max(axis=1)
        best[start:start + len(xs)] = per_center
        i = int(np.argmax(per_center))
        if per_center[i] > top:
            top = float(per_center[i])
            ri, vi = np.unravel_index(int(np.argmax(prod[i])), prod.shape[1:])
            arg = (start + i, int(ri), int(vi))
    running = np.maximum.accumulate(best)
    i, ri, vi = arg
    return A2Report(float(running[-1]), tuple(map(float, centers[i])), radii[ri],
                    tuple(map(float, V[vi])), samples, running)


# --------------------------------------------------------------------------
# weighted norms


def weight_on_grid(w: Weight, grid) -> np.ndarray:
    return w(grid.points())


def weighted_norm(f: GridFunction, w: Weight | np.ndarray, p: float = 2.0) -> float:
    """``(M^-n sum |f|^p w)^(1/p)`` on the grid points."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if f.side != PHYSICAL:
        raise GridError("weighted_norm expects a physical-side function")
    wv = weight_on_grid(w, f.grid) if isinstance(w, Weight) else np.asarray(w, dtype=float)
    if wv.shape != f.grid.shape or not np.all(np.isfinite(wv)):
        raise WeightError("weight values must be finite and match the grid")
    total = np.sum(np.abs(f.values) ** p * wv) / f.grid.size
    return float(total ** (1.0 / p))


def builtin_weights(M: int) -> dict[str, Weight]:
    """The catalog used by the smoke tests; power weights are centered off the grid points."""
    off = 1.0 / (3.0 * M)
    return {
        "constant": constant_weight(1.0),
        "sinusoidal": sinusoidal_weight(1),
        "power_pos": power_weight(1, 0.5, off),
        "power_neg": power_weight(2, -0.25, off),
        "tensor": sinusoidal_weight(2) * power_weight(1, 0.25, off),
    }
