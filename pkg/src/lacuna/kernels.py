"""Hot inner loops with a compiled backend and a NumPy fallback.

The compiled extension ``lacuna._ckernels`` is used when it imports and
``LACUNA_PURE`` is unset; otherwise the NumPy versions below run. Both
backends implement identical arithmetic and agree to rounding.
"""

from __future__ import annotations

import logging
import os

import numpy as np

log = logging.getLogger(__name__)

SMALL_RADIUS_NODES = 16


def _linear_shift(f: np.ndarray, axis: int, offset: float) -> np.ndarray:
    """Periodic linear interpolation of ``f`` at ``index + offset`` along ``axis``."""
    base = int(np.floor(offset))
    w = offset - base
    lo = np.roll(f, -base, axis=axis)
    if w == 0.0:
        return lo
    hi = np.roll(lo, -1, axis=axis)
    return (1.0 - w) * lo + w * hi


def _shifted(f: np.ndarray, delta: np.ndarray) -> np.ndarray:
    g = f
    for axis, d in enumerate(delta):
        g = _linear_shift(g, axis, float(d))
    return g


def radius_groups(radii_cells, small_nodes: int = SMALL_RADIUS_NODES):
    """Group radii (in cell units) by trapezoid step ``min(s/16, 1)``.

    Returns a list of ``(step, [(nodes_per_side, radius), ...])`` sorted by radius.
    """
    groups: dict[float, list[tuple[int, float]]] = {}
    for s in sorted(set(float(r) for r in radii_cells)):
        if s <= 0:
            raise ValueError("radii must be positive")
        h = min(s / small_nodes, 1.0)
        nodes = int(round(s / h))
        if abs(nodes * h - s) > 1e-9 * s:
            raise ValueError(f"radius {s} is not a multiple of its step {h}")
        groups.setdefault(h, []).append((nodes, s))
    return sorted(groups.items(), key=lambda kv: kv[0])


def segment_max_numpy(f: np.ndarray, v: np.ndarray, radii_cells) -> np.ndarray:
    """Max over radii of trapezoid segment averages of ``f`` along direction ``v``.

    ``f`` is real and nonnegative on a periodic grid; radii are in cell units.
    """
    f = np.ascontiguousarray(f, dtype=float)
    v = np.asarray(v, dtype=float)
    out = np.zeros_like(f)
    for h, entries in radius_groups(radii_cells):
        total = f.copy()
        last = entries[-1][0]
        targets = dict(entries)
        for r in range(1, last + 1):
            fwd = _shifted(f, r * h * v)
            bwd = _shifted(f, -r * h * v)
            total += fwd + bwd
            if r in targets:
                avg = (total - 0.5 * (fwd + bwd)) / (2 * r)
                np.maximum(out, avg, out=out)
    return out


def _box_sums(f: np.ndarray, axis: int, levels: int) -> list[np.ndarray]:
    """Periodic sums over windows ``[c, c + 2**a)`` along ``axis``, ``a = 0..levels``."""
    out = [f]
    cur = f
    for a in range(levels):
        cur = cur + np.roll(cur, -(1 << a), axis=axis)
        out.append(cur)
    return out


def _containing_max(g: np.ndarray, axis: int, a: int) -> np.ndarray:
    """Max of window values over the ``2**a`` windows ``[c, c + 2**a)`` that contain each index."""
    cur = g
    for b in range(a):
        cur = np.maximum(cur, np.roll(cur, 1 << b, axis=axis))
    return cur


def strong_maximal_numpy(f: np.ndarray) -> np.ndarray:
    """Sup of averages of ``|f|`` over periodic rectangles with dyadic side lengths (in cells)."""
    a_abs = np.abs(np.asarray(f))
    n = a_abs.ndim
    M = a_abs.shape[0]
    levels = M.bit_length() - 1
    out = np.zeros(a_abs.shape)

    def recurse(axis: int, arr: np.ndarray, sizes: tuple[int, ...]):
        if axis == n:
            avg = arr / float(np.prod([1 << s for s in sizes]))
            for ax, s in enumerate(sizes):
                avg = _containing_max(avg, ax, s)
            np.maximum(out, avg, out=out)
            return
        for a, sums in enumerate(_box_sums(arr, axis, levels)):
            recurse(axis + 1, sums, sizes + (a,))

    recurse(0, a_abs, ())
    return out


# --------------------------------------------------------------------------
# backend selection

try:
    if os.environ.get("LACUNA_PURE"):
        raise ImportError("LACUNA_PURE set")
    from . import _ckernels  # type: ignore[attr-defined]

    BACKEND = "compiled"
except ImportError as exc:  # pragma: no cover - depends on the build
    _ckernels = None
    BACKEND = "numpy"
    log.debug("compiled kernels unavailable (%s); using NumPy fallback", exc)


def segment_max(f: np.ndarray, v: np.ndarray, radii_cells) -> np.ndarray:
    if _ckernels is None:
        return segment_max_numpy(f, v, radii_cells)
    f = np.ascontiguousarray(f, dtype=float)
    groups = [(h, [e[0] for e in entries]) for h, entries in radius_groups(radii_cells)]
    return _ckernels.segment_max(f, np.ascontiguousarray(v, dtype=float), groups)


def strong_maximal_kernel(f: np.ndarray) -> np.ndarray:
    if _ckernels is None:
        return strong_maximal_numpy(f)
    return _ckernels.strong_maximal(np.ascontiguousarray(np.abs(f), dtype=float))
