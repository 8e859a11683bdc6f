"""Directions, lacunary dissections and frequency cones/wedges.

Coordinates and coordinate pairs are labelled 1-based throughout, so that a
pair ``sigma = (j, k)`` with ``1 <= j < k <= n`` refers to the ``j``-th and
``k``-th entries of a vector.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

UNIT_TOL = 1e-12
DUPLICATE_TOL = 1e-10
SNAP_TOL = 1e-14
MIN_SEPARATION = 4

SigmaIndex = tuple[int, int]


class GeometryError(ValueError):
    """Invalid direction data."""


@lru_cache(maxsize=None)
def sigma_pairs(n: int) -> tuple[SigmaIndex, ...]:
    """All ordered pairs ``(j, k)``, ``1 <= j < k <= n``, in lexicographic order."""
    if n < 2:
        raise GeometryError(f"dimension must be at least 2, got {n}")
    return tuple(itertools.combinations(range(1, n + 1), 2))


def _check_sigma(sigma: Sequence[int], n: int) -> SigmaIndex:
    j, k = int(sigma[0]), int(sigma[1])
    if not 1 <= j < k <= n:
        raise GeometryError(f"invalid pair {sigma!r} for n={n}")
    return j, k


def make_direction(coords: Iterable[float], normalize: bool = True) -> np.ndarray:
    """Validate (and by default normalize) a direction in the open positive orthant."""
    v = np.asarray(list(coords) if not isinstance(coords, np.ndarray) else coords,
                   dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise GeometryError("a direction needs at least two coordinates")
    if not np.all(np.isfinite(v)) or np.any(v <= 0):
        raise GeometryError(f"coordinates must be finite and strictly positive: {v}")
    if normalize:
        v = v / np.linalg.norm(v)
    elif abs(np.linalg.norm(v) - 1.0) > UNIT_TOL:
        raise GeometryError("direction is not a unit vector")
    v.setflags(write=False)
    return v


@dataclass(frozen=True)
class CellIndex:
    """Lattice label of a dissection cell: one sector index per pair."""

    n: int
    labels: tuple[int, ...]

    def __post_init__(self):
        if len(self.labels) != len(sigma_pairs(self.n)):
            raise GeometryError("a cell index needs one label per coordinate pair")

    def __getitem__(self, sigma: Sequence[int]) -> int:
        j, k = _check_sigma(sigma, self.n)
        return self.labels[sigma_pairs(self.n).index((j, k))]

    def as_dict(self) -> dict[SigmaIndex, int]:
        return dict(zip(sigma_pairs(self.n), self.labels))

    def signed(self, k: int, j: int) -> int:
        """``l_kj``: ``l_(k,j)`` if ``k < j``, ``-l_(j,k)`` if ``k > j``, 0 on the diagonal."""
        if k == j:
            return 0
        if k < j:
            return self[(k, j)]
        return -self[(j, k)]

    @classmethod
    def from_mapping(cls, n: int, mapping: Mapping[SigmaIndex, int]) -> "CellIndex":
        return cls(n, tuple(int(mapping[s]) for s in sigma_pairs(n)))


class DirectionSet:
    """Immutable ordered set of unit directions in the open positive orthant.

    Parameters
    ----------
    directions : array_like, shape (N, n)
        Rows are normalized on construction.
    order : int, optional
        Declared lacunarity order. It is checked with :func:`lacunarity_order`.
    """

    def __init__(self, directions, order: int | None = None, *, normalize: bool = True):
        arr = np.atleast_2d(np.asarray(directions, dtype=float))
        if arr.size == 0:
            raise GeometryError("a direction set cannot be empty")
        if arr.shape[1] < 2:
            raise GeometryError("directions need at least two coordinates")
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise GeometryError("directions must lie in the open positive orthant")
        norms = np.linalg.norm(arr, axis=1)
        if normalize:
            arr = arr / norms[:, None]
        elif np.any(np.abs(norms - 1) > UNIT_TOL):
            raise GeometryError("directions are not unit vectors")
        _check_no_duplicates(arr)
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        self._dirs = arr
        self.declared_order = order
        if order is not None:
            found = lacunarity_order(self, max_order=order)
            if found is None:
                raise GeometryError(f"set is not lacunary of order <= {order}")

    @property
    def vectors(self) -> np.ndarray:
        return self._dirs

    @property
    def n(self) -> int:
        return self._dirs.shape[1]

    def __len__(self) -> int:
        return self._dirs.shape[0]

    def __iter__(self):
        return iter(self._dirs)

    def __getitem__(self, item):
        if isinstance(item, slice) or isinstance(item, (list, np.ndarray)):
            return DirectionSet(self._dirs[item], normalize=False)
        return self._dirs[item]

    def __repr__(self) -> str:
        return f"DirectionSet(N={len(self)}, n={self.n}, order={self.declared_order})"

    def subset(self, indices: Sequence[int]) -> "DirectionSet":
        return DirectionSet(self._dirs[np.asarray(indices, dtype=int)], normalize=False)

    def prefix(self, count: int) -> "DirectionSet":
        return DirectionSet(self._dirs[:count], normalize=False)

    def to_json(self) -> str:
        return json.dumps([[float(c) for c in v] for v in self._dirs])

    @classmethod
    def from_json(cls, text: str, order: int | None = None) -> "DirectionSet":
        data = json.loads(text)
        if not isinstance(data, list) or not all(isinstance(r, list) for r in data):
            raise GeometryError("expected a JSON array of coordinate arrays")
        return cls(data, order=order)


def _check_no_duplicates(arr: np.ndarray) -> None:
    count = arr.shape[0]
    block = 512
    for lo in range(0, count, block):
        chunk = arr[lo:lo + block]
        dist = np.linalg.norm(chunk[:, None, :] - arr[None, :, :], axis=-1)
        rows, cols = np.nonzero(dist <= DUPLICATE_TOL)
        if np.any(rows + lo != cols):
            raise GeometryError("direction set contains duplicate directions")


# --------------------------------------------------------------------------
# sectors and cells


def _dyadic_level(ratio: np.ndarray) -> np.ndarray:
    """Unique integer ``l`` with ``2**-(l+1) < ratio <= 2**-l`` (ratio > 0).

    Ratios within ``SNAP_TOL`` (relative) of a power of two are snapped onto it.
    """
    ratio = np.asarray(ratio, dtype=float)
    level = np.floor(-np.log2(ratio))
    # guard against log2 rounding: enforce the half-open interval exactly
    upper = np.ldexp(1.0, (-level).astype(int))
    level = np.where(ratio > upper, level - 1, level)
    lower = np.ldexp(1.0, (-level - 1).astype(int))
    level = np.where(ratio <= lower, level + 1, level)
    nearest = np.rint(-np.log2(ratio))
    snapped = np.abs(ratio / np.ldexp(1.0, (-nearest).astype(int)) - 1.0) <= SNAP_TOL
    level = np.where(snapped, nearest, level)
    return level.astype(np.int64)


def sector_index(v, sigma: Sequence[int]) -> int:
    """Dyadic sector of ``v`` for the pair ``sigma = (j, k)``: ratio ``v_k / v_j``."""
    v = np.asarray(v, dtype=float)
    j, k = _check_sigma(sigma, v.shape[-1])
    return int(_dyadic_level(v[k - 1] / v[j - 1]))


def sector_indices(vectors: np.ndarray, sigma: Sequence[int]) -> np.ndarray:
    """Vectorized :func:`sector_index` over the rows of ``vectors``."""
    vectors = np.atleast_2d(vectors)
    j, k = _check_sigma(sigma, vectors.shape[1])
    return _dyadic_level(vectors[:, k - 1] / vectors[:, j - 1])


def cell_index(v) -> CellIndex:
    v = np.asarray(v, dtype=float)
    n = v.shape[-1]
    return CellIndex(n, tuple(sector_index(v, s) for s in sigma_pairs(n)))


def cell_indices(vectors: np.ndarray) -> np.ndarray:
    """Array of shape (N, |Sigma|) with the cell labels of each row."""
    vectors = np.atleast_2d(vectors)
    pairs = sigma_pairs(vectors.shape[1])
    return np.stack([sector_indices(vectors, s) for s in pairs], axis=1)


def partition_by_sector(dirset: DirectionSet, sigma: Sequence[int]) -> dict[int, DirectionSet]:
    labels = sector_indices(dirset.vectors, sigma)
    groups: dict[int, DirectionSet] = {}
    for lab in sorted(set(labels.tolist())):
        groups[lab] = dirset.subset(np.flatnonzero(labels == lab))
    return groups


# --------------------------------------------------------------------------
# lacunarity order


def _frame_labels(coords: np.ndarray, j: int, k: int) -> np.ndarray:
    """Sector labels in a (possibly rotated) frame; ``None``-sector encoded as a sentinel."""
    a = np.abs(coords[:, j])
    b = np.abs(coords[:, k])
    scale = np.maximum(a, b)
    limit = (np.minimum(a, b) <= 1e-13 * np.maximum(scale, 1e-300))
    labels = np.full(coords.shape[0], np.iinfo(np.int64).max, dtype=np.int64)
    ok = ~limit
    if np.any(ok):
        labels[ok] = _dyadic_level(b[ok] / a[ok])
    return labels


def _anchor_frames(vectors: np.ndarray, candidates: np.ndarray):
    """Rotated frames aligning one coordinate axis with an anchor in a coordinate plane."""
    n = vectors.shape[1]
    for anchor in candidates:
        for j, k in sigma_pairs(n):
            a, b = anchor[j - 1], anchor[k - 1]
            r = math.hypot(a, b)
            c, s = a / r, b / r
            rotated = vectors.copy()
            xj, xk = vectors[:, j - 1], vectors[:, k - 1]
            rotated[:, j - 1] = c * xj + s * xk
            rotated[:, k - 1] = -s * xj + c * xk
            yield rotated


def _split(coords: np.ndarray) -> list[np.ndarray]:
    """Sector groups of every pair in this frame.

    A sector holding the whole current set is no refinement and is skipped;
    if no pair splits the set, the whole set is the only cell.
    """
    n = coords.shape[1]
    groups = []
    for j, k in sigma_pairs(n):
        labels = _frame_labels(coords, j - 1, k - 1)
        uniq = np.unique(labels)
        if uniq.size == 1:
            continue
        for lab in uniq:
            groups.append(np.flatnonzero(labels == lab))
    return groups or [np.arange(coords.shape[0])]


def lacunarity_order(dirset: DirectionSet | np.ndarray, max_order: int) -> int | None:
    """Smallest ``L <= max_order`` for which the set is certified lacunary of order ``L``.

    The top level always uses the standard dyadic dissection. Below it, a
    sector that the standard dissection cannot split is re-dissected in a frame
    rotated within one coordinate plane so that an axis passes through one of
    the sector's own directions (an allowed change of orthonormal basis). Pairs
    whose sectors all coincide with the current set carry no information and
    are ignored. The result is an upper bound certificate, not the true minimum
    over all dissections.
    """
    if max_order < 0:
        raise GeometryError("max_order must be nonnegative")
    vectors = dirset.vectors if isinstance(dirset, DirectionSet) else np.atleast_2d(dirset)
    cache: dict[tuple[frozenset, int, bool], bool] = {}

    def fits(idx: np.ndarray, order: int, top: bool) -> bool:
        if idx.size <= 1:
            return True
        if order == 0:
            return False
        key = (frozenset(idx.tolist()), order, top)
        if key not in cache:
            sub = vectors[idx]
            frames = [sub] if top else itertools.chain([sub], _anchor_frames(sub, sub))
            cache[key] = False
            for coords in frames:
                groups = _split(coords)
                if all(fits(idx[g], order - 1, False) for g in groups):
                    cache[key] = True
                    break
        return cache[key]

    everything = np.arange(vectors.shape[0])
    for order in range(max_order + 1):
        if fits(everything, order, True):
            return order
    return None


# --------------------------------------------------------------------------
# generators


def _nested_ratios(exponents: Sequence[Sequence[int]], separation: int,
                   outer_first: bool = False) -> list[float]:
    lists = [list(e) for e in exponents]
    if outer_first:
        # vary the outer exponent fastest: prefixes visit every outer sector first
        combos = (tuple(reversed(c)) for c in itertools.product(*reversed(lists)))
    else:
        combos = itertools.product(*lists)
    ratios = []
    for exps in combos:
        inner = 0.0
        for a in reversed(exps[1:]):
            inner = 2.0 ** -(a + separation) * (1.0 + inner)
        ratios.append(2.0 ** -exps[0] * (1.0 + inner))
    return ratios


def generate_nested_lacunary(exponents: Sequence[Sequence[int]], n: int = 2,
                             separation: int = MIN_SEPARATION, *,
                             outer_first: bool = False) -> DirectionSet:
    """Planar lacunary set of order ``len(exponents)`` from explicit exponent lists.

    ``exponents[0]`` holds the outer dyadic exponents (any integers, so both
    ``v_2 < v_1`` and ``v_2 > v_1`` occur); later lists hold nested
    perturbation exponents ``>= 1``. With ``outer_first`` the enumeration
    cycles through all outer exponents before advancing an inner one.
    """
    if not exponents or any(len(e) == 0 for e in exponents):
        raise GeometryError("exponent lists must be nonempty")
    if any(min(e) < 1 for e in exponents[1:]):
        raise GeometryError("nested exponents must be >= 1")
    if len(set(exponents[0])) != len(exponents[0]):
        raise GeometryError("outer exponents must be distinct")
    if separation < MIN_SEPARATION:
        raise GeometryError(
            f"nested perturbations need at least {MIN_SEPARATION} dyadic levels of separation")
    if n < 2:
        raise GeometryError("n must be at least 2")
    ratios = np.array(_nested_ratios(exponents, separation, outer_first))
    vecs = np.ones((ratios.size, n))
    vecs[:, 1] = ratios
    order = sum(1 for e in exponents if len(e) > 1)
    return DirectionSet(vecs, order=0 if ratios.size == 1 else max(order, 1))


def generate_planar_lacunary(order: int, branching: int, n: int = 2,
                             separation: int = MIN_SEPARATION, *,
                             seed: int | None = None, jitter: float = 0.0) -> DirectionSet:
    """Planar lacunary set of order ``order`` with ``branching**order`` directions.

    Directions are ``(1, r, 1, ..., 1)`` normalized, where the ratio ``r`` is
    built by nested dyadic perturbation::

        r = 2**-a1 * (1 + 2**-(a2+s) * (1 + 2**-(a3+s) * (...)))

    with exponents in ``1..branching`` and ``s = separation``. ``jitter``
    multiplies each ratio by ``1 + jitter * u`` with ``u`` uniform in [0, 1),
    drawn from ``seed``; it must stay well inside one nested scale.
    """
    if order < 1 or branching < 1:
        raise GeometryError("order and branching must be positive")
    if separation < MIN_SEPARATION:
        raise GeometryError(
            f"nested perturbations need at least {MIN_SEPARATION} dyadic levels of separation")
    if n < 2:
        raise GeometryError("n must be at least 2")
    ratios = np.array(_nested_ratios([range(1, branching + 1)] * order, separation))
    if jitter:
        if not 0 <= jitter < 2.0 ** -(branching + separation + 2):
            raise GeometryError("jitter would move directions across nested scales")
        rng = np.random.default_rng(seed)
        ratios = ratios * (1.0 + jitter * rng.random(ratios.size))
    vecs = np.ones((ratios.size, n))
    vecs[:, 1] = ratios
    declared = 0 if ratios.size == 1 else order
    return DirectionSet(vecs, order=declared)


def generate_product_lacunary(n: int, exponent_lists: Sequence[Sequence[int]]) -> DirectionSet:
    """Normalized ``(1, 2**-a1, ..., 2**-a_{n-1})`` over the product of exponent lists."""
    if n < 2:
        raise GeometryError("n must be at least 2")
    if len(exponent_lists) != n - 1:
        raise GeometryError("need one exponent list per coordinate 2..n")
    if any(len(lst) == 0 or min(lst) < 1 for lst in exponent_lists):
        raise GeometryError("exponent lists must be nonempty with exponents >= 1")
    rows = [[1.0] + [2.0 ** -a for a in combo] for combo in itertools.product(*exponent_lists)]
    return DirectionSet(rows)


def generate_equispaced(count: int, margin: float = 1e-3) -> DirectionSet:
    """Nested family of ``count`` planar directions equispaced in angle inside the quadrant.

    Angles ``margin + (pi/2 - 2*margin) * i / count``; the family for ``2*count``
    contains the one for ``count``.
    """
    if count < 1:
        raise GeometryError("count must be positive")
    theta = margin + (np.pi / 2 - 2 * margin) * np.arange(count) / count
    return DirectionSet(np.stack([np.cos(theta), np.sin(theta)], axis=1))


def dyadic_order(count: int) -> np.ndarray:
    """Bit-reversal ordering of ``range(count)`` (count a power of two)."""
    bits = max(count - 1, 1).bit_length()
    idx = np.arange(count)
    rev = np.zeros(count, dtype=int)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return np.argsort(rev, kind="stable")


# --------------------------------------------------------------------------
# cones and wedges


def cone_membership(xi, v) -> np.ndarray | bool:
    """``|xi . v| < (1/n) max_k |xi_k v_k|``, vectorized over leading axes of ``xi``."""
    xi = np.asarray(xi, dtype=float)
    v = np.asarray(v, dtype=float)
    n = v.shape[-1]
    prod = xi * v
    out = np.abs(prod.sum(axis=-1)) < np.abs(prod).max(axis=-1) / n
    return bool(out) if out.ndim == 0 else out


def wedge_bounds(n: int, ell: int, widened: bool) -> tuple[float, float]:
    m = n + 1 if widened else n
    return math.ldexp(1.0, -(ell + 1)) / m, math.ldexp(1.0, -ell) * m


def wedge_membership(xi, sigma: Sequence[int], ell, widened: bool = False):
    """``-xi_j / xi_k`` in ``[2**-(l+1)/n, 2**-l * n)`` (``n -> n+1`` when widened)."""
    xi = np.asarray(xi, dtype=float)
    n = xi.shape[-1]
    j, k = _check_sigma(sigma, n)
    a = xi[..., j - 1]
    b = xi[..., k - 1]
    ell = np.asarray(ell)
    m = n + 1 if widened else n
    lo = np.ldexp(1.0, -(ell + 1)) / m
    hi = np.ldexp(1.0, -ell) * m
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ratio = np.where(b != 0, -a / np.where(b != 0, b, 1.0), np.nan)
    out = (b != 0) & (ratio >= lo) & (ratio < hi)
    return bool(out) if out.ndim == 0 else out
