"""Grid realizations of the directional operators.

Every linear operator here is a Fourier multiplier on a :class:`TorusGrid`,
described by an :class:`OperatorSpec` and applied through
:func:`spectral.apply_multiplier`. The maximal operators take pointwise
maxima of moduli over finite direction sets; the strong and directional
maximal functions run on the compiled kernels.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import kernels
from .geometry import (
    CellIndex,
    DirectionSet,
    GeometryError,
    _check_sigma,
    cell_index,
    make_direction,
    sigma_pairs,
)
from .spectral import (
    PHYSICAL,
    GridError,
    GridFunction,
    SymbolField,
    TorusGrid,
    apply_multiplier,
    lp_projection,
    sample_symbol,
    spectrum,
    synthesize,
)
from .symbols import (
    eta_family,
    hm_profile,
    kappa_sigma_ell,
    lp_bump,
    nsw_omega_v,
)

KINDS = ("identity", "directional", "nsw_cone", "wedge", "composite_wedge", "inner", "outer", "eta")
PIECES = ("full", "inner", "outer", "nsw")


class OperatorError(ValueError):
    """Inconsistent operator specification or arguments."""


@dataclass(frozen=True)
class OperatorSpec:
    """JSON-serializable description of one Fourier multiplier.

    ``direction`` is required by every kind except ``identity`` and the
    wedge kinds. ``sigma``/``ell`` describe a single wedge; ``U`` together
    with ``cell`` (the full cell labels, in ``sigma_pairs`` order) describe a
    composite wedge. ``j`` is the 1-based coordinate of an ``eta`` piece; on an ``outer``
    piece it selects ``T_v^out N_v^j``.
    """

    kind: str
    direction: tuple[float, ...] | None = None
    profile: str = "hilbert_sign"
    profile_scale: float = 1.0
    sigma: tuple[int, int] | None = None
    ell: int | None = None
    U: tuple[tuple[int, int], ...] | None = None
    cell: tuple[int, ...] | None = None
    j: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise OperatorError(f"unknown operator kind {self.kind!r}")
        if self.direction is not None:
            v = np.asarray(self.direction, dtype=float)
            # already-unit vectors are kept bit-exact so that JSON round trips are stable
            v = make_direction(v, normalize=abs(np.linalg.norm(v) - 1.0) > 1e-15)
            object.__setattr__(self, "direction", tuple(float(c) for c in v))
        needs_v = self.kind in ("directional", "nsw_cone", "inner", "outer", "eta")
        if needs_v and self.direction is None:
            raise OperatorError(f"{self.kind} needs a direction")
        if self.kind in ("directional", "inner", "outer"):
            hm_profile(self.profile, self.profile_scale)
        if self.kind == "wedge":
            if self.sigma is None or self.ell is None:
                raise OperatorError("wedge needs sigma and ell")
            object.__setattr__(self, "sigma", tuple(int(s) for s in self.sigma))
        if self.kind == "composite_wedge":
            if not self.U:
                raise OperatorError("composite wedge needs a nonempty U")
            if self.cell is None:
                raise OperatorError("composite wedge needs cell labels")
            object.__setattr__(self, "U", tuple(tuple(int(s) for s in sg) for sg in self.U))
            object.__setattr__(self, "cell", tuple(int(c) for c in self.cell))
        if self.kind == "eta" and self.j is None:
            raise OperatorError("eta needs a coordinate index j in 1..n")
        if self.j is not None:
            if self.kind not in ("eta", "outer"):
                raise OperatorError("only eta and outer pieces take a coordinate index j")
            if not 1 <= self.j <= len(self.direction):
                raise OperatorError("coordinate index j must lie in 1..n")

    # -- evaluation -------------------------------------------------------

    def symbol(self, xi: np.ndarray) -> np.ndarray:
        """Evaluate the symbol at nonzero frequency points ``xi`` (last axis = coordinates)."""
        xi = np.asarray(xi, dtype=float)
        n = xi.shape[-1]
        v = None if self.direction is None else np.asarray(self.direction)
        if v is not None and v.size != n:
            raise OperatorError(f"direction has {v.size} coordinates, grid has {n}")
        if self.kind == "identity":
            return np.ones(xi.shape[:-1], dtype=complex)
        if self.kind == "directional":
            return self._m(xi @ v)
        if self.kind == "nsw_cone":
            return nsw_omega_v(xi, v).astype(complex)
        if self.kind == "inner":
            return self._m(xi @ v) * nsw_omega_v(xi, v)
        if self.kind == "outer":
            out = self._m(xi @ v) * (1.0 - nsw_omega_v(xi, v))
            return out if self.j is None else out * eta_family(xi, v)[..., self.j - 1]
        if self.kind == "eta":
            return eta_family(xi, v)[..., self.j - 1].astype(complex)
        if self.kind == "wedge":
            return kappa_sigma_ell(xi, self.sigma, self.ell).astype(complex)
        labels = CellIndex(n, self.cell)
        out = np.ones(xi.shape[:-1])
        for sg in self.U:
            out = out * kappa_sigma_ell(xi, sg, labels[sg])
        return out.astype(complex)

    def _m(self, s):
        return hm_profile(self.profile, self.profile_scale)(s)

    def sample(self, grid: TorusGrid) -> SymbolField:
        dc = 1.0 if self.kind == "identity" else 0.0
        return sample_symbol(self.symbol, grid, dc)

    def apply(self, f: GridFunction) -> GridFunction:
        return apply_multiplier(self.sample(f.grid), f)

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {k: (list(map(list, v)) if k == "U" and v is not None
                    else list(v) if isinstance(v, tuple) else v)
                for k, v in asdict(self).items() if v is not None}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "OperatorSpec":
        data = dict(data)
        for key in ("direction", "sigma", "cell"):
            if data.get(key) is not None:
                data[key] = tuple(data[key])
        if data.get("U") is not None:
            data["U"] = tuple(tuple(s) for s in data["U"])
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise OperatorError(f"unknown operator fields {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "OperatorSpec":
        return cls.from_dict(json.loads(text))


def _vec(v) -> tuple[float, ...]:
    return tuple(float(c) for c in np.asarray(v, dtype=float))


def _physical(f: GridFunction) -> None:
    if f.side != PHYSICAL:
        raise GridError("operator expects a physical-side function")


# --------------------------------------------------------------------------
# linear operators


def directional_multiplier(f: GridFunction, v, profile: str = "hilbert_sign",
                           scale: float = 1.0) -> GridFunction:
    """``T_v f``: multiplier with symbol ``m(xi . v)``, zero at DC."""
    _physical(f)
    return OperatorSpec("directional", _vec(v), profile, scale).apply(f)


def nsw_projection(f: GridFunction, v) -> GridFunction:
    """``W_v f``: smooth projection onto a conical neighbourhood of ``v^perp``."""
    _physical(f)
    return OperatorSpec("nsw_cone", _vec(v)).apply(f)


def complement_nsw(f: GridFunction, v) -> GridFunction:
    """``(Id - W_v) f``."""
    return f - nsw_projection(f, v)


def wedge_projection(f: GridFunction, sigma: Sequence[int], ell: int) -> GridFunction:
    """``K_{sigma,ell} f`` with symbol ``kappa_{sigma,ell}``."""
    _physical(f)
    sigma = _check_sigma(sigma, f.grid.n)
    return OperatorSpec("wedge", sigma=sigma, ell=int(ell)).apply(f)


def composite_wedge(f: GridFunction, U: Iterable[Sequence[int]], ell: CellIndex) -> GridFunction:
    """``K_{U,ell} f``: product of the wedge symbols ``kappa_{sigma, ell_sigma}`` over ``U``."""
    _physical(f)
    U = tuple(_check_sigma(s, f.grid.n) for s in U)
    if not U:
        raise OperatorError("U must be nonempty")
    return OperatorSpec("composite_wedge", U=U, cell=tuple(ell.labels)).apply(f)


def inner_part(f: GridFunction, v, profile: str = "hilbert_sign", scale: float = 1.0) -> GridFunction:
    """``T_v W_v f``."""
    _physical(f)
    return OperatorSpec("inner", _vec(v), profile, scale).apply(f)


def outer_part(f: GridFunction, v, profile: str = "hilbert_sign", scale: float = 1.0) -> GridFunction:
    """``T_v f - T_v W_v f``, so that inner plus outer is ``T_v f``."""
    return directional_multiplier(f, v, profile, scale) - inner_part(f, v, profile, scale)


def eta_multiplier(f: GridFunction, v, j: int) -> GridFunction:
    """``N_v^j f`` with symbol ``eta_v^j``."""
    _physical(f)
    return OperatorSpec("eta", _vec(v), j=int(j)).apply(f)


def inclusion_exclusion_terms(v) -> Iterator[tuple[int, tuple[tuple[int, int], ...], CellIndex]]:
    """Yield ``(sign, U, cell)`` for every nonempty ``U`` in ``Sigma(n)``."""
    v = make_direction(v)
    cell = cell_index(v)
    pairs = sigma_pairs(v.size)
    for size in range(1, len(pairs) + 1):
        for U in itertools.combinations(pairs, size):
            yield (1 if size % 2 else -1), U, cell


def inclusion_exclusion_symbol(xi: np.ndarray, v) -> np.ndarray:
    """``sum_U (-1)^(|U|+1) omega_v kappa_{U,ell}``, evaluated directly."""
    xi = np.asarray(xi, dtype=float)
    v = make_direction(v)
    omega = nsw_omega_v(xi, v)
    total = np.zeros(xi.shape[:-1])
    for sign, U, cell in inclusion_exclusion_terms(v):
        prod = omega.copy()
        for sg in U:
            prod = prod * kappa_sigma_ell(xi, sg, cell[sg])
        total += sign * prod
    return total


# --------------------------------------------------------------------------
# maximal operators


def piece_spec(v, piece: str, profile: str = "hilbert_sign", scale: float = 1.0) -> OperatorSpec:
    if piece == "full":
        return OperatorSpec("directional", _vec(v), profile, scale)
    if piece == "inner":
        return OperatorSpec("inner", _vec(v), profile, scale)
    if piece == "outer":
        return OperatorSpec("outer", _vec(v), profile, scale)
    if piece == "nsw":
        return OperatorSpec("nsw_cone", _vec(v))
    raise OperatorError(f"unknown piece {piece!r}; expected one of {PIECES}")


def running_maximal(f: GridFunction, O: DirectionSet | Sequence, piece: str = "full",
                    profile: str = "hilbert_sign", scale: float = 1.0) -> Iterator[np.ndarray]:
    """Yield the pointwise maximum of ``|piece_v f|`` over the first ``k`` directions, ``k = 1, 2, ...``.

    The spectrum of ``f`` is computed once; the yielded array is updated in
    place, so copy it if it must outlive the next step.
    """
    _physical(f)
    vectors = O.vectors if isinstance(O, DirectionSet) else np.atleast_2d(np.asarray(O, float))
    if len(vectors) == 0:
        raise OperatorError("direction set is empty")
    coeffs = spectrum(f.values)
    out = np.zeros(f.grid.shape)
    for v in vectors:
        sym = piece_spec(v, piece, profile, scale).sample(f.grid)
        np.maximum(out, np.abs(synthesize(sym.values * coeffs)), out=out)
        yield out


def maximal_over_directions(f: GridFunction, O: DirectionSet | Sequence, pieces: str = "full",
                            profile: str = "hilbert_sign", scale: float = 1.0) -> GridFunction:
    """``sup_{v in O} |piece_v f|`` pointwise (``T_O``, ``T_O^in``, ``T_O^out`` or ``W_O``)."""
    out = None
    for out in running_maximal(f, O, pieces, profile, scale):
        pass
    return GridFunction(f.grid, out)


def wedge_square_function(f: GridFunction, U: Iterable[Sequence[int]], ell_range: Iterable[int]) -> GridFunction:
    """``(sum_ell |K_{U,ell} f|^2)^(1/2)`` over ``ell`` in ``ell_range^U``.

    Labels of pairs outside ``U`` do not enter ``K_{U,ell}``; they are set to 0.
    """
    _physical(f)
    n = f.grid.n
    U = tuple(_check_sigma(s, n) for s in U)
    if not U:
        raise OperatorError("U must be nonempty")
    ells = list(ell_range)
    xi = f.grid.frequencies().reshape(-1, n)[1:]
    # per-pair wedge symbols are reused across the lattice of labels
    kappas = {(sg, l): kappa_sigma_ell(xi, sg, l) for sg in U for l in ells}
    coeffs = spectrum(f.values).reshape(-1)
    acc = np.zeros(f.grid.shape)
    for labels in itertools.product(ells, repeat=len(U)):
        sym = np.ones(xi.shape[0])
        for sg, l in zip(U, labels):
            sym = sym * kappas[(sg, l)]
        if not np.any(sym):
            continue
        full = np.zeros(f.grid.size, dtype=complex)
        full[1:] = sym * coeffs[1:]
        acc += np.abs(synthesize(full.reshape(f.grid.shape))) ** 2
    return GridFunction(f.grid, np.sqrt(acc))


def strong_maximal(f: GridFunction) -> GridFunction:
    """Sup of averages of ``|f|`` over periodic axis-parallel rectangles with dyadic side lengths."""
    _physical(f)
    return GridFunction(f.grid, kernels.strong_maximal_kernel(np.abs(f.values)))


def default_radii(grid: TorusGrid) -> list[float]:
    """Dyadic radii ``2^-k`` in ``[cell, 1/4]``."""
    return [2.0 ** -k for k in range(2, int(np.log2(grid.M)) + 1)]


def directional_maximal(f: GridFunction, Omega: DirectionSet | Sequence,
                        radii: Sequence[float] | None = None) -> GridFunction:
    """``sup_v sup_s (2s)^-1 int_{-s}^{s} |f(x + t v)| dt`` over dyadic radii ``s``.

    Averages use multilinear interpolation and the trapezoid rule with step
    ``min(s/16, cell)``.
    """
    _physical(f)
    radii = default_radii(f.grid) if radii is None else list(radii)
    if not radii:
        raise OperatorError("radii must be nonempty")
    if any(not 0 < r < 0.5 for r in radii):
        raise OperatorError("radii must lie in (0, 1/2)")
    vectors = Omega.vectors if isinstance(Omega, DirectionSet) else np.atleast_2d(np.asarray(Omega, float))
    if len(vectors) == 0:
        raise OperatorError("direction set is empty")
    cells = [r * f.grid.M for r in radii]
    a = np.abs(f.values)
    out = np.zeros(f.grid.shape)
    for v in vectors:
        np.maximum(out, kernels.segment_max(a, v, cells), out=out)
    return GridFunction(f.grid, out)


# --------------------------------------------------------------------------
# square functions and kernels


def cww_square_function(f: GridFunction, operators: Sequence[OperatorSpec], j: int) -> GridFunction:
    """``(sum_t sup_tau |R_tau P_t^j f|^2)^(1/2)`` over the grid's dyadic range."""
    _physical(f)
    if not operators:
        raise OperatorError("operator list must be nonempty")
    symbols = [op.sample(f.grid) for op in operators]
    acc = np.zeros(f.grid.shape)
    for t in f.grid.dyadic_range():
        coeffs = spectrum(lp_projection(f, j, t).values)
        best = np.zeros(f.grid.shape)
        for sym in symbols:
            np.maximum(best, np.abs(synthesize(sym.values * coeffs)), out=best)
        acc += best ** 2
    return GridFunction(f.grid, np.sqrt(acc))


def signed_levels(v) -> np.ndarray:
    """Matrix ``L[k-1, j-1] = ell_kj``: ``ell_(k,j)`` for ``k < j``, ``-ell_(j,k)`` for ``k > j``, 0 on the diagonal."""
    cell = cell_index(v)
    n = cell.n
    L = np.zeros((n, n), dtype=int)
    for k in range(1, n + 1):
        for j in range(1, n + 1):
            L[k - 1, j - 1] = cell.signed(k, j)
    return L


def outer_kernel_symbol(v, j: int, t: int, profile: str = "hilbert_sign", scale: float = 1.0):
    """Pointwise symbol ``m(v . xi)(1 - omega_v) eta_v^j q(2^-t xi_j)``."""
    v = make_direction(v)
    if not 1 <= j <= v.size:
        raise GeometryError(f"coordinate index must be in 1..{v.size}")
    m = hm_profile(profile, scale)

    def symbol(xi):
        xi = np.asarray(xi, dtype=float)
        return (m(xi @ v) * (1.0 - nsw_omega_v(xi, v)) * eta_family(xi, v)[..., j - 1]
                * lp_bump(np.ldexp(xi[..., j - 1], -t), "q"))
    return symbol


def outer_kernel(v, j: int, t: int, grid: TorusGrid, profile: str = "hilbert_sign",
                 scale: float = 1.0) -> GridFunction:
    """Periodic kernel ``Phi_v`` of the outer piece at level ``t``: ``sum_k symbol(k) e^{2 pi i k.x}``."""
    sym = sample_symbol(outer_kernel_symbol(v, j, t, profile, scale), grid)
    return GridFunction(grid, synthesize(sym.values))
