"""Periodic-grid FFT machinery on the torus ``[0, 1)^n``.

Physical samples sit at ``x = i / M``; the frequency side stores Fourier
coefficients ``c_k = M^-n sum_x f(x) exp(-2 pi i k.x)`` in FFT order, with
``k`` in ``{-M/2, ..., M/2 - 1}^n``. With the cell-weighted physical norm this
makes the transform unitary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.fft

from .symbols import lp_bump

PHYSICAL = "physical"
FREQUENCY = "frequency"
MAX_M = {2: 1024, 3: 128, 4: 32}


class GridError(ValueError):
    """Grid or side mismatch."""


@dataclass(frozen=True)
class TorusGrid:
    n: int
    M: int

    def __post_init__(self):
        if self.n not in MAX_M:
            raise GridError(f"dimension must be 2, 3 or 4, got {self.n}")
        if self.M < 8 or self.M & (self.M - 1) or self.M > MAX_M[self.n]:
            raise GridError(f"M must be a power of two in [8, {MAX_M[self.n]}] for n={self.n}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.M,) * self.n

    @property
    def size(self) -> int:
        return self.M ** self.n

    @property
    def cell(self) -> float:
        return 1.0 / self.M

    def axis_frequencies(self) -> np.ndarray:
        return scipy.fft.fftfreq(self.M, d=1.0 / self.M)

    def frequencies(self) -> np.ndarray:
        """Integer frequency vectors, shape ``(M,)*n + (n,)``, FFT order."""
        k = self.axis_frequencies()
        return np.stack(np.meshgrid(*([k] * self.n), indexing="ij"), axis=-1)

    def points(self) -> np.ndarray:
        x = np.arange(self.M) / self.M
        return np.stack(np.meshgrid(*([x] * self.n), indexing="ij"), axis=-1)

    def dyadic_range(self) -> range:
        """Littlewood-Paley levels ``t`` whose bands meet the lattice: ``0..log2(M)-1``."""
        return range(0, self.M.bit_length() - 1)

    def nonzero_mask(self) -> np.ndarray:
        mask = np.ones(self.shape, dtype=bool)
        mask[(0,) * self.n] = False
        return mask


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: TorusGrid
    values: np.ndarray
    side: str = PHYSICAL

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.shape != self.grid.shape:
            if vals.size != self.grid.size:
                raise GridError(f"expected {self.grid.size} values, got {vals.size}")
            vals = vals.reshape(self.grid.shape)
        if self.side not in (PHYSICAL, FREQUENCY):
            raise GridError(f"unknown side {self.side!r}")
        vals = np.array(vals, dtype=complex)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        _same(self, other)
        return GridFunction(self.grid, self.values + other.values, self.side)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        _same(self, other)
        return GridFunction(self.grid, self.values - other.values, self.side)

    def __mul__(self, c) -> "GridFunction":
        return GridFunction(self.grid, self.values * c, self.side)

    __rmul__ = __mul__

    @classmethod
    def from_callable(cls, grid: TorusGrid, func: Callable[[np.ndarray], np.ndarray]):
        return cls(grid, func(grid.points()))

    @classmethod
    def from_spectrum(cls, grid: TorusGrid, coeffs) -> "GridFunction":
        return fft_inverse(cls(grid, coeffs, FREQUENCY))


def _same(a: GridFunction, b: GridFunction) -> None:
    if a.grid != b.grid:
        raise GridError("grid mismatch")
    if a.side != b.side:
        raise GridError("side mismatch")


@dataclass(frozen=True, eq=False)
class SymbolField:
    grid: TorusGrid
    values: np.ndarray
    dc_value: complex = 0.0

    @property
    def sup(self) -> float:
        return float(np.abs(self.values).max())

    def __mul__(self, other: "SymbolField") -> "SymbolField":
        if self.grid != other.grid:
            raise GridError("grid mismatch")
        return SymbolField(self.grid, self.values * other.values, self.dc_value * other.dc_value)


# --------------------------------------------------------------------------
# transforms


def spectrum(values: np.ndarray) -> np.ndarray:
    """Fourier coefficients of a physical array (no side bookkeeping)."""
    return scipy.fft.fftn(values) / values.size


def synthesize(coeffs: np.ndarray) -> np.ndarray:
    """Physical samples from Fourier coefficients (no side bookkeeping)."""
    return scipy.fft.ifftn(coeffs) * coeffs.size


def fft_forward(f: GridFunction) -> GridFunction:
    if f.side != PHYSICAL:
        raise GridError("fft_forward expects a physical-side function")
    return GridFunction(f.grid, spectrum(f.values), FREQUENCY)


def fft_inverse(f: GridFunction) -> GridFunction:
    if f.side != FREQUENCY:
        raise GridError("fft_inverse expects a frequency-side function")
    return GridFunction(f.grid, synthesize(f.values), PHYSICAL)


def sample_symbol(symbol: Callable[[np.ndarray], np.ndarray], grid: TorusGrid,
                  dc_value: complex | None = 0.0) -> SymbolField:
    """Sample ``symbol`` on the nonzero lattice; the zero frequency gets ``dc_value``.

    ``dc_value=None`` evaluates the symbol at the origin as well.
    """
    xi = grid.frequencies()
    if dc_value is None:
        vals = np.asarray(symbol(xi), dtype=complex)
        dc = complex(vals[(0,) * grid.n])
    else:
        flat = xi.reshape(-1, grid.n)[1:]
        vals = np.empty(grid.size, dtype=complex)
        vals[0] = dc_value
        vals[1:] = np.asarray(symbol(flat), dtype=complex)
        vals = vals.reshape(grid.shape)
        dc = complex(dc_value)
    bad = ~np.isfinite(vals)
    if np.any(bad):
        where = tuple(int(c) for c in xi[tuple(np.argwhere(bad)[0])])
        raise GridError(f"non-finite symbol value at frequency {where}")
    return SymbolField(grid, vals, dc)


def apply_multiplier(symbol: SymbolField, f: GridFunction) -> GridFunction:
    if symbol.grid != f.grid:
        raise GridError("grid mismatch")
    if f.side != PHYSICAL:
        raise GridError("apply_multiplier expects a physical-side function")
    return GridFunction(f.grid, synthesize(symbol.values * spectrum(f.values)))


def lp_symbol(grid: TorusGrid, j: int, t: int, kind: str = "p") -> SymbolField:
    if not 1 <= j <= grid.n:
        raise GridError(f"coordinate index must be in 1..{grid.n}")
    k = grid.axis_frequencies()
    line = lp_bump(np.ldexp(k, -t), kind)
    shape = [1] * grid.n
    shape[j - 1] = grid.M
    vals = np.broadcast_to(line.reshape(shape), grid.shape).astype(complex)
    return SymbolField(grid, vals, 0.0)


def lp_projection(f: GridFunction, j: int, t: int) -> GridFunction:
    """Coordinate-wise Littlewood-Paley piece with symbol ``p(2**-t xi_j)``."""
    return apply_multiplier(lp_symbol(f.grid, j, t), f)


def norm(f: GridFunction | np.ndarray, p: float = 2.0) -> float:
    """Discrete L^p norm: cell-weighted on the physical side, counting on the frequency side."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if isinstance(f, GridFunction):
        vals, weighted = f.values, f.side == PHYSICAL
    else:
        vals, weighted = np.asarray(f), True
    a = np.abs(vals).ravel()
    if np.isinf(p):
        return float(a.max())
    # fixed-order pairwise summation in numpy keeps results reproducible
    total = np.sum(a ** p)
    if weighted:
        total = total / a.size
    return float(total ** (1.0 / p))


# --------------------------------------------------------------------------
# raw export / import


def save_grid_function(f: GridFunction, path: str | Path, dtype: str = "complex128") -> None:
    """Write ``path`` (raw little-endian samples) and ``path.json`` (header)."""
    path = Path(path)
    if dtype not in ("complex64", "complex128"):
        raise GridError("dtype must be complex64 or complex128")
    np.asarray(f.values, dtype=np.dtype(dtype).newbyteorder("<")).tofile(path)
    header = {"n": f.grid.n, "M": f.grid.M, "side": f.side, "dtype": dtype}
    Path(str(path) + ".json").write_text(json.dumps(header, sort_keys=True) + "\n")


def load_grid_function(path: str | Path) -> GridFunction:
    path = Path(path)
    header = json.loads(Path(str(path) + ".json").read_text())
    grid = TorusGrid(int(header["n"]), int(header["M"]))
    dtype = np.dtype(header.get("dtype", "complex128")).newbyteorder("<")
    vals = np.fromfile(path, dtype=dtype)
    if vals.size != grid.size:
        raise GridError(f"{path}: expected {grid.size} samples, found {vals.size}")
    return GridFunction(grid, vals.reshape(grid.shape), header["side"])
