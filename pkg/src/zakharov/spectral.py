"""Periodic-grid geometry, transforms, Fourier multipliers and norms.

Conventions
-----------
The box is ``[0, L)^2`` sampled at ``M x M`` points, ``x_i = i L / M``, axis 0
is ``x`` and axis 1 is ``y`` (``indexing="ij"``).  Spectral coefficients are
normalised so that a trigonometric polynomial reads

    f(x) = sum_k  fhat[k] * exp(i k . x),

i.e. ``fhat = numpy.fft.fft2(f, norm="forward")``.  Coefficient arrays use the
standard zero-frequency-first FFT layout: along each axis, index ``j`` holds
the wavenumber ``(2 pi / L) * j`` for ``j < M/2`` and ``(2 pi / L) * (j - M)``
otherwise.  Index ``M/2`` is the Nyquist row/column (wavenumber ``-pi M / L``).

With this normalisation ``||f||_{L^2}^2 = L^2 * sum |fhat|^2``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import BinaryIO, Callable, Iterator, Union

import numpy as np

PHYSICAL = "physical"
SPECTRAL = "spectral"
_REPR_TAGS = {PHYSICAL: 0, SPECTRAL: 1}

DEFAULT_BOX_LENGTH = 16 * np.pi

SymbolLike = Union[Callable[[np.ndarray, np.ndarray], np.ndarray], np.ndarray, float, complex]


@dataclass(frozen=True)
class GridSpec:
    """Square periodic box with ``modes_per_axis`` points per axis."""

    modes_per_axis: int
    box_length: float = DEFAULT_BOX_LENGTH

    def __post_init__(self):
        M = self.modes_per_axis
        if int(M) != M or M < 8 or M % 2:
            raise ValueError(f"modes_per_axis must be an even integer >= 8, got {M!r}")
        if not (self.box_length > 0 and np.isfinite(self.box_length)):
            raise ValueError(f"box_length must be positive, got {self.box_length!r}")
        object.__setattr__(self, "modes_per_axis", int(M))
        object.__setattr__(self, "box_length", float(self.box_length))

    @property
    def M(self) -> int:
        return self.modes_per_axis

    @property
    def L(self) -> float:
        return self.box_length

    @property
    def dx(self) -> float:
        return self.box_length / self.modes_per_axis

    @property
    def dk(self) -> float:
        """Lattice spacing ``2 pi / L`` in frequency space."""
        return 2 * np.pi / self.box_length

    @property
    def nyquist(self) -> float:
        """Nyquist wavenumber ``pi M / L``."""
        return np.pi * self.modes_per_axis / self.box_length

    @property
    def cell_area(self) -> float:
        return self.dx**2

    @cached_property
    def index(self) -> np.ndarray:
        """Signed integer wavenumber index per axis, FFT order."""
        return np.fft.fftfreq(self.M, d=1.0 / self.M).round().astype(np.int64)

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.M) * self.dx

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return tuple(_readonly(a) for a in np.meshgrid(self.x, self.x, indexing="ij"))

    @cached_property
    def wavevectors(self) -> tuple[np.ndarray, np.ndarray]:
        k = self.index * self.dk
        return tuple(_readonly(a) for a in np.meshgrid(k, k, indexing="ij"))

    @cached_property
    def k_squared(self) -> np.ndarray:
        kx, ky = self.wavevectors
        return _readonly(kx**2 + ky**2)

    @cached_property
    def k_abs(self) -> np.ndarray:
        return _readonly(np.sqrt(self.k_squared))

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True off the Nyquist row/column."""
        keep = self.index != -self.M // 2
        return _readonly(keep[:, None] & keep[None, :])

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keep ``|j| < M/3`` along both axes."""
        keep = 3 * np.abs(self.index) < self.M
        return _readonly(keep[:, None] & keep[None, :])

    @cached_property
    def radius_classes(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct integer ``|j|^2`` values on the lattice and the class index per mode.

        Symbols that only depend on ``|xi|`` are tabulated once per class.
        """
        jx, jy = np.meshgrid(self.index, self.index, indexing="ij")
        r2 = jx**2 + jy**2
        values, inverse = np.unique(r2, return_inverse=True)
        return _readonly(values), _readonly(inverse.reshape(r2.shape))

    def zeros(self) -> np.ndarray:
        return np.zeros((self.M, self.M), dtype=complex)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Field2D:
    """A complex scalar field on ``grid`` tagged with its representation."""

    grid: GridSpec
    data: np.ndarray
    representation: str = PHYSICAL
    real_valued: bool = field(default=False)

    def __post_init__(self):
        if self.representation not in _REPR_TAGS:
            raise ValueError(f"unknown representation {self.representation!r}")
        data = np.array(self.data, dtype=complex)
        if data.shape != (self.grid.M, self.grid.M):
            raise ValueError(f"data shape {data.shape} does not match grid {self.grid.M}x{self.grid.M}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def physical(cls, grid: GridSpec, values, real_valued: bool = False) -> "Field2D":
        return cls(grid, values, PHYSICAL, real_valued)

    @classmethod
    def spectral(cls, grid: GridSpec, coeffs, real_valued: bool = False) -> "Field2D":
        return cls(grid, coeffs, SPECTRAL, real_valued)

    @classmethod
    def from_function(cls, grid: GridSpec, fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
                      real_valued: bool = False) -> "Field2D":
        X, Y = grid.mesh
        return cls.physical(grid, np.broadcast_to(fn(X, Y), X.shape), real_valued)

    @property
    def is_spectral(self) -> bool:
        return self.representation == SPECTRAL

    def to_spectral(self) -> "Field2D":
        return to_spectral(self)

    def to_physical(self) -> "Field2D":
        return to_physical(self)

    def spectral_data(self) -> np.ndarray:
        """Coefficients regardless of the stored representation."""
        return self.data if self.is_spectral else np.fft.fft2(self.data, norm="forward")

    def physical_data(self) -> np.ndarray:
        return np.fft.ifft2(self.data, norm="forward") if self.is_spectral else self.data

    def with_data(self, data, representation: str | None = None) -> "Field2D":
        return Field2D(self.grid, data, representation or self.representation, self.real_valued)

    def __add__(self, other: "Field2D") -> "Field2D":
        _check_same_grid(self, other)
        return Field2D(self.grid, self.spectral_data() + other.spectral_data(), SPECTRAL,
                       self.real_valued and other.real_valued)

    def __sub__(self, other: "Field2D") -> "Field2D":
        _check_same_grid(self, other)
        return Field2D(self.grid, self.spectral_data() - other.spectral_data(), SPECTRAL,
                       self.real_valued and other.real_valued)

    def __mul__(self, scalar) -> "Field2D":
        if isinstance(scalar, Field2D):
            raise TypeError("pointwise products of fields: multiply physical_data() explicitly")
        return Field2D(self.grid, self.data * scalar, self.representation,
                       self.real_valued and np.isrealobj(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "Field2D":
        return self * -1.0

    def conj(self) -> "Field2D":
        if self.is_spectral:
            return self.with_data(conjugate_coefficients(self.data, self.grid))
        return self.with_data(np.conj(self.data))


def _check_same_grid(a: Field2D, b: Field2D) -> None:
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")


def to_spectral(f: Field2D) -> Field2D:
    if f.representation != PHYSICAL:
        raise ValueError("to_spectral expects a field in physical representation")
    return Field2D(f.grid, np.fft.fft2(f.data, norm="forward"), SPECTRAL, f.real_valued)


def to_physical(f: Field2D) -> Field2D:
    if f.representation != SPECTRAL:
        raise ValueError("to_physical expects a field in spectral representation")
    return Field2D(f.grid, np.fft.ifft2(f.data, norm="forward"), PHYSICAL, f.real_valued)


def reflect(coeffs: np.ndarray) -> np.ndarray:
    """Return ``c(-k)`` in FFT layout (the Nyquist index maps to itself)."""
    return np.roll(coeffs[::-1, ::-1], 1, axis=(0, 1))


def conjugate_coefficients(coeffs: np.ndarray, grid: GridSpec | None = None) -> np.ndarray:
    """Coefficients of the complex conjugate field: ``conj(c(-k))``."""
    return np.conj(reflect(coeffs))


def hermitian_defect(coeffs: np.ndarray) -> float:
    """Max ``|c(-k) - conj c(k)|`` relative to ``max |c|``; zero for real fields."""
    scale = np.max(np.abs(coeffs))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(reflect(coeffs) - np.conj(coeffs))) / scale)


def _symbol_values(symbol: SymbolLike, grid: GridSpec) -> np.ndarray:
    if callable(symbol):
        kx, ky = grid.wavevectors
        values = symbol(kx, ky)
    else:
        values = symbol
    values = np.broadcast_to(np.asarray(values, dtype=complex), (grid.M, grid.M))
    if not np.all(np.isfinite(values)):
        raise ValueError("multiplier symbol is not finite on the lattice")
    return values


def apply_multiplier(f: Field2D, symbol: SymbolLike) -> Field2D:
    """Coefficientwise product ``symbol(xi) * fhat(xi)``.

    ``symbol`` is a callable of the wavevector components ``(kx, ky)``
    (vectorised over lattice arrays), a precomputed ``M x M`` array, or a
    scalar.  Non-real symbols drop the ``real_valued`` tag.
    """
    if not f.is_spectral:
        raise ValueError("apply_multiplier expects a spectral field")
    values = _symbol_values(symbol, f.grid)
    real = f.real_valued and np.allclose(values.imag, 0) and hermitian_defect(values + 0j) < 1e-14
    return Field2D(f.grid, values * f.data, SPECTRAL, real)


def _spec(f: Field2D) -> Field2D:
    return f if f.is_spectral else to_spectral(f)


def lam(f: Field2D) -> Field2D:
    """``Lambda = sqrt(-Laplacian)``: symbol ``|xi|`` (zero mode stays 0)."""
    return apply_multiplier(_spec(f), f.grid.k_abs)


def lam_inv(f: Field2D) -> Field2D:
    """``Lambda^{-1}`` with the zero mode projected out."""
    return apply_multiplier(_spec(f), inverse_symbol(f.grid.k_abs))


def inverse_symbol(symbol: np.ndarray) -> np.ndarray:
    out = np.zeros_like(symbol, dtype=float)
    nz = symbol != 0
    out[nz] = 1.0 / symbol[nz]
    return out


def gradient(f: Field2D) -> tuple[Field2D, Field2D]:
    kx, ky = f.grid.wavevectors
    fs = _spec(f)
    return apply_multiplier(fs, 1j * kx), apply_multiplier(fs, 1j * ky)


def divergence(vx: Field2D, vy: Field2D) -> Field2D:
    _check_same_grid(vx, vy)
    kx, ky = vx.grid.wavevectors
    data = 1j * kx * _spec(vx).data + 1j * ky * _spec(vy).data
    return Field2D(vx.grid, data, SPECTRAL, vx.real_valued and vy.real_valued)


def curl(vx: Field2D, vy: Field2D) -> Field2D:
    """Scalar curl ``d_x v_y - d_y v_x``."""
    _check_same_grid(vx, vy)
    kx, ky = vx.grid.wavevectors
    data = 1j * kx * _spec(vy).data - 1j * ky * _spec(vx).data
    return Field2D(vx.grid, data, SPECTRAL, vx.real_valued and vy.real_valued)


def laplacian(f: Field2D) -> Field2D:
    return apply_multiplier(_spec(f), -f.grid.k_squared)


def lp_norm(f: Field2D, p) -> float:
    """Equal-weight quadrature ``(sum |f|^p (L/M)^2)^(1/p)``; ``p`` may be ``inf``."""
    values = np.abs(f.physical_data())
    if p in (np.inf, "inf"):
        return float(values.max())
    p = float(p)
    if not (p >= 1 and np.isfinite(p)):
        raise ValueError(f"unsupported Lp exponent {p!r}")
    return float((np.sum(values**p) * f.grid.cell_area) ** (1.0 / p))


def l2_norm_sq(f: Field2D) -> float:
    """``||f||_{L^2}^2`` from the coefficients (Parseval)."""
    c = f.spectral_data()
    return float(f.grid.L**2 * np.sum(np.abs(c) ** 2))


def sobolev_norm(f: Field2D, s: float) -> float:
    """``||f||_{H^s} = (L^2 sum <xi>^{2s} |fhat|^2)^{1/2}``."""
    c = f.spectral_data()
    weight = (1.0 + f.grid.k_squared) ** s
    return float(np.sqrt(f.grid.L**2 * np.sum(weight * np.abs(c) ** 2)))


def dealias(coeffs: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Zero the upper third of modes (2/3 rule); this includes the Nyquist row."""
    return coeffs * grid.dealias_mask


def drop_nyquist(coeffs: np.ndarray, grid: GridSpec) -> np.ndarray:
    return coeffs * grid.nyquist_mask


def pad_coefficients(coeffs: np.ndarray, factor: int = 2) -> np.ndarray:
    """Embed ``M x M`` coefficients into a ``factor*M`` grid at the same wavenumbers.

    The Nyquist row/column of the source is dropped so the embedding is
    unambiguous.
    """
    M = coeffs.shape[0]
    P = factor * M
    idx = np.fft.fftfreq(M, d=1.0 / M).round().astype(int)
    keep = idx != -M // 2
    target = idx[keep] % P
    out = np.zeros((P, P), dtype=complex)
    out[np.ix_(target, target)] = coeffs[np.ix_(keep, keep)]
    return out


def truncate_coefficients(padded: np.ndarray, M: int) -> np.ndarray:
    """Inverse of :func:`pad_coefficients` (Nyquist entries are left zero)."""
    P = padded.shape[0]
    idx = np.fft.fftfreq(M, d=1.0 / M).round().astype(int)
    keep = idx != -M // 2
    out = np.zeros((M, M), dtype=complex)
    src = idx[keep] % P
    out[np.ix_(keep, keep)] = padded[np.ix_(src, src)]
    return out


def exact_integral(grid: GridSpec, *coeff_arrays: np.ndarray) -> complex:
    """``int prod_j f_j dx`` for trigonometric polynomials on the lattice, without aliasing.

    The factors are zero-padded to a grid fine enough that the quadrature of
    the product is exact (Nyquist modes excluded).
    """
    n = len(coeff_arrays)
    factor = n // 2 + 1
    prod = None
    for c in coeff_arrays:
        values = np.fft.ifft2(pad_coefficients(c, factor), norm="forward")
        prod = values if prod is None else prod * values
    return complex(np.mean(prod) * grid.L**2)


# -- binary snapshots -------------------------------------------------------

SNAPSHOT_MAGIC = b"ZKF1"
_HEADER = struct.Struct("<4sIddB")


def write_snapshot(stream_or_path, fields, t: float = 0.0) -> None:
    """Write one or more ZKF1 records.

    Record layout (little-endian): magic ``ZKF1``, ``u32 M``, ``f64 L``,
    ``f64 t``, ``u8`` representation tag (0 physical, 1 spectral), then
    ``M*M`` complex values as interleaved ``f64`` (re, im), row-major, axis 0
    first.  Spectral records use the zero-frequency-first FFT layout.
    Several records may be concatenated in one file.
    """
    if isinstance(fields, Field2D):
        fields = [fields]
    if isinstance(stream_or_path, (str, Path)):
        with open(stream_or_path, "wb") as fh:
            write_snapshot(fh, fields, t)
        return
    for f in fields:
        header = _HEADER.pack(SNAPSHOT_MAGIC, f.grid.M, f.grid.L, float(t), _REPR_TAGS[f.representation])
        stream_or_path.write(header)
        stream_or_path.write(np.ascontiguousarray(f.data, dtype="<c16").tobytes())


def iter_snapshot(stream: BinaryIO) -> Iterator[tuple[float, Field2D]]:
    tags = {v: k for k, v in _REPR_TAGS.items()}
    while True:
        head = stream.read(_HEADER.size)
        if not head:
            return
        if len(head) != _HEADER.size:
            raise ValueError("truncated snapshot header")
        magic, M, L, t, tag = _HEADER.unpack(head)
        if magic != SNAPSHOT_MAGIC:
            raise ValueError(f"bad snapshot magic {magic!r}")
        if tag not in tags:
            raise ValueError(f"bad representation tag {tag}")
        nbytes = M * M * 16
        body = stream.read(nbytes)
        if len(body) != nbytes:
            raise ValueError("truncated snapshot body")
        data = np.frombuffer(body, dtype="<c16").reshape(M, M)
        yield t, Field2D(GridSpec(M, L), data, tags[tag])


def read_snapshot(path) -> tuple[float, list[Field2D]]:
    """Read every record in ``path``; returns the time of the first record and the fields."""
    with open(path, "rb") as fh:
        records = list(iter_snapshot(fh))
    if not records:
        raise ValueError(f"{path}: empty snapshot")
    return records[0][0], [f for _, f in records]
