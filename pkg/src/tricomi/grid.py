"""Periodic spatial grids, discrete transforms, and norm quadrature.

The continuum problem lives on R^n; the compact support of the source
justifies truncation to a large torus, with the period exposed as a
convergence parameter.  Transforms use the unitary FFT convention
(symmetric 1/sqrt(N) factors) so Parseval holds without volume factors;
all multiplier formulas in the package are written against it.
"""

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

__all__ = [
    "TorusGrid",
    "SpatialField",
    "SpectralField",
    "TimeGrid",
    "forward_transform",
    "inverse_transform",
    "lp_norm",
    "sobolev_norm",
    "laplacian",
    "spectral_gradient",
    "dealias_mask",
    "write_field",
    "read_field",
    "export_slice_csv",
]

MAX_TOTAL_POINTS = 2 ** 24  # memory cap on a single field

_MAGIC = b"TRIC"
_VERSION = 1


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic grid on [0, L)^dim."""

    dim: int
    points: tuple
    period: tuple

    def __init__(self, dim, points, period):
        if dim not in (1, 2, 3):
            raise DomainError(f"dim must be 1, 2 or 3, got {dim}")
        pts = tuple(int(p) for p in (points if np.iterable(points) else [points] * dim))
        per = tuple(float(L) for L in (period if np.iterable(period) else [period] * dim))
        if len(pts) != dim or len(per) != dim:
            raise DomainError("points/period must match dim")
        if any(p < 8 or p % 2 for p in pts):
            raise DomainError("points per axis must be even and >= 8")
        if any(L <= 0 for L in per):
            raise DomainError("period must be positive")
        if np.prod(pts) > MAX_TOTAL_POINTS:
            raise DomainError("total grid points exceed the memory cap")
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "period", per)

    @property
    def shape(self):
        return self.points

    @property
    def spacing(self):
        return tuple(L / p for L, p in zip(self.period, self.points))

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    def axes(self):
        """Coordinate arrays per axis, [0, L) uniform."""
        return [np.arange(p) * (L / p) for p, L in zip(self.points, self.period)]

    def meshgrid(self):
        return np.meshgrid(*self.axes(), indexing="ij")

    def wavenumbers(self):
        """Continuum wavenumbers 2 pi k / L per axis in FFT layout."""
        return [2 * np.pi * np.fft.fftfreq(p, d=L / p)
                for p, L in zip(self.points, self.period)]

    def derivative_wavenumbers(self):
        """Wavenumbers for odd-order derivative multipliers.

        The unpaired Nyquist mode of an even grid is zeroed; otherwise
        i*k*F(k) loses Hermitian symmetry and the derivative of a real
        field acquires a spurious imaginary part.
        """
        out = []
        for p, L in zip(self.points, self.period):
            k = 2 * np.pi * np.fft.fftfreq(p, d=L / p)
            k[p // 2] = 0.0
            out.append(k)
        return out

    def freq_modulus(self):
        """|xi| on the full FFT layout."""
        ks = self.wavenumbers()
        mesh = np.meshgrid(*ks, indexing="ij")
        return np.sqrt(sum(k ** 2 for k in mesh))

    def s_table(self, m):
        """The rescaled frequency s = |xi|^(2/(m+2)) used by the profile."""
        return self.freq_modulus() ** (2.0 / (m + 2))


@dataclass
class SpatialField:
    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise DomainError(
                f"field shape {self.values.shape} does not match grid {self.grid.shape}")


@dataclass
class SpectralField:
    grid: TorusGrid
    values: np.ndarray  # complex, full FFT layout

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != self.grid.shape:
            raise DomainError(
                f"spectrum shape {self.values.shape} does not match grid {self.grid.shape}")

    def hermitian_defect(self):
        """Max |F(k) - conj(F(-k))|, zero for spectra of real fields."""
        flipped = self.values.copy()
        for ax in range(self.grid.dim):
            flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
        return float(np.max(np.abs(self.values - np.conj(flipped))))


def forward_transform(f: SpatialField) -> SpectralField:
    return SpectralField(f.grid, np.fft.fftn(f.values, norm="ortho"))


def inverse_transform(F: SpectralField) -> SpatialField:
    w = np.fft.ifftn(F.values, norm="ortho")
    scale = np.max(np.abs(w)) + 1e-300
    if np.max(np.abs(w.imag)) > 1e-10 * scale:
        raise DomainError(
            "spectrum is not Hermitian-symmetric; inverse transform is not real")
    return SpatialField(F.grid, w.real)


def lp_norm(f: SpatialField, p) -> float:
    """Riemann-sum L^p norm on the torus; p = inf gives the max norm."""
    if p != np.inf and p < 1:
        raise DomainError(f"L^p norm needs p >= 1, got {p}")
    a = np.abs(f.values)
    if p == np.inf:
        return float(a.max())
    return float((f.grid.cell_volume * np.sum(a ** p)) ** (1.0 / p))


def sobolev_norm(F: SpectralField, gamma) -> float:
    """H^gamma norm via the <xi>^gamma multiplier (gamma=0 is L^2 by Parseval)."""
    w = (1.0 + F.grid.freq_modulus() ** 2) ** (0.5 * gamma)
    return float(np.sqrt(F.grid.cell_volume * np.sum(np.abs(w * F.values) ** 2)))


def laplacian(F: SpectralField) -> SpectralField:
    return SpectralField(F.grid, -F.grid.freq_modulus() ** 2 * F.values)


def spectral_gradient(F: SpectralField):
    """Tuple of spectral partial derivatives i xi_j F (Nyquist zeroed)."""
    ks = F.grid.derivative_wavenumbers()
    mesh = np.meshgrid(*ks, indexing="ij")
    return tuple(SpectralField(F.grid, 1j * k * F.values) for k in mesh)


def dealias_mask(grid: TorusGrid):
    """Boolean 2/3-rule mask (True = keep) for quadratic+ nonlinearities."""
    keep = np.ones(grid.shape, dtype=bool)
    for ax, p in enumerate(grid.points):
        k = np.fft.fftfreq(p) * p
        cut = np.abs(k) <= p / 3.0
        shape = [1] * grid.dim
        shape[ax] = p
        keep &= cut.reshape(shape)
    return keep


# ---------------------------------------------------------------------------
# time grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimeGrid:
    """Composite Gauss-Legendre grid on [t_start, t_end].

    ``breakpoints`` may be supplied directly (to cluster panels near a
    trace-matching endpoint); otherwise ``panels`` uniform panels are used.
    """

    t_start: float
    t_end: float
    panels: int
    nodes_per_panel: int
    breakpoints: tuple = field(default=None)

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise DomainError("need t_start < t_end")
        if self.panels < 1 or self.nodes_per_panel < 1:
            raise DomainError("panels and nodes_per_panel must be >= 1")
        if self.breakpoints is None:
            bp = tuple(np.linspace(self.t_start, self.t_end, self.panels + 1))
        else:
            bp = tuple(float(b) for b in self.breakpoints)
            if len(bp) != self.panels + 1:
                raise DomainError("breakpoints must have panels + 1 entries")
            if abs(bp[0] - self.t_start) > 0 or abs(bp[-1] - self.t_end) > 0:
                raise DomainError("breakpoints must span [t_start, t_end]")
        object.__setattr__(self, "breakpoints", bp)

    def rule(self):
        from .quadrature import PanelRule

        return PanelRule(np.array(self.breakpoints), self.nodes_per_panel)

    def refined(self, factor=2):
        return TimeGrid(self.t_start, self.t_end, self.panels,
                        self.nodes_per_panel * factor, self.breakpoints)


# ---------------------------------------------------------------------------
# raw field file format and CSV export
# ---------------------------------------------------------------------------

def write_field(path, f: SpatialField):
    """Raw format: 32-byte header (magic 'TRIC', version u16, dim u16,
    points u32 x 3, period f64, 4 pad bytes) then row-major little-endian f64."""
    per = set(f.grid.period)
    if len(per) != 1:
        raise DomainError("field files require equal periods on all axes")
    pts = list(f.grid.points) + [0] * (3 - f.grid.dim)
    header = struct.pack("<4sHH3Id4x", _MAGIC, _VERSION, f.grid.dim, *pts,
                         f.grid.period[0])
    assert len(header) == 32
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(f.values.astype("<f8").tobytes(order="C"))


def read_field(path) -> SpatialField:
    with open(path, "rb") as fh:
        header = fh.read(32)
        if len(header) != 32:
            raise DomainError(f"{path}: truncated header")
        magic, version, dim, p0, p1, p2, period = struct.unpack("<4sHH3Id4x", header)
        if magic != _MAGIC:
            raise DomainError(f"{path}: bad magic {magic!r}")
        if version != _VERSION:
            raise DomainError(f"{path}: unsupported version {version}")
        pts = [p for p in (p0, p1, p2) if p][:dim]
        grid = TorusGrid(dim, pts, [period] * dim)
        data = np.frombuffer(fh.read(), dtype="<f8").reshape(pts)
    return SpatialField(grid, data.copy())


def export_slice_csv(path, f: SpatialField, axis_values=None):
    """CSV of a 1D field or a 2D field (x, y, value rows)."""
    axes = f.grid.axes()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if f.grid.dim == 1:
            w.writerow(["x", "value"])
            for x, v in zip(axes[0], f.values):
                w.writerow([repr(float(x)), repr(float(v))])
        elif f.grid.dim == 2:
            w.writerow(["x", "y", "value"])
            for i, x in enumerate(axes[0]):
                for j, y in enumerate(axes[1]):
                    w.writerow([repr(float(x)), repr(float(y)), repr(float(f.values[i, j]))])
        else:
            raise DomainError("CSV export supports 1D and 2D fields only")
