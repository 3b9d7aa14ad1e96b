"""Problem parameters, grid geometry, field container and checkpoint I/O.

The spatial domain is the periodic box [-L, L)^N sampled cell-centered so
that no grid point sits at the origin (the potential |x|^{-b} is evaluated
pointwise).
"""

from __future__ import annotations

import json
import struct
import time
import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np

CHECKPOINT_MAGIC = b"INLSLAB\x00CKPT\x00\x00\x01\x00"  # 16 bytes, version 1

BOUNDARY_DECAY_TOL = 1e-12


class InvariantError(ValueError):
    """A domain-type invariant was violated."""


class NonFiniteFieldError(FloatingPointError):
    """NaN or Inf appeared in field samples (blow-up/overflow signal)."""


class BoundaryDecayWarning(UserWarning):
    """Initial data does not decay to 1e-12 of its peak at the box boundary."""


@dataclass(frozen=True)
class ProblemParams:
    """Dimension N, inhomogeneity exponent b, and derived exponents."""

    ndim: int
    b: float

    def __post_init__(self):
        if self.ndim not in (1, 2, 3):
            raise InvariantError(f"dimension must be 1, 2 or 3, got {self.ndim}")
        if not (0.0 < self.b < 2.0):
            raise InvariantError(f"b must lie in (0, 2), got {self.b}")

    @property
    def p(self) -> float:
        """Full nonlinearity exponent (4-2b)/N + 2 on |u|^p in the energy."""
        return (4.0 - 2.0 * self.b) / self.ndim + 2.0

    @property
    def sigma(self) -> float:
        """Power (4-2b)/N multiplying |u| inside the nonlinear term."""
        return (4.0 - 2.0 * self.b) / self.ndim

    @property
    def energy_coefficient(self) -> float:
        """Coefficient N/(4-2b+2N) of the weighted potential term in E[u]."""
        return self.ndim / (4.0 - 2.0 * self.b + 2.0 * self.ndim)


@dataclass(frozen=True)
class Grid:
    """Cell-centered periodic Cartesian box [-L, L)^N with M points per axis."""

    ndim: int
    half_width: float
    points_per_axis: int
    offset: bool = True

    def __post_init__(self):
        if self.ndim not in (1, 2, 3):
            raise InvariantError(f"grid dimension must be 1, 2 or 3, got {self.ndim}")
        if self.half_width <= 0:
            raise InvariantError("half_width must be positive")
        M = self.points_per_axis
        if M <= 0 or M % 2 != 0:
            raise InvariantError(f"points_per_axis must be positive and even, got {M}")

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / self.points_per_axis

    @property
    def shape(self) -> tuple:
        return (self.points_per_axis,) * self.ndim

    @property
    def size(self) -> int:
        return self.points_per_axis**self.ndim

    @property
    def cell_volume(self) -> float:
        return self.h**self.ndim

    def axis_coords(self) -> np.ndarray:
        j = np.arange(self.points_per_axis, dtype=float)
        shift = 0.5 if self.offset else 0.0
        return -self.half_width + (j + shift) * self.h

    def coords(self) -> list:
        """Per-axis coordinate arrays broadcast to the full grid shape."""
        x = self.axis_coords()
        return list(np.meshgrid(*([x] * self.ndim), indexing="ij", sparse=True))

    def radii(self) -> np.ndarray:
        """|x| on the full grid; strictly positive when offset is set."""
        r2 = sum(xj**2 for xj in self.coords())
        return np.sqrt(r2)

    def index_to_coord(self, flat_index: int) -> tuple:
        idx = np.unravel_index(flat_index, self.shape)
        x = self.axis_coords()
        return tuple(x[i] for i in idx)

    def coord_to_index(self, point) -> int:
        x = self.axis_coords()
        idx = tuple(int(np.argmin(np.abs(x - c))) for c in np.atleast_1d(point))
        return int(np.ravel_multi_index(idx, self.shape))


@dataclass(frozen=True)
class Field:
    """Complex scalar samples u(x) on a Grid, row-major over axes."""

    params: ProblemParams
    grid: Grid
    values: np.ndarray = dc_field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != self.grid.shape:
            raise InvariantError(
                f"values shape {v.shape} does not match grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(v.view(float))):
            raise NonFiniteFieldError("field contains NaN or Inf samples")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class InitialData:
    """Initial-data descriptor: Gaussian bumps or a stored checkpoint.

    A nonzero center gives non-radial data. kind "sum_of_gaussians" adds a
    second bump (amplitude2, width2, center2).
    """

    kind: str = "gaussian"
    amplitude: float = 1.0
    width: float = 1.0
    center: tuple = (0.0,)
    amplitude2: float = 0.0
    width2: float = 1.0
    center2: tuple = (0.0,)
    checkpoint_path: str | None = None

    KINDS = ("gaussian", "shifted_gaussian", "sum_of_gaussians", "from_checkpoint")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise InvariantError(f"unknown initial-data kind {self.kind!r}")
        if not np.isfinite(self.amplitude):
            raise InvariantError("amplitude must be finite")
        if self.width <= 0 or self.width2 <= 0:
            raise InvariantError("widths must be positive")
        if self.kind == "from_checkpoint" and not self.checkpoint_path:
            raise InvariantError("from_checkpoint requires checkpoint_path")


def _gaussian(grid: Grid, amplitude: float, width: float, center) -> np.ndarray:
    c = np.zeros(grid.ndim)
    c[: len(np.atleast_1d(center))] = np.atleast_1d(center)[: grid.ndim]
    r2 = sum((xj - cj) ** 2 for xj, cj in zip(grid.coords(), c))
    return amplitude * np.exp(-r2 / (2.0 * width**2)) + 0.0j


def realize(init: InitialData, params: ProblemParams, grid: Grid) -> Field:
    """Sample the initial data on the grid; warns if it fails to decay at
    the box boundary (box-adequacy check)."""
    if init.kind == "from_checkpoint":
        f, _meta = read_checkpoint(init.checkpoint_path)
        if f.params != params or f.grid != grid:
            raise InvariantError("checkpoint metadata does not match requested params/grid")
        return f

    u = _gaussian(grid, init.amplitude, init.width, init.center)
    if init.kind == "sum_of_gaussians":
        u = u + _gaussian(grid, init.amplitude2, init.width2, init.center2)

    peak = np.max(np.abs(u))
    if peak > 0:
        edge = 0.0
        for axis in range(grid.ndim):
            sl0 = [slice(None)] * grid.ndim
            sl1 = [slice(None)] * grid.ndim
            sl0[axis] = 0
            sl1[axis] = -1
            edge = max(edge, np.max(np.abs(u[tuple(sl0)])), np.max(np.abs(u[tuple(sl1)])))
        if edge > BOUNDARY_DECAY_TOL * peak:
            warnings.warn(
                f"initial data is {edge / peak:.2e} of its peak at the box boundary "
                f"(> {BOUNDARY_DECAY_TOL:g}); enlarge the box",
                BoundaryDecayWarning,
            )
    return Field(params, grid, u)


def l2_norm(f: Field) -> float:
    """sqrt of the rectangle-rule quadrature of |u|^2."""
    return float(np.sqrt(f.grid.cell_volume * np.sum(np.abs(f.values) ** 2)))


def sup_norm(f: Field) -> float:
    return float(np.max(np.abs(f.values)))


def grad_norm(plan, f: Field) -> float:
    """H1 seminorm via spectral differentiation (delegates to the plan)."""
    return plan.grad_norm(f.values)


# ---------------------------------------------------------------------------
# checkpoint format: 16-byte magic/version header, then N and M per axis and
# L and b as little-endian 64-bit values, then M^N interleaved (re, im)
# float64 pairs, row-major; plus a sidecar JSON manifest.
# ---------------------------------------------------------------------------


def write_checkpoint(path, f: Field, t: float = 0.0, run_id: str = "") -> None:
    path = str(path)
    grid, params = f.grid, f.params
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<q", grid.ndim))
        for _ in range(grid.ndim):
            fh.write(struct.pack("<q", grid.points_per_axis))
        fh.write(struct.pack("<d", grid.half_width))
        fh.write(struct.pack("<d", params.b))
        inter = np.empty(2 * grid.size)
        flat = f.values.ravel()
        inter[0::2] = flat.real
        inter[1::2] = flat.imag
        fh.write(inter.astype("<f8").tobytes())
    manifest = {
        "ndim": grid.ndim,
        "points_per_axis": grid.points_per_axis,
        "half_width": grid.half_width,
        "b": params.b,
        "t": t,
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "run_id": run_id,
    }
    with open(path + ".json", "w") as fh:
        json.dump(manifest, fh, indent=2)


def read_checkpoint(path):
    """Returns (Field, manifest dict); manifest is {} if the sidecar is absent."""
    path = str(path)
    with open(path, "rb") as fh:
        magic = fh.read(16)
        if magic != CHECKPOINT_MAGIC:
            raise InvariantError(f"bad checkpoint magic in {path}")
        (ndim,) = struct.unpack("<q", fh.read(8))
        ms = [struct.unpack("<q", fh.read(8))[0] for _ in range(ndim)]
        if len(set(ms)) != 1:
            raise InvariantError("per-axis point counts must agree")
        (half_width,) = struct.unpack("<d", fh.read(8))
        (b,) = struct.unpack("<d", fh.read(8))
        n = ms[0] ** ndim
        inter = np.frombuffer(fh.read(16 * n), dtype="<f8")
        if inter.size != 2 * n:
            raise InvariantError(f"truncated checkpoint {path}")
    values = (inter[0::2] + 1j * inter[1::2]).reshape((ms[0],) * ndim)
    params = ProblemParams(ndim, b)
    grid = Grid(ndim, half_width, ms[0])
    meta = {}
    try:
        with open(path + ".json") as fh:
            meta = json.load(fh)
    except OSError:
        pass
    return Field(params, grid, values), meta
