"""Discretized one-dimensional nuclear Hamiltonians on uniform grids.

The kinetic energy operator is approximated by a Gaussian-times-even-Hermite
convolution kernel evaluated between grid points; the potential is diagonal.
Matrices are dense, real symmetric, in Hartree atomic units. Everything here
is immutable after construction and safe to use concurrently.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .constants import ANGSTROM_TO_BOHR, HARTREE_TO_INVCM

__all__ = [
    "SpatialGrid",
    "DafKineticSpec",
    "PotentialCurve",
    "NuclearHamiltonian",
    "EigenSolution",
    "hermite_even",
    "daf_kernel",
    "kinetic_matrix",
    "build_hamiltonian",
    "load_builtin_dmanh",
    "reflection_symmetrize",
    "exact_diagonalize",
    "pairwise_splittings",
    "splittings_invcm",
    "load_potential_csv",
    "save_hamiltonian_csv",
    "load_hamiltonian_csv",
    "DMANH_NN_DISTANCE_BOHR",
]

SYMMETRY_TOL = 1e-12
ORTHONORMALITY_TOL = 1e-12
RESIDUAL_TOL = 1e-10


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform grid of 2^N points on [x_min, x_max], lengths in Bohr."""

    n_points: int
    x_min: float
    x_max: float

    def __post_init__(self):
        if not _is_power_of_two(self.n_points) or self.n_points < 2:
            raise ValueError(f"n_points must be a power of two >= 2, got {self.n_points}")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")

    @property
    def spacing(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def n_qubits(self) -> int:
        return self.n_points.bit_length() - 1

    def points(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_points)


@dataclass(frozen=True)
class DafKineticSpec:
    """Parameters of the kinetic-energy kernel.

    mass is the particle mass in electron masses, sigma the Gaussian width in
    Bohr, and m_daf the (even) truncation order of the Hermite sum. Larger
    m_daf widens the band of accurately represented momenta; sigma of about
    twice the grid spacing keeps the kernel well resolved on the grid.
    """

    mass: float
    sigma: float
    m_daf: int = 20

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.m_daf < 0 or self.m_daf % 2 != 0:
            raise ValueError(f"m_daf must be an even non-negative integer, got {self.m_daf}")
        if self.m_daf > 200:
            raise ValueError("m_daf > 200 is outside the supported evaluation-stability range")

    @classmethod
    def for_grid(cls, grid: SpatialGrid, mass: float, m_daf: int = 20) -> "DafKineticSpec":
        """Default width: twice the grid spacing."""
        return cls(mass=mass, sigma=2.0 * grid.spacing, m_daf=m_daf)


@dataclass(frozen=True, eq=False)
class PotentialCurve:
    """Potential energy sampled on the grid points, in Hartree."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1:
            raise ValueError("potential values must be a 1-d array")
        if not np.all(np.isfinite(vals)):
            raise ValueError("potential values must be finite")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def symmetry_deviation(self) -> float:
        """max |V(x_i) - V(x_{n-i})|: zero for reflection-symmetric wells."""
        return float(np.max(np.abs(self.values - self.values[::-1])))


@dataclass(frozen=True, eq=False)
class NuclearHamiltonian:
    """Dense real symmetric Hamiltonian matrix with its grid."""

    matrix: np.ndarray
    grid: SpatialGrid

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (self.grid.n_points, self.grid.n_points):
            raise ValueError(f"matrix shape {m.shape} does not match grid ({self.grid.n_points} points)")
        if not np.all(np.isfinite(m)):
            raise ValueError("Hamiltonian entries must be finite")
        if np.max(np.abs(m - m.T)) > SYMMETRY_TOL * max(1.0, np.max(np.abs(m))):
            raise ValueError("Hamiltonian must be symmetric")
        object.__setattr__(self, "matrix", m)

    @property
    def n_points(self) -> int:
        return self.grid.n_points

    def kinetic_toeplitz_deviation(self) -> float:
        """Max spread within any off-diagonal sub-diagonal (0 for kernel-built H)."""
        m = self.matrix
        dev = 0.0
        for k in range(1, m.shape[0]):
            d = np.diagonal(m, offset=k)
            dev = max(dev, float(d.max() - d.min()))
        return dev


@dataclass(frozen=True, eq=False)
class EigenSolution:
    """Full spectral decomposition: ascending eigenvalues, orthonormal columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def hermite_even(k: int, z: float) -> float:
    """Physicists' Hermite polynomial H_k(z) for even k, by upward recurrence."""
    if k < 0 or k % 2 != 0:
        raise ValueError(f"order must be even and non-negative, got {k}")
    h_prev, h_cur = 1.0, 2.0 * z
    if k == 0:
        return h_prev
    for n in range(2, k + 1):
        h_prev, h_cur = h_cur, 2.0 * z * h_cur - 2.0 * (n - 1) * h_prev
    return h_cur


def daf_kernel(displacement: float, spec: DafKineticSpec) -> float:
    """Kinetic-energy kernel K(|x - x'|) in Hartree per Bohr.

    Evaluates the Gaussian envelope times the truncated even-Hermite sum with
    prefactor -hbar^2 / (4 m sigma^3 sqrt(2 pi)). This is the continuous
    kernel density; matrix elements on a grid carry one factor of the grid
    spacing (see kinetic_matrix).
    """
    sigma = spec.sigma
    prefactor = -1.0 / (4.0 * spec.mass * sigma**3 * math.sqrt(2.0 * math.pi))
    z = displacement / (math.sqrt(2.0) * sigma)
    total = 0.0
    term_scale = 1.0  # (-1/4)^n / n!, updated incrementally
    for n in range(spec.m_daf // 2 + 1):
        if n > 0:
            term_scale *= -0.25 / n
        total += term_scale * hermite_even(2 * n + 2, z)
    return prefactor * math.exp(-(displacement**2) / (2.0 * sigma**2)) * total


def kinetic_matrix(grid: SpatialGrid, spec: DafKineticSpec) -> np.ndarray:
    """Toeplitz kinetic matrix: spacing-weighted kernel at every displacement."""
    dx = grid.spacing
    column = np.array([daf_kernel(k * dx, spec) * dx for k in range(grid.n_points)])
    idx = np.abs(np.subtract.outer(np.arange(grid.n_points), np.arange(grid.n_points)))
    return column[idx]


def build_hamiltonian(
    grid: SpatialGrid, potential: PotentialCurve, spec: DafKineticSpec
) -> NuclearHamiltonian:
    """Assemble kinetic kernel plus diagonal potential on the grid.

    The kinetic part is the kernel evaluated at each displacement times the
    grid spacing (quadrature weight of the delta-function basis).
    """
    if len(potential) != grid.n_points:
        raise ValueError(
            f"potential has {len(potential)} samples for a {grid.n_points}-point grid"
        )
    matrix = kinetic_matrix(grid, spec) + np.diag(potential.values)
    return NuclearHamiltonian(matrix=matrix, grid=grid)


# Published 8-point DMANH+ Hamiltonian, in milliHartree. The kinetic part is
# Toeplitz: one value per sub-diagonal. The diagonal carries the double-well
# potential plus the kernel's on-site value.
_DMANH_OFFDIAG_MHA = (-7.478, 0.5691, 0.2715, -0.2739, 0.1491, -0.0584, 0.0168)
_DMANH_DIAG_MHA = (37.72, 7.050, 0.00197, 0.0168, 0.0190, 0.0, 7.015, 37.60)

DMANH_NN_DISTANCE_BOHR = 2.53 * ANGSTROM_TO_BOHR
"""Frozen donor-acceptor (N-N) distance of the builtin system."""


def load_builtin_dmanh() -> NuclearHamiltonian:
    """The builtin 8-point shared-proton Hamiltonian, in Hartree.

    Loaded verbatim from its published milliHartree values and symmetrized as
    (M + M^T)/2. The grid span is nominal: the N-N distance, centered on the
    midpoint (the published data fix the matrix, not the grid extent).
    """
    n = 8
    m = np.zeros((n, n))
    for i in range(n):
        m[i, i] = _DMANH_DIAG_MHA[i] * 1e-3
        for j in range(i + 1, n):
            m[i, j] = m[j, i] = _DMANH_OFFDIAG_MHA[j - i - 1] * 1e-3
    m = 0.5 * (m + m.T)
    half = DMANH_NN_DISTANCE_BOHR / 2.0
    grid = SpatialGrid(n_points=n, x_min=-half, x_max=half)
    return NuclearHamiltonian(matrix=m, grid=grid)


def reflection_symmetrize(h: NuclearHamiltonian) -> NuclearHamiltonian:
    """Average H with its grid-reversed image: (H + J H J)/2.

    Leaves a Toeplitz kinetic part untouched and replaces the potential with
    the mean of each mirrored pair, so the transformed off-diagonal blocks
    vanish identically. Use this before two-block evolution when the raw
    potential carries a small asymmetry.
    """
    reversed_h = h.matrix[::-1, ::-1]
    return NuclearHamiltonian(matrix=0.5 * (h.matrix + reversed_h), grid=h.grid)


def exact_diagonalize(h: NuclearHamiltonian) -> EigenSolution:
    """Full spectral decomposition; the classical oracle for everything downstream."""
    if not np.all(np.isfinite(h.matrix)):
        raise FloatingPointError("Hamiltonian contains non-finite entries")
    eigenvalues, eigenvectors = np.linalg.eigh(h.matrix)
    scale = max(1.0, float(np.max(np.abs(eigenvalues))))
    residual = np.max(np.abs(h.matrix @ eigenvectors - eigenvectors * eigenvalues))
    if residual > RESIDUAL_TOL * scale:
        raise FloatingPointError(f"eigendecomposition residual {residual:g} too large")
    gram = eigenvectors.T @ eigenvectors
    if np.max(np.abs(gram - np.eye(len(eigenvalues)))) > 100 * ORTHONORMALITY_TOL:
        raise FloatingPointError("eigenvectors failed orthonormality check")
    return EigenSolution(eigenvalues=eigenvalues, eigenvectors=eigenvectors)


def pairwise_splittings(eigenvalues: np.ndarray) -> list[tuple[int, int, float]]:
    """All (i, j, E_j - E_i) with i < j, in the eigenvalue unit."""
    n = len(eigenvalues)
    return [
        (i, j, float(eigenvalues[j] - eigenvalues[i]))
        for i in range(n)
        for j in range(i + 1, n)
    ]


def splittings_invcm(eigenvalues_ha: np.ndarray) -> list[tuple[int, int, float]]:
    return [(i, j, de * HARTREE_TO_INVCM) for i, j, de in pairwise_splittings(eigenvalues_ha)]


def load_potential_csv(path) -> tuple[SpatialGrid, PotentialCurve]:
    """Read a two-column `x_bohr,v_hartree` file; header row required.

    Rows must be ascending and uniformly spaced in x, with a power-of-two
    count. Returns the implied grid along with the curve.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header[:2]] != ["x_bohr", "v_hartree"]:
            raise ValueError(f"{path}: expected header 'x_bohr,v_hartree'")
        xs, vs = [], []
        for row in reader:
            if not row:
                continue
            xs.append(float(row[0]))
            vs.append(float(row[1]))
    x = np.array(xs)
    if len(x) < 2 or not _is_power_of_two(len(x)):
        raise ValueError(f"{path}: row count {len(x)} is not a power of two >= 2")
    if not np.all(np.diff(x) > 0):
        raise ValueError(f"{path}: x column must be strictly ascending")
    spacing = np.diff(x)
    if np.max(spacing) - np.min(spacing) > 1e-9 * np.max(spacing):
        raise ValueError(f"{path}: grid must be uniform")
    grid = SpatialGrid(n_points=len(x), x_min=float(x[0]), x_max=float(x[-1]))
    return grid, PotentialCurve(values=np.array(vs))


def save_hamiltonian_csv(h: NuclearHamiltonian, path) -> None:
    """Matrix rows as CSV, prefixed by one grid-metadata comment line."""
    from .io import atomic_write

    lines = [f"# n_points={h.n_points} x_min={float(h.grid.x_min)!r} x_max={float(h.grid.x_max)!r}"]
    for row in h.matrix:
        lines.append(",".join(repr(float(v)) for v in row))
    atomic_write(path, "\n".join(lines) + "\n")


def load_hamiltonian_csv(path) -> NuclearHamiltonian:
    with open(path) as fh:
        meta = fh.readline()
        if not meta.startswith("#"):
            raise ValueError(f"{path}: missing metadata line")
        fields = dict(part.split("=") for part in meta[1:].split())
        rows = [[float(v) for v in line.split(",")] for line in fh if line.strip()]
    grid = SpatialGrid(
        n_points=int(fields["n_points"]),
        x_min=float(fields["x_min"]),
        x_max=float(fields["x_max"]),
    )
    return NuclearHamiltonian(matrix=np.array(rows), grid=grid)
