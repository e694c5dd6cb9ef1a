"""Single thin-slab propagators: kernel application, matrices, operator norms.

One slab advances a field from depth z to z' = z + Delta through the
oscillatory kernel

    u'(x') = (1/sqrt(N)) * sum_k exp(i xi_k . x') * exp(-Delta * a(x', xi_k)) * u_hat_k,

i.e. one FFT of the input followed by a direct O(N^2) frequency sum with an
output-point-dependent multiplier.  The symbol is either frozen at the slab
bottom, a(slab.z, x', xi), or replaced by its slab mean (Gauss-Legendre);
when the symbol does not depend on x the sum collapses exactly to a Fourier
multiplier and an O(N log N) path is used.

Phases are evaluated from integer index products reduced mod n, so the
kernel sum matches the FFT convention of :mod:`thinslab.spectral` to
machine precision.

Operator norms on H^s are computed from the dense matrix of a slab: the
matrix is conjugated into the Fourier basis, weighted with <xi>^s on both
sides, and its largest singular value estimated by power iteration on the
normal operator with a fixed-seed start vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import spectral, symbols
from .spectral import Field, Grid, SpectralField
from .symbols import SymbolSpec

DELTA_MAX_DEFAULT = 0.125
MATRIX_SIZE_LIMIT = 4096

_CHUNK_ROWS = 256


class SlabError(ValueError):
    """Invalid slab geometry (ordering or thickness)."""


class VariantError(ValueError):
    """A propagator entry point was called with the wrong slab variant."""


class ContractViolation(ValueError):
    """An operation requiring an x-independent symbol got a general one."""


class MatrixSizeError(ValueError):
    """Dense assembly refused: grid has more points than the guard allows."""


class NonConvergenceError(RuntimeError):
    """Power iteration did not converge; carries the last estimate."""

    def __init__(self, message, last_estimate, iterations):
        super().__init__(message)
        self.last_estimate = last_estimate
        self.iterations = iterations


@dataclass(frozen=True)
class Frozen:
    """Freeze the symbol at the slab bottom."""


@dataclass(frozen=True)
class Averaged:
    """Replace the symbol by its slab mean.

    ``quadrature_order`` of None picks an order resolving the symbol's
    declared z-bandwidth on this slab.
    """

    quadrature_order: int | None = None


@dataclass(frozen=True)
class SlabSpec:
    """One slab [z, z_prime] of a symbol evolution."""

    z: float
    z_prime: float
    spec: SymbolSpec
    variant: object = Frozen()
    delta_max: float = DELTA_MAX_DEFAULT

    def __post_init__(self):
        if not (0.0 <= self.z < self.z_prime):
            raise SlabError(f"need 0 <= z < z_prime, got [{self.z}, {self.z_prime}]")
        if self.thickness > self.delta_max * (1.0 + 1e-12):
            raise SlabError(
                f"slab too thick: {self.thickness:g} exceeds delta_max {self.delta_max:g}")
        if not isinstance(self.variant, (Frozen, Averaged)):
            raise VariantError(f"unknown variant {self.variant!r}")

    @property
    def thickness(self) -> float:
        return self.z_prime - self.z


def _slab_symbol(slab: SlabSpec, x, xi) -> np.ndarray:
    """Evaluate the slab's effective symbol (frozen or slab-averaged)."""
    if isinstance(slab.variant, Frozen):
        return symbols.eval_symbol(slab.spec, slab.z, x, xi)
    order = slab.variant.quadrature_order
    if order is None:
        order = symbols.recommended_quadrature_order(slab.spec, slab.thickness)
    return symbols.averaged_symbol(slab.spec, slab.z, slab.z_prime, x, xi, order)


# ---------------------------------------------------------------------------
# kernel application


@lru_cache(maxsize=64)
def _phase_table(n: int) -> np.ndarray:
    return np.exp(2j * np.pi * np.arange(n) / n)


def _index_meshes(grid: Grid):
    idx = np.arange(grid.n_points)
    if grid.dim == 1:
        return (idx,)
    return tuple(m.ravel() for m in np.meshgrid(idx, idx, indexing="ij"))


def _freq_index_axes(grid: Grid):
    k = np.arange(grid.n_points) - grid.n_points // 2
    if grid.dim == 1:
        return (k,)
    return tuple(m.ravel() for m in np.meshgrid(k, k, indexing="ij"))


def _flat_coords(grid: Grid):
    xs = tuple(m.ravel() for m in grid.meshes())
    xis = tuple(m.ravel() for m in grid.frequency_meshes())
    return xs, xis


def _pack(coords, grid: Grid):
    return coords[0] if grid.dim == 1 else coords


def _frequency_sum(grid: Grid, coeffs_flat: np.ndarray, multiplier) -> np.ndarray:
    """Direct sum over the frequency lattice with an x-dependent multiplier.

    ``multiplier(x_packed, xi_packed) -> (rows, n_freq)`` is evaluated on
    blocks of output points; phases come from the mod-n root table.
    """
    n = grid.n_points
    roots = _phase_table(n)
    jesh = _index_meshes(grid)
    kesh = _freq_index_axes(grid)
    xs, xis = _flat_coords(grid)
    size = grid.size
    out = np.empty(size, dtype=np.complex128)
    for start in range(0, size, _CHUNK_ROWS):
        sl = slice(start, min(start + _CHUNK_ROWS, size))
        kprod = jesh[0][sl][:, None] * kesh[0][None, :]
        for d in range(1, grid.dim):
            kprod = kprod + jesh[d][sl][:, None] * kesh[d][None, :]
        phase = roots[kprod % n]
        xb = _pack(tuple(c[sl][:, None] for c in xs), grid)
        xif = _pack(tuple(c[None, :] for c in xis), grid)
        out[sl] = (phase * multiplier(xb, xif)) @ coeffs_flat
    return out / np.sqrt(size)


def _apply_multiplier_fast(grid: Grid, field: Field, mult_lattice: np.ndarray) -> Field:
    coeffs = spectral.forward(field).coeffs * mult_lattice
    return spectral.inverse(SpectralField(grid, coeffs))


def _zero_x(grid: Grid):
    return 0.0 if grid.dim == 1 else (0.0,) * grid.dim


def apply_slab(slab: SlabSpec, field: Field) -> Field:
    """Apply one thin-slab propagator (either variant) to a field."""
    grid = field.grid
    delta = slab.thickness
    if slab.spec.x_independent:
        xi = _pack(grid.frequency_meshes(), grid)
        a = _slab_symbol(slab, _zero_x(grid), xi)
        return _apply_multiplier_fast(grid, field, np.exp(-delta * a))
    coeffs = spectral.forward(field).coeffs.ravel()
    values = _frequency_sum(
        grid, coeffs, lambda xb, xif: np.exp(-delta * _slab_symbol(slab, xb, xif)))
    return Field(grid, values.reshape(grid.shape))


def thin_slab_apply(slab: SlabSpec, field: Field) -> Field:
    """Frozen-symbol slab application."""
    if not isinstance(slab.variant, Frozen):
        raise VariantError("thin_slab_apply requires the Frozen variant")
    return apply_slab(slab, field)


def thin_slab_apply_averaged(slab: SlabSpec, field: Field) -> Field:
    """Slab application with the symbol replaced by its slab mean."""
    if not isinstance(slab.variant, Averaged):
        raise VariantError("thin_slab_apply_averaged requires the Averaged variant")
    return apply_slab(slab, field)


def apply_symbol_operator(spec: SymbolSpec, z: float, field: Field) -> Field:
    """Apply the first-order operator a(z, x, D_x) itself (no exponential)."""
    grid = field.grid
    if spec.x_independent:
        xi = _pack(grid.frequency_meshes(), grid)
        a = symbols.eval_symbol(spec, z, _zero_x(grid), xi)
        return _apply_multiplier_fast(grid, field, a)
    coeffs = spectral.forward(field).coeffs.ravel()
    values = _frequency_sum(
        grid, coeffs, lambda xb, xif: symbols.eval_symbol(spec, z, xb, xif))
    return Field(grid, values.reshape(grid.shape))


def exact_multiplier_evolution(spec: SymbolSpec, z0: float, z1: float, field: Field,
                               quadrature_order: int | None = None) -> Field:
    """Exact evolution for x-independent symbols.

    Multiplies each coefficient with exp(-int_z0^z1 a(s, xi_k) ds); the
    z-integral uses Gauss-Legendre (exact for z-independent symbols and for
    polynomial z-dependence of degree < 2*order).
    """
    if not spec.x_independent:
        raise ContractViolation("exact_multiplier_evolution requires an x-independent symbol")
    if not (z1 > z0):
        raise SlabError(f"need z1 > z0, got [{z0}, {z1}]")
    if quadrature_order is None:
        quadrature_order = symbols.recommended_quadrature_order(spec, z1 - z0)
    grid = field.grid
    xi = _pack(grid.frequency_meshes(), grid)
    mean_a = symbols.averaged_symbol(spec, z0, z1, _zero_x(grid), xi, quadrature_order)
    return _apply_multiplier_fast(grid, field, np.exp(-(z1 - z0) * mean_a))


# ---------------------------------------------------------------------------
# dense matrices


@dataclass
class PropagatorMatrix:
    """Dense point-space matrix of a slab propagator (or any grid operator)."""

    grid: Grid
    entries: np.ndarray

    def __post_init__(self):
        n = self.grid.size
        self.entries = np.asarray(self.entries, dtype=np.complex128)
        if self.entries.shape != (n, n):
            raise MatrixSizeError(
                f"entries shape {self.entries.shape} does not match grid size {n}")

    def apply(self, field: Field) -> Field:
        if field.grid != self.grid:
            raise ValueError("field grid does not match matrix grid")
        out = self.entries @ field.values.ravel()
        return Field(self.grid, out.reshape(self.grid.shape))


def _input_forward(mat: np.ndarray, grid: Grid) -> np.ndarray:
    """Right-multiply by the forward-DFT matrix: rows become coefficient rows."""
    # (M F)[i, :] = conj(inverse_transform(conj(M[i, :])))
    axes = tuple(range(1, grid.dim + 1))
    t = np.conj(mat).reshape((-1,) + grid.shape)
    t = np.fft.ifftn(np.fft.ifftshift(t, axes=axes), axes=axes) * np.sqrt(grid.size)
    return np.conj(t).reshape(mat.shape)


def _output_forward(mat: np.ndarray, grid: Grid) -> np.ndarray:
    """Left-multiply by the forward-DFT matrix (transform the output index)."""
    axes = tuple(range(grid.dim))
    t = mat.reshape(grid.shape + (-1,))
    t = np.fft.fftshift(np.fft.fftn(t, axes=axes), axes=axes) / np.sqrt(grid.size)
    return t.reshape(mat.shape)


def assemble_matrix(slab: SlabSpec, grid: Grid) -> PropagatorMatrix:
    """Dense matrix whose column j is the slab applied to the j-th basis field."""
    if grid.size > MATRIX_SIZE_LIMIT:
        raise MatrixSizeError(
            f"grid size {grid.size} exceeds dense-assembly limit {MATRIX_SIZE_LIMIT}")
    delta = slab.thickness
    n = grid.n_points
    roots = _phase_table(n)
    jesh = _index_meshes(grid)
    kesh = _freq_index_axes(grid)
    xs, xis = _flat_coords(grid)
    size = grid.size
    B = np.empty((size, size), dtype=np.complex128)
    for start in range(0, size, _CHUNK_ROWS):
        sl = slice(start, min(start + _CHUNK_ROWS, size))
        kprod = jesh[0][sl][:, None] * kesh[0][None, :]
        for d in range(1, grid.dim):
            kprod = kprod + jesh[d][sl][:, None] * kesh[d][None, :]
        xb = _pack(tuple(c[sl][:, None] for c in xs), grid)
        xif = _pack(tuple(c[None, :] for c in xis), grid)
        B[sl] = roots[kprod % n] * np.exp(-delta * _slab_symbol(slab, xb, xif))
    B /= np.sqrt(size)
    return PropagatorMatrix(grid, _input_forward(B, grid))


def save_matrix(path, matrix: PropagatorMatrix) -> None:
    """Export the dense matrix in the field binary format (row-major)."""
    flat_grid = Grid(n_points=matrix.grid.size, period=matrix.grid.period, dim=2)
    spectral.write_field(path, Field(flat_grid, matrix.entries))


# ---------------------------------------------------------------------------
# H^s operator norms


def _fourier_representation(entries: np.ndarray, grid: Grid) -> np.ndarray:
    """Conjugate a point-space matrix into the Fourier basis: F M F^H."""
    A = _output_forward(entries, grid)
    return _output_forward(A.conj().T, grid).conj().T


def _weighted_fourier_matrix(entries: np.ndarray, grid: Grid, s: float) -> np.ndarray:
    T = _fourier_representation(entries, grid)
    if s != 0:
        w = spectral._bracket_lattice(grid).ravel() ** s
        T = (w[:, None] * T) / w[None, :]
    return T


def _largest_singular_value(T: np.ndarray, tol: float, max_iter: int, seed: int) -> float:
    rng = np.random.default_rng(seed)
    n = T.shape[0]
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    Th = T.conj().T
    prev = None
    for _ in range(max_iter):
        y = T @ v
        est = float(np.linalg.norm(y))
        if est < 1e-300:
            return 0.0
        if prev is not None and abs(est - prev) < tol:
            return est
        prev = est
        v = Th @ y
        nv = np.linalg.norm(v)
        if nv < 1e-300:
            return est
        v /= nv
    raise NonConvergenceError(
        f"power iteration did not converge in {max_iter} iterations", prev, max_iter)


def _hs_norm_of_entries(entries, grid, s, tol, max_iter, seed) -> float:
    T = _weighted_fourier_matrix(entries, grid, s)
    return _largest_singular_value(T, tol, max_iter, seed)


def operator_norm_hs(matrix: PropagatorMatrix, s: float, tol: float = 1e-11,
                     max_iter: int = 50000, seed: int = 0) -> float:
    """H^s -> H^s operator norm of a dense grid operator.

    Equals the largest singular value of the <xi>^s-weighted matrix in the
    Fourier basis; estimated by power iteration on the normal operator.
    Raises :class:`NonConvergenceError` (with the last estimate attached)
    if successive Rayleigh estimates do not settle within ``tol``.
    """
    return _hs_norm_of_entries(matrix.entries, matrix.grid, s, tol, max_iter, seed)


def semigroup_defect(spec: SymbolSpec, z: float, z_mid: float, z_top: float,
                     s: float, grid: Grid, variant: object = Frozen(),
                     delta_max: float = DELTA_MAX_DEFAULT, tol: float = 1e-11,
                     max_iter: int = 50000, seed: int = 0) -> float:
    """H^s norm of  G_(z_top,z) - G_(z_top,z_mid) o G_(z_mid,z).

    Thin-slab propagators are not a semigroup: for x-dependent symbols the
    defect is strictly positive (order Delta^2), while exact multipliers
    compose exactly and the defect sits at roundoff.
    """
    if not (z < z_mid < z_top):
        raise SlabError(f"need z < z_mid < z_top, got {z}, {z_mid}, {z_top}")
    whole = assemble_matrix(SlabSpec(z, z_top, spec, variant, delta_max), grid)
    lower = assemble_matrix(SlabSpec(z, z_mid, spec, variant, delta_max), grid)
    upper = assemble_matrix(SlabSpec(z_mid, z_top, spec, variant, delta_max), grid)
    defect = whole.entries - upper.entries @ lower.entries
    return _hs_norm_of_entries(defect, grid, s, tol, max_iter, seed)
