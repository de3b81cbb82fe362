"""Frequency-grid sampling machinery for the concatenated FIR + TM dictionary.

Builds the uniform grid z_r = exp(2*pi*i*(r-1)/N) on the unit circle,
the composite N x (n1+n2) sample matrix whose r-th row is

    [1, z_r^-1, ..., z_r^-(n1-1), psi_1(z_r), ..., psi_n2(z_r)],

and the row-sampled / real-split systems used by the l1 solver.

Sampling is restricted to the open upper half of the circle: a grid
point on the real axis contributes an all-zero imaginary equation, and a
conjugate pair contributes a redundant one, so both are inadmissible.

Grid indices are 1-based throughout (r = 1 is z = 1), matching the
row convention of the composite matrix.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .rational_basis import (
    ImpulseTable,
    PoleSequence,
    default_truncation,
    impulse_table,
)

__all__ = [
    "FrequencyGrid",
    "CompositeMatrix",
    "SampleSet",
    "RealSplitSystem",
    "GramDiagnostics",
    "MeasurementBound",
    "build_grid",
    "upper_circle_indices",
    "dictionary_matrix",
    "build_composite",
    "make_sample_set",
    "draw_sample_set",
    "sample_rows",
    "real_split",
    "gram_diagnostics",
    "block_coherence",
    "matrix_coherence",
    "measurement_bound",
    "composite_to_csv",
    "write_composite_binary",
    "read_composite_binary",
]

# Grid points with |Im z| below this are treated as lying on the real axis.
REAL_AXIS_TOL = 1e-12


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform grid of N points on the unit circle, starting at z = 1."""

    size: int
    points: np.ndarray

    def point(self, r: int) -> complex:
        """Grid point z_r (1-based)."""
        if not 1 <= r <= self.size:
            raise IndexError(f"grid index {r} out of range")
        return complex(self.points[r - 1])


@dataclass(frozen=True)
class CompositeMatrix:
    """Composite sample matrix [FIR block | TM block] on a frequency grid."""

    grid_size: int
    n1: int
    n2: int
    entries: np.ndarray
    poles: PoleSequence | None

    @property
    def fir_block(self) -> np.ndarray:
        return self.entries[:, : self.n1]

    @property
    def tm_block(self) -> np.ndarray:
        return self.entries[:, self.n1 :]


@dataclass(frozen=True)
class SampleSet:
    """Sorted admissible grid indices (1-based) drawn for measurement."""

    grid_size: int
    indices: tuple[int, ...]

    @property
    def m(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class RealSplitSystem:
    """Real 2m x n system stacking real parts over imaginary parts."""

    matrix: np.ndarray
    rhs: np.ndarray


@dataclass(frozen=True)
class GramDiagnostics:
    """Max deviations of the scaled Gram blocks from their large-N limits."""

    fir_deviation: float
    tm_deviation: float
    cross_deviation: float


@dataclass(frozen=True)
class MeasurementBound:
    """Sufficient measurement count for l1 recovery, with diagnostics.

    ``valid`` is False when the bracket in the coherence-dependent term
    is nonpositive, in which case the bound is undefined and ``bound``
    is None.  ``pole_factor`` is (1+max|xi|)/(1-max|xi|); ``mu_max`` is
    the largest entry modulus of the composite matrix, whose square is
    bounded by ``pole_factor``.
    """

    valid: bool
    bound: int | None
    bracket: float
    support_size: int
    log_term: float
    coherence_term: float | None
    cross_norm: float
    pole_factor: float
    mu_max: float


def build_grid(size: int) -> FrequencyGrid:
    """Uniform unit-circle grid z_r = exp(2*pi*i*(r-1)/size), r = 1..size.

    The lower half is the exact conjugate of the upper half and the
    cardinal points (1, -1, i) are stored exactly, so conjugate-pair
    identities hold bit-for-bit.
    """
    if size < 2:
        raise ValueError("grid size must be at least 2")
    half = size // 2
    points = np.empty(size, dtype=complex)
    points[: half + 1] = np.exp(2j * np.pi * np.arange(half + 1) / size)
    points[0] = 1.0
    if size % 2 == 0:
        points[half] = -1.0
    if size % 4 == 0:
        points[size // 4] = 1j
    points[half + 1 :] = np.conj(points[1 : size - half][::-1])
    points.setflags(write=False)
    return FrequencyGrid(size=size, points=points)


def upper_circle_indices(grid: FrequencyGrid) -> np.ndarray:
    """Admissible 1-based indices: points strictly in the open upper half.

    Excludes real-axis points (|Im z| below tolerance) and, because the
    lower half is dropped entirely, never returns a conjugate pair.
    """
    mask = grid.points.imag > REAL_AXIS_TOL
    return np.nonzero(mask)[0] + 1


def dictionary_matrix(z, n1: int, n2: int, poles: PoleSequence | None = None) -> np.ndarray:
    """Evaluate the concatenated dictionary at arbitrary points.

    Column k <= n1 is z^-(k-1); column n1+l is psi_l(z).  The TM columns
    are built by one sweep of the running all-pass product, so repeated
    poles are fine.
    """
    z = np.asarray(z, dtype=complex).ravel()
    if n1 < 0 or n2 < 0 or n1 + n2 == 0:
        raise ValueError("need n1 >= 0, n2 >= 0 and n1 + n2 >= 1")
    if n2 > 0:
        if poles is None:
            raise ValueError("TM columns require a pole sequence")
        if n2 > len(poles):
            raise ValueError("n2 exceeds the pole sequence length")
    out = np.empty((z.size, n1 + n2), dtype=complex)
    if n1 > 0:
        if np.any(z == 0):
            raise ZeroDivisionError("FIR columns undefined at z = 0")
        out[:, :n1] = z[:, None] ** (-np.arange(n1)[None, :])
    if n2 > 0:
        xi = poles.as_array()[:n2]
        if np.min(np.abs(z[:, None] - xi[None, :])) < 1e-12:
            raise ZeroDivisionError("evaluation point coincides with a pole")
        allpass = np.ones(z.size, dtype=complex)
        for l in range(n2):
            p = xi[l]
            out[:, n1 + l] = math.sqrt(1.0 - p * p) / (z - p) * allpass
            allpass = allpass * (1.0 - p * z) / (z - p)
    return out


def build_composite(grid: FrequencyGrid, n1: int, n2: int,
                    poles: PoleSequence | None = None) -> CompositeMatrix:
    """Composite sample matrix of the dictionary on the full grid.

    The FIR block uses index arithmetic on the roots of unity,
    z_r^-(k-1) = conj(z_{((r-1)(k-1) mod N) + 1}), so its entries stay
    grid-point accurate regardless of the column index.
    """
    entries = dictionary_matrix(grid.points, n1, n2, poles)
    if n1 > 0:
        idx = (np.arange(grid.size)[:, None] * np.arange(n1)[None, :]) % grid.size
        entries[:, :n1] = np.conj(grid.points[idx])
    entries.setflags(write=False)
    return CompositeMatrix(grid_size=grid.size, n1=n1, n2=n2,
                           entries=entries, poles=poles)


def make_sample_set(grid: FrequencyGrid, indices) -> SampleSet:
    """Validate explicit indices against the admissible set and sort them."""
    admissible = set(upper_circle_indices(grid).tolist())
    idx = sorted(int(i) for i in indices)
    if len(set(idx)) != len(idx):
        raise ValueError("sample indices must be distinct")
    bad = [i for i in idx if i not in admissible]
    if bad:
        raise ValueError(f"inadmissible grid indices (real axis or lower half): {bad}")
    return SampleSet(grid_size=grid.size, indices=tuple(idx))


def draw_sample_set(grid: FrequencyGrid, m: int, rng: np.random.Generator) -> SampleSet:
    """Draw m admissible indices uniformly without replacement.

    Deterministic given the generator state; indices are returned sorted
    so that downstream matrix assembly is reproducible.
    """
    admissible = upper_circle_indices(grid)
    if m > admissible.size:
        raise ValueError(
            f"requested {m} samples but only {admissible.size} admissible indices"
        )
    chosen = rng.choice(admissible, size=m, replace=False)
    return SampleSet(grid_size=grid.size, indices=tuple(sorted(int(i) for i in chosen)))


def sample_rows(matrix: CompositeMatrix, omega: SampleSet) -> np.ndarray:
    """Rows of the composite matrix selected by the sample set, in order."""
    if omega.grid_size != matrix.grid_size:
        raise ValueError("sample set was drawn for a different grid")
    rows = np.asarray(omega.indices, dtype=int) - 1
    return matrix.entries[rows, :]


def real_split(matrix: np.ndarray, rhs: np.ndarray) -> RealSplitSystem:
    """Stack real parts over imaginary parts of a complex linear system.

    A real vector x satisfies the complex system A x = b exactly when it
    satisfies the split system, and the Euclidean residual norms agree.
    """
    matrix = np.asarray(matrix)
    rhs = np.asarray(rhs).ravel()
    if matrix.shape[0] != rhs.size:
        raise ValueError("matrix and rhs dimensions disagree")
    split = np.vstack([matrix.real, matrix.imag]).astype(float)
    b = np.concatenate([rhs.real, rhs.imag]).astype(float)
    return RealSplitSystem(matrix=split, rhs=b)


def gram_diagnostics(matrix: CompositeMatrix,
                     impulse: ImpulseTable | None = None) -> GramDiagnostics:
    """Deviations of the Gram blocks from their large-grid limits.

    The scaled blocks converge to  FIR'FIR/N -> I,  TM'TM/N -> I  and
    FIR'TM/N -> (a[k-1, l])  as the grid refines; the cross limit needs
    the impulse table of the same poles (built on demand).

    Deviations can sit below double-precision summation noise, so the
    Gram products are accumulated in extended precision: the reported
    value reflects the matrix, not the summation order.
    """
    n1, n2, n = matrix.n1, matrix.n2, matrix.grid_size
    fir = matrix.fir_block.astype(np.clongdouble)
    tm = matrix.tm_block.astype(np.clongdouble)
    fir_dev = 0.0
    tm_dev = 0.0
    cross_dev = 0.0
    if n1 > 0:
        g = fir.conj().T @ fir / n
        fir_dev = float(np.abs(g - np.eye(n1)).max())
    if n2 > 0:
        g = tm.conj().T @ tm / n
        tm_dev = float(np.abs(g - np.eye(n2)).max())
    if n1 > 0 and n2 > 0:
        if impulse is None:
            if matrix.poles is None:
                raise ValueError("cross-block limit needs poles or an impulse table")
            depth = max(default_truncation(matrix.poles, n2), n1 - 1, 1)
            impulse = impulse_table(matrix.poles, n2, truncation=depth)
        if impulse.truncation < n1 - 1:
            raise ValueError("impulse table too short for the FIR block depth")
        limit = impulse.a[:n1, :n2].astype(np.clongdouble)
        g = fir.conj().T @ tm / n
        cross_dev = float(np.abs(g - limit).max())
    return GramDiagnostics(fir_deviation=fir_dev, tm_deviation=tm_dev,
                           cross_deviation=cross_dev)


def block_coherence(phi: np.ndarray, psi: np.ndarray) -> float:
    """Largest normalized inner product between columns of two blocks.

    Accepts complex or real blocks with matching row counts; conjugation
    is applied where relevant, so the complex pair and its real-split
    stacking give the same value.
    """
    phi = np.asarray(phi)
    psi = np.asarray(psi)
    if phi.shape[0] != psi.shape[0]:
        raise ValueError("blocks must share the row dimension")
    if phi.shape[1] == 0 or psi.shape[1] == 0:
        raise ValueError("coherence needs at least one column per block")
    phi_norms = np.linalg.norm(phi, axis=0)
    psi_norms = np.linalg.norm(psi, axis=0)
    if np.any(phi_norms == 0) or np.any(psi_norms == 0):
        raise ValueError("zero column encountered")
    inner = np.abs(phi.conj().T @ psi)
    return float((inner / np.outer(phi_norms, psi_norms)).max())


def matrix_coherence(matrix: CompositeMatrix) -> float:
    """Coherence between the FIR and TM blocks of the composite matrix."""
    if matrix.n1 < 1 or matrix.n2 < 1:
        raise ValueError("matrix coherence needs both blocks nonempty")
    return block_coherence(matrix.fir_block, matrix.tm_block)


def measurement_bound(t1, t2, delta: float, constant: float,
                      matrix: CompositeMatrix, coherence: float,
                      norm: str = "spectral") -> MeasurementBound:
    """Sufficient number of measurements for support-T recovery.

    Evaluates

        m >= constant * (1+q)/(1-q)
             * max(|T|, log((n1+n2)/delta), c_T)^2,

    where q is the largest pole modulus among the TM columns in use,
    |T| = |t1| + |t2| counts the FIR and TM support indices (1-based),
    and

        c_T = 4 / [ (1/2 + ||Phi_T1' Psi_T2 / N||)
                    * (2 log(2(n1+n2)/delta))^(-1/2)
                    - coherence * sqrt(|T|) ]^2.

    The cross-block norm is the spectral norm by default; ``norm =
    "frobenius"`` selects the Frobenius norm for sensitivity studies.
    A nonpositive bracket makes the bound undefined (``valid=False``).
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if constant <= 0:
        raise ValueError("constant must be positive")
    t1 = tuple(int(i) for i in t1)
    t2 = tuple(int(i) for i in t2)
    if not t1 and not t2:
        raise ValueError("support must be nonempty")
    if any(not 1 <= i <= matrix.n1 for i in t1):
        raise ValueError("FIR support index out of range")
    if any(not 1 <= i <= matrix.n2 for i in t2):
        raise ValueError("TM support index out of range")

    n_total = matrix.n1 + matrix.n2
    support_size = len(t1) + len(t2)
    if t1 and t2:
        cross = matrix.fir_block[:, [i - 1 for i in t1]].conj().T \
            @ matrix.tm_block[:, [i - 1 for i in t2]] / matrix.grid_size
        if norm == "spectral":
            cross_norm = float(np.linalg.norm(cross, 2))
        elif norm == "frobenius":
            cross_norm = float(np.linalg.norm(cross, "fro"))
        else:
            raise ValueError(f"unknown norm {norm!r}")
    else:
        cross_norm = 0.0

    q = matrix.poles.max_modulus(matrix.n2) if matrix.poles is not None else 0.0
    pole_factor = (1.0 + q) / (1.0 - q)
    mu_max = float(np.abs(matrix.entries).max())
    log_term = math.log(n_total / delta)
    bracket = (0.5 + cross_norm) / math.sqrt(2.0 * math.log(2.0 * n_total / delta))
    bracket -= coherence * math.sqrt(support_size)

    if bracket <= 0:
        return MeasurementBound(valid=False, bound=None, bracket=bracket,
                                support_size=support_size, log_term=log_term,
                                coherence_term=None, cross_norm=cross_norm,
                                pole_factor=pole_factor, mu_max=mu_max)
    coherence_term = 4.0 / bracket**2
    peak = max(support_size, log_term, coherence_term)
    bound = math.ceil(constant * pole_factor * peak**2)
    return MeasurementBound(valid=True, bound=bound, bracket=bracket,
                            support_size=support_size, log_term=log_term,
                            coherence_term=coherence_term, cross_norm=cross_norm,
                            pole_factor=pole_factor, mu_max=mu_max)


def composite_to_csv(matrix: CompositeMatrix, path) -> None:
    """Write entries as rows (r, column, real, imag); indices 1-based."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["r", "column", "real", "imag"])
        for r in range(matrix.grid_size):
            for c in range(matrix.n1 + matrix.n2):
                v = matrix.entries[r, c]
                writer.writerow([r + 1, c + 1, repr(v.real), repr(v.imag)])


def write_composite_binary(matrix: CompositeMatrix, path) -> None:
    """Compact dump: header (grid_size, n1, n2) as little-endian uint64,
    then row-major float64 little-endian (real, imag) pairs."""
    header = np.array([matrix.grid_size, matrix.n1, matrix.n2], dtype="<u8")
    body = np.empty((matrix.grid_size, matrix.n1 + matrix.n2, 2))
    body[:, :, 0] = matrix.entries.real
    body[:, :, 1] = matrix.entries.imag
    with open(path, "wb") as fh:
        fh.write(header.tobytes())
        fh.write(body.astype("<f8").tobytes())


def read_composite_binary(path) -> CompositeMatrix:
    """Read a dump written by :func:`write_composite_binary`.

    The pole sequence is not stored, so the returned matrix carries
    ``poles=None``; diagnostics that need poles require them separately.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    header = np.frombuffer(raw[:24], dtype="<u8")
    size, n1, n2 = (int(v) for v in header)
    expect = size * (n1 + n2) * 2
    body = np.frombuffer(raw[24:], dtype="<f8")
    if body.size != expect:
        raise ValueError("binary dump is truncated or corrupt")
    body = body.reshape(size, n1 + n2, 2)
    entries = body[:, :, 0] + 1j * body[:, :, 1]
    entries.setflags(write=False)
    return CompositeMatrix(grid_size=size, n1=n1, n2=n2, entries=entries, poles=None)
