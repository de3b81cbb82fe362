"""FIR and Takenaka-Malmquist (TM) basis functions on the unit circle.

The FIR basis is the standard orthonormal family

    phi_k(z) = z^-(k-1),  k = 1, 2, ...

and the TM basis is the rational orthonormal family generated by a
sequence of poles xi_1, xi_2, ... inside the unit disk,

    psi_l(z) = sqrt(1 - xi_l^2) / (z - xi_l)
               * prod_{j<l} (1 - xi_j z) / (z - xi_j).

Only real poles are supported; the complex-pole construction with real
impulse responses is out of scope.

Each psi_l has an impulse-response expansion psi_l(z) = sum_d a[d,l] z^-d
with a[0,l] = 0.  The impulse responses drive two diagnostics:

* the mutual coherence of the FIR/TM pair, which equals
  sup_{d,l} |a[d,l]| because <phi_k, psi_l> = a[k-1,l];
* a sparse-representation uniqueness test: a representation with
  blockwise eps-0 norms ``na``, ``nb`` is unique whenever
  (sqrt(na) + eps)^2 + (sqrt(nb) + eps)^2 < 1 / coherence.

Two independent routes compute the impulse responses: a closed form via
residues (distinct poles only) and a time-domain recursion through the
cascade of first-order sections (any poles).  They cross-validate each
other in the test suite.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

__all__ = [
    "PoleSequence",
    "ImpulseTable",
    "SparsityReport",
    "BasisCoherence",
    "UniquenessCheck",
    "tm_eval",
    "fir_eval",
    "tm_impulse_closed_form",
    "tm_impulse_filter",
    "impulse_table",
    "default_truncation",
    "basis_coherence",
    "sparsity_report",
    "uniqueness_check",
    "impulse_table_to_csv",
]

# Pole pairs closer than this are treated as repeated: the residue
# closed form divides by their gap and loses all accuracy below it.
DISTINCT_POLE_GAP = 1e-8


@dataclass(frozen=True)
class PoleSequence:
    """Ordered real poles xi_1, ..., xi_n, each strictly inside (-1, 1).

    Repeats are allowed.  Complex poles are rejected: their TM functions
    have complex impulse responses, which this library does not model.
    """

    poles: tuple[float, ...]

    def __init__(self, poles):
        arr = np.asarray(poles)
        if np.iscomplexobj(arr):
            if arr.size and np.any(arr.imag != 0):
                raise ValueError("complex poles are not supported")
            arr = arr.real
        arr = arr.astype(float)
        if arr.ndim != 1:
            raise ValueError("pole sequence must be one-dimensional")
        if arr.size and np.max(np.abs(arr)) >= 1.0:
            raise ValueError("all poles must satisfy |xi| < 1")
        object.__setattr__(self, "poles", tuple(arr.tolist()))

    def __len__(self):
        return len(self.poles)

    def __getitem__(self, i):
        return self.poles[i]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.poles, dtype=float)

    def max_modulus(self, n: int | None = None) -> float:
        """Largest |xi_l| among the first ``n`` poles (all by default)."""
        head = self.poles if n is None else self.poles[:n]
        return max((abs(p) for p in head), default=0.0)

    def distinct_head(self, n: int) -> bool:
        """True if xi_1..xi_n are pairwise separated by the safe gap."""
        head = self.poles[:n]
        for i in range(len(head)):
            for j in range(i + 1, len(head)):
                if abs(head[i] - head[j]) < DISTINCT_POLE_GAP:
                    return False
        return True


@dataclass(frozen=True)
class ImpulseTable:
    """Truncated impulse responses a[d, l-1] for d = 0..truncation.

    ``tail_bounds[l-1]`` estimates sum_{d > truncation} |a[d, l]| from
    the geometric decay rate of the pole cascade.
    """

    a: np.ndarray
    truncation: int
    tail_bounds: np.ndarray

    @property
    def n_functions(self) -> int:
        return self.a.shape[1]

    def column(self, index: int) -> np.ndarray:
        """Impulse response of psi_index (1-based index)."""
        if not 1 <= index <= self.n_functions:
            raise IndexError(f"basis index {index} out of range")
        return self.a[:, index - 1]


@dataclass(frozen=True)
class SparsityReport:
    """Blockwise eps-sparsity summary of a coefficient sequence.

    ``n_eps`` is the smallest 1-based K whose absolute tail sum from K
    onward is <= epsilon; ``support`` holds the 1-based indices of the
    nonzero coefficients before K, and ``eps_zero_norm`` its size.
    """

    epsilon: float
    n_eps: int
    support: tuple[int, ...]
    eps_zero_norm: int
    tail_sum: float


@dataclass(frozen=True)
class BasisCoherence:
    """Mutual coherence of the FIR/TM pair with truncation provenance."""

    value: float
    truncation: int
    tail_bound: float
    argmax: tuple[int, int] = field(default=(0, 0))  # (d, l)


@dataclass(frozen=True)
class UniquenessCheck:
    """Outcome of the sparse-representation uniqueness test."""

    unique: bool
    margin: float
    lhs: float
    rhs: float


def fir_eval(index: int, z):
    """Evaluate phi_index(z) = z^-(index-1).

    ``z`` may be a scalar or an array; ``index`` is 1-based.
    """
    if index < 1:
        raise ValueError("FIR index must be >= 1")
    z = np.asarray(z, dtype=complex)
    if index > 1 and np.any(z == 0):
        raise ZeroDivisionError("FIR basis undefined at z = 0")
    out = z ** (-(index - 1))
    return out if out.ndim else complex(out)


def tm_eval(poles: PoleSequence, index: int, z):
    """Evaluate psi_index(z) by the product formula.

    Parameters
    ----------
    poles : PoleSequence
        Pole sequence; only xi_1..xi_index are used.
    index : int
        1-based basis function index.
    z : complex scalar or array
        Evaluation points; must avoid the poles xi_1..xi_index.
    """
    if not 1 <= index <= len(poles):
        raise IndexError(f"TM index {index} out of range for {len(poles)} poles")
    z = np.asarray(z, dtype=complex)
    xi = poles.as_array()[:index]
    for p in xi:
        if np.any(np.abs(z - p) < 1e-12):
            raise ZeroDivisionError(f"evaluation point coincides with pole {p}")
    lead = poles[index - 1]
    out = math.sqrt(1.0 - lead * lead) / (z - lead)
    for p in xi[:-1]:
        out = out * (1.0 - p * z) / (z - p)
    return out if out.ndim else complex(out)


def default_truncation(poles: PoleSequence, n_functions: int,
                       tail: float = 1e-12, cap: int = 10000) -> int:
    """Truncation depth that leaves a geometric tail below ``tail``.

    Uses D = n + ceil(log(tail)/log(max |xi|)) for decaying cascades:
    the geometric decay governs the tail, but each zero pole in the head
    contributes a pure delay that postpones its onset by up to n
    samples.  For an all-zero pole head the responses vanish beyond
    d = l exactly, so the depth only needs to cover the table width.
    """
    q = poles.max_modulus(n_functions)
    floor = max(n_functions + 1, 8)
    if q == 0.0:
        return floor
    depth = n_functions + math.ceil(math.log(tail) / math.log(q))
    return min(max(depth, floor), cap)


def tm_impulse_closed_form(poles: PoleSequence, index: int, truncation: int) -> np.ndarray:
    """Impulse response of psi_index via the residue closed form.

    Valid for pairwise-distinct poles xi_1..xi_index only:

        a[d] = sqrt(1 - xi_index^2)
               * sum_{i<=index} xi_i^(d-1)
                 * prod_{j<index} (1 - xi_j xi_i)
                 / prod_{j<=index, j!=i} (xi_i - xi_j)

    for d >= 1, and a[0] = 0.  Returns the column for d = 0..truncation.
    """
    if not 1 <= index <= len(poles):
        raise IndexError(f"TM index {index} out of range for {len(poles)} poles")
    if truncation < 1:
        raise ValueError("truncation must be >= 1")
    if not poles.distinct_head(index):
        raise ValueError(
            "closed form requires pairwise-distinct poles; "
            "use tm_impulse_filter for repeated or near-repeated poles"
        )
    xi = poles.as_array()[:index]
    # Residue weights; the empty products for index == 1 equal 1.
    if index == 1:
        weights = np.array([1.0])
    else:
        cross = np.prod(1.0 - np.outer(xi[:-1], xi), axis=0)
        diffs = xi[:, None] - xi[None, :]
        np.fill_diagonal(diffs, 1.0)
        weights = cross / np.prod(diffs, axis=1)
    weights = weights * math.sqrt(1.0 - xi[-1] ** 2)

    out = np.zeros(truncation + 1)
    d = np.arange(1, truncation + 1)
    # xi^(d-1) with the 0^0 = 1 convention for d = 1.
    powers = xi[None, :] ** (d[:, None] - 1)
    out[1:] = powers @ weights
    return out


def tm_impulse_filter(poles: PoleSequence, index: int, truncation: int) -> np.ndarray:
    """Impulse response of psi_index via the cascaded first-order sections.

    Runs the leading section sqrt(1 - xi^2)/(z - xi) followed by the
    index-1 all-pass sections (1 - xi_j z)/(z - xi_j) as time-domain
    recursions on a unit impulse.  Works for repeated poles.
    """
    if not 1 <= index <= len(poles):
        raise IndexError(f"TM index {index} out of range for {len(poles)} poles")
    if truncation < 1:
        raise ValueError("truncation must be >= 1")
    xi = poles.as_array()[:index]
    lead = xi[-1]
    x = np.zeros(truncation + 1)
    x[0] = 1.0
    # sqrt(1-xi^2)/(z-xi) == sqrt(1-xi^2) z^-1 / (1 - xi z^-1)
    y = signal.lfilter([0.0, math.sqrt(1.0 - lead * lead)], [1.0, -lead], x)
    # (1 - xi z)/(z - xi) == (-xi + z^-1) / (1 - xi z^-1)
    for p in xi[:-1]:
        y = signal.lfilter([-p, 1.0], [1.0, -p], y)
    return y


def _tail_bound(column: np.ndarray, decay: float) -> float:
    """Geometric estimate of the absolute tail beyond the truncation."""
    if decay == 0.0:
        return 0.0
    window = np.abs(column[-10:]) if column.size > 10 else np.abs(column[1:])
    top = float(window.max(initial=0.0))
    return top * decay / (1.0 - decay)


def impulse_table(poles: PoleSequence, n_functions: int,
                  truncation: int | None = None, method: str = "filter") -> ImpulseTable:
    """Build the impulse-response table for psi_1..psi_n_functions.

    The cascaded-filter route is the default because it covers repeated
    poles; ``method="closed_form"`` is exposed as a validation oracle
    for distinct-pole sequences.
    """
    if not 0 <= n_functions <= len(poles):
        raise ValueError("n_functions exceeds the pole sequence length")
    if truncation is None:
        truncation = default_truncation(poles, n_functions)
    if truncation < 1:
        raise ValueError("truncation must be >= 1")
    if method == "filter":
        build = tm_impulse_filter
    elif method == "closed_form":
        build = tm_impulse_closed_form
    else:
        raise ValueError(f"unknown method {method!r}")

    a = np.zeros((truncation + 1, n_functions))
    tails = np.zeros(n_functions)
    for l in range(1, n_functions + 1):
        a[:, l - 1] = build(poles, l, truncation)
        tails[l - 1] = _tail_bound(a[:, l - 1], poles.max_modulus(l))
    a[0, :] = 0.0
    return ImpulseTable(a=a, truncation=truncation, tail_bounds=tails)


def basis_coherence(poles: PoleSequence, n_functions: int,
                    truncation: int | None = None,
                    accuracy: float = 1e-9) -> BasisCoherence:
    """Mutual coherence of the FIR/TM pair: sup |a[d, l]| over the table.

    The supremum over all d is approximated by the truncated table; the
    per-column geometric tail bounds certify the truncation error, and a
    table whose worst tail bound reaches ``accuracy`` is rejected.
    """
    if n_functions < 1:
        raise ValueError("need at least one TM function")
    table = impulse_table(poles, n_functions, truncation)
    worst_tail = float(table.tail_bounds.max(initial=0.0))
    if worst_tail >= accuracy:
        raise ValueError(
            f"truncation {table.truncation} too short: tail bound "
            f"{worst_tail:.3e} >= requested accuracy {accuracy:.3e}"
        )
    flat = np.abs(table.a)
    d, l = np.unravel_index(int(np.argmax(flat)), flat.shape)
    return BasisCoherence(
        value=float(flat[d, l]),
        truncation=table.truncation,
        tail_bound=worst_tail,
        argmax=(int(d), int(l + 1)),
    )


def sparsity_report(coeffs, epsilon: float) -> SparsityReport:
    """Eps-sparsity report of a finite real coefficient sequence.

    ``n_eps`` is min{K >= 1 : sum_{k>=K} |c_k| <= epsilon} (1-based);
    the support collects the nonzero indices strictly before ``n_eps``.

    The tail comparison allows a few ulps of accumulated rounding so
    that decimal ties resolve as written (e.g. a tail of 0.1 + 0.2
    counts as <= 0.3 even though the float sum lands a hair above).
    """
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    c = np.asarray(coeffs, dtype=float).ravel()
    n = c.size
    tails = np.zeros(n + 2)
    if n:
        tails[1:n + 1] = np.cumsum(np.abs(c[::-1]))[::-1]
    # tails[K] = sum_{k>=K} |c_k| for 1-based K; tails[n+1] = 0.
    slack = 4.0 * np.finfo(float).eps * (tails[1] + abs(epsilon))
    n_eps = n + 1
    for k in range(1, n + 2):
        if tails[k] <= epsilon + slack:
            n_eps = k
            break
    support = tuple(int(k) for k in range(1, n_eps) if c[k - 1] != 0.0)
    return SparsityReport(
        epsilon=float(epsilon),
        n_eps=n_eps,
        support=support,
        eps_zero_norm=len(support),
        tail_sum=float(tails[n_eps]),
    )


def uniqueness_check(alpha_report: SparsityReport, beta_report: SparsityReport,
                     coherence: float) -> UniquenessCheck:
    """Sufficient condition for uniqueness of a blockwise-sparse representation.

    Tests (sqrt(|alpha|_eps0) + eps)^2 + (sqrt(|beta|_eps0) + eps)^2
    < 1/coherence and reports the slack.  Both reports must use the same
    epsilon.
    """
    if coherence <= 0:
        raise ValueError("coherence must be positive")
    if alpha_report.epsilon != beta_report.epsilon:
        raise ValueError("reports must share the same epsilon")
    eps = alpha_report.epsilon
    lhs = (math.sqrt(alpha_report.eps_zero_norm) + eps) ** 2
    lhs += (math.sqrt(beta_report.eps_zero_norm) + eps) ** 2
    rhs = 1.0 / coherence
    return UniquenessCheck(unique=lhs < rhs, margin=rhs - lhs, lhs=lhs, rhs=rhs)


def impulse_table_to_csv(table: ImpulseTable, path) -> None:
    """Write the table as rows (d, l, a_dl) for inspection."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["d", "l", "a_dl"])
        for l in range(1, table.n_functions + 1):
            col = table.a[:, l - 1]
            for d in range(table.truncation + 1):
                writer.writerow([d, l, repr(float(col[d]))])
