"""Scrambled-Hadamard sensing: fast transform, operator, binary patterns.

The sensing matrix is ``S P_r H P_c`` where ``H`` is the orthonormal
(1/sqrt(n)-scaled) Hadamard matrix in natural (Sylvester) ordering, ``P_r``
and ``P_c`` are row/column permutations and ``S`` keeps ``m`` distinct rows.
Since every factor is orthogonal on its range, the operator satisfies
``apply(adjoint(b)) == b`` exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidStateError

__all__ = [
    "fwht",
    "SensingOperator",
    "make_sensing_operator",
    "sensing_apply",
    "sensing_adjoint",
    "BinaryMeasurement",
    "build_patterns",
    "measure_binary",
    "binary_to_signed",
]


def fwht(v: np.ndarray, normalize: bool = True) -> np.ndarray:
    """Fast Walsh-Hadamard transform in natural (Sylvester) ordering.

    O(n log n).  With ``normalize`` the output is scaled by 1/sqrt(n), which
    makes the transform orthonormal and an involution.
    """
    a = np.array(v, dtype=np.float64)
    if a.ndim != 1:
        raise InvalidInputError(f"fwht expects a 1D vector, got shape {a.shape}")
    n = a.size
    if n == 0 or n & (n - 1) != 0:
        raise InvalidInputError(f"fwht length must be a power of two, got {n}")
    h = 1
    while h < n:
        m = a.reshape(-1, 2, h)
        s = m[:, 0, :] + m[:, 1, :]
        d = m[:, 0, :] - m[:, 1, :]
        m[:, 0, :] = s
        m[:, 1, :] = d
        h *= 2
    if normalize:
        a /= math.sqrt(n)
    return a


def _check_permutation(p: np.ndarray, n: int, name: str) -> np.ndarray:
    p = np.asarray(p, dtype=np.int64)
    if p.shape != (n,) or not np.array_equal(np.sort(p), np.arange(n)):
        raise InvalidInputError(f"{name} is not a permutation of 0..{n - 1}")
    return p


@dataclass(frozen=True)
class SensingOperator:
    """Scrambled-Hadamard sensing ensemble ``S P_r H P_c``.

    ``perm_rows[i]`` is the Hadamard row feeding scrambled row ``i``;
    ``perm_cols[i]`` is the input index feeding transform slot ``i``.
    ``selected_rows`` are the scrambled-row indices kept by ``S`` (ordered,
    no duplicates).  Immutable after construction.
    """

    log2n: int
    perm_rows: np.ndarray
    perm_cols: np.ndarray
    selected_rows: np.ndarray

    def __post_init__(self):
        if self.log2n < 1:
            raise InvalidInputError("log2n must be >= 1")
        n = self.n
        object.__setattr__(self, "perm_rows", _check_permutation(self.perm_rows, n, "perm_rows"))
        object.__setattr__(self, "perm_cols", _check_permutation(self.perm_cols, n, "perm_cols"))
        sel = np.asarray(self.selected_rows, dtype=np.int64)
        if sel.ndim != 1 or sel.size == 0 or sel.size > n:
            raise InvalidInputError("selected_rows must be a non-empty list of at most n indices")
        if sel.min() < 0 or sel.max() >= n or np.unique(sel).size != sel.size:
            raise InvalidInputError("selected_rows must be distinct indices in 0..n-1")
        object.__setattr__(self, "selected_rows", sel)
        for arr in (self.perm_rows, self.perm_cols, self.selected_rows):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return 1 << self.log2n

    @property
    def m(self) -> int:
        return int(self.selected_rows.size)

    @property
    def hadamard_rows(self) -> np.ndarray:
        """Hadamard-row index for each kept measurement."""
        return self.perm_rows[self.selected_rows]


def make_sensing_operator(log2n: int, m: int, seed: int) -> SensingOperator:
    """Build an operator with seeded random permutations.

    Keeps the first ``m`` rows after scrambling, so the selection is
    reproducible from (log2n, m, seed) alone.
    """
    n = 1 << log2n
    if not 1 <= m <= n:
        raise InvalidInputError(f"m must be in 1..{n}, got {m}")
    rng = np.random.default_rng(seed)
    return SensingOperator(
        log2n=log2n,
        perm_rows=rng.permutation(n),
        perm_cols=rng.permutation(n),
        selected_rows=np.arange(m),
    )


def sensing_apply(op: SensingOperator, g: np.ndarray) -> np.ndarray:
    """b = S P_r H P_c g, computed in O(n log n)."""
    g = np.asarray(g, dtype=np.float64)
    if g.shape != (op.n,):
        raise InvalidInputError(f"expected a vector of length {op.n}, got shape {g.shape}")
    t = fwht(g[op.perm_cols])
    return t[op.hadamard_rows]


def sensing_adjoint(op: SensingOperator, b: np.ndarray) -> np.ndarray:
    """Adjoint P_c^T H P_r^T S^T b; satisfies <apply(g), b> == <g, adjoint(b)>."""
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (op.m,):
        raise InvalidInputError(f"expected a vector of length {op.m}, got shape {b.shape}")
    u = np.zeros(op.n)
    u[op.hadamard_rows] = b
    u = fwht(u)
    out = np.zeros(op.n)
    out[op.perm_cols] = u
    return out


def _sign_rows(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Entries of the +-1 Sylvester matrix at the given row/column indices."""
    parity = np.bitwise_count(np.bitwise_and(rows[:, None], cols[None, :])) & 1
    return 1.0 - 2.0 * parity.astype(np.float64)


def build_patterns(op: SensingOperator) -> np.ndarray:
    """The m binary (0/1) patterns an instrument would display, as uint8.

    Pattern ``i`` is the 0/1 version of scrambled row ``i``; the all-1s row
    (Hadamard row 0) is replaced by the complement of the half-pattern row
    ``n/2`` so every displayed pattern has exactly n/2 ones.
    """
    inv_cols = np.argsort(op.perm_cols)
    rows = op.hadamard_rows
    signs = _sign_rows(rows, inv_cols)
    patterns = ((signs + 1.0) / 2.0).astype(np.uint8)
    half = ((_sign_rows(np.array([op.n // 2]), inv_cols) + 1.0) / 2.0).astype(np.uint8)[0]
    for i in np.flatnonzero(rows == 0):
        patterns[i] = 1 - half
    return patterns


@dataclass
class BinaryMeasurement:
    """Raw 0/1-pattern measurements plus the synthesized all-1s value.

    ``w`` holds one value per emitted pattern; if the all-1s row was among
    the selection, its slot holds the replacement-pattern measurement and
    ``all_ones_slot`` records where.  ``all_ones_value`` is the measurement
    the all-1s pattern would have produced, reconstructed by summing the
    replacement pattern and its complement.
    """

    w: np.ndarray
    all_ones_value: float | None
    all_ones_slot: int | None = None


def measure_binary(op: SensingOperator, g: np.ndarray) -> BinaryMeasurement:
    """Simulate instrument acquisition with the displayed binary patterns.

    The complement of the replacement pattern is always acquired as an
    auxiliary measurement so that the all-1s value can be synthesized even
    when Hadamard row 0 is not among the selected rows.
    """
    g = np.asarray(g, dtype=np.float64)
    if g.shape != (op.n,):
        raise InvalidInputError(f"expected a vector of length {op.n}, got shape {g.shape}")
    total = float(g.sum())
    t = fwht(g[op.perm_cols])
    # 0/1-pattern data: H01 = (sqrt(n) H + 1 1^T) / 2 row by row.
    w = (math.sqrt(op.n) * t[op.hadamard_rows] + total) / 2.0
    w_half = (math.sqrt(op.n) * t[op.n // 2] + total) / 2.0
    w_replacement = total - w_half
    slots = np.flatnonzero(op.hadamard_rows == 0)
    slot = int(slots[0]) if slots.size else None
    if slot is not None:
        w[slot] = w_replacement
    return BinaryMeasurement(w=w, all_ones_value=w_replacement + w_half, all_ones_slot=slot)


def binary_to_signed(meas: BinaryMeasurement, log2n: int) -> np.ndarray:
    """Convert 0/1-pattern data to signed-Hadamard data, (2w - w_all1)/sqrt(n)."""
    if meas.all_ones_value is None:
        raise InvalidStateError("all_ones_value missing; reconstruct it from the half patterns first")
    w = np.asarray(meas.w, dtype=np.float64).copy()
    if meas.all_ones_slot is not None:
        w[meas.all_ones_slot] = meas.all_ones_value
    return (2.0 * w - meas.all_ones_value) / math.sqrt(1 << log2n)
