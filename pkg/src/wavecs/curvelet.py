"""Curvelet frames via frequency-wedge wrapping.

Both the standard transform and the low-frequency variant are realized the
same way: the image spectrum is folded onto an odd extended grid with a
partition-of-unity seam window, the extended grid is tiled into one coarse
isotropic window plus directional wedges (smooth radial coronae times smooth
angular windows, angle count doubling every other scale), and each wedge is
wrapped injectively onto its own rectangle and inverse-transformed.  Because
the squared windows sum to one at every retained frequency and each wrap is
one-to-one, analysis is an exact isometry and synthesis (its adjoint) is an
exact inverse, up to floating round-off.

For real images, wedges at opposite angles carry conjugate data; only one of
each pair is computed and the pair of coefficient grids stores
sqrt(2)*(real, imag) parts, keeping the coefficient vector real and the
transform norm-preserving.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import fft

from .errors import InvalidInputError, PlanConstructionError

__all__ = [
    "flank_rise",
    "flank_fall",
    "cinf_window",
    "lf_window",
    "CurveletPlan",
    "CurveletCoeffs",
    "make_plan",
    "fdct",
    "ifdct",
    "k_term",
]

_POU_TOL = 1e-10


# ---------------------------------------------------------------------------
# 1D window profiles


def _h_smooth(x: np.ndarray) -> np.ndarray:
    """Smooth monotone step: 1 for x <= 0, 0 for x >= 1, C-infinity between."""
    x = np.asarray(x, dtype=np.float64)
    out = np.ones_like(x)
    out[x >= 1.0] = 0.0
    mid = (x > 0.0) & (x < 1.0)
    xm = x[mid]
    with np.errstate(under="ignore"):
        inner = np.exp(1.0 - 1.0 / xm)
        out[mid] = np.exp(1.0 - 1.0 / (1.0 - inner))
    return out


def flank_rise(x) -> np.ndarray:
    """Normalized rising flank on [0, 1]; rise(x)^2 + rise(1-x)^2 == 1."""
    x = np.asarray(x, dtype=np.float64)
    hr = _h_smooth(1.0 - x)
    hf = _h_smooth(x)
    return hr / np.sqrt(hr * hr + hf * hf)


def flank_fall(x) -> np.ndarray:
    """Mirror of flank_rise: value 1 at x=0 decaying to 0 at x=1."""
    x = np.asarray(x, dtype=np.float64)
    hr = _h_smooth(1.0 - x)
    hf = _h_smooth(x)
    return hf / np.sqrt(hr * hr + hf * hf)


def cinf_window(m1: int) -> np.ndarray:
    """Length 4*m1+1 partition window: m1-sample flanks around a flat top.

    The rising flank samples x_i = (i-1)/(m1-1), i = 1..m1; the falling
    flank is its mirror, so overlapping flanks of translated copies have
    squares summing to 1.
    """
    if m1 < 2:
        raise InvalidInputError(f"cinf_window requires m1 >= 2, got {m1}")
    x = np.arange(m1, dtype=np.float64) / (m1 - 1)
    rise = flank_rise(x)
    return np.concatenate([rise, np.ones(2 * m1 + 1), rise[::-1]])


def lf_window(n1lf_big: int, n1: int) -> np.ndarray:
    """Periodization seam window of length ``n1lf_big`` for an n1-cell.

    Flanks cover exactly the ``n1lf_big - n1`` frequencies that appear twice
    after wrapping the cell onto the longer grid; paired samples (offset n1
    apart) have squares summing to 1, the rest is flat 1.  Requires
    n1 < n1lf_big <= 2*n1 (otherwise the support fits the cell and no
    periodization is needed).
    """
    if n1lf_big <= n1:
        raise InvalidInputError(
            f"window length {n1lf_big} fits inside the cell of size {n1}; "
            "use a plain rectangular restriction instead"
        )
    if n1lf_big > 2 * n1:
        raise InvalidInputError(f"window length {n1lf_big} exceeds twice the cell size {n1}")
    flank = n1lf_big - n1
    if flank == 1:
        # Single duplicated frequency per end: equal split keeps the seam
        # norm-preserving and the window symmetric.
        rise = np.array([np.sqrt(0.5)])
    else:
        x = np.arange(flank, dtype=np.float64) / (flank - 1)
        rise = flank_rise(x)
    return np.concatenate([rise, np.ones(n1 - flank), rise[::-1]])


def _lowpass_1d(half: int, m: float) -> np.ndarray:
    """Radial 1D lowpass on the centered grid [-half, half].

    Flat 1 for |u| <= floor(m), smooth flank reaching exactly 0 at
    |u| = floor(2m), zero beyond.
    """
    u = np.abs(np.arange(-half, half + 1, dtype=np.float64))
    fm = np.floor(m)
    f2m = np.floor(2.0 * m)
    w = np.zeros(2 * half + 1)
    w[u <= fm] = 1.0
    band = (u > fm) & (u <= f2m)
    denom = max(f2m - fm - 1.0, 1.0)
    w[band] = flank_fall((u[band] - fm - 1.0) / denom)
    return w


# ---------------------------------------------------------------------------
# Plan construction


@dataclass
class _WedgeMap:
    """Injective wrap of one windowed frequency wedge onto a rectangle."""

    scale: int
    angle: int
    shape: tuple[int, int]
    src: np.ndarray      # flat indices into the extended grid
    dst: np.ndarray      # flat indices into the wedge rectangle
    neg_src: np.ndarray | None  # mirror-wedge sources; None for the coarse wedge
    win: np.ndarray


@dataclass
class CurveletPlan:
    """Precomputed frequency tiling shared by fdct/ifdct.  Immutable."""

    n1: int
    n2: int
    scales: int
    angles_per_scale: list[int]
    lf: tuple[int, int] | None
    ext_shape: tuple[int, int]
    fold_idx: np.ndarray = field(repr=False)
    fold_w: np.ndarray = field(repr=False)
    wedges: list[_WedgeMap] = field(repr=False)
    slot_shapes: list[list[tuple[int, int]]] = field(repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n1, self.n2)

    @property
    def total_coeffs(self) -> int:
        return sum(s[0] * s[1] for row in self.slot_shapes for s in row)

    def slot_offsets(self) -> list[list[int]]:
        offsets, pos = [], 0
        for row in self.slot_shapes:
            offs = []
            for s in row:
                offs.append(pos)
                pos += s[0] * s[1]
            offsets.append(offs)
        return offsets

    def pack(self, coeffs: "CurveletCoeffs") -> np.ndarray:
        """Flatten to one float vector: coarse first, scale-major, angle-minor."""
        return np.concatenate([g.ravel() for row in coeffs.grids for g in row])

    def unpack(self, vec: np.ndarray) -> "CurveletCoeffs":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.total_coeffs,):
            raise InvalidInputError(
                f"expected a coefficient vector of length {self.total_coeffs}, got {vec.shape}"
            )
        grids, pos = [], 0
        for row in self.slot_shapes:
            out_row = []
            for s in row:
                size = s[0] * s[1]
                out_row.append(vec[pos : pos + size].reshape(s).copy())
                pos += size
            grids.append(out_row)
        return CurveletCoeffs(grids=grids, plan=self)


@dataclass
class CurveletCoeffs:
    """Coefficient pyramid: grids[s][l] is the (scale s+1, angle l) grid."""

    grids: list[list[np.ndarray]]
    plan: CurveletPlan

    def norm(self) -> float:
        return float(np.sqrt(sum(float(np.vdot(g, g)) for row in self.grids for g in row)))


def _angle_counts(scales: int, angles_coarse: int) -> list[int]:
    # Doubles every other scale going finer: [1, a, 2a, 2a, 4a, ...].
    counts = [1]
    for j in range(2, scales + 1):
        counts.append(angles_coarse * 2 ** ((j - 1) // 2))
    return counts


def _fold_axis(n: int, cutoff: int | None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-axis fold: (window, cell index per extended index, retained mask)."""
    if cutoff is None:
        base = n
    else:
        base = cutoff
    ext = 2 * int(np.floor(2.0 * base / 3.0)) + 1
    half = (ext - 1) // 2
    f = np.arange(-half, half + 1)
    retained = np.ones(n, dtype=bool)
    if ext <= n:
        # Rectangular restriction: all needed frequencies exist in the cell.
        w = np.ones(ext)
        retained[:] = False
        cell_centered = f  # |f| <= half < n/2
        retained[(np.abs(np.arange(n) - n // 2)) <= half] = True
        idx = cell_centered + n // 2
    else:
        w = lf_window(ext, n)
        idx = (f + n // 2) % n  # fftshifted cell position of the alias representative
    return w, idx.astype(np.int64), retained


def make_plan(
    n1: int,
    n2: int,
    scales: int,
    angles_coarse: int = 16,
    lf1: int | None = None,
    lf2: int | None = None,
) -> CurveletPlan:
    """Tabulate all windows and wrap maps for an n1 x n2 real transform.

    ``lf1``/``lf2`` select the low-frequency variant whose finest scale covers
    frequencies up to lf_l/2 only; without them the standard transform is
    built.  Partition of unity and wrap injectivity are verified here, so a
    constructed plan is guaranteed to give an isometric transform.
    """
    if n1 % 2 or n2 % 2 or n1 <= 0 or n2 <= 0:
        raise InvalidInputError("image dimensions must be positive and even")
    if scales < 2:
        raise InvalidInputError("need at least 2 scales")
    if angles_coarse % 4 or angles_coarse < 4:
        raise InvalidInputError("angles_coarse must be a positive multiple of 4")
    if (lf1 is None) != (lf2 is None):
        raise InvalidInputError("give both low-frequency cutoffs or neither")
    lf = None
    if lf1 is not None:
        if not (0 < lf1 < n1 and 0 < lf2 < n2):
            raise InvalidInputError("low-frequency cutoffs must satisfy 0 < lf_l < n_l")
        lf = (int(lf1), int(lf2))
    base1 = lf[0] if lf else n1
    base2 = lf[1] if lf else n2
    min_base = 3 * 2**scales
    if base1 < min_base or base2 < min_base:
        raise InvalidInputError(
            f"{scales} scales need a frequency extent of at least {min_base} per axis"
        )

    w1, idx1, ret1 = _fold_axis(n1, lf[0] if lf else None)
    w2, idx2, ret2 = _fold_axis(n2, lf[1] if lf else None)
    ext_shape = (w1.size, w2.size)
    fold_w = np.outer(w1, w2).ravel()
    fold_idx = (idx1[:, None] * n2 + idx2[None, :]).ravel()

    # Fold partition of unity on the retained cell frequencies.
    sums = np.bincount(fold_idx, weights=fold_w**2, minlength=n1 * n2)
    expected = np.outer(ret1, ret2).ravel().astype(np.float64)
    fold_residual = float(np.abs(sums - expected).max())

    # Radial coronae on the extended grid (exact telescoping).
    half1, half2 = (ext_shape[0] - 1) // 2, (ext_shape[1] - 1) // 2
    m1, m2 = base1 / 3.0, base2 / 3.0
    lowpasses = {}
    for j in range(2, scales + 1):
        s = 2 ** (scales - j + 1)
        lowpasses[j] = np.outer(_lowpass_1d(half1, m1 / s), _lowpass_1d(half2, m2 / s))
    radial = {scales: np.sqrt(1.0 - lowpasses[scales] ** 2)}
    for j in range(2, scales):
        radial[j] = lowpasses[j + 1] * np.sqrt(1.0 - lowpasses[j] ** 2)
    radial[1] = lowpasses[2]

    f1 = np.arange(-half1, half1 + 1, dtype=np.float64)[:, None]
    f2 = np.arange(-half2, half2 + 1, dtype=np.float64)[None, :]
    theta = np.arctan2(np.broadcast_to(f2, (w1.size, w2.size)), np.broadcast_to(f1, (w1.size, w2.size)))

    angles = _angle_counts(scales, angles_coarse)
    n_ext = ext_shape[0] * ext_shape[1]
    pou = np.zeros(n_ext)
    wedges: list[_WedgeMap] = []
    slot_shapes: list[list[tuple[int, int]]] = []

    coarse = _coarse_map(radial[1], ext_shape)
    wedges.append(coarse)
    pou += np.bincount(coarse.src, weights=coarse.win**2, minlength=n_ext)
    slot_shapes.append([coarse.shape])

    for j in range(2, scales + 1):
        ntheta = angles[j - 1]
        width = 2.0 * np.pi / ntheta
        row = []
        for l in range(ntheta // 2):
            delta = np.mod(theta - l * width + np.pi, 2.0 * np.pi) - np.pi
            a = np.abs(delta) / width
            ang = np.zeros_like(a)
            band = a < 1.0
            ang[band] = flank_fall(a[band])
            wedge = _wedge_map(radial[j] * ang, ext_shape, j, l)
            wedges.append(wedge)
            pou += np.bincount(wedge.src, weights=wedge.win**2, minlength=n_ext)
            pou += np.bincount(wedge.neg_src, weights=wedge.win**2, minlength=n_ext)
            row.append(wedge.shape)
        slot_shapes.append(row + row)  # mirror slots share shapes

    pou_residual = float(np.abs(pou - 1.0).max())
    if max(pou_residual, fold_residual) > _POU_TOL:
        raise PlanConstructionError(
            f"partition of unity failed: wedge residual {pou_residual:.3e}, "
            f"fold residual {fold_residual:.3e}"
        )

    plan = CurveletPlan(
        n1=n1,
        n2=n2,
        scales=scales,
        angles_per_scale=angles,
        lf=lf,
        ext_shape=ext_shape,
        fold_idx=fold_idx,
        fold_w=fold_w,
        wedges=wedges,
        slot_shapes=slot_shapes,
    )
    if bool(ret1.all() and ret2.all()) and plan.total_coeffs < n1 * n2:
        # Full-band plans are frames of the whole image space, so they must
        # be at least as large as the image; truncating case (i) plans are not.
        raise PlanConstructionError("coefficient count fell below the image size")
    return plan


def _coarse_map(window: np.ndarray, ext_shape: tuple[int, int]) -> _WedgeMap:
    # Modular placement keeps the wedge spectrum Hermitian, so the coarse
    # coefficients of a real image come out real.
    half1, half2 = (ext_shape[0] - 1) // 2, (ext_shape[1] - 1) // 2
    src = np.flatnonzero(window.ravel() > 0.0)
    c1 = src // ext_shape[1] - half1
    c2 = src % ext_shape[1] - half2
    s1, s2 = int(np.abs(c1).max()), int(np.abs(c2).max())
    shape = (2 * s1 + 1, 2 * s2 + 1)
    dst = (c1 % shape[0]) * shape[1] + (c2 % shape[1])
    _check_injective(dst, 1, 0)
    return _WedgeMap(1, 0, shape, src, dst.astype(np.int64), None, window.ravel()[src])


def _wedge_map(window: np.ndarray, ext_shape: tuple[int, int], scale: int, angle: int) -> _WedgeMap:
    src = np.flatnonzero(window.ravel() > 0.0)
    if src.size == 0:
        return _WedgeMap(scale, angle, (1, 1), src, src.copy(), src.copy(), window.ravel()[src])
    rows = src // ext_shape[1]
    cols = src % ext_shape[1]
    r0 = int(rows.min())
    nrows = int(rows.max()) - r0 + 1
    first = np.full(nrows, np.iinfo(np.int64).max, dtype=np.int64)
    np.minimum.at(first, rows - r0, cols)
    last = np.full(nrows, -1, dtype=np.int64)
    np.maximum.at(last, rows - r0, cols)
    width = int((last - first).max()) + 1
    # Per-row periodization: each support row shifts by its own offset, which
    # is one-to-one because no row is wider than the rectangle.
    dst = (rows - r0) * width + (cols - first[rows - r0]) % width
    _check_injective(dst, scale, angle)
    neg_src = ext_shape[0] * ext_shape[1] - 1 - src
    return _WedgeMap(scale, angle, (nrows, width), src, dst.astype(np.int64), neg_src, window.ravel()[src])


def _check_injective(dst: np.ndarray, scale: int, angle: int) -> None:
    if np.unique(dst).size != dst.size:
        raise PlanConstructionError(f"wedge wrap not one-to-one at scale {scale}, angle {angle}")


# ---------------------------------------------------------------------------
# Transforms


def fdct(plan: CurveletPlan, image: np.ndarray) -> CurveletCoeffs:
    """Analysis: FFT, fold, per-wedge window + wrap, inverse FFT per wedge."""
    image = np.asarray(image, dtype=np.float64)
    if image.shape != plan.shape:
        raise InvalidInputError(f"expected image of shape {plan.shape}, got {image.shape}")
    spectrum = fft.fftshift(fft.fft2(image, norm="ortho"))
    ext = plan.fold_w * spectrum.ravel()[plan.fold_idx]

    grids: list[list[np.ndarray]] = [[] for _ in range(plan.scales)]
    mirrors: list[list[np.ndarray]] = [[] for _ in range(plan.scales)]
    for w in plan.wedges:
        buf = np.zeros(w.shape, dtype=np.complex128)
        buf.ravel()[w.dst] = w.win * ext[w.src]
        c = fft.ifft2(buf, norm="ortho")
        if w.neg_src is None:
            grids[0].append(np.ascontiguousarray(c.real))
        else:
            # The mirror-angle wedge of a real image carries the conjugate
            # data, so the pair is stored as sqrt(2) * (real, imag).
            grids[w.scale - 1].append(np.ascontiguousarray(np.sqrt(2.0) * c.real))
            mirrors[w.scale - 1].append(np.ascontiguousarray(np.sqrt(2.0) * c.imag))
    for s in range(1, plan.scales):
        grids[s].extend(mirrors[s])
    return CurveletCoeffs(grids=grids, plan=plan)


def ifdct(plan: CurveletPlan, coeffs: CurveletCoeffs) -> np.ndarray:
    """Synthesis: exact adjoint of fdct; inverts it because fdct is isometric."""
    _check_coeffs(plan, coeffs)
    ext = np.zeros(plan.ext_shape[0] * plan.ext_shape[1], dtype=np.complex128)
    for w in plan.wedges:
        if w.neg_src is None:
            spectrum_w = fft.fft2(coeffs.grids[0][0].astype(np.float64), norm="ortho")
            ext[w.src] += w.win * spectrum_w.ravel()[w.dst]
        else:
            ntheta = plan.angles_per_scale[w.scale - 1]
            a = coeffs.grids[w.scale - 1][w.angle]
            b = coeffs.grids[w.scale - 1][w.angle + ntheta // 2]
            c = (a + 1j * b) / np.sqrt(2.0)
            vals = w.win * fft.fft2(c, norm="ortho").ravel()[w.dst]
            ext[w.src] += vals
            ext[w.neg_src] += np.conj(vals)
    wexk = plan.fold_w * ext
    n = plan.n1 * plan.n2
    acc = np.bincount(plan.fold_idx, weights=wexk.real, minlength=n) + 1j * np.bincount(
        plan.fold_idx, weights=wexk.imag, minlength=n
    )
    return fft.ifft2(fft.ifftshift(acc.reshape(plan.shape)), norm="ortho").real


def _check_coeffs(plan: CurveletPlan, coeffs: CurveletCoeffs) -> None:
    if len(coeffs.grids) != plan.scales:
        raise InvalidInputError("coefficient pyramid does not match the plan's scale count")
    for row, shapes in zip(coeffs.grids, plan.slot_shapes):
        if len(row) != len(shapes) or any(g.shape != s for g, s in zip(row, shapes)):
            raise InvalidInputError("coefficient grid shapes do not match the plan")


def k_term(coeffs: CurveletCoeffs, k: int) -> CurveletCoeffs:
    """Best k-term approximation: keep the k largest magnitudes, zero the rest.

    Ties broken by first occurrence in the canonical vector order.
    """
    plan = coeffs.plan
    n = plan.total_coeffs
    if not 0 <= k <= n:
        raise InvalidInputError(f"k must be in 0..{n}, got {k}")
    vec = plan.pack(coeffs)
    if k < n:
        order = np.argsort(-np.abs(vec), kind="stable")
        keep = np.zeros(n, dtype=bool)
        keep[order[:k]] = True
        vec = np.where(keep, vec, 0.0)
    return plan.unpack(vec)
