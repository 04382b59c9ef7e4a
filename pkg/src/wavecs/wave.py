"""Homogeneous-medium acoustic propagation on a planar-sensor geometry.

Forward simulation advances the initial pressure through the exact spectral
propagator cos(c0 |k| t) on an even-extended, padded grid and samples the
z = 0 plane.  Time reversal steps the wave equation backwards with a
pseudospectral leapfrog whose k-space correction makes the homogeneous
scheme exact, feeding the recorded series back in as Dirichlet values on
the sensor plane.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import fft

from .errors import InvalidConfigError, InvalidInputError, NumericalFailureError

__all__ = [
    "MediumSpec",
    "DegradationSpec",
    "forward_geometry",
    "spectral_forward",
    "freq_model",
    "blackman_degradation",
    "degrade",
    "blackman_smooth",
    "filter_initial_pressure",
    "time_reversal",
]

TR_CFL_LIMIT = 0.3


@dataclass(frozen=True)
class MediumSpec:
    """Homogeneous medium and sampling: sound speed, density, grid/time steps."""

    c0: float = 1500.0
    rho0: float = 1000.0
    dx: float = 5e-5
    dt: float = 1e-8
    nt: int = 128

    def __post_init__(self):
        if min(self.c0, self.rho0, self.dx, self.dt) <= 0 or self.nt < 1:
            raise InvalidInputError("medium parameters must be positive")

    @property
    def cfl(self) -> float:
        return self.c0 * self.dt / self.dx

    @property
    def travel_voxels(self) -> int:
        return int(math.ceil(self.cfl * self.nt))


def forward_geometry(
    shape: tuple[int, int, int],
    med: MediumSpec,
    pad: tuple[int, int, int] | None = None,
    allow_lateral_wrap: bool = False,
) -> tuple[int, int, int]:
    """Padded grid sizes (lateral1, lateral2, half-depth) for wrap-free stepping.

    The z axis is mirrored about the sensor plane, so its period is twice the
    returned half-depth.  Raises if an explicit pad cannot keep periodic
    images farther than c0*T from the sensor; ``allow_lateral_wrap`` waives
    the check for the lateral axes only (a deliberately periodic sensor
    plane, used by grid-consistent cross-validations), never for depth.
    """
    n1, n2, n3 = shape
    travel = med.travel_voxels
    min1 = n1 + travel + 1
    min2 = n2 + travel + 1
    min3 = max(n3, (n3 + travel + 1 + 1) // 2)
    if pad is None:
        return (fft.next_fast_len(min1), fft.next_fast_len(min2), fft.next_fast_len(min3))
    sizes = (n1 + pad[0], n2 + pad[1], n3 + pad[2])
    lateral_bad = sizes[0] < min1 or sizes[1] < min2
    if (lateral_bad and not allow_lateral_wrap) or sizes[2] < min3:
        raise InvalidConfigError(
            f"padding too small for {med.nt} steps: minimum pad is "
            f"({min1 - n1}, {min2 - n2}, {min3 - n3}) voxels"
        )
    return sizes


def _extended_source(p0: np.ndarray, sizes: tuple[int, int, int]) -> np.ndarray:
    """Zero-pad and mirror about z=0; the result is even in z with period 2*L3."""
    l1, l2, l3 = sizes
    ext = np.zeros((l1, l2, 2 * l3))
    n1, n2, n3 = p0.shape
    ext[:n1, :n2, :n3] = p0
    ext[:, :, l3 + 1 :] = ext[:, :, l3 - 1 : 0 : -1]
    return ext


def _k_magnitude(shape: tuple[int, ...], dx: float) -> np.ndarray:
    axes = [2.0 * np.pi * fft.fftfreq(n, d=dx) for n in shape]
    k2 = np.zeros(shape)
    for ax, kvals in enumerate(axes):
        view = [None] * len(shape)
        view[ax] = slice(None)
        k2 = k2 + kvals[tuple(view)] ** 2
    return np.sqrt(k2)


def _check_volume(p0: np.ndarray) -> np.ndarray:
    p0 = np.asarray(p0, dtype=np.float64)
    if p0.ndim != 3:
        raise InvalidInputError(f"expected a 3D volume, got shape {p0.shape}")
    return p0


def spectral_forward(
    p0: np.ndarray,
    med: MediumSpec,
    pad: tuple[int, int, int] | None = None,
    full_plane: bool = False,
    allow_lateral_wrap: bool = False,
) -> np.ndarray:
    """Record the pressure series on the z=0 plane, g[t, x1, x2].

    Each step multiplies the extended source spectrum by cos(c0 |k| t) and
    samples z=0, which is exact for the homogeneous wave equation up to
    periodic wrap; the padded geometry keeps wrap away from the sensor for
    all ``med.nt`` steps.  ``full_plane`` returns the whole padded plane
    instead of the p0-sized sensor window.
    """
    p0 = _check_volume(p0)
    sizes = forward_geometry(p0.shape, med, pad, allow_lateral_wrap)
    ext = _extended_source(p0, sizes)
    spectrum = fft.fftn(ext)
    step_cos = np.cos(med.c0 * med.dt * _k_magnitude(ext.shape, med.dx))
    nz = ext.shape[2]
    n1, n2 = p0.shape[:2]
    out_shape = (med.nt, sizes[0], sizes[1]) if full_plane else (med.nt, n1, n2)
    g = np.empty(out_shape)
    # cos(omega t dt) by the Chebyshev recurrence: one multiply-add per
    # voxel and step instead of a transcendental evaluation.
    cos_prev = np.ones_like(step_cos)
    cos_cur = step_cos.copy()
    for t in range(med.nt):
        if t == 1:
            work = cos_cur
        elif t > 1:
            work = 2.0 * step_cos * cos_cur - cos_prev
            cos_prev, cos_cur = cos_cur, work
        else:
            work = cos_prev
        plane_spec = np.einsum("ijk,ijk->ij", spectrum.real, work) + 1j * np.einsum(
            "ijk,ijk->ij", spectrum.imag, work
        )
        plane = fft.ifft2(plane_spec).real / nz
        g[t] = plane if full_plane else plane[:n1, :n2]
    return g


def freq_model(
    p0: np.ndarray,
    med: MediumSpec,
    pad: tuple[int, int, int] | None = None,
    oversample: int = 16,
    kz_zoom: int = 4,
    finite_record: bool = True,
) -> np.ndarray:
    """Sensor-data spectrum predicted directly from the source spectrum.

    Evaluates the dispersion-cone mapping: at temporal frequency omega the
    depth frequency is k_perp = sqrt((omega/c0)^2 - |k_S|^2) and the data
    spectrum is the source spectrum on the cone weighted by the
    change-of-variables factor omega / (c0^2 k_perp); the weight integrates
    exactly over each quadrature cell (its antiderivative is k_perp itself)
    and the source spectrum is linearly interpolated at the cell midpoint.

    With ``finite_record`` the cells are accumulated against the Fourier
    kernel of the ``med.nt``-sample record, making the result bin-by-bin
    comparable with the temporal FFT of
    ``spectral_forward(..., full_plane=True)`` on the same padded plane.
    Without it the continuum rendering is returned: each cell lands in its
    own frequency bin and the model is exactly zero outside the cone
    omega/c0 > |k_S|.
    """
    p0 = _check_volume(p0)
    sizes = forward_geometry(p0.shape, med, pad)
    # The depth axis is zero-padded beyond the propagation geometry purely to
    # sample the source spectrum more densely in k_perp for interpolation.
    ext = _extended_source(p0, (sizes[0], sizes[1], kz_zoom * sizes[2]))
    nz = ext.shape[2]
    half = nz // 2
    # Spectrum is even in k_z (even-in-z source): keep the nonnegative half.
    p0_spec = np.ascontiguousarray(fft.fftn(ext)[:, :, : half + 1])
    dkz = 2.0 * np.pi / (nz * med.dx)

    nt = med.nt
    nq = oversample * ((nt + 1) // 2)
    d_sub = np.pi / (med.dt * nq)
    d_omega = 2.0 * np.pi / (nt * med.dt)
    omega_mid = (np.arange(nq) + 0.5) * d_sub
    if finite_record:
        # DFT of cos(omega t) over the nt recorded steps.
        t = np.arange(nt)
        kernel = fft.fft(np.cos(np.outer(t, omega_mid) * med.dt), axis=0)
    else:
        # Continuum limit: each quadrature cell contributes only to the bin
        # holding its frequency (and its negative-frequency mirror), with
        # the full line mass pi/dt spread over the bin width.
        kernel = np.zeros((nt, nq))
        parents = np.minimum(np.round(omega_mid / d_omega).astype(np.int64), nt // 2)
        mass = (np.pi / med.dt) / d_omega
        kernel[parents, np.arange(nq)] += mass
        kernel[(nt - parents) % nt, np.arange(nq)] += mass

    k_lat = _k_magnitude((sizes[0], sizes[1]), med.dx)
    hi2 = ((omega_mid + 0.5 * d_sub) / med.c0) ** 2
    lo2 = ((omega_mid - 0.5 * d_sub) / med.c0) ** 2
    model = np.empty((nt, sizes[0], sizes[1]), dtype=np.complex128)
    cols = np.arange(sizes[1])
    for a in range(sizes[0]):
        ks2 = k_lat[a][None, :] ** 2  # (1, L2)
        kp_hi = np.sqrt(np.maximum(hi2[:, None] - ks2, 0.0))
        kp_lo = np.sqrt(np.maximum(lo2[:, None] - ks2, 0.0))
        kp_mid = 0.5 * (kp_hi + kp_lo)
        pos = np.minimum(kp_mid / dkz, float(half))
        i0 = np.minimum(pos.astype(np.int64), half - 1)
        frac = pos - i0
        spec_row = p0_spec[a]  # (L2, half+1)
        interp = spec_row[cols[None, :], i0] * (1.0 - frac) + spec_row[cols[None, :], i0 + 1] * frac
        interp[kp_mid / dkz > float(half)] = 0.0
        density = (kp_hi - kp_lo) * interp  # (nq, L2)
        model[:, a, :] = (med.dx / np.pi) * (kernel @ density)
    if not finite_record:
        freq = np.abs(fft.fftfreq(nt)) * nt * d_omega
        outside = freq[:, None, None] <= med.c0 * k_lat[None, :, :]
        model[outside] = 0.0
    return model


@dataclass(frozen=True)
class DegradationSpec:
    """Band-limiting frequency windows over time (w_t) and the sensor (w_par)."""

    w_t: np.ndarray
    w_par: np.ndarray

    def __post_init__(self):
        w_t = np.asarray(self.w_t, dtype=np.float64)
        w_par = np.asarray(self.w_par, dtype=np.float64)
        if w_t.ndim != 1 or w_par.ndim != 2:
            raise InvalidInputError("w_t must be 1D and w_par 2D")
        for name, w in (("w_t", w_t), ("w_par", w_par)):
            if w.min() < 0.0 or w.max() > 1.0:
                raise InvalidInputError(f"{name} values must lie in [0, 1]")
        if not _symmetric(w_t) or not _symmetric(w_par):
            raise InvalidInputError("windows must be symmetric about zero frequency")
        object.__setattr__(self, "w_t", w_t)
        object.__setattr__(self, "w_par", w_par)


def _symmetric(w: np.ndarray) -> bool:
    mirror = w
    for ax in range(w.ndim):
        sel = (-np.arange(w.shape[ax])) % w.shape[ax]
        mirror = np.take(mirror, sel, axis=ax)
    return np.allclose(w, mirror, atol=1e-12)


def _blackman_profile(x: np.ndarray) -> np.ndarray:
    x = np.abs(x)
    out = 0.42 + 0.5 * np.cos(np.pi * x) + 0.08 * np.cos(2.0 * np.pi * x)
    return np.where(x <= 1.0, np.maximum(out, 0.0), 0.0)


def blackman_degradation(
    nt: int, n1: int, n2: int, temporal_cut: float = 1.0, spatial_cut: float = 1.0
) -> DegradationSpec:
    """Blackman roll-off over the temporal band and (radially) the sensor band.

    The cut arguments place the window's zero at that fraction of Nyquist.
    """
    if not (0 < temporal_cut <= 1.0 and 0 < spatial_cut <= 1.0):
        raise InvalidInputError("cut fractions must lie in (0, 1]")
    w_t = _blackman_profile(fft.fftfreq(nt) / (0.5 * temporal_cut))
    radius = np.hypot(fft.fftfreq(n1)[:, None], fft.fftfreq(n2)[None, :])
    w_par = _blackman_profile(radius / (0.5 * spatial_cut))
    return DegradationSpec(w_t=w_t, w_par=w_par)


def degrade(g: np.ndarray, spec: DegradationSpec) -> np.ndarray:
    """Apply w_t(omega) * w_par(k_S) to the series spectrum; output stays real."""
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 3:
        raise InvalidInputError(f"expected series g[t, x1, x2], got shape {g.shape}")
    if spec.w_t.shape[0] != g.shape[0] or spec.w_par.shape != g.shape[1:]:
        raise InvalidInputError(
            f"window grids {spec.w_t.shape} x {spec.w_par.shape} do not match series {g.shape}"
        )
    window = spec.w_t[:, None, None] * spec.w_par[None, :, :]
    return fft.ifftn(fft.fftn(g) * window).real


def blackman_smooth(p0: np.ndarray) -> np.ndarray:
    """Multiply the volume spectrum by the separable 3D Blackman window."""
    p0 = _check_volume(p0)
    ws = [_blackman_profile(2.0 * fft.fftfreq(n)) for n in p0.shape]
    window = ws[0][:, None, None] * ws[1][None, :, None] * ws[2][None, None, :]
    return fft.ifftn(fft.fftn(p0) * window).real


def filter_initial_pressure(p0: np.ndarray, med: MediumSpec, spec: DegradationSpec) -> np.ndarray:
    """Apply the sensor degradation as the equivalent source filter.

    Band-limiting the recorded series with w_t(omega) w_par(k_S) acts on the
    source as the filter w_t(c0 |k|) w_par(k_S); this evaluates that filter
    on the volume's own spectrum (w_t linearly interpolated in omega).
    """
    p0 = _check_volume(p0)
    if spec.w_par.shape != p0.shape[:2]:
        raise InvalidInputError("w_par grid must match the volume's lateral grid")
    nt = spec.w_t.shape[0]
    omega_grid = 2.0 * np.pi * np.arange(nt // 2 + 1) / (nt * med.dt)
    w_half = spec.w_t[: nt // 2 + 1]
    kmag = _k_magnitude(p0.shape, med.dx)
    wt_3d = np.interp(med.c0 * kmag, omega_grid, w_half, right=0.0)
    window = wt_3d * spec.w_par[:, :, None]
    return fft.ifftn(fft.fftn(p0) * window).real


def time_reversal(
    g: np.ndarray,
    med: MediumSpec,
    grid: tuple[int, int, int],
    frame: int = 8,
) -> np.ndarray:
    """Reconstruct the initial pressure by running the data backwards in time.

    Pseudospectral second-order stepping with the k-space temporal correction
    sinc(c0 |k| dt / 2); the recorded plane is re-imposed as Dirichlet values
    each reverse step, and a cosine-taper frame damps energy leaving the
    reconstruction box (the sensor face carries data, so it is not tapered).
    """
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 3:
        raise InvalidInputError(f"expected series g[t, x1, x2], got shape {g.shape}")
    n1, n2, n3 = grid
    nt = g.shape[0]
    if g.shape[1:] != (n1, n2):
        raise InvalidInputError(f"series plane {g.shape[1:]} does not match grid {grid[:2]}")
    if nt < 2:
        raise InvalidInputError("time reversal needs at least 2 recorded steps")
    if med.cfl > TR_CFL_LIMIT:
        warnings.warn(
            f"time-reversal stepping with c0*dt/dx = {med.cfl:.3f} > {TR_CFL_LIMIT}; "
            "Dirichlet re-imposition may go unstable",
            RuntimeWarning,
            stacklevel=2,
        )

    # The reconstruction box is mirrored about the sensor plane: the recorded
    # field is even in z, so enforcing the data on an interior symmetry plane
    # keeps the spectral Laplacian consistent right where the data lives.
    zhalf = n3 + frame
    work = (n1 + 2 * frame, n2 + 2 * frame, 2 * zhalf)
    kmag = _k_magnitude(work, med.dx)
    arg = med.c0 * kmag * med.dt / 2.0
    lap_mult = -((kmag * np.sinc(arg / np.pi)) ** 2)
    mask = _taper_mask(work, frame)
    scale = (med.c0 * med.dt) ** 2
    s1, s2 = slice(frame, frame + n1), slice(frame, frame + n2)

    p_prev = np.zeros(work)
    p = np.zeros(work)
    p[s1, s2, 0] = g[nt - 1]
    for step in range(1, nt):
        lap = fft.ifftn(fft.fftn(p) * lap_mult).real
        p_next = (2.0 * p - p_prev + scale * lap) * mask
        p_next[s1, s2, 0] = g[nt - 1 - step]
        p_prev, p = p, p_next
        if step % 32 == 0 and not np.isfinite(p).all():
            raise NumericalFailureError(f"field blew up at reverse step {step}", iteration=step)
    if not np.isfinite(p).all():
        raise NumericalFailureError("field blew up during time reversal", iteration=nt - 1)
    return p[s1, s2, :n3].copy()


def _taper_mask(work: tuple[int, int, int], frame: int) -> np.ndarray:
    """Cosine sponge: 1 inside, rolling to ~0 over the outer ``frame`` voxels.

    Lateral axes taper at both ends.  The z axis holds the mirrored domain:
    its taper sits at the far field |z| ~ work[2]/2 on both mirror halves and
    is exactly even about the sensor plane z=0.
    """
    if frame == 0:
        return np.ones(work)
    ramp = 0.5 * (1.0 + np.cos(np.pi * np.arange(1, frame + 1) / frame))

    def lateral_profile(n: int) -> np.ndarray:
        prof = np.ones(n)
        prof[n - frame :] = ramp
        prof[:frame] = ramp[::-1]
        return prof

    zhalf = work[2] // 2
    z = np.arange(work[2])
    depth = np.minimum(z, work[2] - z)  # mirrored distance from the sensor plane
    a3 = np.ones(work[2])
    band = depth > zhalf - frame
    a3[band] = ramp[np.minimum(depth[band] - (zhalf - frame), frame) - 1]
    a1 = lateral_profile(work[0])
    a2 = lateral_profile(work[1])
    return a1[:, None, None] * a2[None, :, None] * a3[None, None, :]
