"""Frequency-domain perception of a displayed stack.

A displayed stack is taken to the spatiotemporal frequency domain with a 3D
FFT, each component is reweighted by one of three methods, and the result is
inverse-transformed:

* LF  -- linear filtering: each component is multiplied by the contrast
  sensitivity S at its frequency.
* PM  -- probability map: each component's modulation is replaced by its
  detection probability p, phase preserved.
* MC  -- Monte Carlo: each component is kept (at unit modulation) with
  probability p or zeroed, one draw per conjugate pair.

Because the input is real, coefficients come in conjugate pairs; every
method processes each pair exactly once and mirrors the result, so the
output is exactly conjugate-symmetric and inverse-transforms to a real
stack.  The DC component (mean luminance) passes through untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from math import prod

import numpy as np

from .csf import DEFAULT_PARAMS, BartenParams, FieldGeometry, csf, detection_probability
from .errors import DegenerateStackError, DimensionMismatchError, DomainError
from .stackgen import ImageStack, ViewingConditions

__all__ = [
    "SpectralStack",
    "FrequencyMap",
    "METHODS",
    "forward",
    "inverse",
    "modulation",
    "apply_lf",
    "apply_pm",
    "apply_mc",
    "perceive",
]

METHODS = ("LF", "PM", "MC")

_IMAG_RESIDUE_TOL = 1e-9


@dataclass
class SpectralStack:
    """Complex 3D spectrum of a real stack, plus its mean luminance (DC / N)."""

    coeffs: np.ndarray
    dims: tuple[int, int, int]
    mean_lum: float
    visited: int = 0  # conjugate pairs processed by the last method applied


@dataclass(frozen=True)
class FrequencyMap:
    """Physical frequency per DFT index: u1, u2 in cycles/deg, w in cycles/s."""

    u1: np.ndarray
    u2: np.ndarray
    w: np.ndarray

    @classmethod
    def for_stack(cls, dims: tuple[int, int, int], vc: ViewingConditions) -> "FrequencyMap":
        nx, ny, nt = dims
        kx, ky, kt = np.arange(nx), np.arange(ny), np.arange(nt)
        u1 = np.minimum(kx, nx - kx) / nx * vc.ssr
        u2 = np.minimum(ky, ny - ky) / ny * vc.ssr
        w = np.minimum(kt, nt - kt) / nt * vc.browse_speed
        return cls(u1=u1, u2=u2, w=w)

    def grids(self) -> tuple[np.ndarray, np.ndarray]:
        """Combined spatial frequency sqrt(u1^2 + u2^2) and temporal w as 3D grids."""
        u = np.sqrt(self.u1[:, None, None] ** 2 + self.u2[None, :, None] ** 2)
        u = np.broadcast_to(u, (self.u1.size, self.u2.size, self.w.size))
        w = np.broadcast_to(self.w[None, None, :], u.shape)
        return u, w


@lru_cache(maxsize=8)
def _pair_table(dims: tuple[int, int, int]):
    """Flat indices of one representative per conjugate pair (DC excluded).

    Returns (canonical, partner, self_conj): canonical[i] and partner[i] are
    flat C-order indices with canonical <= partner; self_conj marks bins that
    are their own conjugate (DC plane / Nyquist corners).
    """
    nx, ny, nt = dims
    kx, ky, kt = np.indices(dims)
    flat = (kx * ny + ky) * nt + kt
    partner = (((-kx) % nx) * ny + ((-ky) % ny)) * nt + ((-kt) % nt)
    flat = flat.ravel()
    partner = partner.ravel()
    canonical = np.nonzero((flat <= partner) & (flat != 0))[0]
    partner = partner[canonical]
    return canonical, partner, canonical == partner


def forward(stack: ImageStack) -> SpectralStack:
    """3D FFT of a real stack.  Dimensions must be even."""
    data = stack.data
    if np.iscomplexobj(data):
        raise DomainError("forward transform expects a real-valued stack")
    if any(n % 2 for n in data.shape):
        raise DimensionMismatchError(
            f"stack dimensions must be even, got {data.shape}"
        )
    coeffs = np.fft.fftn(data)
    n = prod(data.shape)
    return SpectralStack(coeffs=coeffs, dims=data.shape, mean_lum=coeffs[0, 0, 0].real / n)


def inverse(spec: SpectralStack) -> np.ndarray:
    """Inverse 3D FFT; raises if the imaginary residue is non-negligible."""
    out = np.fft.ifftn(spec.coeffs)
    scale = np.abs(out).max()
    if scale > 0 and np.abs(out.imag).max() > _IMAG_RESIDUE_TOL * scale:
        raise DomainError("inverse transform left a non-negligible imaginary part")
    return out.real


def modulation(spec: SpectralStack, k: tuple[int, int, int]) -> float:
    """Modulation of the component at index k: amplitude over mean luminance.

    A non-self-conjugate bin and its partner form one cosine, so its
    amplitude counts twice: m = 2*|c| / (N * mean_lum); self-conjugate bins
    count once.  The DC bin has no modulation.
    """
    kx, ky, kt = (int(k[0]) % spec.dims[0], int(k[1]) % spec.dims[1], int(k[2]) % spec.dims[2])
    if (kx, ky, kt) == (0, 0, 0):
        raise DomainError("the DC component has no modulation")
    if spec.mean_lum <= 0:
        raise DegenerateStackError("mean luminance must be positive to define modulation")
    partner = ((-kx) % spec.dims[0], (-ky) % spec.dims[1], (-kt) % spec.dims[2])
    pair_weight = 1.0 if partner == (kx, ky, kt) else 2.0
    n = prod(spec.dims)
    return pair_weight * abs(spec.coeffs[kx, ky, kt]) / (n * spec.mean_lum)


def _field_geometry(spec: SpectralStack, vc: ViewingConditions) -> FieldGeometry:
    # Apparent size from pixel count and sampling rate (orthogonal viewing).
    return FieldGeometry(x0=spec.dims[0] / vc.ssr, l_avg=spec.mean_lum)


def _apply(spec, vc, kind, geom, params, csf_fn, prob_fn, seed):
    canonical, partner, self_conj = _pair_table(spec.dims)
    u3, w3 = FrequencyMap.for_stack(spec.dims, vc).grids()
    u = u3.ravel()[canonical]
    w = w3.ravel()[canonical]
    if csf_fn is None:
        if geom is None:
            geom = _field_geometry(spec, vc)
        gains_geom = geom
        csf_fn = lambda uu, ww: csf(uu, ww, gains_geom, params)
    s = np.asarray(csf_fn(u, w), dtype=float)

    flat = spec.coeffs.ravel().copy()
    c = flat[canonical]
    if kind == "LF":
        new = c * s
        new = np.where(self_conj, new.real, new)
    else:
        if spec.mean_lum <= 0:
            raise DegenerateStackError("PM/MC need a positive mean luminance")
        n = prod(spec.dims)
        pair_scale = np.where(self_conj, n * spec.mean_lum, n * spec.mean_lum / 2.0)
        amps = np.abs(c)
        m = amps / pair_scale
        if prob_fn is None:
            prob_fn = lambda mm, ss: detection_probability(mm, ss, params.k_crozier)
        p = np.asarray(prob_fn(m, s), dtype=float)
        if kind == "PM":
            new_mod = p
        else:
            rng = np.random.default_rng(seed)
            new_mod = (rng.random(canonical.size) < p).astype(float)
        # Phase preserved for paired bins; self-conjugate bins are real, so
        # only their sign carries through.
        safe = np.where(amps > 0, amps, 1.0)
        phase = np.where(amps > 0, c / safe, 1.0)
        phase = np.where(self_conj, np.where(c.real < 0, -1.0, 1.0), phase)
        new = new_mod * pair_scale * phase

    flat[canonical] = new
    flat[partner] = np.conj(new)
    coeffs = flat.reshape(spec.dims)
    return SpectralStack(
        coeffs=coeffs, dims=spec.dims, mean_lum=spec.mean_lum, visited=canonical.size
    )


def apply_lf(
    spec: SpectralStack,
    vc: ViewingConditions,
    geom: FieldGeometry | None = None,
    *,
    params: BartenParams = DEFAULT_PARAMS,
    csf_fn=None,
) -> SpectralStack:
    """Scale every non-DC component by the sensitivity at its frequency."""
    return _apply(spec, vc, "LF", geom, params, csf_fn, None, None)


def apply_pm(
    spec: SpectralStack,
    vc: ViewingConditions,
    geom: FieldGeometry | None = None,
    *,
    params: BartenParams = DEFAULT_PARAMS,
    csf_fn=None,
    prob_fn=None,
) -> SpectralStack:
    """Replace every non-DC component's modulation by its detection probability."""
    return _apply(spec, vc, "PM", geom, params, csf_fn, prob_fn, None)


def apply_mc(
    spec: SpectralStack,
    vc: ViewingConditions,
    geom: FieldGeometry | None = None,
    seed=None,
    *,
    params: BartenParams = DEFAULT_PARAMS,
    csf_fn=None,
    prob_fn=None,
) -> SpectralStack:
    """Bernoulli keep/discard per conjugate pair; kept pairs get unit modulation."""
    if seed is None:
        raise DomainError("the MC method requires an explicit seed")
    return _apply(spec, vc, "MC", geom, params, csf_fn, prob_fn, seed)


def perceive(
    stack: ImageStack,
    method: str,
    vc: ViewingConditions,
    *,
    mc_seed=None,
    params: BartenParams = DEFAULT_PARAMS,
    csf_fn=None,
    prob_fn=None,
) -> ImageStack:
    """Forward transform, apply one method, inverse transform back to space-time."""
    method = method.upper()
    if method not in METHODS:
        raise DomainError(f"unknown perception method {method!r}")
    spec = forward(stack)
    if method == "LF":
        spec = apply_lf(spec, vc, params=params, csf_fn=csf_fn)
    elif method == "PM":
        spec = apply_pm(spec, vc, params=params, csf_fn=csf_fn, prob_fn=prob_fn)
    else:
        spec = apply_mc(spec, vc, seed=mc_seed, params=params, csf_fn=csf_fn, prob_fn=prob_fn)
    return replace(stack, data=inverse(spec))
