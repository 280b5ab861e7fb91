"""Synthetic image stacks: generation, lesion insertion, display normalization, I/O.

A stack is a small 3D volume (x, y, t) of luminance values browsed
slice-by-slice in time.  Backgrounds are power-law filtered Gaussian noise;
signal-present cases get a separable 3D Gaussian bump added at a known
location.  Display normalization linearly maps each stack onto
[l_max/contrast, l_max] so every case is shown at the same effective
contrast.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DegenerateStackError,
    DimensionMismatchError,
    DomainError,
    MalformedHeaderError,
    TruncatedPayloadError,
)

__all__ = [
    "LABEL_ABSENT",
    "LABEL_PRESENT",
    "ImageStack",
    "ViewingConditions",
    "LesionSpec",
    "generate_background",
    "insert_lesion",
    "normalize_to_display",
    "write_stack",
    "read_stack",
    "generate_corpus",
    "write_manifest",
    "read_manifest",
]

LABEL_ABSENT = "signal-absent"
LABEL_PRESENT = "signal-present"

_MAGIC = b"VOBSTACK"
_DTYPE_F64 = 0
_HEADER = struct.Struct("<6I")  # nx, ny, nt, dtype tag, label, reserved
_SEED = struct.Struct("<Q")


@dataclass
class ImageStack:
    """An x-by-y-by-t volume of luminance values with its generation seed."""

    data: np.ndarray
    label: str = LABEL_ABSENT
    seed: int = 0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3:
            raise DimensionMismatchError(f"stack data must be 3D, got shape {self.data.shape}")
        if self.label not in (LABEL_ABSENT, LABEL_PRESENT):
            raise DomainError(f"unknown stack label {self.label!r}")

    @property
    def nx(self) -> int:
        return self.data.shape[0]

    @property
    def ny(self) -> int:
        return self.data.shape[1]

    @property
    def nt(self) -> int:
        return self.data.shape[2]

    @property
    def signal_present(self) -> bool:
        return self.label == LABEL_PRESENT


@dataclass(frozen=True)
class ViewingConditions:
    """Display and browsing parameters shared by a whole experiment point."""

    l_max: float = 300.0  # cd/m^2
    contrast: float = 200.0  # effective contrast C = l_max / l_min
    ssr: float = 7.0  # pixels per degree
    browse_speed: float = 25.0  # slices per second

    def __post_init__(self):
        if not self.l_max > 0:
            raise DomainError(f"l_max must be positive, got {self.l_max!r}")
        if not self.contrast > 1:
            raise DomainError(f"contrast must exceed 1, got {self.contrast!r}")
        if not self.ssr > 0:
            raise DomainError(f"ssr must be positive, got {self.ssr!r}")
        if not self.browse_speed > 0:
            raise DomainError(f"browse_speed must be positive, got {self.browse_speed!r}")

    @property
    def l_min(self) -> float:
        return self.l_max / self.contrast


@dataclass(frozen=True)
class LesionSpec:
    """A separable Gaussian bump: peak height, spatial/temporal widths, center voxel."""

    amplitude: float
    sigma_xy: float = 6.0  # pixels
    sigma_t: float = 3.0  # slices
    center: tuple[float, float, float] | None = None  # defaults to the volume center

    def __post_init__(self):
        if not self.amplitude >= 0:
            raise DomainError(f"lesion amplitude must be non-negative, got {self.amplitude!r}")
        if not (self.sigma_xy > 0 and self.sigma_t > 0):
            raise DomainError("lesion sigmas must be positive")


def generate_background(nx: int, ny: int, nt: int, beta: float, seed) -> ImageStack:
    """Power-law filtered Gaussian noise, affinely mapped to [0, 1].

    White noise is shaped in the 3D frequency domain with radial amplitude
    |f|^(-beta/2) (power spectrum slope -beta); beta = 0 reproduces white
    noise.  Deterministic given the seed.
    """
    for name, n in (("nx", nx), ("ny", ny), ("nt", nt)):
        if n < 8:
            raise DomainError(f"{name} must be at least 8, got {n}")
        if n % 2 != 0:
            raise DomainError(f"{name} must be even for the spectral pipeline, got {n}")
    if beta < 0:
        raise DomainError(f"beta must be non-negative, got {beta!r}")

    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rng = np.random.default_rng(ss)
    noise = rng.standard_normal((nx, ny, nt))
    spectrum = np.fft.fftn(noise)

    fx = np.fft.fftfreq(nx)[:, None, None]
    fy = np.fft.fftfreq(ny)[None, :, None]
    ft = np.fft.fftfreq(nt)[None, None, :]
    radius = np.sqrt(fx**2 + fy**2 + ft**2)
    with np.errstate(divide="ignore"):
        shaping = np.where(radius > 0, radius ** (-beta / 2.0), 0.0)

    shaped = np.fft.ifftn(spectrum * shaping).real
    lo, hi = shaped.min(), shaped.max()
    data = (shaped - lo) / (hi - lo)
    seed_int = int(ss.generate_state(1, np.uint64)[0])
    return ImageStack(data=data, label=LABEL_ABSENT, seed=seed_int)


def _lesion_profile(stack: ImageStack, lesion: LesionSpec) -> np.ndarray:
    nx, ny, nt = stack.data.shape
    if lesion.center is None:
        cx, cy, ct = (nx - 1) / 2.0, (ny - 1) / 2.0, (nt - 1) / 2.0
    else:
        cx, cy, ct = lesion.center
    if not (0 <= cx < nx and 0 <= cy < ny and 0 <= ct < nt):
        raise DomainError(f"lesion center {(cx, cy, ct)} outside volume {(nx, ny, nt)}")
    gx = np.exp(-((np.arange(nx) - cx) ** 2) / (2.0 * lesion.sigma_xy**2))
    gy = np.exp(-((np.arange(ny) - cy) ** 2) / (2.0 * lesion.sigma_xy**2))
    gt = np.exp(-((np.arange(nt) - ct) ** 2) / (2.0 * lesion.sigma_t**2))
    return lesion.amplitude * gx[:, None, None] * gy[None, :, None] * gt[None, None, :]


def insert_lesion(stack: ImageStack, lesion: LesionSpec) -> ImageStack:
    """Return a signal-present copy of the stack with the Gaussian bump added."""
    bump = _lesion_profile(stack, lesion)
    return ImageStack(data=stack.data + bump, label=LABEL_PRESENT, seed=stack.seed)


def normalize_to_display(stack: ImageStack, vc: ViewingConditions) -> ImageStack:
    """Linearly map the stack so its min is l_min and its max l_max exactly."""
    lo = stack.data.min()
    hi = stack.data.max()
    if hi == lo:
        raise DegenerateStackError("cannot normalize a constant stack")
    span = vc.l_max - vc.l_min
    data = vc.l_min + (stack.data - lo) * (span / (hi - lo))
    return replace(stack, data=data)


def write_stack(stack: ImageStack, path) -> None:
    """Write a stack in the fixed binary layout (little-endian, x fastest)."""
    label_code = 1 if stack.signal_present else 0
    header = _HEADER.pack(stack.nx, stack.ny, stack.nt, _DTYPE_F64, label_code, 0)
    payload = stack.data.astype("<f8").ravel(order="F").tobytes()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(header)
        fh.write(_SEED.pack(stack.seed & 0xFFFFFFFFFFFFFFFF))
        fh.write(payload)


def read_stack(path) -> ImageStack:
    """Read a stack written by :func:`write_stack`; strict on every header field."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < len(_MAGIC) + _HEADER.size + _SEED.size:
        raise MalformedHeaderError(f"{path}: file shorter than header")
    if raw[: len(_MAGIC)] != _MAGIC:
        raise MalformedHeaderError(f"{path}: bad magic bytes")
    offset = len(_MAGIC)
    nx, ny, nt, dtype_tag, label_code, reserved = _HEADER.unpack_from(raw, offset)
    offset += _HEADER.size
    (seed,) = _SEED.unpack_from(raw, offset)
    offset += _SEED.size
    if dtype_tag != _DTYPE_F64:
        raise MalformedHeaderError(f"{path}: unknown dtype tag {dtype_tag}")
    if label_code not in (0, 1) or reserved != 0:
        raise MalformedHeaderError(f"{path}: invalid label/reserved fields")
    if min(nx, ny, nt) == 0:
        raise MalformedHeaderError(f"{path}: zero dimension in header")
    if nx != ny:
        raise DimensionMismatchError(f"{path}: slices must be square, got {nx}x{ny}")
    expected = nx * ny * nt * 8
    payload = raw[offset:]
    if len(payload) != expected:
        raise TruncatedPayloadError(
            f"{path}: payload is {len(payload)} bytes, header promises {expected}"
        )
    data = np.frombuffer(payload, dtype="<f8").reshape((nx, ny, nt), order="F")
    label = LABEL_PRESENT if label_code else LABEL_ABSENT
    return ImageStack(data=data.copy(), label=label, seed=seed)


def generate_corpus(
    n_pairs: int,
    nx: int = 64,
    ny: int = 64,
    nt: int = 32,
    beta: float = 3.0,
    lesion: LesionSpec | None = None,
    master_seed: int = 0,
) -> list[ImageStack]:
    """Generate n_pairs (absent, present) stack pairs from one master seed.

    Per-pair RNG streams are spawned from SeedSequence(master_seed), so the
    corpus is reproducible end-to-end and pairs are independent of ordering.
    Each present stack shares its background with its absent twin.
    """
    if n_pairs < 1:
        raise DomainError(f"n_pairs must be at least 1, got {n_pairs}")
    if lesion is None:
        lesion = LesionSpec(amplitude=0.5)
    children = np.random.SeedSequence(master_seed).spawn(n_pairs)
    stacks = []
    for child in children:
        absent = generate_background(nx, ny, nt, beta, child)
        stacks.append(absent)
        stacks.append(insert_lesion(absent, lesion))
    return stacks


def write_manifest(path, stack_paths, labels, master_seed: int) -> None:
    """Write a JSON batch manifest listing files, labels, and the master seed."""
    if len(stack_paths) != len(labels):
        raise DimensionMismatchError("stack_paths and labels differ in length")
    manifest = {
        "version": 1,
        "master_seed": int(master_seed),
        "stacks": [
            {"path": str(p), "label": lab} for p, lab in zip(stack_paths, labels)
        ],
    }
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def read_manifest(path) -> dict:
    with open(path) as fh:
        manifest = json.load(fh)
    if manifest.get("version") != 1:
        raise MalformedHeaderError(f"{path}: unsupported manifest version")
    return manifest
