"""Bottom-up saliency estimation.

The built-in provider is the spectral residual method: the difference between
the log-amplitude spectrum and its local average marks spectrally surprising
content; reconstructing with the original phase localizes it. Saliency for a
job is the min-max scaled mean of per-scale maps, which softens single-scale
failure cases. Precomputed per-scale maps can replace the provider so an
external model's output slots into the same pipeline.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatchError
from .raster import GrayMask, RasterImage, gaussian_blur, load_image, luminance, min_max_scale, resize_bilinear

MODE_SPECTRAL_RESIDUAL = "spectral-residual"
MODE_PRECOMPUTED = "precomputed"

_MIN_SIDE = 8
_RECON_BLUR_KERNEL = 9


@dataclass(frozen=True)
class SaliencyProviderConfig:
    mode: str = MODE_SPECTRAL_RESIDUAL
    scales: tuple[int, ...] = (256, 512)
    precomputed_dir: str | None = None

    def __post_init__(self) -> None:
        if self.mode not in (MODE_SPECTRAL_RESIDUAL, MODE_PRECOMPUTED):
            raise ValueError(f"unknown saliency mode {self.mode!r}")
        if not self.scales:
            raise ValueError("scales must be non-empty")
        if any(s < 32 for s in self.scales):
            raise ValueError(f"scales must all be >= 32, got {self.scales}")
        if self.mode == MODE_PRECOMPUTED and not self.precomputed_dir:
            raise ValueError("precomputed mode requires precomputed_dir")
        object.__setattr__(self, "scales", tuple(int(s) for s in self.scales))

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "scales": list(self.scales),
            "precomputedDir": self.precomputed_dir,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SaliencyProviderConfig":
        return cls(
            mode=obj.get("mode", MODE_SPECTRAL_RESIDUAL),
            scales=tuple(obj.get("scales", (256, 512))),
            precomputed_dir=obj.get("precomputedDir"),
        )


def spectral_residual(image: RasterImage) -> GrayMask:
    """Single-scale spectral residual saliency of an image.

    Pipeline: grayscale, 2-d FFT, log-amplitude minus its 3x3 box average,
    inverse FFT with the original phase, squared magnitude, Gaussian smoothing,
    min-max scaling. A constant image has a bare DC spectrum and degenerates to
    the all-zero mask.
    """
    if image.width < _MIN_SIDE or image.height < _MIN_SIDE:
        raise ValueError(
            f"image must be at least {_MIN_SIDE}x{_MIN_SIDE}, got {image.width}x{image.height}"
        )
    gray = luminance(image).values
    spectrum = np.fft.fft2(gray)
    amplitude = np.abs(spectrum)
    phase = np.angle(spectrum)
    # floor the log at a fraction of the mean amplitude: synthetic images have
    # exact spectral zeros whose unbounded logs would leak boost into neighbors
    floor = 1e-3 * float(amplitude.mean()) + 1e-30
    log_amp = np.log(np.maximum(amplitude, floor))
    # the spectrum is periodic, so the box average wraps around
    residual = log_amp - ndimage.uniform_filter(log_amp, size=3, mode="wrap")
    # bins with zero amplitude carry no signal and must stay empty
    residual_amp = np.where(amplitude > 0.0, np.exp(residual), 0.0)
    recon = np.fft.ifft2(residual_amp * np.exp(1j * phase))
    energy = np.abs(recon) ** 2
    peak = energy.max()
    if peak > 0.0:
        energy = energy / peak
    smoothed = gaussian_blur(GrayMask(np.clip(energy, 0.0, 1.0)), _RECON_BLUR_KERNEL)
    return min_max_scale(smoothed)


def load_precomputed_saliency(directory: str | Path, image_id: str, scale: int) -> GrayMask:
    """Load an operator-supplied per-scale map `<dir>/<image_id>.<scale>.pgm`."""
    path = Path(directory) / f"{image_id}.{scale}.pgm"
    if not path.exists():
        raise FileNotFoundError(f"no precomputed saliency map at {path}")
    img = load_image(path)
    if (img.width, img.height) != (scale, scale):
        raise DimensionMismatchError(
            f"{path} is {img.width}x{img.height}, expected {scale}x{scale}"
        )
    return GrayMask(img.pixels[:, :, 0].astype(np.float64) / 255.0)


def multiscale_saliency(
    image: RasterImage, config: SaliencyProviderConfig, image_id: str | None = None
) -> GrayMask:
    """Mean of per-scale saliency maps resized back to image dims, min-max scaled."""
    maps = []
    for scale in config.scales:
        if config.mode == MODE_PRECOMPUTED:
            if image_id is None:
                raise ValueError("precomputed mode requires an image_id")
            per_scale = load_precomputed_saliency(config.precomputed_dir, image_id, scale)
        else:
            per_scale = spectral_residual(resize_bilinear(image, scale, scale))
        maps.append(resize_bilinear(per_scale, image.width, image.height).values)
    merged = np.mean(maps, axis=0)
    return min_max_scale(GrayMask(np.clip(merged, 0.0, 1.0)))
