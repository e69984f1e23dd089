"""Guidance objectives and the guided reverse step.

The spectral complexity objective scores an image by the sum of its DFT
amplitudes; its analytic gradient is the real inverse DFT of the smoothed
phase field X / sqrt(|X|^2 + delta). The adversarial objective scores the
cross entropy of a classifier against the true label. Guided sampling
shifts the reverse-step mean by lambda * Sigma_theta * grad evaluated at
the clean-image estimate x0_hat, and background editing re-noises the
object region and blends it back at every step so only the background is
steered.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffusion import (
    NoiseSchedule,
    estimate_x0,
    forward_sample,
    posterior_mean,
    sample_from_mean,
)
from .errors import EmptyMask, InvalidLabel, ValidationError
from .grid import ImageGrid, MaskGrid, RngStream, fft2

AMPLITUDE_DELTA = 1e-8


@dataclass(frozen=True)
class GuidanceConfig:
    """Guidance scale (signed), re-noising depth, and frequency band."""

    lam: float
    t0: int
    band: str = "all"
    cutoff: float = 0.5

    def __post_init__(self):
        if self.t0 < 1:
            raise ValidationError("t0 must be >= 1")
        if self.band not in ("all", "high"):
            raise ValidationError(f"unknown frequency band {self.band!r}")
        if self.band == "high" and not (0.0 < self.cutoff <= 1.0):
            raise ValidationError("high-pass cutoff must lie in (0, 1]")


def _band_mask(height: int, width: int, band: str, cutoff: float) -> np.ndarray | None:
    """High-pass selector over normalized frequency radius (1 = Nyquist)."""
    if band == "all":
        return None
    fy = np.fft.fftfreq(height)[:, None]
    fx = np.fft.fftfreq(width)[None, :]
    rho = np.sqrt(fy**2 + fx**2) / 0.5
    return rho > cutoff


def complexity_value(image: ImageGrid, band: str = "all", cutoff: float = 0.5) -> float:
    """Sum of spectral amplitudes over all channels (optionally high-pass only)."""
    amp = fft2(image).amplitude()
    mask = _band_mask(image.height, image.width, band, cutoff)
    if mask is not None:
        amp = amp * mask[:, :, None]
    return float(amp.sum())


def complexity_gradient(image: ImageGrid, band: str = "all", cutoff: float = 0.5) -> ImageGrid:
    """Analytic gradient of the amplitude sum w.r.t. pixel intensities."""
    spec = fft2(image).data
    phase = spec / np.sqrt(np.abs(spec) ** 2 + AMPLITUDE_DELTA)
    mask = _band_mask(image.height, image.width, band, cutoff)
    if mask is not None:
        phase = phase * mask[:, :, None]
    n = image.height * image.width
    grad = n * np.fft.ifft2(phase, axes=(0, 1)).real
    return ImageGrid(grad)


class SpectralComplexity:
    """Guidance objective: background texture complexity from the spectrum."""

    def __init__(self, band: str = "all", cutoff: float = 0.5):
        if band not in ("all", "high"):
            raise ValidationError(f"unknown frequency band {band!r}")
        self.band = band
        self.cutoff = float(cutoff)

    def value(self, image: ImageGrid) -> float:
        return complexity_value(image, self.band, self.cutoff)

    def gradient(self, image: ImageGrid) -> ImageGrid:
        return complexity_gradient(image, self.band, self.cutoff)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    return shifted - np.log(np.exp(shifted).sum())


def adversarial_value(image: ImageGrid, classifier, label: int) -> float:
    """Cross entropy of the classifier's softmax output against `label`."""
    logits = classifier.logits(image)
    if not (0 <= label < logits.size):
        raise InvalidLabel(f"label {label} outside [0, {logits.size})")
    return float(-_log_softmax(logits)[label])


def adversarial_gradient(image: ImageGrid, classifier, label: int) -> ImageGrid:
    """Image-space gradient of the cross entropy (softmax minus one-hot pullback)."""
    logits = classifier.logits(image)
    if not (0 <= label < logits.size):
        raise InvalidLabel(f"label {label} outside [0, {logits.size})")
    p = np.exp(_log_softmax(logits))
    grad_logits = p.copy()
    grad_logits[label] -= 1.0
    return classifier.input_gradient(image, grad_logits)


class AdversarialObjective:
    """Guidance objective: push the classifier away from the true label."""

    def __init__(self, classifier, label: int):
        self.classifier = classifier
        self.label = int(label)

    def value(self, image: ImageGrid) -> float:
        return adversarial_value(image, self.classifier, self.label)

    def gradient(self, image: ImageGrid) -> ImageGrid:
        return adversarial_gradient(image, self.classifier, self.label)


def guided_mean(
    x_t: ImageGrid,
    denoiser,
    objective,
    lam: float,
    t: int,
    sched: NoiseSchedule,
):
    """Reverse-step mean with the guidance shift lambda * Sigma * grad(x0_hat)."""
    out = denoiser(x_t, t)
    mu = posterior_mean(x_t, out.eps_pred, t, sched)
    if lam != 0.0 and objective is not None and out.variance != 0.0:
        x0_hat = estimate_x0(x_t, out.eps_pred, t, sched)
        grad = objective.gradient(x0_hat)
        mu = ImageGrid(mu.data + lam * out.variance * grad.data)
    return mu, out.variance


def guided_reverse_step(
    x_t: ImageGrid,
    denoiser,
    objective,
    config: GuidanceConfig,
    t: int,
    sched: NoiseSchedule,
    rng: RngStream,
) -> ImageGrid:
    """Sample N(mu_theta + lambda Sigma grad, Sigma); lambda > 0 ascends the objective."""
    mu, variance = guided_mean(x_t, denoiser, objective, config.lam, t, sched)
    return sample_from_mean(mu, variance, t, rng)


def guided_chain(
    x_t0: ImageGrid,
    denoiser,
    objective,
    config: GuidanceConfig,
    sched: NoiseSchedule,
    rng: RngStream,
) -> ImageGrid:
    """Run the guided reverse chain from config.t0 down to 1 (no blending)."""
    sched.check_step(config.t0)
    x = x_t0
    for t in range(config.t0, 0, -1):
        x = guided_reverse_step(x, denoiser, objective, config, t, sched, rng)
    return x


def blend_latents(mask: MaskGrid, obj: ImageGrid, bg: ImageGrid) -> ImageGrid:
    """x = M * obj + (1 - M) * bg, mask broadcast over channels."""
    m = mask.data[:, :, None]
    return ImageGrid(m * obj.data + (1.0 - m) * bg.data)


def background_edit(
    image: ImageGrid,
    mask: MaskGrid,
    denoiser,
    objective,
    config: GuidanceConfig,
    rng: RngStream,
    hook=None,
) -> ImageGrid:
    """Steer the background while re-noising and re-blending the object.

    Noise the source to config.t0, then for t = t0..1: take a guided reverse
    step, draw the object image at noise level t, and blend the two with the
    mask. The optional hook(t, noised_object, blended) observes every step.
    """
    if mask.object_count() == 0:
        raise EmptyMask("background edit needs a nonempty object mask")
    sched = denoiser.sched
    sched.check_step(config.t0)
    x = forward_sample(image, config.t0, rng.normal_like(image), sched)
    for t in range(config.t0, 0, -1):
        x_bg = guided_reverse_step(x, denoiser, objective, config, t, sched, rng)
        x_obj = forward_sample(image, t, rng.normal_like(image), sched)
        x = blend_latents(mask, x_obj, x_bg)
        if hook is not None:
            hook(t, x_obj, x)
    return x
