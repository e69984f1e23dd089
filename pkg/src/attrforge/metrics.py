"""Texture and distribution metrics.

GLCM statistics quantify texture complexity; Energy and GradNorm score how
in-distribution an input looks to a classifier (higher = more ID for both);
the Frechet distance compares Gaussian summaries of feature sets with the
usual closed form over a pluggable, model-free feature map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadOffset, DimensionMismatch, NotPSD, ValidationError
from .grid import ImageGrid, fft2


@dataclass(frozen=True)
class GlcmMatrix:
    """Normalized gray-level co-occurrence counts at one pixel offset."""

    levels: int
    offset: tuple[int, int]
    counts: np.ndarray
    symmetric: bool

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.float64)
        if c.shape != (self.levels, self.levels):
            raise ValidationError(f"counts must be {self.levels}x{self.levels}")
        if np.any(c < 0.0) or abs(c.sum() - 1.0) > 1e-9:
            raise ValidationError("counts must be nonnegative and sum to 1")
        object.__setattr__(self, "counts", c)


@dataclass(frozen=True)
class FeatureStats:
    """Gaussian summary (mean, covariance) of a feature set."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mean, dtype=np.float64).ravel()
        cov = np.asarray(self.covariance, dtype=np.float64)
        if cov.shape != (mu.size, mu.size):
            raise DimensionMismatch(f"covariance {cov.shape} does not match mean dim {mu.size}")
        if not np.allclose(cov, cov.T, atol=1e-9):
            raise NotPSD("covariance is not symmetric")
        object.__setattr__(self, "mean", mu)
        object.__setattr__(self, "covariance", (cov + cov.T) / 2.0)

    @classmethod
    def from_features(cls, features) -> "FeatureStats":
        arr = np.asarray(features, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ValidationError("need a nonempty (N, D) feature array")
        mu = arr.mean(axis=0)
        if arr.shape[0] == 1:
            cov = np.zeros((arr.shape[1], arr.shape[1]))
        else:
            cov = np.cov(arr, rowvar=False, ddof=1)
            cov = np.atleast_2d(cov)
        return cls(mu, cov)


@dataclass(frozen=True)
class OodScore:
    """In-distribution score; higher means closer to the reference data."""

    method: str
    value: float


def glcm(image: ImageGrid, levels: int = 8, offset: tuple[int, int] = (0, 1), symmetric: bool = True) -> GlcmMatrix:
    """Co-occurrence matrix of intensities quantized to `levels` bins over [-1, 1]."""
    if levels < 2:
        raise ValidationError("need at least 2 gray levels")
    dy, dx = int(offset[0]), int(offset[1])
    if dy == 0 and dx == 0:
        raise BadOffset("offset must be nonzero")
    gray = np.clip(image.gray(), -1.0, 1.0)
    q = np.minimum((gray + 1.0) / 2.0 * levels, levels - 1).astype(np.intp)

    h, w = q.shape
    if abs(dy) >= h or abs(dx) >= w:
        raise BadOffset(f"offset {offset} larger than the image")
    ys = slice(max(0, -dy), h - max(0, dy))
    xs = slice(max(0, -dx), w - max(0, dx))
    a = q[ys, xs]
    b = q[max(0, dy) : h - max(0, -dy), max(0, dx) : w - max(0, -dx)]
    idx = a.ravel() * levels + b.ravel()
    counts = np.bincount(idx, minlength=levels * levels).astype(np.float64)
    counts = counts.reshape(levels, levels)
    if symmetric:
        counts = counts + counts.T
    total = counts.sum()
    return GlcmMatrix(levels, (dy, dx), counts / total, symmetric)


def _level_deltas(m: GlcmMatrix) -> np.ndarray:
    i = np.arange(m.levels)
    return i[:, None] - i[None, :]


def glcm_contrast(m: GlcmMatrix) -> float:
    """sum P(i, j) (i - j)^2."""
    return float((m.counts * _level_deltas(m) ** 2).sum())


def glcm_dissimilarity(m: GlcmMatrix) -> float:
    """sum P(i, j) |i - j|."""
    return float((m.counts * np.abs(_level_deltas(m))).sum())


def glcm_texture(image: ImageGrid, levels: int = 8, offsets=((0, 1), (1, 0)), symmetric: bool = True):
    """(contrast, dissimilarity) averaged over the default offsets."""
    cs, ds = [], []
    for off in offsets:
        m = glcm(image, levels, off, symmetric)
        cs.append(glcm_contrast(m))
        ds.append(glcm_dissimilarity(m))
    return float(np.mean(cs)), float(np.mean(ds))


def energy_score(logits, temperature: float = 1.0) -> OodScore:
    """Negative free energy T * logsumexp(logits / T), max-subtracted."""
    if temperature <= 0.0:
        raise ValidationError("temperature must be positive")
    z = np.asarray(logits, dtype=np.float64).ravel()
    if z.size == 0 or not np.all(np.isfinite(z)):
        raise ValidationError("logits must be nonempty and finite")
    zt = z / temperature
    m = zt.max()
    value = temperature * (m + np.log(np.exp(zt - m).sum()))
    return OodScore("energy", float(value))


def gradnorm_score(classifier, image: ImageGrid) -> OodScore:
    """L1 norm of d CE(softmax, uniform) / d(final-layer weights and bias).

    With p the softmax output, phi the penultimate features and u the uniform
    distribution, the gradient is (p - u) phi^T for the weights and (p - u)
    for the bias, so the score is ||p - u||_1 (||phi||_1 + 1).
    """
    phi = classifier.features(image)
    logits = classifier.logits_from_features(phi)
    z = logits - logits.max()
    p = np.exp(z)
    p /= p.sum()
    g = p - 1.0 / p.size
    value = np.abs(g).sum() * (np.abs(phi).sum() + 1.0)
    return OodScore("gradnorm", float(value))


def frechet_distance(a: FeatureStats, b: FeatureStats) -> float:
    """||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}).

    The square root is taken by eigendecomposition of the symmetrized
    product S_a^{1/2} S_b S_a^{1/2}; eigenvalues below -1e-6 raise NotPSD,
    small negatives are clipped to zero.
    """
    if a.mean.size != b.mean.size:
        raise DimensionMismatch(f"feature dims differ: {a.mean.size} vs {b.mean.size}")

    def _sqrt_psd(cov):
        vals, vecs = np.linalg.eigh(cov)
        if vals.min() < -1e-6:
            raise NotPSD(f"covariance eigenvalue {vals.min():g} below clipping floor")
        vals = np.clip(vals, 0.0, None)
        return (vecs * np.sqrt(vals)) @ vecs.T

    ra = _sqrt_psd(a.covariance)
    inner = ra @ b.covariance @ ra
    inner = (inner + inner.T) / 2.0
    vals = np.linalg.eigvalsh(inner)
    if vals.min() < -1e-6:
        raise NotPSD(f"product eigenvalue {vals.min():g} below clipping floor")
    tr_sqrt = np.sqrt(np.clip(vals, 0.0, None)).sum()

    diff = a.mean - b.mean
    d = float(diff @ diff + np.trace(a.covariance) + np.trace(b.covariance) - 2.0 * tr_sqrt)
    return max(d, 0.0) if d > -1e-6 else d


def score_overlap(ref, test, bins: int = 20) -> float:
    """Histogram intersection of two score samples over shared bin edges."""
    r = np.asarray(ref, dtype=np.float64).ravel()
    t = np.asarray(test, dtype=np.float64).ravel()
    if r.size == 0 or t.size == 0:
        raise ValidationError("both score lists must be nonempty")
    lo = min(r.min(), t.min())
    hi = max(r.max(), t.max())
    if hi == lo:
        return 1.0
    edges = np.linspace(lo, hi, bins + 1)
    hr, _ = np.histogram(r, bins=edges)
    ht, _ = np.histogram(t, bins=edges)
    return float(np.minimum(hr / r.size, ht / t.size).sum())


def band_edges(bands: int) -> np.ndarray:
    """Normalized-radius band boundaries covering [0, sqrt(2)] (1 = Nyquist)."""
    return np.linspace(0.0, np.sqrt(2.0) * (1.0 + 1e-9), bands + 1)


def band_masks(height: int, width: int, bands: int) -> np.ndarray:
    """Boolean (bands, H, W) selectors over the DFT frequency plane."""
    fy = np.fft.fftfreq(height)[:, None]
    fx = np.fft.fftfreq(width)[None, :]
    rho = np.sqrt(fy**2 + fx**2) / 0.5
    edges = band_edges(bands)
    out = np.zeros((bands, height, width), dtype=bool)
    for b in range(bands):
        out[b] = (rho >= edges[b]) & (rho < edges[b + 1])
    return out


def band_energies(channel: np.ndarray, bands: int) -> np.ndarray:
    """Per-band spectral energy sum |X|^2 / (H W)^2 of one 2-D channel."""
    h, w = channel.shape
    power = np.abs(np.fft.fft2(channel)) ** 2 / float(h * w) ** 2
    masks = band_masks(h, w, bands)
    return np.array([power[m].sum() for m in masks])


def feature_vector(image: ImageGrid, bands: int = 4) -> np.ndarray:
    """Default Frechet feature map: per-channel pixel mean and band energies."""
    parts = []
    for c in range(image.channels):
        chan = image.data[:, :, c]
        parts.append([chan.mean()])
        parts.append(band_energies(chan, bands))
    return np.concatenate(parts)


def feature_stats(images, bands: int = 4) -> FeatureStats:
    """Gaussian summary of the default feature map over an image set."""
    feats = np.stack([feature_vector(img, bands) for img in images])
    return FeatureStats.from_features(feats)
