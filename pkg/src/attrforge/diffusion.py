"""Noise schedules, the forward process, and reverse posterior sampling.

The forward process draws x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps with
abar_t the cumulative product of (1 - beta_s). Reverse steps sample
N(mu_theta, Sigma_theta) where mu_theta is the standard posterior mean
computed from a predicted noise, and Sigma_theta is a fixed per-step
variance policy (beta_t by default, the tilde-beta posterior variance as an
option). Two closed-form noise predictors are provided so the full sampler
can be verified without any trained network: the exact posterior for an
empirical (finite atom) data distribution and for an isotropic Gaussian.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyDataset, StepOutOfRange, ValidationError
from .grid import ImageGrid, RngStream


@dataclass(frozen=True)
class NoiseSchedule:
    """Diffusion rate sequence beta_1..beta_T with derived abar_t.

    alpha_bar has length T + 1 with alpha_bar[0] = 1, so alpha_bar[t]
    indexes abar_t directly for t in 0..T.
    """

    beta: np.ndarray
    alpha_bar: np.ndarray = field(init=False)

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64)
        if beta.ndim != 1 or beta.size < 1:
            raise ValidationError("beta must be a nonempty 1-D sequence")
        if np.any(beta <= 0.0) or np.any(beta >= 1.0):
            raise ValidationError("every beta_t must lie in (0, 1)")
        object.__setattr__(self, "beta", beta)
        abar = np.concatenate([[1.0], np.cumprod(1.0 - beta)])
        if np.any(np.diff(abar) >= 0.0):
            raise ValidationError("alpha_bar must be strictly decreasing")
        object.__setattr__(self, "alpha_bar", abar)

    @classmethod
    def linear(cls, steps: int = 100, beta_start: float = 1e-4, beta_end: float = 0.02):
        return cls(np.linspace(beta_start, beta_end, steps))

    @property
    def steps(self) -> int:
        return int(self.beta.size)

    def check_step(self, t: int, allow_zero: bool = False) -> int:
        lo = 0 if allow_zero else 1
        if not (lo <= t <= self.steps):
            raise StepOutOfRange(f"step {t} outside [{lo}, {self.steps}]")
        return int(t)

    def beta_at(self, t: int) -> float:
        self.check_step(t)
        return float(self.beta[t - 1])

    def alpha_at(self, t: int) -> float:
        return 1.0 - self.beta_at(t)

    def alpha_bar_at(self, t: int) -> float:
        self.check_step(t, allow_zero=True)
        return float(self.alpha_bar[t])

    def posterior_variance_at(self, t: int) -> float:
        """tilde-beta_t = (1 - abar_{t-1}) / (1 - abar_t) * beta_t."""
        self.check_step(t)
        return float(
            (1.0 - self.alpha_bar[t - 1]) / (1.0 - self.alpha_bar[t]) * self.beta[t - 1]
        )

    def to_json(self) -> str:
        return json.dumps({"T": self.steps, "beta": self.beta.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "NoiseSchedule":
        obj = json.loads(text)
        beta = np.asarray(obj["beta"], dtype=np.float64)
        if int(obj["T"]) != beta.size:
            raise ValidationError("schedule JSON: T does not match len(beta)")
        return cls(beta)


@dataclass(frozen=True)
class DenoiserOutput:
    """Predicted noise plus the per-step sampling variance."""

    eps_pred: ImageGrid
    variance: float


def step_variance(sched: NoiseSchedule, t: int, policy: str = "fixed") -> float:
    """Sigma_theta policy: 0 at the terminal step, else beta_t or tilde-beta_t."""
    sched.check_step(t)
    if t == 1:
        return 0.0
    if policy == "fixed":
        return sched.beta_at(t)
    if policy == "posterior":
        return sched.posterior_variance_at(t)
    raise ValidationError(f"unknown variance policy {policy!r}")


def forward_sample(x0: ImageGrid, t: int, eps: ImageGrid, sched: NoiseSchedule) -> ImageGrid:
    """x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps; exact, no clamping."""
    sched.check_step(t, allow_zero=True)
    if eps.shape != x0.shape:
        raise ValidationError(f"eps shape {eps.shape} != x0 shape {x0.shape}")
    abar = sched.alpha_bar_at(t)
    return ImageGrid(np.sqrt(abar) * x0.data + np.sqrt(1.0 - abar) * eps.data)


def estimate_x0(x_t: ImageGrid, eps_pred: ImageGrid, t: int, sched: NoiseSchedule) -> ImageGrid:
    """Invert the forward map: x0_hat = x_t/sqrt(abar_t) - sqrt(1-abar_t) eps/sqrt(abar_t)."""
    sched.check_step(t)
    abar = sched.alpha_bar_at(t)
    root = np.sqrt(abar)
    return ImageGrid(x_t.data / root - np.sqrt(1.0 - abar) * eps_pred.data / root)


def posterior_mean(x_t: ImageGrid, eps_pred: ImageGrid, t: int, sched: NoiseSchedule) -> ImageGrid:
    """mu = (x_t - beta_t/sqrt(1-abar_t) eps) / sqrt(alpha_t) with alpha_t = 1 - beta_t."""
    sched.check_step(t)
    beta = sched.beta_at(t)
    abar = sched.alpha_bar_at(t)
    mu = (x_t.data - beta / np.sqrt(1.0 - abar) * eps_pred.data) / np.sqrt(1.0 - beta)
    return ImageGrid(mu)


def sample_from_mean(mean: ImageGrid, variance: float, t: int, rng: RngStream) -> ImageGrid:
    """Gaussian draw around the step mean; deterministic at the final step."""
    if t == 1 or variance == 0.0:
        return mean
    return ImageGrid(mean.data + np.sqrt(variance) * rng.normal(mean.shape))


def reverse_step(x_t: ImageGrid, denoiser, t: int, sched: NoiseSchedule, rng: RngStream) -> ImageGrid:
    """One unguided reverse step: sample N(mu_theta, Sigma_theta)."""
    out = denoiser(x_t, t)
    mu = posterior_mean(x_t, out.eps_pred, t, sched)
    return sample_from_mean(mu, out.variance, t, rng)


def sample_chain(x_t0: ImageGrid, denoiser, t0: int, sched: NoiseSchedule, rng: RngStream) -> ImageGrid:
    """Run the reverse chain from step t0 down to 1."""
    sched.check_step(t0)
    x = x_t0
    for t in range(t0, 0, -1):
        x = reverse_step(x, denoiser, t, sched, rng)
    return x


def eps_empirical(
    x_t: ImageGrid,
    t: int,
    dataset: list[ImageGrid],
    sched: NoiseSchedule,
    variance_policy: str = "fixed",
) -> DenoiserOutput:
    """Exact optimal noise prediction for a uniform empirical data distribution.

    E[x0 | x_t] is the softmax-weighted average of the dataset atoms with
    log-weights -||x_t - sqrt(abar_t) d_i||^2 / (2 (1 - abar_t)), computed
    max-subtracted for stability; eps* follows from the forward-map inversion.
    """
    if not dataset:
        raise EmptyDataset("empirical denoiser needs at least one grid")
    sched.check_step(t)
    abar = sched.alpha_bar_at(t)
    root = np.sqrt(abar)
    flat = x_t.data.ravel()
    atoms = np.stack([d.data.ravel() for d in dataset])
    if atoms.shape[1] != flat.size:
        raise ValidationError("dataset grids must match the input shape")
    sq = np.sum((flat[None, :] - root * atoms) ** 2, axis=1)
    logw = -sq / (2.0 * (1.0 - abar))
    logw -= logw.max()
    w = np.exp(logw)
    w /= w.sum()
    x0_post = (w[:, None] * atoms).sum(axis=0).reshape(x_t.shape)
    eps = (x_t.data - root * x0_post) / np.sqrt(1.0 - abar)
    return DenoiserOutput(ImageGrid(eps), step_variance(sched, t, variance_policy))


def eps_gaussian(
    x_t: ImageGrid,
    t: int,
    mean: ImageGrid,
    var: float,
    sched: NoiseSchedule,
    variance_policy: str = "fixed",
) -> DenoiserOutput:
    """Exact optimal noise prediction for x0 ~ N(mean, var I).

    The Gaussian posterior gives
    E[x0 | x_t] = (var sqrt(abar_t) x_t + (1 - abar_t) mean) / (abar_t var + 1 - abar_t).
    """
    if var <= 0.0:
        raise ValidationError("gaussian denoiser needs var > 0")
    sched.check_step(t)
    abar = sched.alpha_bar_at(t)
    root = np.sqrt(abar)
    denom = abar * var + (1.0 - abar)
    x0_post = (var * root * x_t.data + (1.0 - abar) * mean.data) / denom
    eps = (x_t.data - root * x0_post) / np.sqrt(1.0 - abar)
    return DenoiserOutput(ImageGrid(eps), step_variance(sched, t, variance_policy))


class EmpiricalDenoiser:
    """Denoiser interface over :func:`eps_empirical`; immutable and shareable."""

    def __init__(self, dataset: list[ImageGrid], sched: NoiseSchedule, variance_policy: str = "fixed"):
        if not dataset:
            raise EmptyDataset("empirical denoiser needs at least one grid")
        self.dataset = list(dataset)
        self.sched = sched
        self.variance_policy = variance_policy

    def __call__(self, x_t: ImageGrid, t: int) -> DenoiserOutput:
        return eps_empirical(x_t, t, self.dataset, self.sched, self.variance_policy)


class GaussianDenoiser:
    """Denoiser interface over :func:`eps_gaussian`."""

    def __init__(self, mean: ImageGrid, var: float, sched: NoiseSchedule, variance_policy: str = "fixed"):
        if var <= 0.0:
            raise ValidationError("gaussian denoiser needs var > 0")
        self.mean = mean
        self.var = float(var)
        self.sched = sched
        self.variance_policy = variance_policy

    def __call__(self, x_t: ImageGrid, t: int) -> DenoiserOutput:
        mean = self.mean
        if mean.shape != x_t.shape:
            if mean.height == 1 and mean.width == 1 and mean.channels == 1:
                mean = ImageGrid(np.full(x_t.shape, mean.data[0, 0, 0]))
            else:
                raise ValidationError("gaussian denoiser mean shape mismatch")
        return eps_gaussian(x_t, t, mean, self.var, self.sched, self.variance_policy)
