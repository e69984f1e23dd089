"""Run configuration: a TOML document with sections, strictly validated.

Sections mirror the pipeline: [schedule], [denoiser], [guidance], [suite],
[run]. Unknown sections or keys are rejected so a typo cannot silently fall
back to a default. Command-line flags override file values.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import tomli

from .diffusion import EmpiricalDenoiser, GaussianDenoiser, NoiseSchedule
from .errors import IoError, ValidationError
from .grid import ImageGrid
from .gridio import read_grid


@dataclass
class RunConfig:
    # schedule
    steps: int = 100
    beta_start: float = 1e-4
    beta_end: float = 0.02
    # denoiser
    denoiser: str = "empirical"
    dataset_dir: str = ""
    background_dataset_dir: str = ""
    gaussian_mean: float = 0.0
    gaussian_var: float = 1.0
    variance_policy: str = "fixed"
    # guidance
    lam: float = 20.0
    band: str = "all"
    cutoff: float = 0.5
    t0_background: int = 0
    t0_object: int = 0
    # suite
    seed: int = 0
    rd_on_small: bool = False
    # run
    threads: int = 1

    def __post_init__(self):
        if self.steps < 1:
            raise ValidationError("schedule.steps must be >= 1")
        if not (0.0 < self.beta_start < 1.0 and 0.0 < self.beta_end < 1.0):
            raise ValidationError("schedule betas must lie in (0, 1)")
        if self.denoiser not in ("empirical", "gaussian"):
            raise ValidationError(f"unknown denoiser kind {self.denoiser!r}")
        if self.variance_policy not in ("fixed", "posterior"):
            raise ValidationError(f"unknown variance policy {self.variance_policy!r}")
        if self.band not in ("all", "high"):
            raise ValidationError(f"unknown frequency band {self.band!r}")
        if self.t0_background == 0:
            self.t0_background = max(self.steps // 2, 1)
        if self.t0_object == 0:
            self.t0_object = max(self.steps // 4, 1)
        for name in ("t0_background", "t0_object"):
            t = getattr(self, name)
            if not (1 <= t <= self.steps):
                raise ValidationError(f"{name}={t} outside [1, {self.steps}]")
        if self.threads < 1:
            raise ValidationError("run.threads must be >= 1")

    def effective_threads(self) -> int:
        env = os.environ.get("ATTRFORGE_THREADS")
        if env:
            try:
                n = int(env)
            except ValueError as exc:
                raise ValidationError(f"ATTRFORGE_THREADS={env!r} is not an integer") from exc
            if n < 1:
                raise ValidationError("ATTRFORGE_THREADS must be >= 1")
            return n
        return self.threads

    def to_dict(self) -> dict:
        return {
            "schedule": {"steps": self.steps, "beta_start": self.beta_start, "beta_end": self.beta_end},
            "denoiser": {
                "kind": self.denoiser,
                "dataset_dir": self.dataset_dir,
                "background_dataset_dir": self.background_dataset_dir,
                "gaussian_mean": self.gaussian_mean,
                "gaussian_var": self.gaussian_var,
                "variance_policy": self.variance_policy,
            },
            "guidance": {
                "lambda": self.lam,
                "band": self.band,
                "cutoff": self.cutoff,
                "t0_background": self.t0_background,
                "t0_object": self.t0_object,
            },
            "suite": {"seed": self.seed, "rd_on_small": self.rd_on_small},
            "run": {"threads": self.threads},
        }


_SECTION_KEYS = {
    "schedule": {"steps": "steps", "beta_start": "beta_start", "beta_end": "beta_end"},
    "denoiser": {
        "kind": "denoiser",
        "dataset_dir": "dataset_dir",
        "background_dataset_dir": "background_dataset_dir",
        "gaussian_mean": "gaussian_mean",
        "gaussian_var": "gaussian_var",
        "variance_policy": "variance_policy",
    },
    "guidance": {
        "lambda": "lam",
        "band": "band",
        "cutoff": "cutoff",
        "t0_background": "t0_background",
        "t0_object": "t0_object",
    },
    "suite": {"seed": "seed", "rd_on_small": "rd_on_small"},
    "run": {"threads": "threads"},
}


def config_from_dict(doc: dict) -> RunConfig:
    kwargs = {}
    unknown_sections = set(doc) - set(_SECTION_KEYS)
    if unknown_sections:
        raise ValidationError(f"unknown config sections: {sorted(unknown_sections)}")
    for section, keys in _SECTION_KEYS.items():
        body = doc.get(section, {})
        if not isinstance(body, dict):
            raise ValidationError(f"config section [{section}] must be a table")
        unknown = set(body) - set(keys)
        if unknown:
            raise ValidationError(f"unknown keys in [{section}]: {sorted(unknown)}")
        for key, attr in keys.items():
            if key in body:
                kwargs[attr] = body[key]
    try:
        return RunConfig(**kwargs)
    except TypeError as exc:
        raise ValidationError(f"bad config value types: {exc}") from exc


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            doc = tomli.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ValidationError(f"{path}: invalid TOML: {exc}") from exc
    return config_from_dict(doc)


def build_schedule(cfg: RunConfig) -> NoiseSchedule:
    return NoiseSchedule.linear(cfg.steps, cfg.beta_start, cfg.beta_end)


def load_grid_dir(path) -> list[ImageGrid]:
    if not path or not os.path.isdir(path):
        raise ValidationError(f"dataset directory {path!r} does not exist")
    names = sorted(n for n in os.listdir(path) if n.endswith(".grid"))
    if not names:
        raise ValidationError(f"no .grid files in {path!r}")
    return [read_grid(os.path.join(path, n)) for n in names]


def build_denoisers(cfg: RunConfig, sched: NoiseSchedule, extra_atoms=None):
    """(scene denoiser, background denoiser) per the config.

    The scene denoiser drives guided background editing; the background
    denoiser drives inpainting and compositing. With no separate background
    dataset the two coincide. `extra_atoms` (e.g. the images being edited)
    join the scene denoiser's dataset.
    """
    if cfg.denoiser == "gaussian":
        mean = ImageGrid.full(1, 1, cfg.gaussian_mean)
        den = GaussianDenoiser(mean, cfg.gaussian_var, sched, cfg.variance_policy)
        return den, den
    atoms = load_grid_dir(cfg.dataset_dir)
    if extra_atoms:
        atoms = list(atoms) + list(extra_atoms)
    scene = EmpiricalDenoiser(atoms, sched, cfg.variance_policy)
    if cfg.background_dataset_dir:
        background = EmpiricalDenoiser(load_grid_dir(cfg.background_dataset_dir), sched, cfg.variance_policy)
    else:
        background = scene
    return scene, background
