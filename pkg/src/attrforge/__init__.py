"""attrforge: diffusion-based object-attribute editing and robustness evaluation."""

from .grid import (
    AffineMatrix,
    ImageGrid,
    MaskGrid,
    ObjectRect,
    RngStream,
    Spectrum,
    bbox,
    fft2,
    ifft2,
    pixel_rate,
    warp,
    warp_mask,
)
from .diffusion import (
    DenoiserOutput,
    EmpiricalDenoiser,
    GaussianDenoiser,
    NoiseSchedule,
    eps_empirical,
    eps_gaussian,
    estimate_x0,
    forward_sample,
    posterior_mean,
    reverse_step,
    sample_chain,
)
from .guidance import (
    AdversarialObjective,
    GuidanceConfig,
    SpectralComplexity,
    adversarial_gradient,
    adversarial_value,
    background_edit,
    complexity_gradient,
    complexity_value,
    guided_reverse_step,
)
from .editor import (
    SUITE_VARIANTS,
    EditSpec,
    SceneDecomposition,
    SuiteConfig,
    apply_edit,
    composite_edit,
    generate_suite,
    random_background,
    remove_object,
    resolved_suite,
    scale_for_rate,
    template_background,
    transform_matrix,
)
from .metrics import (
    FeatureStats,
    GlcmMatrix,
    OodScore,
    energy_score,
    frechet_distance,
    glcm,
    glcm_contrast,
    glcm_dissimilarity,
    gradnorm_score,
    score_overlap,
)
from .harness import (
    AttributeReport,
    EvalEntry,
    EvalManifest,
    ToyClassifier,
    dropped_accuracy,
    evaluate_suite,
    load_classifier,
    ood_report,
    predict,
    predict_tencrop,
    save_classifier,
    train_toy_classifier,
)
from .toydata import TOY_CLASS_NAMES, noise_images, toy_backgrounds, toy_dataset

__version__ = "0.1.0"

__all__ = [
    "AffineMatrix", "ImageGrid", "MaskGrid", "ObjectRect", "RngStream", "Spectrum",
    "bbox", "fft2", "ifft2", "pixel_rate", "warp", "warp_mask",
    "DenoiserOutput", "EmpiricalDenoiser", "GaussianDenoiser", "NoiseSchedule",
    "eps_empirical", "eps_gaussian", "estimate_x0", "forward_sample",
    "posterior_mean", "reverse_step", "sample_chain",
    "AdversarialObjective", "GuidanceConfig", "SpectralComplexity",
    "adversarial_gradient", "adversarial_value", "background_edit",
    "complexity_gradient", "complexity_value", "guided_reverse_step",
    "SUITE_VARIANTS", "EditSpec", "SceneDecomposition", "SuiteConfig",
    "apply_edit", "composite_edit", "generate_suite", "random_background",
    "remove_object", "resolved_suite", "scale_for_rate", "template_background",
    "transform_matrix",
    "FeatureStats", "GlcmMatrix", "OodScore", "energy_score", "frechet_distance",
    "glcm", "glcm_contrast", "glcm_dissimilarity", "gradnorm_score", "score_overlap",
    "AttributeReport", "EvalEntry", "EvalManifest", "ToyClassifier",
    "dropped_accuracy", "evaluate_suite", "load_classifier", "ood_report",
    "predict", "predict_tencrop", "save_classifier", "train_toy_classifier",
    "TOY_CLASS_NAMES", "noise_images", "toy_backgrounds", "toy_dataset",
]
