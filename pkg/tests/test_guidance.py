import numpy as np
import pytest

from attrforge.diffusion import EmpiricalDenoiser, GaussianDenoiser, NoiseSchedule, forward_sample, posterior_mean, reverse_step, sample_chain
from attrforge.errors import EmptyMask, InvalidLabel, ValidationError
from attrforge.grid import ImageGrid, MaskGrid, RngStream
from attrforge.guidance import (
    AdversarialObjective,
    GuidanceConfig,
    SpectralComplexity,
    adversarial_gradient,
    adversarial_value,
    background_edit,
    blend_latents,
    complexity_gradient,
    complexity_value,
    guided_chain,
    guided_mean,
    guided_reverse_step,
)


class PixelLinearClassifier:
    """Minimal linear-softmax head directly on raw pixels."""

    def __init__(self, weights, bias, names):
        self.weights = np.asarray(weights, dtype=float)
        self.bias = np.asarray(bias, dtype=float)
        self.class_names = names

    def logits(self, image):
        return self.weights @ image.data.ravel() + self.bias

    def input_gradient(self, image, grad_logits):
        return ImageGrid((self.weights.T @ grad_logits).reshape(image.shape))


@pytest.fixture(scope="module")
def sched():
    return NoiseSchedule.linear(100)


@pytest.fixture(scope="module")
def linear_clf():
    rng = RngStream(50)
    return PixelLinearClassifier(rng.normal((3, 64)) * 0.4, rng.normal(3) * 0.1, ["a", "b", "c"])


def central_diff(fn, image, i, j, c=0, h=1e-4):
    up = image.data.copy()
    up[i, j, c] += h
    dn = image.data.copy()
    dn[i, j, c] -= h
    return (fn(ImageGrid(up)) - fn(ImageGrid(dn))) / (2 * h)


class TestComplexityValue:
    def test_constant_image(self):
        assert complexity_value(ImageGrid.full(8, 8, 0.5)) == pytest.approx(64 * 0.5)
        assert complexity_value(ImageGrid.full(8, 8, -0.5)) == pytest.approx(64 * 0.5)

    def test_impulse(self):
        img = np.zeros((8, 8))
        img[3, 4] = 0.7
        assert complexity_value(ImageGrid(img)) == pytest.approx(64 * 0.7)

    def test_linearity_in_scale(self):
        img = ImageGrid(RngStream(4).normal((8, 8, 1)))
        assert complexity_value(ImageGrid(2 * img.data)) == pytest.approx(2 * complexity_value(img))

    def test_high_pass_excludes_dc(self):
        img = ImageGrid.full(8, 8, 0.9)
        assert complexity_value(img, band="high", cutoff=0.5) == pytest.approx(0.0, abs=1e-9)


class TestComplexityGradient:
    def test_matches_finite_differences(self):
        for seed in range(3):
            img = ImageGrid(RngStream(seed).normal((8, 8, 1)))
            grad = complexity_gradient(img)
            rng = RngStream(seed + 100)
            for _ in range(10):
                i, j = int(rng.integers(0, 8)), int(rng.integers(0, 8))
                fd = central_diff(complexity_value, img, i, j)
                assert grad.data[i, j, 0] == pytest.approx(fd, rel=1e-4)

    def test_zero_image_bounded(self):
        grad = complexity_gradient(ImageGrid.zeros(8, 8))
        assert np.all(np.isfinite(grad.data))
        assert np.abs(grad.data).max() <= 1e-3

    def test_ascent_increases_value(self):
        img = ImageGrid(RngStream(8).normal((8, 8, 1)) * 0.1)
        values = [complexity_value(img)]
        for _ in range(20):
            img = ImageGrid(img.data + 1e-2 * complexity_gradient(img).data)
            values.append(complexity_value(img))
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_multichannel_consistent(self):
        img = ImageGrid(RngStream(9).normal((6, 6, 3)))
        grad = complexity_gradient(img)
        fd = central_diff(complexity_value, img, 2, 3, c=1)
        assert grad.data[2, 3, 1] == pytest.approx(fd, rel=1e-4)


class TestAdversarial:
    def test_uniform_logits_value(self):
        class Uniform:
            def logits(self, image):
                return np.zeros(5)

            def input_gradient(self, image, g):
                return ImageGrid.zeros(image.height, image.width, image.channels)

        v = adversarial_value(ImageGrid.zeros(4, 4), Uniform(), 2)
        assert v == pytest.approx(np.log(5))

    def test_gradient_matches_finite_differences(self, linear_clf):
        img = ImageGrid(RngStream(21).normal((8, 8, 1)) * 0.3)
        grad = adversarial_gradient(img, linear_clf, 1)
        rng = RngStream(22)
        for _ in range(10):
            i, j = int(rng.integers(0, 8)), int(rng.integers(0, 8))
            fd = central_diff(lambda im: adversarial_value(im, linear_clf, 1), img, i, j)
            assert grad.data[i, j, 0] == pytest.approx(fd, rel=1e-4)

    def test_ascent_decreases_true_class_probability(self, linear_clf):
        img = ImageGrid(RngStream(23).normal((8, 8, 1)) * 0.2)
        label = 0

        def true_prob(im):
            z = linear_clf.logits(im)
            z = z - z.max()
            p = np.exp(z) / np.exp(z).sum()
            return p[label]

        probs = [true_prob(img)]
        for _ in range(20):
            img = ImageGrid(img.data + 0.05 * adversarial_gradient(img, linear_clf, label).data)
            probs.append(true_prob(img))
        assert all(b < a for a, b in zip(probs, probs[1:]))

    def test_invalid_label(self, linear_clf):
        with pytest.raises(InvalidLabel):
            adversarial_value(ImageGrid.zeros(8, 8), linear_clf, 9)


class TestGuidedStep:
    def test_lambda_zero_bit_identical(self, sched):
        den = GaussianDenoiser(ImageGrid.full(1, 1, 0.0), 0.3, sched)
        obj = SpectralComplexity()
        xt = ImageGrid(RngStream(31).normal((8, 8, 1)))
        cfg = GuidanceConfig(lam=0.0, t0=20)
        a = guided_reverse_step(xt, den, obj, cfg, 20, sched, RngStream(5))
        b = reverse_step(xt, den, 20, sched, RngStream(5))
        assert np.array_equal(a.data, b.data)

    def test_lambda_zero_chain_bit_identical(self, sched):
        den = GaussianDenoiser(ImageGrid.full(1, 1, 0.0), 0.3, sched)
        obj = SpectralComplexity()
        src = ImageGrid(RngStream(77).normal((8, 8, 1)) * 0.2)
        r1, r2 = RngStream(6), RngStream(6)
        x1 = forward_sample(src, 25, r1.normal_like(src), sched)
        x2 = forward_sample(src, 25, r2.normal_like(src), sched)
        a = guided_chain(x1, den, obj, GuidanceConfig(lam=0.0, t0=25), sched, r1)
        b = sample_chain(x2, den, 25, sched, r2)
        assert np.array_equal(a.data, b.data)

    def test_sign_flip_mirrors_mean(self, sched):
        den = GaussianDenoiser(ImageGrid.full(1, 1, 0.0), 0.3, sched)
        obj = SpectralComplexity()
        xt = ImageGrid(RngStream(32).normal((8, 8, 1)))
        t = 40
        mu_plus, _ = guided_mean(xt, den, obj, 7.0, t, sched)
        mu_minus, _ = guided_mean(xt, den, obj, -7.0, t, sched)
        mu0 = posterior_mean(xt, den(xt, t).eps_pred, t, sched)
        assert np.allclose(mu_plus.data + mu_minus.data, 2 * mu0.data, atol=1e-12)

    def test_steering_orders_complexity(self, sched):
        den = GaussianDenoiser(ImageGrid.zeros(1, 1), 0.3, sched)
        obj = SpectralComplexity()
        src = ImageGrid((np.sin(np.arange(64).reshape(8, 8) / 5.0) * 0.4)[:, :, None])
        means = {}
        for lam in (20.0, 0.0, -20.0):
            vals = []
            for seed in range(12):
                rng = RngStream(400 + seed)
                x = forward_sample(src, 20, rng.normal_like(src), sched)
                out = guided_chain(x, den, obj, GuidanceConfig(lam=lam, t0=20), sched, rng)
                vals.append(complexity_value(out))
            means[lam] = np.mean(vals)
        assert means[20.0] > means[0.0] > means[-20.0]

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            GuidanceConfig(lam=1.0, t0=0)
        with pytest.raises(ValidationError):
            GuidanceConfig(lam=1.0, t0=5, band="weird")
        with pytest.raises(ValidationError):
            GuidanceConfig(lam=1.0, t0=5, band="high", cutoff=0.0)


class TestBackgroundEdit:
    def test_empty_mask_rejected(self, sched):
        den = GaussianDenoiser(ImageGrid.zeros(1, 1), 0.3, sched)
        with pytest.raises(EmptyMask):
            background_edit(
                ImageGrid.zeros(8, 8),
                MaskGrid(np.zeros((8, 8))),
                den,
                SpectralComplexity(),
                GuidanceConfig(lam=0.0, t0=10),
                RngStream(1),
            )

    def test_object_anchored_every_step(self, sched):
        rng = RngStream(61)
        img = ImageGrid(rng.normal((12, 12, 1)) * 0.3)
        m = np.zeros((12, 12))
        m[4:8, 4:8] = 1.0
        mask = MaskGrid(m)
        den = EmpiricalDenoiser([img], sched)
        seen = []

        def hook(t, x_obj, x_next):
            on = mask.data > 0.5
            seen.append(np.array_equal(x_next.data[on], x_obj.data[on]))

        background_edit(img, mask, den, SpectralComplexity(), GuidanceConfig(lam=0.0, t0=15), RngStream(7), hook=hook)
        assert len(seen) == 15
        assert all(seen)

    def test_inver_reconstructs_input(self, sched):
        rng = RngStream(62)
        base = ImageGrid(np.clip(0.2 + 0.05 * rng.normal((16, 16, 1)), -1, 1))
        m = np.zeros((16, 16))
        m[5:10, 6:11] = 1.0
        mask = MaskGrid(m)
        den = EmpiricalDenoiser([base, ImageGrid.full(16, 16, -0.3)], sched)
        out = background_edit(base, mask, den, SpectralComplexity(), GuidanceConfig(lam=0.0, t0=50), RngStream(8))
        assert np.abs(out.data - base.data).mean() < 0.1

    def test_blend_latents_formula(self):
        m = MaskGrid(np.array([[1.0, 0.0], [0.25, 0.75]]))
        a = ImageGrid(np.ones((2, 2, 1)))
        b = ImageGrid(np.zeros((2, 2, 1)))
        out = blend_latents(m, a, b)
        assert np.allclose(out.data[:, :, 0], [[1.0, 0.0], [0.25, 0.75]])

    def test_adversarial_objective_wrapper(self, linear_clf):
        obj = AdversarialObjective(linear_clf, 2)
        img = ImageGrid(RngStream(63).normal((8, 8, 1)) * 0.1)
        assert obj.value(img) == pytest.approx(adversarial_value(img, linear_clf, 2))
        assert np.array_equal(obj.gradient(img).data, adversarial_gradient(img, linear_clf, 2).data)
