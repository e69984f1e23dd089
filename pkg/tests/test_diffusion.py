import numpy as np
import pytest

from attrforge.diffusion import (
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
    step_variance,
)
from attrforge.errors import EmptyDataset, StepOutOfRange, ValidationError
from attrforge.grid import ImageGrid, RngStream


@pytest.fixture(scope="module")
def sched():
    return NoiseSchedule.linear(100)


class TestSchedule:
    def test_alpha_bar_monotone(self, sched):
        assert sched.alpha_bar[0] == 1.0
        assert np.all(np.diff(sched.alpha_bar) < 0)
        assert 0 < sched.alpha_bar_at(100) < sched.alpha_bar_at(1) < 1

    def test_bad_beta_rejected(self):
        with pytest.raises(ValidationError):
            NoiseSchedule(np.array([0.1, 1.5]))
        with pytest.raises(ValidationError):
            NoiseSchedule(np.array([0.0]))

    def test_json_roundtrip(self, sched):
        back = NoiseSchedule.from_json(sched.to_json())
        assert back.steps == sched.steps
        assert np.array_equal(back.beta, sched.beta)

    def test_json_mismatched_length(self):
        with pytest.raises(ValidationError):
            NoiseSchedule.from_json('{"T": 3, "beta": [0.1]}')

    def test_step_bounds(self, sched):
        with pytest.raises(StepOutOfRange):
            sched.beta_at(0)
        with pytest.raises(StepOutOfRange):
            sched.beta_at(101)
        assert sched.alpha_bar_at(0) == 1.0


class TestForward:
    def test_t_zero_identity(self, sched):
        x0 = ImageGrid(RngStream(1).normal((4, 4, 1)))
        eps = ImageGrid(RngStream(2).normal((4, 4, 1)))
        out = forward_sample(x0, 0, eps, sched)
        assert np.array_equal(out.data, x0.data)

    def test_zero_signal_scales_noise(self, sched):
        eps = ImageGrid(RngStream(3).normal((4, 4, 1)))
        out = forward_sample(ImageGrid.zeros(4, 4), 30, eps, sched)
        expect = np.sqrt(1 - sched.alpha_bar_at(30)) * eps.data
        assert np.allclose(out.data, expect, atol=1e-15)

    def test_monte_carlo_variance(self, sched):
        t = 60
        rng = RngStream(11)
        x0 = ImageGrid.zeros(1, 1)
        draws = np.array(
            [forward_sample(x0, t, rng.normal_like(x0), sched).data[0, 0, 0] for _ in range(10000)]
        )
        assert draws.var(ddof=1) == pytest.approx(1 - sched.alpha_bar_at(t), rel=0.05)

    def test_shape_mismatch(self, sched):
        with pytest.raises(ValidationError):
            forward_sample(ImageGrid.zeros(4, 4), 5, ImageGrid.zeros(3, 3), sched)


class TestEstimateX0:
    def test_exact_inverse(self, sched):
        rng = RngStream(5)
        x0 = ImageGrid(rng.normal((5, 5, 2)))
        for t in (1, 17, 50, 100):
            eps = rng.normal_like(x0)
            xt = forward_sample(x0, t, eps, sched)
            rec = estimate_x0(xt, eps, t, sched)
            assert np.abs(rec.data - x0.data).max() < 1e-9

    def test_zero_eps(self, sched):
        xt = ImageGrid(RngStream(6).normal((3, 3, 1)))
        out = estimate_x0(xt, ImageGrid.zeros(3, 3), 40, sched)
        assert np.allclose(out.data, xt.data / np.sqrt(sched.alpha_bar_at(40)))


class TestPosteriorMean:
    def test_small_beta_limit(self):
        tiny = NoiseSchedule(np.array([1e-9]))
        xt = ImageGrid([[0.7]])
        mu = posterior_mean(xt, ImageGrid([[0.0]]), 1, tiny)
        assert mu.data[0, 0, 0] == pytest.approx(0.7, abs=1e-8)

    def test_hand_value(self):
        s = NoiseSchedule(np.array([0.1]))
        mu = posterior_mean(ImageGrid([[1.0]]), ImageGrid([[0.0]]), 1, s)
        assert mu.data[0, 0, 0] == pytest.approx(1 / np.sqrt(0.9))


class TestReverseStep:
    def test_terminal_step_deterministic(self, sched):
        den = GaussianDenoiser(ImageGrid.full(1, 1, 0.0), 1.0, sched)
        xt = ImageGrid(RngStream(9).normal((4, 4, 1)))
        out1 = reverse_step(xt, den, 1, sched, RngStream(1))
        out2 = reverse_step(xt, den, 1, sched, RngStream(2))
        assert np.array_equal(out1.data, out2.data)
        mu = posterior_mean(xt, den(xt, 1).eps_pred, 1, sched)
        assert np.array_equal(out1.data, mu.data)

    def test_bit_identical_under_same_stream(self, sched):
        den = GaussianDenoiser(ImageGrid.full(1, 1, 0.1), 0.5, sched)
        xt = ImageGrid(RngStream(4).normal((4, 4, 1)))
        a = sample_chain(xt, den, 30, sched, RngStream(33))
        b = sample_chain(xt, den, 30, sched, RngStream(33))
        assert np.array_equal(a.data, b.data)

    def test_variance_policy_values(self, sched):
        assert step_variance(sched, 1) == 0.0
        assert step_variance(sched, 50) == sched.beta_at(50)
        bt = sched.posterior_variance_at(50)
        assert step_variance(sched, 50, "posterior") == pytest.approx(bt)
        assert bt < sched.beta_at(50)


class TestEmpiricalDenoiser:
    def test_single_atom_posterior(self, sched):
        d = ImageGrid(RngStream(2).normal((3, 3, 1)))
        xt = ImageGrid(RngStream(3).normal((3, 3, 1)))
        t = 25
        out = eps_empirical(xt, t, [d], sched)
        abar = sched.alpha_bar_at(t)
        expect = (xt.data - np.sqrt(abar) * d.data) / np.sqrt(1 - abar)
        assert np.allclose(out.eps_pred.data, expect, atol=1e-12)

    def test_symmetric_atoms_cancel(self, sched):
        atoms = [ImageGrid([[1.0]]), ImageGrid([[-1.0]])]
        out = eps_empirical(ImageGrid([[0.0]]), 40, atoms, sched)
        assert out.eps_pred.data[0, 0, 0] == pytest.approx(0.0, abs=1e-12)

    def test_empty_dataset(self, sched):
        with pytest.raises(EmptyDataset):
            eps_empirical(ImageGrid([[0.0]]), 5, [], sched)

    def test_mse_optimality_small(self, sched):
        atoms = [ImageGrid([[0.8]]), ImageGrid([[-0.5]]), ImageGrid([[0.1]])]
        rng = RngStream(77)
        t = 40
        diffs_hi, diffs_lo = [], []
        for _ in range(2000):
            d = atoms[int(rng.integers(0, 3))]
            eps = rng.normal_like(d)
            xt = forward_sample(d, t, eps, sched)
            pred = eps_empirical(xt, t, atoms, sched).eps_pred.data[0, 0, 0]
            e = eps.data[0, 0, 0]
            base = (pred - e) ** 2
            diffs_hi.append((1.1 * pred - e) ** 2 - base)
            diffs_lo.append((0.9 * pred - e) ** 2 - base)
        for diffs in (np.array(diffs_hi), np.array(diffs_lo)):
            assert diffs.mean() > 0
            assert diffs.mean() / (diffs.std(ddof=1) / np.sqrt(diffs.size)) >= 3.0


class TestGaussianDenoiser:
    def test_tiny_variance_collapses_to_mean(self, sched):
        mean = ImageGrid.full(2, 2, 0.3)
        xt = ImageGrid(RngStream(8).normal((2, 2, 1)))
        t = 30
        out = eps_gaussian(xt, t, mean, 1e-12, sched)
        x0 = estimate_x0(xt, out.eps_pred, t, sched)
        assert np.allclose(x0.data, 0.3, atol=1e-6)

    def test_hand_value_half_abar(self):
        s = NoiseSchedule(np.array([0.5]))
        out = eps_gaussian(ImageGrid([[1.0]]), 1, ImageGrid([[0.0]]), 1.0, s)
        assert out.eps_pred.data[0, 0, 0] == pytest.approx(np.sqrt(0.5), abs=1e-9)

    def test_agreement_with_empirical_lln(self, sched):
        rng = RngStream(123)
        t = 35
        xt = ImageGrid([[0.4]])
        devs = []
        for n in (100, 10000):
            atoms = [ImageGrid([[v]]) for v in 0.2 + 0.5 * rng.normal(n)]
            emp = eps_empirical(xt, t, atoms, sched).eps_pred.data[0, 0, 0]
            gau = eps_gaussian(xt, t, ImageGrid([[0.2]]), 0.25, sched).eps_pred.data[0, 0, 0]
            devs.append(abs(emp - gau))
        assert devs[1] < devs[0]
        assert devs[1] < 0.05

    def test_invalid_variance(self, sched):
        with pytest.raises(ValidationError):
            eps_gaussian(ImageGrid([[0.0]]), 5, ImageGrid([[0.0]]), 0.0, sched)

    def test_denoiser_interface_pure(self, sched):
        den = EmpiricalDenoiser([ImageGrid([[0.5]]), ImageGrid([[-0.5]])], sched)
        xt = ImageGrid([[0.2]])
        a = den(xt, 20)
        b = den(xt, 20)
        assert np.array_equal(a.eps_pred.data, b.eps_pred.data)
        assert a.variance == b.variance


class TestDistributionRecovery:
    def test_short_chain_sanity(self, sched):
        target_mean, target_var = 0.3, 0.64
        den = GaussianDenoiser(ImageGrid.full(1, 1, target_mean), target_var, sched)
        rng = RngStream(999)
        n = 500
        x0 = ImageGrid(target_mean + np.sqrt(target_var) * rng.normal((1, n, 1)))
        xT = forward_sample(x0, 100, ImageGrid(rng.normal((1, n, 1))), sched)
        out = sample_chain(xT, den, 100, sched, rng)
        assert out.data.mean() == pytest.approx(target_mean, abs=0.1)
        assert out.data.var(ddof=1) == pytest.approx(target_var, rel=0.2)
