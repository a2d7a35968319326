import math

import numpy as np
from django.test import SimpleTestCase

from core.engine.errors import ConfigError, ContractError, NumericError
from core.engine.optim import AdamConfig, AdamMode, AdamState, adam_step, average_gradients
from core.engine.params import Gradient, Layer, ModelParams


def grad_of(*values, bias=0.0):
    return Gradient((Layer(np.array([values], dtype=float), np.array([bias])),))


def scalar_params(w=0.5, v=0.0):
    return ModelParams.from_arrays([(np.array([[w]]), np.array([v]))], ["linear"])


def scalar_oracle(w0, g, steps, lam=0.001, g_eta=0.9, g_delta=0.999, eps=1e-8, paper=True):
    """Recurrencia escalar de Adam escrita a mano, sin arrays."""
    w, eta, delta = w0, 0.0, 0.0
    out = []
    for tau in range(steps):
        c_eta = g_eta ** tau if paper else g_eta
        c_delta = g_delta ** tau if paper else g_delta
        eta = c_eta * eta + (1.0 - c_eta) * g
        delta = c_delta * delta + (1.0 - c_delta) * g * g
        step = lam * math.sqrt(1.0 - g_delta ** (tau + 1)) / (1.0 - g_eta ** (tau + 1))
        w = w - step * eta / (math.sqrt(delta) + eps)
        out.append(w)
    return out


class AverageGradientsTests(SimpleTestCase):
    def test_single_gradient_is_identity(self):
        np.testing.assert_array_equal(average_gradients([grad_of(2.0)]).layers[0].weight, [[2.0]])

    def test_two(self):
        np.testing.assert_array_equal(average_gradients([grad_of(2.0), grad_of(4.0)]).layers[0].weight, [[3.0]])

    def test_three(self):
        out = average_gradients([grad_of(1.0, -2.0), grad_of(3.0, 0.0), grad_of(5.0, 8.0)])
        np.testing.assert_array_equal(out.layers[0].weight, [[3.0, 2.0]])

    def test_weighted(self):
        out = average_gradients([grad_of(0.0), grad_of(4.0)], weights=[3, 1])
        np.testing.assert_allclose(out.layers[0].weight, [[1.0]])

    def test_empty(self):
        with self.assertRaises(ContractError):
            average_gradients([])

    def test_shape_mismatch(self):
        with self.assertRaises(ContractError):
            average_gradients([grad_of(1.0), grad_of(1.0, 2.0)])


class AdamConfigTests(SimpleTestCase):
    def test_defaults(self):
        cfg = AdamConfig()
        self.assertEqual((cfg.step, cfg.decay_eta, cfg.decay_delta, cfg.eps), (0.001, 0.9, 0.999, 1e-8))
        self.assertIs(cfg.mode, AdamMode.PAPER)

    def test_invalid(self):
        for kwargs in ({"step": 0.0}, {"decay_eta": 1.0}, {"decay_delta": -0.1}, {"eps": 0.0}):
            with self.subTest(**kwargs), self.assertRaises(ConfigError):
                AdamConfig(**kwargs)


class AdamStepTests(SimpleTestCase):
    def test_zero_gradient_fixed_point(self):
        for mode in AdamMode:
            with self.subTest(mode=mode):
                params = scalar_params(0.7, -0.2)
                new, state = adam_step(params, AdamState.fresh(params), grad_of(0.0), AdamConfig(mode=mode))
                np.testing.assert_array_equal(new.flat(), params.flat())
                self.assertEqual(state.tau, 1)
                self.assertEqual(new.version, params.version + 1)

    def test_paper_trajectory_matches_scalar_oracle(self):
        params = scalar_params(0.5)
        state = AdamState.fresh(params)
        cfg = AdamConfig()
        expected = scalar_oracle(0.5, 1.0, 100)
        for tau in range(100):
            params, state = adam_step(params, state, grad_of(1.0), cfg)
            self.assertAlmostEqual(float(params.layers[0].weight[0, 0]), expected[tau], delta=1e-12)
            self.assertEqual(state.tau, tau + 1)
            self.assertTrue(np.all(state.delta.flat() >= 0.0))

    def test_paper_first_step_is_no_op(self):
        params = scalar_params(0.5)
        new, _ = adam_step(params, AdamState.fresh(params), grad_of(1.0), AdamConfig())
        self.assertEqual(float(new.layers[0].weight[0, 0]), 0.5)

    def test_standard_first_update_magnitude(self):
        params = scalar_params(0.5)
        new, _ = adam_step(params, AdamState.fresh(params), grad_of(1.0),
                           AdamConfig(mode=AdamMode.STANDARD))
        expected = scalar_oracle(0.5, 1.0, 1, paper=False)[0]
        self.assertAlmostEqual(float(new.layers[0].weight[0, 0]), expected, delta=1e-15)
        self.assertAlmostEqual(0.5 - expected, 0.001, delta=1e-6)

    def test_step_moves_against_gradient_sign(self):
        params = scalar_params(0.0)
        state = AdamState.fresh(params)
        cfg = AdamConfig(mode=AdamMode.STANDARD)
        for _ in range(5):
            params, state = adam_step(params, state, grad_of(-3.0), cfg)
        self.assertGreater(float(params.layers[0].weight[0, 0]), 0.0)

    def test_paper_steps_move_against_constant_gradient_sign(self):
        params = ModelParams.from_arrays([(np.zeros((1, 3)), np.zeros(1))], ["linear"])
        state = AdamState.fresh(params)
        g = grad_of(2.0, -0.5, 0.0, bias=-4.0)
        before = params.flat()
        for tau in range(6):
            params, state = adam_step(params, state, g, AdamConfig())
            after = params.flat()
            if tau == 0:
                np.testing.assert_array_equal(after, before)
            else:
                np.testing.assert_array_equal(np.sign(after - before), -np.sign(g.flat()))
            before = after

    def test_non_finite_gradient_names_layer(self):
        params = ModelParams.from_arrays(
            [(np.ones((2, 1)), np.zeros(2)), (np.ones((1, 2)), np.zeros(1))], ["relu", "linear"])
        bad = Gradient((Layer(np.zeros((2, 1)), np.zeros(2)),
                        Layer(np.array([[np.nan, 0.0]]), np.zeros(1))))
        with self.assertRaises(NumericError) as ctx:
            adam_step(params, AdamState.fresh(params), bad, AdamConfig())
        self.assertIn("capa 1", str(ctx.exception))
