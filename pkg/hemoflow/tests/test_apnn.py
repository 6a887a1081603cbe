import math
import os
import tempfile
from dataclasses import replace
from unittest import TestCase, skipUnless

import numpy as np

from ..apnn import (CollocationSet, EpochRecord, LossWeights, TrainingOptions,
                    TrainReport, VesselProblem, elastic_residuals, evaluate_losses,
                    initial_state, loss_boundary, loss_data, loss_gradient,
                    loss_residual, parameter_errors, predict_fields, residual_grid,
                    residuals, total_loss, train, waveform_errors)
from ..config import RunConfig
from ..data_io import WaveformDataset, make_synthetic_dataset
from ..errors import ConfigurationError, SchemaError, TrainingAborted
from ..kind import WallKind
from ..network import InverseParams, MLPNet, forward_with_input_derivs, load_checkpoint
from ..utilities import relative_l2
from ..vessel import VesselGeometry

__all__ = [
    "TestVesselProblem",
    "TestCollocationSet",
    "TestLosses",
    "TestLossGradient",
    "TestTrainReport",
    "TestTraining",
    "TestPrediction",
    "TestSelfConsistency",
    "TestInverseRecovery",
]

LENGTH = 0.126
PERIOD = 0.952
E_INF = 0.533e6

SLOW = os.environ.get("HEMOFLOW_SLOW") == "1"


def problem_and_data(n=20, pressure=False):
    geometry = VesselGeometry(LENGTH, 0.0125, 0.0125, 1e-3)
    t = 0.1 + np.linspace(0.0, PERIOD, n)
    phase = 2.0 * np.pi * (t - 0.1) / PERIOD
    A0 = float(geometry.area(0.0))
    dataset = WaveformDataset(
        0.5 * LENGTH, t, A0 * (1.0 + 0.02 * np.sin(phase)), 0.2 * np.sin(phase) ** 2,
        2000.0 * (1.0 + np.sin(phase)) if pressure else None, period=PERIOD,
    )
    problem = VesselProblem.for_dataset(geometry, WallKind.ARTERY, E_INF, 1060.0, dataset)
    return problem, dataset


def collocation(problem, dataset, n_stations=4, n_times=5, initial="measurement"):
    return CollocationSet.build(dataset, problem, np.linspace(0.0, LENGTH, n_stations), n_times, initial)


def consistent_network(problem, points, tau_r, E0, width=24, seed=3):
    """Return a one-layer network whose pressure head satisfies the scaled
    relaxation law for `tau_r` and `E0` at every residual point
    """
    rng = np.random.default_rng(seed)
    weights = [rng.uniform(-6.0, 6.0, (2, width)), rng.uniform(-0.05, 0.05, (width, 3))]
    biases = [rng.uniform(-3.0, 3.0, width), np.array([math.log(math.expm1(1.0)), 0.0, problem.p0])]
    x, t = points.residual_x, points.residual_t
    S = problem.strouhal
    columns = []
    for j in range(width):
        head = np.zeros((width, 3))
        head[j, 2] = 1.0
        unit = forward_with_input_derivs(MLPNet([weights[0], head], [biases[0], np.zeros(3)]), x, t)
        columns.append(unit.p + tau_r * S * unit.p_t)
    columns.append(np.ones_like(x))
    o = forward_with_input_derivs(MLPNet(weights, biases), x, t)
    q_x = o.A * o.u_x + o.u * o.A_x
    target = problem.F(o.A, x) - tau_r * E0 * problem.G(o.A, x) * q_x
    coef = np.linalg.lstsq(np.stack(columns, axis=1), target, rcond=None)[0]
    weights[-1][:, 2] = coef[:-1]
    biases[-1][2] = coef[-1]
    return MLPNet(weights, biases)


def best_parameters(net, points, problem):
    # Least-squares (tau_r, tau_r E0) of the relaxation residual, which is
    # linear in both for a fixed network
    x, t = points.residual_x, points.residual_t
    o = forward_with_input_derivs(net, x, t)
    q_x = o.A * o.u_x + o.u * o.A_x
    design = np.stack((problem.strouhal * o.p_t, problem.G(o.A, x) * q_x), axis=1)
    a, b = np.linalg.lstsq(design, problem.F(o.A, x) - o.p, rcond=None)[0]
    return a, b


class TestVesselProblem(TestCase):

    def testScales(self):
        problem, dataset = problem_and_data()

        self.assertEqual(problem.scales.length, LENGTH)
        self.assertEqual(problem.scales.time, PERIOD)
        self.assertEqual(problem.scales.pressure, 1060.0)
        self.assertAlmostEqual(problem.time_offset, 0.1, places=15)
        self.assertAlmostEqual(problem.strouhal, LENGTH / PERIOD, places=15)
        self.assertAlmostEqual(float(problem.A0(0.5)), 1.0, places=15)
        self.assertEqual(problem.p0, 0.0)

        res = problem.scale_time(dataset.t)

        np.testing.assert_allclose(res, np.linspace(0.0, 1.0, 20), atol=1e-14)

    def testTubeLaw(self):
        problem, _ = problem_and_data()

        self.assertEqual(float(problem.F(1.0, 0.3)), 0.0)
        self.assertAlmostEqual(float(problem.W(0.3)), 12.5, places=12)
        self.assertAlmostEqual(float(problem.G(1.0, 0.3)), 0.5 / 12.5, places=14)

    def testParameters(self):
        problem, _ = problem_and_data()
        xi = problem.inverse_params(0.009, 0.727e6)
        tau_r, E0 = problem.physical(xi)

        self.assertAlmostEqual(tau_r / 0.009, 1.0, places=12)
        self.assertAlmostEqual(E0 / 0.727e6, 1.0, places=12)
        self.assertAlmostEqual(float(xi.tau_r), 0.009 / LENGTH, places=14)

        res = parameter_errors(problem, xi, 0.009, 0.727e6)

        self.assertLess(res["tau_r"], 1e-9)
        self.assertLess(res["E0"], 1e-9)

        res = parameter_errors(problem, xi, 0.018, 0.727e6)

        self.assertAlmostEqual(res["tau_r"], 50.0, places=8)


class TestCollocationSet(TestCase):

    def testBuild(self):
        problem, dataset = problem_and_data()
        points = collocation(problem, dataset)

        self.assertEqual(points.sizes, (20, 20, 1))
        np.testing.assert_allclose(points.data_x, 0.5)
        np.testing.assert_allclose(points.data_t, np.linspace(0.0, 1.0, 20), atol=1e-14)
        np.testing.assert_allclose(points.data_A, dataset.A / problem.scales.area)
        self.assertEqual(points.residual_x.min(), 0.0)
        self.assertEqual(points.residual_x.max(), 1.0)
        self.assertEqual(points.residual_t.max(), 1.0)
        np.testing.assert_allclose(points.initial_A, 1.0)

        res = collocation(problem, dataset, initial="all")

        self.assertEqual(res.sizes, (20, 20, 4))

    def testInvalid(self):
        problem, dataset = problem_and_data()

        with self.assertRaises(ConfigurationError):
            collocation(problem, dataset, initial="boundary")

        with self.assertRaises(ConfigurationError):
            collocation(problem, dataset, n_times=0)

        with self.assertRaises(ConfigurationError):
            CollocationSet([0.5], [1.5], [1.0], [0.0], [0.5], [0.5], [0.0], [1.0], [0.0])

        with self.assertRaises(ConfigurationError):
            CollocationSet([0.5], [0.5], [1.0], [0.0], [0.5, 0.1], [0.5], [0.0], [1.0], [0.0])

    def testResidualGrid(self):
        _, dataset = problem_and_data()
        options = TrainingOptions(n_stations=5, n_residual_times=7)
        stations, count = residual_grid(dataset, LENGTH, options)

        np.testing.assert_allclose(stations, np.linspace(0.0, LENGTH, 5), rtol=1e-15)
        self.assertEqual(count, 20)

        synthetic = replace(dataset, provenance="synthetic", metadata={"n_cells": 8.0})
        stations, count = residual_grid(synthetic, LENGTH, options)

        np.testing.assert_allclose(stations, (np.arange(8) + 0.5) * LENGTH / 8, rtol=1e-14)
        self.assertEqual(count, 7)

        stations, _ = residual_grid(replace(synthetic, metadata={}), LENGTH, options)

        np.testing.assert_allclose(stations, (np.arange(5) + 0.5) * LENGTH / 5, rtol=1e-14)

    def testChunks(self):
        problem, dataset = problem_and_data()
        points = collocation(problem, dataset)
        res = points.chunks(3)

        self.assertEqual(len(res), 3)
        self.assertEqual(sum(c.sizes[0] for c in res), 20)
        self.assertEqual(sum(c.sizes[1] for c in res), 20)
        self.assertEqual(sum(c.sizes[2] for c in res), 1)
        np.testing.assert_array_equal(np.concatenate([c.residual_t for c in res]), points.residual_t)

        res = points.duplicated()

        self.assertEqual(res.sizes, (40, 40, 2))


class TestLosses(TestCase):

    def setUp(self):
        self.problem, self.dataset = problem_and_data()
        self.points = collocation(self.problem, self.dataset)
        self.net = MLPNet.initialize((2, 6, 6, 3), rng=5)
        self.xi = self.problem.inverse_params(0.05, 0.8e6)

    def testWeights(self):
        self.assertEqual(total_loss(1.0, 2.0, 3.0), 10.0 + 2.0 + 3.0)
        self.assertEqual(total_loss(1.0, 2.0, 3.0, LossWeights(1.0, 0.5, 0.0)), 2.0)

        with self.assertRaises(ConfigurationError):
            LossWeights(data=-1.0)

    def testDataLoss(self):
        net = MLPNet.zeros((2, 4, 3)).with_output_bias(area=1.0)
        res = float(loss_data(net, self.points))
        exp = np.mean((1.0 - self.points.data_A) ** 2) + np.mean(self.points.data_u ** 2)

        self.assertAlmostEqual(res / exp, 1.0, places=12)

    def testBoundaryLoss(self):
        # p = -2 everywhere: positivity penalty 16 plus initial pressure mismatch 4
        net = MLPNet.zeros((2, 4, 3)).with_output_bias(area=1.0, pressure=-2.0)
        res = float(loss_boundary(net, self.points))

        self.assertAlmostEqual(res, 20.0, places=10)

        net = MLPNet.zeros((2, 4, 3)).with_output_bias(area=1.0, pressure=0.0)
        res = float(loss_boundary(net, self.points))

        self.assertLess(res, 1e-20)

    def testElasticLimit(self):
        res = float(loss_residual(self.net, self.xi, self.points, self.problem, tau_r=0.0))
        R1, R2, R3 = elastic_residuals(self.net, self.points.residual_x, self.points.residual_t, self.problem)
        exp = np.mean(R1 ** 2) + np.mean(R2 ** 2) + np.mean(R3 ** 2)

        self.assertAlmostEqual(res / exp, 1.0, places=12)

        res = float(loss_residual(self.net, self.xi, self.points, self.problem, tau_r=0.0, limit="diffusive"))

        self.assertAlmostEqual(res / exp, 1.0, places=12)

    def testRelaxationTerm(self):
        x, t = self.points.residual_x, self.points.residual_t
        _, _, R3 = residuals(self.net, self.xi, x, t, self.problem)
        _, _, exp = elastic_residuals(self.net, x, t, self.problem)

        self.assertGreater(relative_l2(R3, exp), 1e-6)

        with self.assertRaises(ConfigurationError):
            residuals(self.net, self.xi, x, t, self.problem, limit="bogus")

    def testEvaluate(self):
        res = evaluate_losses(self.net, self.xi, self.points, self.problem)

        self.assertAlmostEqual(res.total, 10.0 * res.data + res.residual + res.boundary, places=10)
        self.assertAlmostEqual(res.data, float(loss_data(self.net, self.points)), places=14)
        self.assertGreater(res.residual, 0.0)


class TestLossGradient(TestCase):

    def setUp(self):
        self.problem, self.dataset = problem_and_data()
        self.points = collocation(self.problem, self.dataset)
        self.net = MLPNet.initialize((2, 5, 5, 3), rng=6)
        self.xi = self.problem.inverse_params(0.05, 0.8e6)

    def total(self, params, xi):
        net = MLPNet.from_parameters(params)
        return evaluate_losses(net, xi, self.points, self.problem).total

    def testValues(self):
        losses, _, _ = loss_gradient(self.net, self.xi, self.points, self.problem)
        exp = evaluate_losses(self.net, self.xi, self.points, self.problem)

        self.assertAlmostEqual(losses.total / exp.total, 1.0, places=12)
        self.assertAlmostEqual(losses.boundary, exp.boundary, places=12)

    def testNetworkGradient(self):
        _, grads, _ = loss_gradient(self.net, self.xi, self.points, self.problem)
        h = 1e-6
        res, exp = [], []
        for k, index in ((0, (1, 2)), (1, (3,)), (2, (4, 0)), (4, (2, 1)), (5, (2,))):
            params = [p.copy() for p in self.net.parameters()]
            params[k][index] += h
            upper = self.total(params, self.xi)
            params[k][index] -= 2 * h
            lower = self.total(params, self.xi)
            res.append(grads[k][index])
            exp.append((upper - lower) / (2 * h))

        self.assertLess(relative_l2(np.array(res), np.array(exp)), 1e-5)

    def testParameterGradient(self):
        _, _, grad = loss_gradient(self.net, self.xi, self.points, self.problem)
        h = 1e-6
        base = self.xi.as_array()
        exp = []
        for k in range(2):
            step = np.zeros(2)
            step[k] = h
            upper = self.total(self.net.parameters(), InverseParams.from_array(base + step))
            lower = self.total(self.net.parameters(), InverseParams.from_array(base - step))
            exp.append((upper - lower) / (2 * h))

        self.assertLess(relative_l2(grad, np.array(exp)), 1e-5)

    def testTermGradients(self):
        # Each loss term weighted alone, at 100 random networks and wall
        # parameters, against central differences in sampled coordinates
        rng = np.random.default_rng(11)
        h = 1e-6
        terms = (LossWeights(1.0, 0.0, 0.0), LossWeights(0.0, 1.0, 0.0), LossWeights(0.0, 0.0, 1.0))

        def value(params, xi, weights):
            return evaluate_losses(MLPNet.from_parameters(params), xi, self.points, self.problem, weights).total

        for _ in range(100):
            net = MLPNet.initialize((2, 5, 5, 3), rng)
            xi = self.problem.inverse_params(rng.uniform(0.01, 0.1), rng.uniform(0.6e6, 1.5e6))
            base = net.parameters()
            picks = [(int(k), tuple(int(rng.integers(0, n)) for n in base[k].shape))
                     for k in rng.integers(0, len(base), 4)]
            for weights in terms:
                _, grads, grad_xi = loss_gradient(net, xi, self.points, self.problem, weights)
                res, exp = [], []
                for k, index in picks:
                    params = [p.copy() for p in base]
                    params[k][index] += h
                    upper = value(params, xi, weights)
                    params[k][index] -= 2 * h
                    lower = value(params, xi, weights)
                    res.append(grads[k][index])
                    exp.append((upper - lower) / (2 * h))
                for k in range(2):
                    step = np.zeros(2)
                    step[k] = h
                    upper = value(base, InverseParams.from_array(xi.as_array() + step), weights)
                    lower = value(base, InverseParams.from_array(xi.as_array() - step), weights)
                    res.append(grad_xi[k])
                    exp.append((upper - lower) / (2 * h))

                self.assertLess(relative_l2(np.array(res), np.array(exp)), 1e-5, weights)

    def testThreads(self):
        losses, grads, grad_xi = loss_gradient(self.net, self.xi, self.points, self.problem)
        res = loss_gradient(self.net, self.xi, self.points, self.problem, threads=3)
        again = loss_gradient(self.net, self.xi, self.points, self.problem, threads=3)

        self.assertAlmostEqual(res[0].total / losses.total, 1.0, places=12)
        self.assertEqual(res[0], again[0])
        for a, b, c in zip(res[1], grads, again[1]):
            np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-8)
            np.testing.assert_array_equal(a, c)
        np.testing.assert_allclose(res[2], grad_xi, rtol=1e-9)


class TestTrainReport(TestCase):

    def testCsv(self):
        report = TrainReport()
        report.append(EpochRecord(0, 1.5, 0.25, 1e-3, 16.251, 0.05, 1.2e6))
        report.append(EpochRecord(10, 0.1, 1.0 / 3.0, 0.0, 1.3333333333333333, 0.0123, 9.5e5))
        with tempfile.TemporaryDirectory() as directory:
            path = report.write_csv(os.path.join(directory, "history.csv"))
            res = TrainReport.from_csv(path)

            self.assertEqual(res.records, report.records)
            np.testing.assert_array_equal(res.column("epoch"), [0, 10])
            self.assertEqual(res.final.tau_r, 0.0123)

            with open(path, "a") as file:
                file.write("20,0.1,x,0,0,0,0\n")

            with self.assertRaises(SchemaError) as context:
                TrainReport.from_csv(path)

            self.assertEqual(context.exception.row, 4)

        self.assertIsNone(TrainReport().final)


class TestTraining(TestCase):

    def setUp(self):
        self.problem, self.dataset = problem_and_data()
        self.points = collocation(self.problem, self.dataset)
        self.options = TrainingOptions(epochs=3, hidden=(5, 5), log_every=1, learning_rate=1e-3)

    def testOptions(self):
        self.assertEqual(TrainingOptions().sizes, (2, 32, 32, 32, 3))

        with self.assertRaises(ConfigurationError):
            TrainingOptions(learning_rate=0.0)

        with self.assertRaises(ConfigurationError):
            TrainingOptions(output_bias="mean")

        with self.assertRaises(ConfigurationError):
            TrainingOptions(threads=0)

    def testInitialState(self):
        options = replace(self.options, output_bias="equilibrium")
        net, xi, adam = initial_state(self.problem, options, np.random.default_rng(0))
        tau_r, E0 = self.problem.physical(xi)

        self.assertEqual(net.sizes, (2, 5, 5, 3))
        self.assertAlmostEqual(tau_r, 0.05 * PERIOD, places=12)
        self.assertAlmostEqual(E0 / (1.5 * E_INF), 1.0, places=12)
        self.assertEqual(len(adam.m), 7)
        self.assertAlmostEqual(float(net.biases[-1][0]), math.log(math.expm1(1.0)), places=12)

    def testDeterministic(self):
        results = []
        for _ in range(2):
            net, xi, adam = initial_state(self.problem, self.options, np.random.default_rng(0))
            results.append(train(self.points, self.problem, self.options, net, xi, adam))

        self.assertEqual(results[0].epoch, 3)
        self.assertEqual(len(results[0].report.records), 3)
        self.assertEqual(results[0].adam.step, 3)
        self.assertEqual(results[0].report.records, results[1].report.records)
        np.testing.assert_array_equal(results[0].xi.as_array(), results[1].xi.as_array())
        for a, b in zip(results[0].net.parameters(), results[1].net.parameters()):
            np.testing.assert_array_equal(a, b)

    def testDecreases(self):
        options = replace(self.options, epochs=30, log_every=29)
        net, xi, adam = initial_state(self.problem, options, np.random.default_rng(1))
        res = train(self.points, self.problem, options, net, xi, adam)

        self.assertEqual([r.epoch for r in res.report.records], [0, 29])
        self.assertLess(res.report.records[-1].total, res.report.records[0].total)

    def testOneStepDescent(self):
        for learning_rate in (1e-3, 1e-4):
            options = replace(self.options, epochs=1, learning_rate=learning_rate)
            decreased = 0
            for seed in range(20):
                net, xi, adam = initial_state(self.problem, options, np.random.default_rng(seed))
                res = train(self.points, self.problem, options, net, xi, adam)
                after = evaluate_losses(res.net, res.xi, self.points, self.problem, options.weights)
                decreased += after.total < res.report.records[0].total

            self.assertGreaterEqual(decreased, 19, learning_rate)

    def testFrozenNetwork(self):
        net, xi, adam = initial_state(self.problem, self.options, np.random.default_rng(0))
        res = train(self.points, self.problem, replace(self.options, freeze_network=True), net, xi, adam)

        for a, b in zip(res.net.parameters(), net.parameters()):
            np.testing.assert_array_equal(a, b)
        self.assertFalse(np.array_equal(res.xi.as_array(), xi.as_array()))

        with self.assertRaises(ConfigurationError):
            TrainingOptions(freeze_network="yes")

    def testResume(self):
        net, xi, adam = initial_state(self.problem, self.options, np.random.default_rng(0))
        exp = train(self.points, self.problem, self.options, net, xi, adam)
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "state.npz")
            train(self.points, self.problem, replace(self.options, epochs=1), net, xi, adam, checkpoint=path)
            state = load_checkpoint(path)

            self.assertEqual(state.epoch, 1)

            res = train(self.points, self.problem, replace(self.options, epochs=2),
                        state.net, state.xi, state.adam, start_epoch=state.epoch)

        self.assertEqual(res.epoch, 3)
        self.assertEqual([r.epoch for r in res.report.records], [1, 2])
        np.testing.assert_array_equal(res.xi.as_array(), exp.xi.as_array())
        for a, b in zip(res.net.parameters(), exp.net.parameters()):
            np.testing.assert_array_equal(a, b)

    def testAborted(self):
        net, _, adam = initial_state(self.problem, self.options, np.random.default_rng(0))
        xi = InverseParams(700.0, 0.0)
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "state.npz")

            with np.errstate(all="ignore"), self.assertLogs("hemoflow.apnn", level="ERROR"):
                with self.assertRaises(TrainingAborted) as context:
                    train(self.points, self.problem, self.options, net, xi, adam, checkpoint=path)

            self.assertEqual(context.exception.checkpoint, path)
            self.assertEqual(load_checkpoint(path).epoch, 0)


class TestPrediction(TestCase):

    def testFields(self):
        problem, _ = problem_and_data()
        net = MLPNet.zeros((2, 4, 3)).with_output_bias(area=1.0, pressure=2.0)
        res = predict_fields(net, problem, [0.0, 0.05, 0.1], [0.1, 0.5])

        self.assertEqual(res.shape, (3, 2))
        np.testing.assert_allclose(res.A, problem.scales.area, rtol=1e-12)
        np.testing.assert_array_equal(res.u, 0.0)
        np.testing.assert_allclose(res.p, 2.0 * 1060.0, rtol=1e-14)

    def testWaveformErrors(self):
        problem, dataset = problem_and_data(pressure=True)
        net = MLPNet.zeros((2, 4, 3)).with_output_bias(area=1.0)
        res = waveform_errors(net, problem, dataset)

        self.assertEqual(set(res), {"A", "u", "p"})
        self.assertLess(res["A"], 2.0)
        self.assertGreater(res["u"], 50.0)

        problem, dataset = problem_and_data()
        res = waveform_errors(net, problem, dataset)

        self.assertEqual(set(res), {"A", "u"})


class TestSelfConsistency(TestCase):

    def testConsistentNetwork(self):
        problem, dataset = problem_and_data()
        points = collocation(problem, dataset)
        net = consistent_network(problem, points, 0.1, 1.2 * problem.E_inf_hat)
        xi = InverseParams.from_values(0.1, 1.2 * problem.E_inf_hat)
        _, _, R3 = residuals(net, xi, points.residual_x, points.residual_t, problem)
        _, _, scale = elastic_residuals(net, points.residual_x, points.residual_t, problem)

        self.assertLess(np.max(np.abs(R3)), 1e-6 * max(1.0, np.max(np.abs(scale))))

        a, b = best_parameters(net, points, problem)

        self.assertAlmostEqual(a / 0.1, 1.0, places=3)
        self.assertAlmostEqual(b / a / (1.2 * problem.E_inf_hat), 1.0, places=3)

    @skipUnless(SLOW, "set HEMOFLOW_SLOW=1 to run")
    def testFrozenNetworkData(self):
        problem, dataset = problem_and_data()
        points = collocation(problem, dataset)
        net = consistent_network(problem, points, 0.1, 1.2 * problem.E_inf_hat)
        A, u, _ = net(points.data_x, points.data_t)
        points = replace(points, data_A=A, data_u=u)
        a, b = best_parameters(net, points, problem)
        tau_exp, E0_exp = problem.physical(InverseParams.from_values(a, b / a))
        options = TrainingOptions(epochs=20_000, hidden=(24,), learning_rate=2e-3, log_every=10, freeze_network=True)
        _, xi, adam = initial_state(problem, options, np.random.default_rng(0))
        res = train(points, problem, options, net, xi, adam)

        records = res.report.records

        self.assertLessEqual(res.epoch, 50_000)
        self.assertLess(records[-1].data, 1e-6)
        for before, after in zip(records[:4], records[1:5]):
            self.assertLessEqual(after.total, before.total)

        tau_r, E0 = problem.physical(res.xi)

        self.assertLess(abs(tau_r - tau_exp) / tau_exp, 0.1)
        self.assertLess(abs(E0 - E0_exp) / E0_exp, 0.1)


class TestInverseRecovery(TestCase):

    @skipUnless(SLOW, "set HEMOFLOW_SLOW=1 to run")
    def testThoracicAorta(self):
        # Desk-scale run on the synthetic thoracic-aorta dataset
        config = RunConfig.from_json("builtin:thoracic_aorta.json")
        options = replace(config.training, checkpoint_every=0)
        dataset, _ = make_synthetic_dataset(config)
        problem = VesselProblem.for_dataset(config.geometry, config.wall.kind, config.E_inf, config.wall.rho, dataset)
        stations, n_times = residual_grid(dataset, config.geometry.length, options)
        points = CollocationSet.build(dataset, problem, stations, n_times, options.initial_stations)
        net, xi, adam = initial_state(problem, options, np.random.default_rng(config.seed), dataset.station)
        res = train(points, problem, options, net, xi, adam)

        errors = waveform_errors(res.net, problem, dataset)

        self.assertLess(errors["A"], 1.0)
        self.assertLess(errors["u"], 5.0)
        self.assertLess(errors["p"], 5.0)

        wall = config.wall_model()
        tau_r, E0 = problem.physical(res.xi)

        self.assertLess(abs(E0 - wall.E0) / wall.E0, 0.4)
        self.assertLess(max(tau_r / wall.tau_r, wall.tau_r / tau_r), 3.0)

        records = res.report.records
        window = records[int(0.75 * len(records)):]

        self.assertLessEqual(abs(window[-1].E0 - wall.E0), abs(window[0].E0 - wall.E0))
        self.assertLessEqual(abs(window[-1].tau_r - wall.tau_r), abs(window[0].tau_r - wall.tau_r))
