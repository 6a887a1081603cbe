import json
import math
import os
import tempfile
from pathlib import Path
from unittest import TestCase, mock

from ..boundary import InflowProfile, WindkesselRCR
from ..config import UNITS, RunConfig, quantity
from ..errors import ConfigurationError
from ..kind import WallKind

__all__ = ["TestQuantity", "TestBuiltinConfigs", "TestRunConfig", "TestOverrides"]


def minimal(**blocks):
    data = {
        "geometry": {"length": 0.2, "radius_in": 0.01, "radius_out": 0.008, "thickness": 1e-3, "p0": 9000.0},
        "wall": {"E0": 0.7e6, "E_inf": 0.5e6, "tau_r": 0.01},
        "boundary": {"inflow": 1e-4, "R1": 1e7, "R2": 1e8, "C": 1e-9},
    }
    data.update(blocks)
    return data


class TestQuantity(TestCase):

    def testValues(self):
        self.assertEqual(quantity({"a": 3}, "a", "length"), 3.0)
        self.assertAlmostEqual(quantity({"a": {"value": 2.0, "unit": "cm"}}, "a", "length"), 0.02, places=15)
        self.assertAlmostEqual(quantity({"a": {"value": 1.0, "unit": "mmHg"}}, "a", "pressure"), 133.322387415, places=9)
        self.assertEqual(quantity({"a": {"value": 5}}, "a", "modulus"), 5.0)
        self.assertIsNone(quantity({}, "a", "length", None))
        self.assertEqual(quantity({"a": None}, "a", "length", 1.5), 1.5)
        self.assertEqual(UNITS["compliance"]["m3/GPa"], 1e-9)

    def testInvalid(self):
        with self.assertRaises(ConfigurationError) as context:
            quantity({}, "length", "length", prefix="geometry.")

        self.assertIn("geometry.length", str(context.exception))

        with self.assertRaises(ConfigurationError) as context:
            quantity({"a": {"value": 1.0, "unit": "furlong"}}, "a", "length")

        self.assertIn("furlong", str(context.exception))

        with self.assertRaises(ConfigurationError):
            quantity({"a": {"value": 1.0, "units": "m"}}, "a", "length")

        with self.assertRaises(ConfigurationError):
            quantity({"a": True}, "a", "number")

        with self.assertRaises(ConfigurationError):
            quantity({"a": "1.0"}, "a", "number")

        with self.assertRaises(ConfigurationError):
            quantity({"a": math.inf}, "a", "number")


class TestBuiltinConfigs(TestCase):

    def testThoracicAorta(self):
        config = RunConfig.from_json("builtin:thoracic_aorta.json")
        g = config.geometry

        self.assertEqual(config.name, "thoracic-aorta")
        self.assertAlmostEqual(g.length, 0.24137, places=12)
        self.assertAlmostEqual(g.radius_in, 0.015, places=15)
        self.assertAlmostEqual(g.radius_out, 0.010, places=15)
        self.assertAlmostEqual(g.pressure, 9467.0, places=9)
        self.assertEqual(g.outflow_pressure, 0.0)
        self.assertEqual(config.wall.kind, WallKind.ARTERY)
        self.assertAlmostEqual(config.wall.E0, 0.727e6, places=6)
        self.assertAlmostEqual(config.E_inf, 0.533e6, places=6)
        self.assertAlmostEqual(config.wall.eta, 23884.0, places=6)
        self.assertAlmostEqual(config.boundary.R1, 18.503e6, places=3)
        self.assertAlmostEqual(config.boundary.C / 10.163e-9, 1.0, places=12)
        self.assertEqual(config.solver.n_cells, 12)
        self.assertEqual(config.solver.tableau.name, "ars443")
        self.assertEqual(config.training.hidden, (32, 32, 32))
        self.assertEqual(config.training.checkpoint_every, 10000)
        self.assertEqual(config.training.weights.data, 10.0)
        self.assertEqual(config.seed, 1234)

    def testThoracicAortaModels(self):
        config = RunConfig.from_json("builtin:thoracic_aorta.json")
        wall = config.wall_model()

        self.assertAlmostEqual(wall.tau_r, 23884.0 * (0.727e6 - 0.533e6) / 0.727e6 ** 2, places=12)

        profile = config.inflow_profile()

        self.assertIsInstance(profile, InflowProfile)
        self.assertEqual(profile.period, 0.952)

        wk = config.windkessel()

        self.assertIsInstance(wk, WindkesselRCR)
        self.assertEqual(wk.pressure, config.geometry.pressure)
        self.assertEqual(wk.p_out, 0.0)

    def testCarotid(self):
        for name, p0 in (("cca_a", 71.0), ("cca_b", 84.0)):
            config = RunConfig.from_json(f"builtin:{name}.json")
            g = config.geometry
            exp = 2.0 * g.mean_radius / g.thickness * 1060.0 * 5.92 ** 2

            self.assertIsNone(config.boundary)
            self.assertIsNone(config.wall.E0)
            self.assertAlmostEqual(g.pressure / (p0 * 133.322387415), 1.0, places=12)
            self.assertAlmostEqual(config.E_inf / exp, 1.0, places=12)
            self.assertEqual(config.dataset, f"{name}_waveform.csv")
            self.assertEqual(config.resolve(config.dataset), Path(config.base) / f"{name}_waveform.csv")

            with self.assertRaises(ConfigurationError):
                config.wall_model()

            with self.assertRaises(ConfigurationError):
                config.inflow_profile()


class TestRunConfig(TestCase):

    def testDefaults(self):
        config = RunConfig.from_dict(minimal())

        self.assertEqual(config.name, "run")
        self.assertEqual(config.seed, 0)
        self.assertEqual(config.solver.cfl, 0.9)
        self.assertEqual(config.training.epochs, 200000)
        self.assertEqual(config.geometry.outflow_pressure, 0.0)
        self.assertEqual(config.wall.rho, 1060.0)
        self.assertEqual(config.inflow_profile().flow(0.3), 1e-4)
        self.assertEqual(config.as_metadata()["tableau"], "ars443")

    def testInvalidKeys(self):
        cases = [
            (minimal(solver={"cfl": 1.5}), "solver.cfl"),
            (minimal(solver={"n_cells": 2}), "solver.n_cells"),
            (minimal(solver={"foo": 1}), "solver.foo"),
            (minimal(training={"lr": 0.1}), "training.lr"),
            (minimal(training={"initial_stations": "everywhere"}), "training.initial_stations"),
            (minimal(training={"weights": {"data": 1.0, "physics": 1.0}}), "training.weights.physics"),
            (minimal(wall={"E0": 1.0}), "wall.E_inf"),
            (minimal(wall={"E_inf": 1.0, "kind": "capillary"}), "wall.kind"),
            (minimal(boundary={"inflow": 0.0, "R1": -1.0, "R2": 1.0, "C": 1.0}), "boundary.R1"),
            (minimal(boundary={"R1": 1.0, "R2": 1.0, "C": 1.0}), "boundary.inflow"),
            (minimal(seed=-1), "seed"),
            (minimal(extra=1), "extra"),
        ]
        for data, key in cases:
            with self.assertRaises(ConfigurationError) as context:
                RunConfig.from_dict(data)

            self.assertIn(key, str(context.exception))

        data = minimal()
        data["geometry"]["length"] = {"value": 1.0, "unit": "furlong"}

        with self.assertRaises(ConfigurationError) as context:
            RunConfig.from_dict(data)

        self.assertIn("geometry.length", str(context.exception))

        data = minimal()
        data["geometry"]["thickness"] = 0.0

        with self.assertRaises(ConfigurationError):
            RunConfig.from_dict(data)

        del data["wall"]

        with self.assertRaises(ConfigurationError):
            RunConfig.from_dict(data)

    def testWallModel(self):
        config = RunConfig.from_dict(minimal(wall={"E0": 0.7e6, "E_inf": 0.5e6}))

        with self.assertRaises(ConfigurationError):
            config.wall_model()

        config = RunConfig.from_dict(minimal(wall={"E0": 0.4e6, "E_inf": 0.5e6, "tau_r": 0.01}))

        with self.assertRaises(ConfigurationError):
            config.wall_model()

        config = RunConfig.from_dict(minimal(wall={"E0": 0.7e6, "c_ref": 0.5, "tau_r": 0.01, "kind": "vein"}))

        self.assertEqual(config.wall_model().kind, WallKind.VEIN)
        self.assertGreater(config.E_inf, 0.0)

    def testFourierInflow(self):
        data = minimal()
        data["boundary"]["inflow"] = {"mean": {"value": 100.0, "unit": "mL/s"}, "cosines": [1e-5], "sines": [2e-5]}
        data["boundary"]["period"] = {"value": 800.0, "unit": "ms"}
        profile = RunConfig.from_dict(data).inflow_profile()

        self.assertEqual(profile.mode, "analytic")
        self.assertAlmostEqual(profile.period, 0.8, places=15)
        self.assertAlmostEqual(profile.mean_flow(), 1e-4, places=15)
        self.assertAlmostEqual(profile.flow(0.0), 1.1e-4, places=15)

    def testFiles(self):
        with tempfile.TemporaryDirectory() as directory:
            with open(os.path.join(directory, "inflow.csv"), "w") as file:
                file.write("t,Q\n0.0,1e-5\n0.5,2e-4\n1.0,1e-5\n")
            data = minimal(name="files")
            data["boundary"]["inflow"] = "inflow.csv"
            path = os.path.join(directory, "run.json")
            with open(path, "w") as file:
                json.dump(data, file)
            config = RunConfig.from_json(path)

            self.assertEqual(config.name, "files")
            self.assertEqual(config.inflow_profile().period, 1.0)
            self.assertAlmostEqual(config.inflow_profile().flow(0.5), 2e-4, places=15)

            with open(path, "w") as file:
                file.write("{not json")

            with self.assertRaises(ConfigurationError):
                RunConfig.from_json(path)


class TestOverrides(TestCase):

    def testOverrides(self):
        config = RunConfig.from_dict(minimal(seed=3))
        res = config.with_overrides(seed=7, cells=20, epochs=5, threads=2, out="somewhere")

        self.assertEqual(res.seed, 7)
        self.assertEqual(res.solver.n_cells, 20)
        self.assertEqual(res.training.epochs, 5)
        self.assertEqual(res.training.threads, 2)
        self.assertEqual(res.output, "somewhere")
        self.assertEqual(config.seed, 3)
        self.assertIs(config.with_overrides(), config)

        res = config.with_overrides(dataset="data.csv")

        self.assertTrue(Path(res.dataset).is_absolute())

        with self.assertRaises(ConfigurationError):
            config.with_overrides(cells=1)

        with self.assertRaises(ConfigurationError):
            config.with_overrides(threads=0)

    def testOutputDefault(self):
        with mock.patch.dict(os.environ, {"HEMOFLOW_OUT": "/tmp/hemoflow-runs"}):
            res = RunConfig.from_dict(minimal())

            self.assertEqual(res.output, "/tmp/hemoflow-runs")

        with mock.patch.dict(os.environ):
            os.environ.pop("HEMOFLOW_OUT", None)
            res = RunConfig.from_dict(minimal())

            self.assertEqual(res.output, "hemoflow-out")

        res = RunConfig.from_dict(minimal(output={"directory": "here"}))

        self.assertEqual(res.output, "here")
