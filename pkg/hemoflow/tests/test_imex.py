from unittest import TestCase

import numpy as np

from ..errors import ConfigurationError
from ..imex import ARS443, ImexTableau, tableau_from_config

__all__ = ["TestImexTableau", "TestTableauFromConfig"]


class TestImexTableau(TestCase):

    def testShape(self):
        self.assertEqual(ARS443.stages, 5)
        self.assertEqual(ARS443.order, 3)
        self.assertTrue(ARS443.stiffly_accurate)
        self.assertFalse(np.any(ARS443.implicit[:, 0]))

    def testAbscissae(self):
        exp = [0.0, 0.5, 2 / 3, 0.5, 1.0]

        np.testing.assert_allclose(ARS443.c_explicit, exp, atol=1e-15)
        np.testing.assert_allclose(ARS443.c_implicit, exp, atol=1e-15)

    def testOrderConditions(self):
        res = ARS443.order_conditions()

        self.assertEqual(sorted(res), ["1", "2", "3"])

        for residuals in res.values():
            for r in residuals:
                self.assertLess(abs(r), 1e-14)

    def testInvalid(self):
        d = ARS443.as_dict()

        explicit = np.array(d["explicit"])
        explicit[0, 1] = 0.5
        with self.assertRaises(ConfigurationError):
            ImexTableau(**{**d, "explicit": explicit})

        implicit = np.array(d["implicit"])
        implicit[1, 2] = 0.5
        with self.assertRaises(ConfigurationError):
            ImexTableau(**{**d, "implicit": implicit})

        implicit = np.array(d["implicit"])
        implicit[2, 2] = 0.0
        with self.assertRaises(ConfigurationError):
            ImexTableau(**{**d, "implicit": implicit})

        with self.assertRaises(ConfigurationError):
            ImexTableau(**{**d, "b_explicit": [1.0, 0.0, 0.0, 0.0]})

        with self.assertRaises(ConfigurationError):
            ImexTableau(**{**d, "b_implicit": [0.0, 0.5, 0.0, 0.0, 0.0]})

    def testForwardBackwardEuler(self):
        tab = ImexTableau("euler", [[0, 0], [1, 0]], [[0, 0], [0, 1]], [1, 0], [0, 1], 1)

        self.assertTrue(tab.stiffly_accurate)
        self.assertEqual(list(tab.order_conditions()), ["1"])

        tab = ImexTableau("midpoint", [[0, 0], [0.5, 0]], [[0, 0], [0, 0.5]], [0, 1], [0, 1], 1)

        self.assertFalse(tab.stiffly_accurate)


class TestTableauFromConfig(TestCase):

    def testName(self):
        self.assertIs(tableau_from_config("ars443"), ARS443)
        self.assertIs(tableau_from_config("ARS443"), ARS443)
        self.assertIs(tableau_from_config(ARS443), ARS443)

        with self.assertRaises(ConfigurationError):
            tableau_from_config("rk4")

    def testDictionary(self):
        res = tableau_from_config(ARS443.as_dict())

        self.assertEqual(res.name, "ars443")
        np.testing.assert_array_equal(res.explicit, ARS443.explicit)
        np.testing.assert_array_equal(res.b_implicit, ARS443.b_implicit)

        with self.assertRaises(ConfigurationError):
            tableau_from_config({"name": "broken"})
