"""End-to-end checks of the fracmanifold executable.

Usage: python3 test_cli.py <path-to-fracmanifold> <repo-root>
"""
import csv
import json
import math
import os
import subprocess
import sys
import tempfile
import unittest

import jsonschema

EXE = None
ROOT = None


def schema(name):
    with open(os.path.join(ROOT, "schemas", name)) as fh:
        return json.load(fh)


def run(*args, check=True):
    p = subprocess.run([EXE, *args], capture_output=True, text=True)
    if check and p.returncode != 0:
        raise AssertionError(f"{args} exited {p.returncode}: {p.stderr}")
    return p


def system(name):
    return os.path.join(ROOT, "systems", name)


class Files(unittest.TestCase):
    def test_shipped_systems_match_schema(self):
        s = schema("system.schema.json")
        for name in sorted(os.listdir(os.path.join(ROOT, "systems"))):
            with open(system(name)) as fh:
                jsonschema.validate(json.load(fh), s)

    def test_schemas_are_valid(self):
        for name in sorted(os.listdir(os.path.join(ROOT, "schemas"))):
            jsonschema.Draft202012Validator.check_schema(schema(name))


class MlEval(unittest.TestCase):
    def test_erfc_value(self):
        out = json.loads(run("ml", "eval", "--alpha", "0.5", "--re", "-1").stdout)
        jsonschema.validate(out, schema("ml_eval.schema.json"))
        self.assertAlmostEqual(out["value"][0], math.e * math.erfc(1.0), delta=1e-13)

    def test_methods(self):
        s = run("ml", "eval", "--alpha", "0.5", "--re", "-1", "--method", "series").stdout
        self.assertEqual(json.loads(s)["method"], "series")
        a = json.loads(run("ml", "eval", "--alpha", "0.5", "--re", "-50", "--method", "asymptotic",
                           "--terms", "2").stdout)
        self.assertEqual(a["method"], "asymptotic_exterior")
        self.assertAlmostEqual(a["value"][0], 1.0 / (50.0 * math.sqrt(math.pi)), delta=1e-15)

    def test_bad_alpha_is_validation_error(self):
        p = run("ml", "eval", "--alpha", "1.5", "--re", "1", check=False)
        self.assertEqual(p.returncode, 2)
        self.assertIn("alpha", p.stderr)


class Spectrum(unittest.TestCase):
    def test_example_system(self):
        out = json.loads(run("spectrum", "--system", system("example_alpha05.json")).stdout)
        jsonschema.validate(out, schema("spectrum.schema.json"))
        self.assertEqual(out["k"], 1)
        lams = sorted(e["lambda"][0] for e in out["eigenvalues"])
        self.assertEqual(lams, [-2.0, 2.0])
        self.assertEqual(out["eigenvalues"][0]["classification"], "unstable")

    def test_malformed_json(self):
        with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
            fh.write('{"alpha": 0.5, "A": [[1, 2], [3')
        p = run("spectrum", "--system", fh.name, check=False)
        os.unlink(fh.name)
        self.assertEqual(p.returncode, 2)
        self.assertIn("byte", p.stderr)

    def test_field_errors_are_named(self):
        cases = [
            ({"alpha": 1.2, "A": [[1.0]]}, "alpha"),
            ({"alpha": 0.5, "A": [[1.0, 0.0]]}, "A[0]"),
            ({"alpha": 0.5, "A": [[-1.0, 0.0], [0.0, 1.0]], "f": [{"out": 0, "coeff": 1.0, "powers": [1, 0]}]}, "f"),
            ({"alpha": 0.5, "A": [[-1.0, 0.0], [0.0, 1.0]], "f": [{"out": 5, "coeff": 1.0, "powers": [2, 0]}]}, "f[0]"),
        ]
        for doc, field in cases:
            with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
                json.dump(doc, fh)
            p = run("spectrum", "--system", fh.name, check=False)
            os.unlink(fh.name)
            self.assertEqual(p.returncode, 2, doc)
            self.assertIn(field, p.stderr)

    def test_not_hyperbolic_is_numerical_failure(self):
        with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
            json.dump({"alpha": 0.5, "A": [[0.0, 0.0], [0.0, 0.0]]}, fh)
        p = run("spectrum", "--system", fh.name, check=False)
        os.unlink(fh.name)
        self.assertEqual(p.returncode, 3)
        self.assertIn("zero", p.stderr)

    def test_unknown_flag(self):
        self.assertEqual(run("spectrum", "--bogus", check=False).returncode, 2)

    def test_help(self):
        for sub in ("ml", "spectrum", "manifold", "solve", "verify", "counterexample"):
            self.assertEqual(run(sub, "--help", check=False).returncode, 0)


class Pipeline(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.graph = os.path.join(cls.tmp.name, "graph.csv")
        cls.sys = system("example_alpha08.json")
        cls.diag = json.loads(run("manifold", "--system", cls.sys, "--samples", "21", "--out", cls.graph,
                                  "--diagnostics").stdout)

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def test_diagnostics(self):
        jsonschema.validate(self.diag, schema("manifold_diagnostics.schema.json"))
        d = self.diag
        self.assertLessEqual(d["measured_contraction_ratio"], 2.0 / 3.0 + 0.05)
        self.assertAlmostEqual(d["delta"] * d["C_est"], 1.0 / 3.0, delta=1e-12)
        self.assertAlmostEqual(d["r"], d["r_star"] / (3.0 * d["ml_sup"]), delta=1e-15)
        self.assertLessEqual(d["max_lipschitz_quotient"], d["lipschitz_bound"])

    def test_graph_columns(self):
        with open(self.graph) as fh:
            rows = list(csv.DictReader(fh))
        self.assertEqual(len(rows), 21)
        for key in ("xs_0", "w_0", "iterations", "residual", "x_0", "x_1"):
            self.assertIn(key, rows[0])
        zero = [r for r in rows if float(r["xs_0"]) == 0.0]
        self.assertEqual(len(zero), 1)
        self.assertEqual(float(zero[0]["w_0"]), 0.0)

    def test_deterministic(self):
        again = os.path.join(self.tmp.name, "again.csv")
        d2 = run("manifold", "--system", self.sys, "--samples", "21", "--out", again, "--diagnostics").stdout
        self.assertEqual(json.loads(d2), self.diag)
        with open(self.graph, "rb") as a, open(again, "rb") as b:
            self.assertEqual(a.read(), b.read())

    def test_round_trip_decays(self):
        out = json.loads(run("verify", "--system", self.sys, "--points", self.graph, "--shrink", "0.1").stdout)
        jsonschema.validate(out, schema("verify.schema.json"))
        self.assertEqual(out["summary"], {"decays": 21, "escapes": 0, "inconclusive": 0})

    def test_perturbed_points_escape(self):
        out = json.loads(run("verify", "--system", self.sys, "--points", self.graph, "--perturb", "0.01").stdout)
        self.assertEqual(out["summary"]["escapes"], 21)

    def test_threads_do_not_change_output(self):
        one = os.path.join(self.tmp.name, "one.csv")
        env = dict(os.environ, FRACMANIFOLD_THREADS="3")
        subprocess.run([EXE, "manifold", "--system", self.sys, "--samples", "21", "--out", one], check=True, env=env)
        with open(self.graph, "rb") as a, open(one, "rb") as b:
            self.assertEqual(a.read(), b.read())


class Solve(unittest.TestCase):
    def test_linear_stable_coordinate(self):
        with tempfile.TemporaryDirectory() as tmp:
            sysf = os.path.join(tmp, "lin.json")
            with open(sysf, "w") as fh:
                json.dump({"alpha": 0.5, "A": [[-2.0, 0.0], [0.0, 2.0]]}, fh)
            out = os.path.join(tmp, "traj.csv")
            run("solve", "--system", sysf, "--x0", "1,0", "--T", "1", "--N", "512", "--out", out)
            with open(out) as fh:
                rows = list(csv.DictReader(fh))
            self.assertEqual(float(rows[0]["t"]), 0.0)
            self.assertEqual(float(rows[0]["x_0"]), 1.0)
            # E_{1/2}(-2) = e^4 erfc(2)
            self.assertAlmostEqual(float(rows[-1]["x_0"]), math.exp(4.0) * math.erfc(2.0), delta=1e-4)
            self.assertEqual(float(rows[-1]["x_1"]), 0.0)

    def test_escape_is_numerical_failure(self):
        with tempfile.TemporaryDirectory() as tmp:
            p = run("solve", "--system", system("example_alpha05.json"), "--x0", "0.01,0.01", "--T", "20",
                    "--out", os.path.join(tmp, "t.csv"), check=False)
            self.assertEqual(p.returncode, 3)

    def test_x0_shape(self):
        p = run("solve", "--system", system("example_alpha05.json"), "--x0", "0.01", check=False)
        self.assertEqual(p.returncode, 2)
        self.assertIn("--x0", p.stderr)


class Counterexample(unittest.TestCase):
    def test_report(self):
        with tempfile.TemporaryDirectory() as tmp:
            out = os.path.join(tmp, "report.json")
            run("counterexample", "--alpha", "0.5", "--report", out)
            with open(out) as fh:
                rep = json.load(fh)
        jsonschema.validate(rep, schema("counterexample.schema.json"))
        self.assertTrue(rep["verdict"]["refutation_holds"])
        for g in rep["gaps"]:
            self.assertAlmostEqual(g["entrywise_gap"][1][1], 3.0, delta=0.03)


if __name__ == "__main__":
    EXE, ROOT = sys.argv[1], sys.argv[2]
    unittest.main(argv=[sys.argv[0], "-v"])
