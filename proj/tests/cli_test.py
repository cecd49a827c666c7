"""End-to-end tests of the gctl command line: exit codes, outputs and schemas.

usage: cli_test.py GCTL_BINARY SCHEMA_DIR
"""

import json
import pathlib
import subprocess
import sys
import tempfile
import unittest

import jsonschema

GCTL = ""
SCHEMAS = pathlib.Path()

SINGULAR_CONFIG = {
    "name": "singular",
    "state_dim": 1,
    "brownian_dim": 2,
    "control_dim": 1,
    "horizon": 1.0,
    "ambiguity": {"vertices": [[[1, 0], [0, 0]], [[0, 0], [0, 1]]]},
    "control_set": {"type": "finite", "points": [[0]]},
    "coefficients": {"b": ["0"], "sigma": [["0", "1"]], "f": "0", "phi": "x1^2"},
    "grid": {"x_lo": [-4], "x_hi": [4], "nx": [81], "nt": 20},
}


def run(*args, cwd=None):
    return subprocess.run([GCTL, *args], capture_output=True, text=True, cwd=cwd, timeout=600)


def schema(name):
    return json.loads((SCHEMAS / f"{name}.schema.json").read_text())


class Cli(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = pathlib.Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def test_list(self):
        r = run("list")
        self.assertEqual(r.returncode, 0, r.stderr)
        names = [line.split()[0] for line in r.stdout.splitlines() if line and not line.startswith(" ")]
        self.assertEqual(
            names, ["DRIFT-LINEAR", "DEGEN-VOL", "RUNCOST", "QV-COST", "GHEAT-CONVEX", "DEGEN-GHEAT"]
        )

    def test_unknown_builtin(self):
        r = run("--builtin", "DRIFTLINEAR", "solve-hjb")
        self.assertEqual(r.returncode, 2)
        self.assertIn("UnknownBuiltin", r.stderr)
        self.assertIn("DRIFT-LINEAR", r.stderr)

    def test_usage_errors(self):
        self.assertEqual(run("no-such-command").returncode, 1)
        self.assertEqual(run("solve-hjb").returncode, 1)  # no problem given
        self.assertEqual(run("--builtin", "QV-COST", "--config", "x.json", "solve-hjb").returncode, 1)
        self.assertEqual(run("--help").returncode, 0)

    def test_check_passes(self):
        out = self.tmp / "report.json"
        r = run("--builtin", "DRIFT-LINEAR", "--out", str(out), "check", "--suite", "all", "--paths", "400")
        self.assertEqual(r.returncode, 0, r.stderr)
        report = json.loads(out.read_text())
        jsonschema.validate(report, schema("check_report"))
        self.assertEqual(report["status"], "pass")
        self.assertEqual({c["suite"] for c in report["checks"]}, {"regularity", "moments", "dpp"})

    def test_check_failure_exit_code(self):
        out = self.tmp / "report.json"
        r = run("--builtin", "DEGEN-VOL", "--nx", "5", "--out", str(out), "check", "--suite", "dpp")
        self.assertEqual(r.returncode, 4, r.stderr)
        report = json.loads(out.read_text())
        jsonschema.validate(report, schema("check_report"))
        self.assertEqual(report["status"], "fail")

    def test_singular_ambiguity_is_a_config_error(self):
        cfg = self.tmp / "singular.json"
        cfg.write_text(json.dumps(SINGULAR_CONFIG))
        out = self.tmp / "report.json"
        r = run("--config", str(cfg), "--out", str(out), "check")
        self.assertEqual(r.returncode, 2)
        report = json.loads(out.read_text())
        jsonschema.validate(report, schema("check_report"))
        self.assertEqual(report["error"]["type"], "NoNondegenerateComponent")
        r = run("--config", str(cfg), "solve-hjb")
        self.assertEqual(r.returncode, 2)
        self.assertIn("NoNondegenerateComponent", r.stderr)

    def test_malformed_config(self):
        cfg = self.tmp / "bad.json"
        bad = json.loads(json.dumps(SINGULAR_CONFIG))
        bad["ambiguity"]["vertices"][1] = [[1, 0], [0, 1]]
        bad["coefficients"]["b"] = ["x1 +"]
        cfg.write_text(json.dumps(bad))
        r = run("--config", str(cfg), "solve-hjb")
        self.assertEqual(r.returncode, 2)
        self.assertIn("SyntaxError", r.stderr)
        self.assertEqual(run("--config", str(self.tmp / "missing.json"), "solve-hjb").returncode, 2)

    def test_convergence_report(self):
        for name, reference in (("DRIFT-LINEAR", "closed_form"), ("GHEAT-CONVEX", "closed_form")):
            rep = self.tmp / f"{name}.json"
            r = run("--builtin", name, "--nx", "121", "--nt", "25", "--out", str(self.tmp / "V.csv"),
                    "solve-hjb", "--convergence", "--report", str(rep))
            self.assertEqual(r.returncode, 0, r.stderr)
            doc = json.loads(rep.read_text())
            jsonschema.validate(doc, schema("convergence_report"))
            self.assertEqual(doc["reference"], reference)
        kinked = json.loads((self.tmp / "GHEAT-CONVEX.json").read_text())
        self.assertFalse(kinked["exact"])
        self.assertGreater(kinked["order"], 0.45)

    def test_dpp_policy_round_trip(self):
        policy = self.tmp / "P.csv"
        r = run("--builtin", "RUNCOST", "--nx", "121", "--nt", "20", "--out", str(self.tmp / "V.csv"),
                "solve-dpp", "--policy", str(policy))
        self.assertEqual(r.returncode, 0, r.stderr)
        header = policy.read_text().splitlines()[0].split(",")
        self.assertEqual(header, ["t", "x1", "v1", "vertex"])
        est = self.tmp / "est.json"
        r = run("--builtin", "RUNCOST", "--seed", "3", "simulate", "--x0", "0", "--policy", str(policy),
                "--paths", "500", "--steps", "20", "--report", str(est))
        self.assertEqual(r.returncode, 0, r.stderr)
        doc = json.loads(est.read_text())
        self.assertAlmostEqual(doc["value"], -0.25, delta=1e-2 + 3 * doc["std_error"])

    def test_same_seed_same_bytes(self):
        outputs = []
        for k in range(2):
            rep = self.tmp / f"est{k}.json"
            paths = self.tmp / f"paths{k}.csv"
            r = run("--builtin", "GHEAT-CONVEX", "--seed", "11", "--threads", str(1 + 3 * k), "--out", str(paths),
                    "simulate", "--x0", "0.5", "--paths", "300", "--steps", "25", "--report", str(rep))
            self.assertEqual(r.returncode, 0, r.stderr)
            outputs.append((rep.read_bytes(), paths.read_bytes()))
        self.assertEqual(outputs[0], outputs[1])
        r = run("--builtin", "GHEAT-CONVEX", "--seed", "12", "simulate", "--x0", "0.5", "--paths", "300",
                "--steps", "25", "--report", str(self.tmp / "other.json"))
        self.assertEqual(r.returncode, 0, r.stderr)
        self.assertNotEqual((self.tmp / "other.json").read_bytes(), outputs[0][0])

    def test_g_expect(self):
        r = run("--builtin", "GHEAT-CONVEX", "g-expect", "--payoff", "x2^2", "--time", "1")
        self.assertEqual(r.returncode, 0, r.stderr)
        self.assertTrue(r.stdout.startswith("E = "), r.stdout)
        self.assertAlmostEqual(float(r.stdout.split("=")[1]), 1.0, delta=2e-2)
        r = run("--builtin", "GHEAT-CONVEX", "g-expect", "--payoff", "0-y1^2-y2^2", "--times", "0.5,1", "--h", "0.1")
        self.assertEqual(r.returncode, 0, r.stderr)
        self.assertAlmostEqual(float(r.stdout.split("=")[1].split()[0]), -1.0, delta=3e-2)


if __name__ == "__main__":
    GCTL = sys.argv[1]
    SCHEMAS = pathlib.Path(sys.argv[2])
    unittest.main(argv=sys.argv[:1], verbosity=2)
