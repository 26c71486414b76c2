import io
import os
import shutil
import tempfile
import unittest
import contextlib
from unittest import mock

import numpy as np

from ..cli import RunConfig, UsageError, main, report_ages
from ..csvio import parse_csv, read_tsv, write_csv
from .fixtures import simulated


def run(*argv):
    stderr = io.StringIO()
    with contextlib.redirect_stderr(stderr):
        status = main(list(argv))
    return status, stderr.getvalue()


class TestCommands(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.mkdtemp()
        cls.families = os.path.join(cls.tmp, "families.csv")
        ds, _ = simulated(n1=150, J=2, seed=21)
        write_csv(ds, cls.families)

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.tmp)

    def path(self, name):
        return os.path.join(self.tmp, name)

    def table(self, name):
        with open(self.path(name)) as stream:
            return read_tsv(stream)

    def test_simulate_counts_and_determinism(self):
        args = ["simulate", "--n1", "500", "--ratio", "1", "--relatives", "1", "--seed", "7"]
        self.assertEqual(run(*(args + ["--output", self.path("sim_a.csv")]))[0], 0)
        self.assertEqual(run(*(args + ["--output", self.path("sim_b.csv")]))[0], 0)

        ds = parse_csv(self.path("sim_a.csv"))
        self.assertEqual(len(ds), 1000)
        self.assertEqual(ds.columns.relative_times.size, 1000)

        with open(self.path("sim_a.csv"), "rb") as a, open(self.path("sim_b.csv"), "rb") as b:
            self.assertEqual(a.read(), b.read())

        columns, rows = self.table("sim_a.csv.truth.tsv")
        self.assertEqual(columns, ["t", "survival"])
        self.assertEqual(rows[0], [0.0, 1.0])

    def test_estimate_report(self):
        status, _ = run("estimate", "--input", self.families, "--bandwidth", "0.5", "--output", self.path("est.tsv"))
        self.assertEqual(status, 0)

        columns, rows = self.table("est.tsv")
        self.assertEqual(columns, ["t", "lambda_hat", "s_hat", "s_tilde", "naive_km"])

        ds = parse_csv(self.families)
        start = np.floor(np.percentile(ds.columns.proband_times, 5))
        self.assertEqual(rows[0][0], start)
        self.assertEqual(rows[1][0] - rows[0][0], 2.0)
        with open(self.path("est.tsv")) as stream:
            self.assertTrue(stream.readline().startswith("# config "))

    def test_estimate_with_bands(self):
        status, _ = run(
            "estimate", "--input", self.families, "--bandwidth", "0.5", "--ci", "--b-outer", "20",
            "--s-grid", "41", "--u-grid", "80", "--output", self.path("est_ci.tsv")
        )
        self.assertEqual(status, 0)
        columns, rows = self.table("est_ci.tsv")
        self.assertEqual(columns[-4:], ["se", "lower", "upper", "naive_se"])
        self.assertTrue(all(row[-3] <= row[-2] for row in rows))
        self.assertTrue(all(row[-1] >= 0 for row in rows))
        self.assertTrue(any(row[-1] > 0 for row in rows))

    def test_estimate_writes_surfaces(self):
        status, _ = run(
            "estimate", "--input", self.families, "--bandwidth", "0.5", "--s-grid", "11", "--u-grid", "25",
            "--output", self.path("est_s.tsv"), "--surfaces", self.path("surfaces.tsv")
        )
        self.assertEqual(status, 0)

        columns, rows = self.table("surfaces.tsv")
        self.assertEqual(columns, ["u", "s", "S0", "S1", "Lam0star"])
        self.assertEqual(len(rows), 11 * 25)
        self.assertEqual(rows[0][:4], [0.0, 0.0, 1.0, 1.0])
        self.assertEqual(rows[-1][1], 1.0)
        self.assertTrue(all(0.0 <= row[2] <= 1.0 and 0.0 <= row[3] <= 1.0 for row in rows))
        with open(self.path("surfaces.tsv")) as stream:
            head = [stream.readline() for _ in range(2)]
        self.assertTrue(head[0].startswith("# config "))
        self.assertEqual(head[1], "# bandwidth 0.5\n")

    def test_select_bandwidth(self):
        status, _ = run(
            "select-bandwidth", "--input", self.families, "--b-inner", "2",
            "--s-grid", "31", "--u-grid", "60", "--t-grid", "40", "--output", self.path("imse.tsv")
        )
        self.assertEqual(status, 0)
        columns, rows = self.table("imse.tsv")
        self.assertEqual(columns, ["h", "imse", "selected"])
        self.assertEqual(sum(row[2] for row in rows), 1.0)

    def test_oracle_check(self):
        status, _ = run("oracle-check", "--output", self.path("oracle.tsv"))
        self.assertEqual(status, 0)
        with open(self.path("oracle.tsv")) as stream:
            lines = stream.read().splitlines()
        self.assertEqual(lines[1].split("\t"), ["frailty", "tau", "max_abs_error", "tolerance", "passed"])
        self.assertEqual(lines[2].split("\t")[-1], "1")

    def test_empty_input(self):
        empty = self.path("empty.csv")
        open(empty, "w").close()
        status, stderr = run("estimate", "--input", empty, "--bandwidth", "0.5", "--output", self.path("x.tsv"))
        self.assertEqual(status, 1)
        self.assertIn("casekin: error: EmptyDataset:", stderr)

    def test_missing_input(self):
        status, stderr = run("ci", "--input", self.path("nope.csv"), "--bandwidth", "0.5")
        self.assertEqual(status, 1)
        self.assertIn("FileNotFoundError", stderr)

    def test_invalid_level_is_a_usage_error(self):
        status, stderr = run("ci", "--input", self.families, "--bandwidth", "0.5", "--level", "1.5")
        self.assertEqual(status, 2)
        self.assertIn("level", stderr)

    def test_estimation_failures_are_not_usage_errors(self):
        with mock.patch("casekin.cli.estimate_marginal", side_effect=ValueError("values must be nonincreasing")):
            status, stderr = run("estimate", "--input", self.families, "--bandwidth", "0.5", "--output", self.path("y.tsv"))
        self.assertEqual(status, 1)
        self.assertIn("ValueError: values must be nonincreasing", stderr)

    def test_invalid_settings_are_usage_errors(self):
        for argv in (
            ["ci", "--input", self.families, "--b-outer", "5"],
            ["select-bandwidth", "--input", self.families, "--b-inner", "1"],
            ["estimate", "--input", self.families, "--s-grid", "1"],
            ["simulate", "--n1", "0"],
            ["simulate", "--tau", "1.0"],
            ["simulate", "--event-rate", "0"],
            ["simulate", "--seed", "-3"]
        ):
            status, stderr = run(*argv)
            self.assertEqual(status, 2, argv)
            self.assertIn("UsageError", stderr)

    def test_argument_errors(self):
        with contextlib.redirect_stderr(io.StringIO()):
            with self.assertRaises(SystemExit) as context:
                main(["estimate"])
            self.assertEqual(context.exception.code, 2)

            with self.assertRaises(SystemExit) as context:
                main(["estimate", "--input", self.families, "--bandwidth", "1.5"])
            self.assertEqual(context.exception.code, 2)


class TestRunConfig(unittest.TestCase):
    def test_input_is_required(self):
        self.assertRaises(UsageError, RunConfig, command="estimate")
        self.assertRaises(UsageError, RunConfig, command="plot")

    def test_config_errors_are_usage_errors(self):
        self.assertRaises(UsageError, RunConfig, command="estimate", input="x.csv", bandwidth=0.0)
        self.assertRaises(UsageError, RunConfig, command="ci", input="x.csv", level=1.5)
        self.assertRaises(UsageError, RunConfig, command="simulate", frailty="lognormal")
        self.assertRaises(UsageError, RunConfig, command="simulate", scenario="medium")
        self.assertEqual(RunConfig(command="estimate", input="x.csv", surfaces="s.tsv").surfaces, "s.tsv")

    def test_scenario_targets(self):
        self.assertEqual(RunConfig(command="simulate", scenario="low").targets(), (0.15, 0.90))
        self.assertEqual(RunConfig(command="simulate", event_rate=0.3).targets(), (0.3, 0.60))

    def test_fingerprint_depends_on_seed(self):
        a = RunConfig(command="simulate", seed=1)
        b = RunConfig(command="simulate", seed=2)
        self.assertNotEqual(a.fingerprint(), b.fingerprint())
        self.assertEqual(a.fingerprint(), RunConfig(command="simulate", seed=1).fingerprint())

    def test_report_ages_step_two_years(self):
        ds, _ = simulated(n1=40, J=1, seed=3)
        ages = report_ages(ds).points
        self.assertTrue(np.allclose(np.diff(ages), 2.0))
        self.assertLessEqual(ages[-1], ds.tau0)
