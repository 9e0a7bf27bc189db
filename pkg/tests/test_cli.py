import io
import json
import tempfile
import unittest
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path
from unittest.mock import patch

from onofri import densities
from onofri.cli import main as cli_main


def run_cli(argv):
    out = io.StringIO()
    err = io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        exit_code = cli_main(argv)
    return exit_code, out.getvalue(), err.getvalue()


class CommandTests(unittest.TestCase):
    def test_identities_pass(self) -> None:
        with tempfile.TemporaryDirectory() as tmpdir:
            exit_code, out, err = run_cli(["identities", "--R", "1", "2", "--out", tmpdir])
            self.assertEqual(exit_code, 0, err)
            self.assertIn("0 failed", out)
            self.assertTrue((Path(tmpdir) / "identities.csv").exists())
            self.assertTrue((Path(tmpdir) / "identities.jsonl").exists())

    def test_duality_records_every_trial(self) -> None:
        with tempfile.TemporaryDirectory() as tmpdir:
            argv = ["duality", "--R", "1", "--resolution", "64", "--trials", "3", "--seed", "7", "--out", tmpdir]
            exit_code, _, err = run_cli(argv)
            self.assertEqual(exit_code, 0, err)
            lines = (Path(tmpdir) / "duality.jsonl").read_text().splitlines()
            self.assertEqual(len(lines), 4)
            header = json.loads(lines[0])["config"]
            self.assertEqual((header["seed"], header["trials"], header["R"]), (7, 3, [1.0]))
            self.assertEqual([json.loads(line)["trial"] for line in lines[1:]], [0, 1, 2])

    def test_outputs_repeat_byte_for_byte(self) -> None:
        with tempfile.TemporaryDirectory() as tmpdir:
            contents = []
            for name in ("a", "b"):
                out_dir = Path(tmpdir) / name
                argv = ["deficit", "--R", "1", "--resolution", "64", "--trials", "4", "--out", str(out_dir)]
                exit_code, _, err = run_cli(argv)
                self.assertEqual(exit_code, 0, err)
                contents.append(
                    [(out_dir / f).read_bytes() for f in ("deficit.csv", "deficit.jsonl", "deficits.csv")]
                )
            self.assertEqual(contents[0], contents[1])

    def test_failed_check_sets_exit_code(self) -> None:
        real_theta = densities.theta
        with tempfile.TemporaryDirectory() as tmpdir:
            with patch("onofri.densities.theta", side_effect=lambda R, d: 1.01 * real_theta(R, d)):
                exit_code, out, err = run_cli(["identities", "--R", "1", "--out", tmpdir])
        self.assertEqual(exit_code, 1)
        self.assertIn("FAIL theta_mass", err)
        self.assertNotIn(" 0 failed", out)

    def test_plot_and_workbook(self) -> None:
        with tempfile.TemporaryDirectory() as tmpdir:
            argv = ["epsilon", "--R", "1", "--resolution", "64", "--trials", "2", "--plot", "--xlsx", "--out", tmpdir]
            exit_code, out, err = run_cli(argv)
            self.assertEqual(exit_code, 0, err)
            self.assertTrue((Path(tmpdir) / "epsilon.xlsx").exists())
            self.assertTrue((Path(tmpdir) / "epsilon_mu_2_R1.svg").exists())
            self.assertIn("Wrote", out)


class UsageErrorTests(unittest.TestCase):
    def test_unknown_flag(self) -> None:
        exit_code, _, _ = run_cli(["identities", "--colour", "blue"])
        self.assertEqual(exit_code, 2)

    def test_unknown_tolerance_key(self) -> None:
        with tempfile.TemporaryDirectory() as tmpdir:
            exit_code, _, err = run_cli(["deficit", "--tol", "bogus=1e-3", "--out", tmpdir])
        self.assertEqual(exit_code, 1)
        self.assertIn("ERROR: Unknown tolerance key: bogus", err)

    def test_malformed_tolerance(self) -> None:
        exit_code, _, err = run_cli(["deficit", "--tol", "bogus"])
        self.assertEqual(exit_code, 2)
        self.assertIn("KEY=VALUE", err)

    def test_planar_only_command(self) -> None:
        exit_code, _, err = run_cli(["sphere", "--n", "3"])
        self.assertEqual(exit_code, 1)
        self.assertIn("sphere is only defined for n = 2", err)

    def test_unwritable_output(self) -> None:
        with tempfile.TemporaryDirectory() as tmpdir:
            blocker = Path(tmpdir) / "file"
            blocker.write_text("not a directory")
            exit_code, _, err = run_cli(["identities", "--R", "1", "--out", str(blocker)])
        self.assertEqual(exit_code, 2)
        self.assertIn("Cannot write outputs", err)


class FixtureCheckTests(unittest.TestCase):
    def test_fixture_check_requires_a_selection(self) -> None:
        exit_code, _, err = run_cli(["fixture-check"])
        self.assertEqual(exit_code, 1)
        self.assertIn("--name or --all", err)

    def test_unknown_fixture(self) -> None:
        exit_code, _, err = run_cli(["fixture-check", "--name", "no_such_fixture"])
        self.assertEqual(exit_code, 1)
        self.assertIn("No fixture named", err)

    def test_validation_fixture(self) -> None:
        with tempfile.TemporaryDirectory() as tmpdir:
            exit_code, out, err = run_cli(["fixture-check", "--name", "invalid_dimension", "--out", tmpdir])
        self.assertEqual(exit_code, 0, err)
        self.assertIn("OK fixture invalid_dimension", out)

    def test_fixture_check_all(self) -> None:
        with tempfile.TemporaryDirectory() as tmpdir:
            exit_code, out, err = run_cli(["fixture-check", "--all", "--out", tmpdir, "--clean"])
            self.assertEqual(exit_code, 0, err)
            self.assertIn("Fixture summary", out)
            self.assertIn("Removed", out)
            leftovers = [path for path in Path(tmpdir).rglob("*") if path.is_file()]
            self.assertEqual(leftovers, [])


if __name__ == "__main__":
    unittest.main()
