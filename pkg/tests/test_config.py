import os
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

from onofri.config import load_config, parse_tolerance_overrides
from onofri.constants import CONFIG_FILE, DEFAULT_TOLERANCES, OUTPUT_ENV_VAR
from onofri.validate import ValidationError, validate_config, validate_experiment


def write_config(path: Path, content: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(content)
    return path


class LoadConfigTests(unittest.TestCase):
    def test_flags_override_sections_override_top_level(self) -> None:
        with tempfile.TemporaryDirectory() as tmpdir:
            path = write_config(
                Path(tmpdir) / "config.yaml",
                "n: 3\nR: [1.0]\nseed: 4\ntrials: 7\n"
                "deficit:\n  trials: 9\n  R: [2.0, 5.0]\n"
                "tolerances:\n  deficit: 1.0e-9\n",
            )
            config = load_config(path, "deficit", {"seed": 11, "trials": None})
            self.assertEqual(config.n, 3)
            self.assertEqual(config.R, [2.0, 5.0])
            self.assertEqual(config.trials, 9)
            self.assertEqual(config.seed, 11)
            self.assertEqual(config.tolerance("deficit"), 1e-9)
            self.assertEqual(config.tolerance("gap"), DEFAULT_TOLERANCES["gap"])
            self.assertEqual(config.source, path)

            other = load_config(path, "lemma1")
            self.assertEqual(other.trials, 7)
            self.assertEqual(other.R, [1.0])

    def test_repository_defaults(self) -> None:
        deficit = load_config(CONFIG_FILE, "deficit", {})
        self.assertEqual((deficit.R, deficit.trials), ([50.0], 100))
        minimize = load_config(CONFIG_FILE, "minimize", {})
        self.assertEqual((minimize.R, minimize.resolution), ([1.0], 128))

    def test_scalar_radius_and_tolerance_overrides(self) -> None:
        with tempfile.TemporaryDirectory() as tmpdir:
            path = write_config(Path(tmpdir) / "config.yaml", "R: 2\n")
            config = load_config(path, "identities", {"tolerances": {"identity": 1e-6}})
            self.assertEqual(config.R, [2.0])
            self.assertEqual(config.tolerance("identity"), 1e-6)

    def test_output_directory_precedence(self) -> None:
        with tempfile.TemporaryDirectory() as tmpdir:
            path = write_config(Path(tmpdir) / "config.yaml", "n: 2\n")
            with patch.dict(os.environ, {OUTPUT_ENV_VAR: str(Path(tmpdir) / "env")}):
                self.assertEqual(load_config(path).output_dir, Path(tmpdir) / "env")
                flagged = load_config(path, overrides={"output_dir": str(Path(tmpdir) / "flag")})
                self.assertEqual(flagged.output_dir, Path(tmpdir) / "flag")
            with patch.dict(os.environ, {}, clear=True):
                self.assertEqual(load_config(path).output_dir, Path("out"))

    def test_malformed_values(self) -> None:
        with tempfile.TemporaryDirectory() as tmpdir:
            path = write_config(Path(tmpdir) / "config.yaml", "n: 2.5\n")
            with self.assertRaises(ValueError):
                load_config(path)
            write_config(path, "- just\n- a list\n")
            with self.assertRaises(ValueError):
                load_config(path)
            write_config(path, "plot: maybe\n")
            with self.assertRaises(ValueError):
                load_config(path)
        with self.assertRaises(ValueError):
            load_config(None, "fixture-check")

    def test_tolerance_override_parsing(self) -> None:
        self.assertEqual(parse_tolerance_overrides(None), {})
        self.assertEqual(parse_tolerance_overrides(["gap = 1e-6", "mass=0"]), {"gap": 1e-6, "mass": 0.0})
        for bad in ("gap", "=1e-6", "gap=small"):
            with self.subTest(item=bad):
                with self.assertRaises(ValueError):
                    parse_tolerance_overrides([bad])


class ValidationTests(unittest.TestCase):
    def test_reported_errors(self) -> None:
        with tempfile.TemporaryDirectory() as tmpdir:
            path = write_config(
                Path(tmpdir) / "config.yaml",
                "n: 1\nR: [1.0, -2.0]\nresolution: 16\ntrials: 0\ncolour: blue\n"
                "tolerances:\n  bogus: 1.0\n  gap: -1.0\n",
            )
            result, _ = validate_experiment("sphere", path)
        self.assertEqual(
            result.errors,
            [
                "n must be >= 2, got 1",
                "R must be > 0, got -2.0",
                "resolution must be >= 32, got 16",
                "trials must be >= 1, got 0",
                "Unknown tolerance key: bogus",
                "Tolerance gap must be >= 0, got -1.0",
                "Unknown config key: colour",
                "sphere is only defined for n = 2",
            ],
        )
        self.assertEqual(result.warnings, [])

    def test_slow_settings_warn(self) -> None:
        with tempfile.TemporaryDirectory() as tmpdir:
            path = write_config(Path(tmpdir) / "config.yaml", "n: 3\nresolution: 2048\ntrials: 5000\n")
            result, config = validate_experiment("identities", path)
        self.assertEqual(result.errors, [])
        self.assertEqual(
            result.warnings,
            [
                "resolution 2048 exceeds 1024; runs will be slow",
                "trials 5000 exceeds 1000; runs will be slow",
            ],
        )
        self.assertEqual(validate_config(config).warnings, result.warnings)

    def test_planar_only_commands(self) -> None:
        with tempfile.TemporaryDirectory() as tmpdir:
            path = write_config(Path(tmpdir) / "config.yaml", "n: 3\n")
            for command in ("fd-evolve", "minimize", "sphere"):
                result, _ = validate_experiment(command, path)
                with self.subTest(command=command):
                    self.assertEqual(result.errors, [f"{command} is only defined for n = 2"])
            result, _ = validate_experiment("lemma1", path)
            self.assertEqual(result.errors, [])

    def test_missing_file(self) -> None:
        with tempfile.TemporaryDirectory() as tmpdir:
            with self.assertRaises(ValidationError) as ctx:
                validate_experiment("identities", Path(tmpdir) / "absent.yaml")
        self.assertIn("Config file not found", ctx.exception.result.errors[0])


if __name__ == "__main__":
    unittest.main()
