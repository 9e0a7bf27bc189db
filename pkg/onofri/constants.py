import os
from pathlib import Path

ROOT_DIR = Path(__file__).resolve().parents[1]
DATA_DIR = ROOT_DIR / "data"
CONFIG_FILE = DATA_DIR / "experiments.yaml"
FIXTURES_DIR = DATA_DIR / "fixtures"

OUTPUT_ENV_VAR = "ONOFRI_OUT"
DEFAULT_OUTPUT_DIR = Path("out")

COMMANDS = (
    "identities",
    "duality",
    "deficit",
    "lemma1",
    "epsilon",
    "fd-evolve",
    "minimize",
    "corollary",
    "sphere",
)

DEFAULT_SETTINGS = {
    "n": 2,
    "R": [1.0],
    "resolution": 128,
    "angular_resolution": 128,
    "seed": 0,
    "trials": 20,
    "large_radius": 1.0e6,
    "t_final": 20.0,
    "dt": 0.01,
    "plot": False,
    "xlsx": False,
}

DEFAULT_TOLERANCES = {
    "identity": 1e-8,
    "constant": 1e-12,
    "gap": 1e-8,
    "deficit": 1e-8,
    "lemma1": 1e-6,
    "epsilon": 1e-6,
    "corollary": 1e-8,
    "sharp_corollary": 1e-6,
    "sphere": 1e-6,
    "mass": 1e-10,
    "distance": 1e-3,
    "minimizer_norm": 1e-3,
    "multiplier": 1e-2,
    "euler_lagrange": 1e-3,
}

MIN_RESOLUTION = 32
SLOW_RESOLUTION = 1024
MANY_TRIALS = 1000

MAX_FIELD_AMPLITUDE = 30.0
# exp overflows a double just above 709
EXP_LIMIT = 700.0
SCALE_BRACKET = 50.0
DENSITY_FLOOR = 1e-12
ZERO_TRACE_TOL = 1e-12


def default_output_dir() -> Path:
    value = os.environ.get(OUTPUT_ENV_VAR)
    return Path(value) if value else DEFAULT_OUTPUT_DIR
