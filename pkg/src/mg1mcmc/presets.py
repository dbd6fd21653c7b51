"""Scenario settings for the three reference data sets."""

from .kernels import TuningParams
from .model import Parameters

SCENARIOS = ("frequent", "intermediate", "rare")

TRUE_THETA = {
    "frequent": Parameters(8.0, 16.0, 0.15),
    "intermediate": Parameters(4.0, 7.0, 0.15),
    "rare": Parameters(1.0, 2.0, 0.01),
}

TUNING = {
    "frequent": TuningParams(
        met_prop_sd=(0.1191, 0.1679, 0.2136), met_repeats=1, sigma2_shift=0.3, c_range=1.008, c_rate=1.7
    ),
    "intermediate": TuningParams(
        met_prop_sd=(0.0764, 0.1093, 0.1441), met_repeats=16, sigma2_shift=0.2, c_range=1.03, c_rate=1.004
    ),
    "rare": TuningParams(
        met_prop_sd=(0.0655, 0.2071, 0.1403), met_repeats=16, sigma2_shift=2.0, c_range=1.4, c_rate=1.00005
    ),
}

# millions of iterations per run, per scheme
RUN_LENGTHS = {
    "frequent": {"basic": 20.0, "shift": 10.8, "range": 10.8, "rate": 9.6, "all": 5.1},
    "intermediate": {"basic": 5.2, "shift": 4.2, "range": 4.2, "rate": 4.0, "all": 2.9},
    "rare": {"basic": 5.2, "shift": 4.2, "range": 4.2, "rate": 4.0, "all": 2.9},
}

# reference posterior means of (eta1, eta2, eta3), Basic + All row
REFERENCE_MEANS = {
    "frequent": (7.9293, 7.9100, -1.4834),
    "intermediate": (3.9612, 2.9865, -1.7316),
    "rare": (1.7003, 4.2846, -4.4549),
}

# diffuse-posterior settings for tiny synthetic data sets (n <= 3)
SMALL_DATA_TUNING = TuningParams(
    met_prop_sd=(1.0, 2.0, 0.8), met_repeats=4, sigma2_shift=1.0, c_range=1.5, c_rate=1.5
)


def get_tuning(name):
    try:
        return TUNING[name]
    except KeyError:
        raise ValueError(f"no tuning preset {name!r}; choose from {SCENARIOS}") from None


def run_length(scenario, scheme, scale=1.0):
    return max(1, int(round(RUN_LENGTHS[scenario][scheme] * 1e6 * scale)))
