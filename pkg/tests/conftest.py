from pathlib import Path

import numpy as np

from ringmatch.geometry import PointPattern

REPO_ROOT = Path(__file__).resolve().parents[1]
HOUSE_DIR = REPO_ROOT / "data" / "house_synthetic"


def random_pattern(seed, n, scale=1.0):
    """Uniform points in [0, scale]^2; resampled once if degenerate is fine
    for test purposes (collinearity has measure zero)."""
    rng = np.random.default_rng(seed)
    return PointPattern(rng.uniform(0.0, scale, size=(n, 2)))
