import sys
import time
import warnings
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

CONFIG_DIR = Path(__file__).resolve().parents[1] / "src" / "photosic" / "configs"
FIGURE_CONFIGS = ("fig2", "fig3a", "fig3b", "fig4a", "fig4b", "fig4c", "fig4d", "fig5",
                  "fig6b", "fig6c", "fig6d")


@pytest.fixture(scope="session")
def config_dir():
    return CONFIG_DIR


@pytest.fixture(scope="session")
def figure_runs(tmp_path_factory):
    """Every shipped figure scenario, run once per session: name -> (result, seconds)."""
    from photosic.config import parse_config
    from photosic.scenario import run_scenario

    root = tmp_path_factory.mktemp("figures")
    runs = {}
    for name in FIGURE_CONFIGS:
        cfg = parse_config(CONFIG_DIR / f"{name}.cfg")
        t0 = time.perf_counter()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = run_scenario(cfg, root / name)
        runs[name] = (res, time.perf_counter() - t0)
    return runs
