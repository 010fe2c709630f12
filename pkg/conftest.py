import sys
from pathlib import Path

import hypothesis
import numpy as np

# src.thinhom imports resolve from the repository root, as in pipeline_runner.py
ROOT = Path(__file__).parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

np.seterr(all="warn")

hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.register_profile("default", deadline=None)
hypothesis.settings.load_profile("default")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: end-to-end reproductions, deselect with -m 'not slow'")
