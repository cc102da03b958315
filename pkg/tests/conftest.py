import os
from pathlib import Path
import sys

import pytest

os.environ["KMS_GRAPH_THREADS"] = "1"

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from kmsgraph.models import Graph  # noqa: E402
from kmsgraph.seed import demo_graph  # noqa: E402

DATA_DIR = ROOT / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture
def chains() -> Graph:
    return demo_graph("chains")


@pytest.fixture
def subcritical() -> Graph:
    return demo_graph("subcritical")


@pytest.fixture
def loops() -> Graph:
    return demo_graph("loops")
