import sys
from pathlib import Path

import numpy as np
import pytest

from dir_intent import tensor as tn
from dir_intent.synthetic import SyntheticSpec, write


@pytest.fixture(autouse=True)
def _float64():
    tn.set_default_dtype("float64")
    tn.set_debug(False)
    yield
    tn.set_default_dtype("float64")
    tn.set_debug(False)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def param(rng, *shape, lo=-2.0, hi=2.0):
    return tn.Tensor(rng.uniform(lo, hi, size=shape), requires_grad=True)


SMALL_CONFIG = {
    "method": "linear",
    "extractor": "mean-pool-tanh",
    "d_h": 16,
    "epochs": 30,
    "batch_size": 16,
    "learning_rate": 0.01,
    "lof_k": 10,
}


def write_config(path: Path, data_dir: Path, **overrides) -> Path:
    import yaml

    cfg = {"dataset": str(data_dir / "data.jsonl"), "labels": str(data_dir / "labels.json"),
           "embeddings": str(data_dir / "embeddings.txt"), **SMALL_CONFIG, **overrides}
    path.write_text(yaml.safe_dump(cfg), encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def synthetic_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("synthetic")
    write(SyntheticSpec(), d)
    return d


@pytest.fixture(scope="session")
def small_synthetic_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("small")
    write(SyntheticSpec(per_intent=24, dim=8), d)
    return d


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = list(getattr(module, "RESULTS", []))
    for rep in terminalreporter.stats.get("skipped", []):
        name = getattr(rep, "nodeid", "").rsplit("::", 1)[-1]
        if name.startswith("test_criterion_"):
            number = name.split("_")[2]
            reason = rep.longrepr[2] if isinstance(rep.longrepr, tuple) else str(rep.longrepr)
            lines.append(f"criterion {number}: SKIP ({reason.removeprefix('Skipped: ')})")
    if lines:
        terminalreporter.section("acceptance")
        for line in sorted(lines):
            terminalreporter.write_line(line)
