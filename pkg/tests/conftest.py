import json

import numpy as np
import pytest

from voltsnn.idx import write_idx


def toy_images(n, seed):
    """Two classes of 8x8 images: top half lit or bottom half lit."""
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    x = np.zeros((n, 8, 8))
    x[y == 0, :4, :] = 1
    x[y == 1, 4:, :] = 1
    x = np.clip(x * rng.uniform(0.6, 1.0, x.shape), 0, 1)
    return (x * 255).astype(np.uint8), y.astype(np.uint8)


TOY_CONFIG = {
    "seed": 0,
    "output_dir": "out",
    "dataset": {
        "train_images": "train-images.idx",
        "train_labels": "train-labels.idx",
        "test_images": "test-images.idx",
        "test_labels": "test-labels.idx",
        "n_train": 30,
        "n_validation": 10,
    },
    "network": {"n_inputs": 64, "n_neurons": 4, "params": {"duration_ms": 100, "weight_norm": 8.0}},
    "dram": {"geometry": {"n_banks": 2, "n_subarrays": 4, "n_rows": 64, "n_columns": 16}},
    "profile": {"trials": 2},
    "selection": {"trials": 2},
}


def write_toy(root, **overrides):
    for name, n, seed in (("train", 40, 1), ("test", 20, 2)):
        x, y = toy_images(n, seed)
        write_idx(root / f"{name}-images.idx", x)
        write_idx(root / f"{name}-labels.idx", y)
    cfg = json.loads(json.dumps(TOY_CONFIG))
    cfg.update(overrides)
    path = root / "toy.json"
    path.write_text(json.dumps(cfg))
    return path


@pytest.fixture
def toy_config(tmp_path):
    return write_toy(tmp_path)


# -- acceptance summary: one line per criterion ------------------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or not (rep.when == "call" or rep.failed):
        return
    n = marker.args[0]
    detail = dict(item.user_properties).get("detail", "")
    if rep.failed and not detail:
        detail = str(call.excinfo.value).splitlines()[0] if call.excinfo else ""
    prev = _CRITERIA.get(n)
    _CRITERIA[n] = (rep.passed and (prev is None or prev[0]), detail or (prev[1] if prev else ""))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
