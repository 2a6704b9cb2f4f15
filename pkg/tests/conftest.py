import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

import helpers  # noqa: E402

from lumistack.focusmap import compute_focus_map, median_filter_labels
from lumistack.sharpness import ScoreConfig, score_stack
from lumistack.tomography import reconstruct_slab

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "criterion(name): marks a test as one acceptance criterion; the "
        "terminal summary prints one PASS/FAIL line per criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    name = marker.args[0]
    if report.when == "setup" and report.skipped:
        _CRITERIA[name] = ("SKIP", _skip_reason(report))
    elif report.when == "call":
        if report.skipped:
            _CRITERIA[name] = ("SKIP", _skip_reason(report))
        else:
            _CRITERIA[name] = ("PASS" if report.passed else "FAIL", "")


def _skip_reason(report):
    try:
        return report.longrepr[2]
    except (TypeError, IndexError):
        return ""


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, (word, extra) in _CRITERIA.items():
        line = f"[{word}] {name}"
        if extra:
            line += f"  ({extra})"
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def scene():
    return helpers.make_scene()


@pytest.fixture(scope="session")
def stack_and_truth(scene):
    from lumistack.tomography import synthesize_stack
    return synthesize_stack(scene, helpers.SCENE_U_SAMPLES)


@pytest.fixture(scope="session")
def scene_stack(stack_and_truth):
    return stack_and_truth[0]


@pytest.fixture(scope="session")
def scene_truth(stack_and_truth):
    return stack_and_truth[1]


@pytest.fixture(scope="session")
def scene_focus_map(scene_stack):
    cfg = ScoreConfig()
    scores = score_stack(scene_stack, cfg)
    fm = compute_focus_map(scene_stack, cfg,
                           smoothness_weight=helpers.SCENE_SMOOTHNESS,
                           scores=scores)
    return median_filter_labels(fm, helpers.SCENE_MEDIAN_RADIUS)


@pytest.fixture(scope="session")
def scene_slab(scene_stack, scene_focus_map):
    return reconstruct_slab(scene_stack, scene_focus_map,
                            helpers.SCENE_DEPTHS,
                            helpers.SCENE_APERTURE_SCALE,
                            helpers.SCENE_U_SAMPLES)


@pytest.fixture(scope="session")
def gt_labels():
    return helpers.truth_labels()


@pytest.fixture()
def rng():
    return np.random.default_rng(20260823)
