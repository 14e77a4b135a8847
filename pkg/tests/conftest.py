"""Shared instances, hypothesis strategies, and the acceptance summary."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import strategies as st

from recapc.analysis import compute_constants, has_clear_first_action
from recapc.instances import uniform_instance
from recapc.model import Instance

EXAMPLE1_P = [[0.95, 0.1], [0.79, 0.81]]
EXAMPLE1_Q = [0.5, 0.5]

# Golden 3x3 instances with documented belief-walk behaviour.
GOLDEN = {
    "A1": (
        [[0.8611, 0.4591, 0.6862], [0.0969, 0.5531, 0.8604], [0.5055, 0.1430, 0.8879]],
        [0.1713, 0.4465, 0.3822],
    ),
    "A2": (
        [[0.6848, 0.9100, 0.5457], [0.7741, 0.8284, 0.5833], [0.1931, 0.9127, 0.5273]],
        [0.3844, 0.1197, 0.4959],
    ),
    "A3": (
        [[0.5492, 0.0560, 0.8878], [0.2195, 0.8576, 0.2072], [0.7674, 0.7992, 0.4051]],
        [0.2972, 0.4001, 0.3027],
    ),
    "A4": (
        [[0.4011, 0.8521, 0.8301], [0.7683, 0.7837, 0.8314], [0.7674, 0.7832, 0.4051]],
        [0.3755, 0.3921, 0.2324],
    ),
}


def make_instance(P, q) -> Instance:
    P = np.asarray(P, dtype=float)
    return Instance(
        tuple(f"k{i + 1}" for i in range(P.shape[0])),
        tuple(f"m{j + 1}" for j in range(P.shape[1])),
        P,
        np.asarray(q, dtype=float),
    )


def example1() -> Instance:
    return make_instance(EXAMPLE1_P, EXAMPLE1_Q)


def golden(name: str) -> Instance:
    return make_instance(*GOLDEN[name])


def myopic_gap_instance(d: float) -> Instance:
    """Two types, two categories: the myopic policy earns 4 while fixing
    the first category earns 4d."""
    p = 8 * d / (8 * d + 1)
    return make_instance([[p, 0.0], [0.8, 0.8]], [0.5, 0.5])


SCREEN_EPS = 1e-9


def screened_instances(count, seed=0, sizes=(2, 3)):
    """Random square instances (alternating over ``sizes``) with distinct
    entries, c > 0 and a certified first action at the prior."""
    out, i = [], 0
    while len(out) < count:
        n = sizes[i % len(sizes)]
        inst = uniform_instance(n, n, seed * 100_000 + i)
        i += 1
        if compute_constants(inst).c > 0 and has_clear_first_action(inst, inst.q, SCREEN_EPS):
            out.append(inst)
    return out


@pytest.fixture
def ex1() -> Instance:
    return example1()


@pytest.fixture
def ex1_path(tmp_path):
    from recapc.model import save_instance

    path = tmp_path / "example1.json"
    save_instance(example1(), path)
    return path


# --------------------------------------------------------------------------
# Hypothesis strategies
# --------------------------------------------------------------------------

probability = st.floats(0.01, 0.95, allow_nan=False)
weight = st.floats(0.05, 1.0, allow_nan=False)


@st.composite
def instances(draw, max_categories: int = 4, max_types: int = 4) -> Instance:
    K = draw(st.integers(1, max_categories))
    M = draw(st.integers(1, max_types))
    P = np.array(draw(st.lists(probability, min_size=K * M, max_size=K * M))).reshape(K, M)
    w = np.array(draw(st.lists(weight, min_size=M, max_size=M)))
    return make_instance(P, w / w.sum())


@st.composite
def instance_and_belief(draw, max_categories: int = 4, max_types: int = 4):
    inst = draw(instances(max_categories, max_types))
    w = np.array(draw(st.lists(weight, min_size=inst.n_types, max_size=inst.n_types)))
    return inst, w / w.sum()


# --------------------------------------------------------------------------
# Acceptance summary: one PASS/FAIL line per criterion
# --------------------------------------------------------------------------

_ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call":
        return
    number, title = marker.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    _ACCEPTANCE[number] = ("PASS" if report.passed else "FAIL", title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        status, title, detail = _ACCEPTANCE[number]
        line = f"criterion {number}: {status}  {title}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
