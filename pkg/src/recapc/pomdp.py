"""Export of an instance as an explicitly discounted POMDP.

Each type ``m`` gets two states: ``m_s`` (session start, nothing liked yet)
and ``m_f`` (at least one like), plus an absorbing churn state ``ABSORB``.
The first like is taken with probability ``P(k, m)``; later likes with the
rescaled probability ``P(k, m) / p_max``, and the discount ``gamma = p_max``
restores the original survival products. A reward of 1 is paid on every
transition into an ``_f`` state.

The writer emits the plain-text discrete POMDP format read by point-based
solvers such as SARSOP; ``read_pomdp_file`` parses back exactly what the
writer produces.
"""

from __future__ import annotations

import io
import os
import re
from dataclasses import dataclass
from typing import Sequence, TextIO

import numpy as np

from .model import Instance
from .valuation import Policy

OBSERVATIONS = ("like", "dislike")
ABSORB = "ABSORB"
_NUMBER_FORMAT = ".12g"


@dataclass(frozen=True, eq=False)
class PomdpModel:
    states: tuple[str, ...]
    actions: tuple[str, ...]
    observations: tuple[str, ...]
    discount: float
    T: np.ndarray  # (action, state, next state)
    O: np.ndarray  # (action, next state, observation)
    R: np.ndarray  # (action, state, next state)
    start: np.ndarray

    @property
    def n_states(self) -> int:
        return len(self.states)

    def expected_reward(self, action: int) -> np.ndarray:
        """Expected one-step reward from each state under ``action``."""
        return (self.T[action] * self.R[action]).sum(axis=1)


def _safe_names(names: Sequence[str], fallback: str) -> tuple[str, ...]:
    cleaned = tuple(re.sub(r"[^A-Za-z0-9_\-]", "_", str(n)) for n in names)
    ok = all(re.match(r"[A-Za-z]", n) for n in cleaned) and len(set(cleaned)) == len(cleaned)
    if not ok or ABSORB in cleaned:
        return tuple(f"{fallback}{i + 1}" for i in range(len(names)))
    return cleaned


def build_pomdp(instance: Instance) -> PomdpModel:
    K, M = instance.n_categories, instance.n_types
    P, gamma = instance.P, instance.p_max
    type_names = _safe_names(instance.types, "m")
    states = tuple(name for t in type_names for name in (f"{t}_s", f"{t}_f")) + (ABSORB,)
    S, absorb = 2 * M + 1, 2 * M
    s_idx = 2 * np.arange(M)
    f_idx = s_idx + 1

    T = np.zeros((K, S, S))
    T[:, s_idx, f_idx] = P
    T[:, s_idx, absorb] = 1.0 - P
    rescaled = P / gamma
    T[:, f_idx, f_idx] = rescaled
    T[:, f_idx, absorb] = 1.0 - rescaled
    T[:, absorb, absorb] = 1.0

    O = np.zeros((K, S, 2))
    O[:, :absorb, 0] = 1.0
    O[:, absorb, 1] = 1.0

    R = np.zeros((K, S, S))
    R[:, :, f_idx] = 1.0
    R *= T > 0

    start = np.zeros(S)
    start[s_idx] = instance.q
    return PomdpModel(
        states, _safe_names(instance.categories, "k"), OBSERVATIONS, gamma, T, O, R, start
    )


def _fmt(x: float) -> str:
    return format(float(x), _NUMBER_FORMAT)


def write_pomdp(model: PomdpModel, fh: TextIO) -> None:
    fh.write(f"discount: {_fmt(model.discount)}\n")
    fh.write("values: reward\n")
    fh.write(f"states: {' '.join(model.states)}\n")
    fh.write(f"actions: {' '.join(model.actions)}\n")
    fh.write(f"observations: {' '.join(model.observations)}\n")
    fh.write(f"start: {' '.join(_fmt(x) for x in model.start)}\n\n")
    for a, name in enumerate(model.actions):
        for s, s2 in zip(*np.nonzero(model.T[a])):
            fh.write(f"T: {name} : {model.states[s]} : {model.states[s2]} {_fmt(model.T[a, s, s2])}\n")
    fh.write("\n")
    for a, name in enumerate(model.actions):
        for s2, o in zip(*np.nonzero(model.O[a])):
            fh.write(f"O: {name} : {model.states[s2]} : {model.observations[o]} {_fmt(model.O[a, s2, o])}\n")
    fh.write("\n")
    for a, name in enumerate(model.actions):
        for s, s2 in zip(*np.nonzero(model.R[a])):
            fh.write(f"R: {name} : {model.states[s]} : {model.states[s2]} : * {_fmt(model.R[a, s, s2])}\n")


def dumps_pomdp(model: PomdpModel) -> str:
    buf = io.StringIO()
    write_pomdp(model, buf)
    return buf.getvalue()


def write_pomdp_file(model: PomdpModel, destination: str | os.PathLike | TextIO) -> None:
    if hasattr(destination, "write"):
        write_pomdp(model, destination)  # type: ignore[arg-type]
        return
    with open(destination, "w", encoding="utf-8", newline="\n") as fh:
        write_pomdp(model, fh)


def parse_pomdp(text: str) -> PomdpModel:
    """Parse a file written by ``write_pomdp`` (not arbitrary .pomdp files)."""
    header: dict[str, list[str]] = {}
    entries: list[tuple[str, list[str], float]] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, rest = line.partition(":")
        if key in ("T", "O", "R"):
            fields = [f.strip() for f in rest.split(":")]
            last, value = fields[-1].rsplit(None, 1)
            entries.append((key, fields[:-1] + [last], float(value)))
        else:
            header[key] = rest.split()
    states = tuple(header["states"])
    actions = tuple(header["actions"])
    observations = tuple(header["observations"])
    si = {s: i for i, s in enumerate(states)}
    ai = {a: i for i, a in enumerate(actions)}
    oi = {o: i for i, o in enumerate(observations)}
    A, S = len(actions), len(states)
    T = np.zeros((A, S, S))
    O = np.zeros((A, S, len(observations)))
    R = np.zeros((A, S, S))
    for key, f, value in entries:
        a = ai[f[0]]
        if key == "T":
            T[a, si[f[1]], si[f[2]]] = value
        elif key == "O":
            O[a, si[f[1]], oi[f[2]]] = value
        else:
            R[a, si[f[1]], si[f[2]]] = value
    return PomdpModel(
        states,
        actions,
        observations,
        float(header["discount"][0]),
        T,
        O,
        R,
        np.array([float(x) for x in header["start"]]),
    )


def read_pomdp_file(source: str | os.PathLike) -> PomdpModel:
    with open(source, encoding="utf-8") as fh:
        return parse_pomdp(fh.read())


def discounted_value(model: PomdpModel, policy: Policy, belief: np.ndarray | None = None) -> float:
    """Infinite-horizon discounted reward of an open-loop prefix-plus-tail
    policy, starting from ``belief`` (default: the start distribution).

    The prefix is propagated step by step; the tail's value vector solves
    ``(I - gamma T_tail) v = r_tail``.
    """
    d = model.start if belief is None else np.asarray(belief, dtype=float)
    gamma, total, weight = model.discount, 0.0, 1.0
    for a in policy.prefix:
        total += weight * float(d @ model.expected_reward(a))
        d = d @ model.T[a]
        weight *= gamma
    tail = policy.tail
    v = np.linalg.solve(np.eye(model.n_states) - gamma * model.T[tail], model.expected_reward(tail))
    return total + weight * float(d @ v)


def filter_belief(model: PomdpModel, belief: np.ndarray, action: int, observation: int) -> np.ndarray:
    """Bayesian filter over POMDP states after ``action`` and ``observation``."""
    w = (belief @ model.T[action]) * model.O[action, :, observation]
    total = w.sum()
    if total <= 0:
        raise ValueError("observation has zero probability under the belief")
    return w / total


def type_marginal(model: PomdpModel, belief: np.ndarray) -> np.ndarray:
    """Belief restricted to the ``_f`` states, one entry per type."""
    return np.asarray(belief)[1:-1:2]
