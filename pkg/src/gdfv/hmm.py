"""Maximum a-posteriori decoding of time-homogeneous HMMs.

Everything runs in log space; zero probabilities become -inf when the model
is built. With ``q_i(s)`` the best probability of a path that ends in ``s`` and
explains the first ``i - 1`` observations::

    log q_1 = log pi
    log q_i = (log T^t) * (log q_{i-1} + log e(y_{i-1}))      (max-plus product)

and the decoded probability is ``max_s log q_m(s) + log e_s(y_m)``. The
classical Viterbi forward pass evaluates each product directly; the GDFV
decoder hands the fixed matrix ``log T^t`` to a preprocessed
:class:`~gdfv.maxplus.SplicedMultiplier`. Every argmax, including the final
state, prefers the largest state index on ties.

States and symbols are 0-based in the API.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._backend import get_backend, njit
from ._forest import DEFAULT_MEM_BUDGET
from .maxplus import (
    MulStats,
    SplicedMultiplier,
    TableMultiplier,
    multiply_spliced,
    multiply_spliced_table,
    preprocess_spliced,
    preprocess_spliced_table,
)

__all__ = [
    "HiddenMarkovModel",
    "InvalidModelError",
    "Trellis",
    "DecodeResult",
    "GdfvDecoder",
    "joint_log_prob",
    "viterbi_baseline",
    "backtrack",
    "gdfv_preprocess",
    "gdfv_decode",
    "gdfv_table_decode",
    "brute_force_decode",
    "block_width",
]

STOCHASTIC_TOL = 1e-9
BRUTE_FORCE_LIMIT = 10**7


class InvalidModelError(ValueError):
    pass


def _log(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(p)


def _check_distribution(rows: np.ndarray, what: str, renormalize: bool) -> np.ndarray:
    # renormalization accepts any nonnegative weights
    out_of_range = np.isnan(rows) | (rows < 0) | np.isinf(rows)
    if not renormalize:
        out_of_range |= rows > 1
    if out_of_range.any():
        bad = int(np.flatnonzero(out_of_range.any(axis=-1))[0])
        limits = "[0, inf)" if renormalize else "[0, 1]"
        raise InvalidModelError(f"{what} row {bad + 1} has entries outside {limits}")
    sums = rows.sum(axis=-1)
    if renormalize:
        if (sums <= 0).any():
            bad = int(np.flatnonzero(sums <= 0)[0])
            raise InvalidModelError(f"{what} row {bad + 1} sums to 0 and cannot be renormalized")
        return rows / sums[..., None]
    off = np.abs(sums - 1.0) > STOCHASTIC_TOL
    if off.any():
        bad = int(np.flatnonzero(off)[0])
        raise InvalidModelError(f"{what} row {bad + 1} sums to {float(sums[bad])!r}, not 1")
    return rows


@dataclass(frozen=True)
class HiddenMarkovModel:
    alphabet: tuple[str, ...]
    initial: np.ndarray
    transition: np.ndarray
    emission: np.ndarray

    @classmethod
    def create(cls, alphabet, initial, transition, emission, renormalize: bool = False) -> HiddenMarkovModel:
        """Validate and build a model; rows are renormalized only when asked to."""
        alphabet = tuple(str(a) for a in alphabet)
        initial = np.array(initial, dtype=np.float64)
        transition = np.array(transition, dtype=np.float64)
        emission = np.array(emission, dtype=np.float64)
        n = initial.shape[0] if initial.ndim == 1 else -1
        if n < 1:
            raise InvalidModelError("initial distribution must be a non-empty vector")
        if transition.shape != (n, n):
            raise InvalidModelError(f"transition matrix must be {n}x{n}, got {transition.shape}")
        if emission.shape != (n, len(alphabet)):
            raise InvalidModelError(f"emission matrix must be {n}x{len(alphabet)}, got {emission.shape}")
        if len(set(alphabet)) != len(alphabet) or not alphabet:
            raise InvalidModelError("alphabet must be non-empty with distinct symbols")
        initial = _check_distribution(initial[None, :], "initial", renormalize)[0]
        transition = _check_distribution(transition, "transition", renormalize)
        emission = _check_distribution(emission, "emission", renormalize)
        return cls(alphabet, initial, transition, emission)

    @property
    def n(self) -> int:
        return self.initial.shape[0]

    @cached_property
    def log_initial(self) -> np.ndarray:
        return _log(self.initial)

    @cached_property
    def log_transition(self) -> np.ndarray:
        return _log(self.transition)

    @cached_property
    def log_emission(self) -> np.ndarray:
        return _log(self.emission)

    def encode(self, symbols) -> np.ndarray:
        index = {s: i for i, s in enumerate(self.alphabet)}
        try:
            return np.array([index[s] for s in symbols], dtype=np.int64)
        except KeyError as exc:
            raise ValueError(f"unknown symbol {exc.args[0]!r}") from None


@dataclass(frozen=True)
class Trellis:
    """``log_q[i, s]`` and the predecessor ``back[i, s]`` chosen for it (``back[0] = -1``).

    ``final[s] = log_q[m-1, s] + log e_s(y_m)`` scores the last step.
    """

    log_q: np.ndarray
    back: np.ndarray
    final: np.ndarray


@dataclass(frozen=True)
class DecodeResult:
    path: np.ndarray
    log_prob: float


def _check_obs(model: HiddenMarkovModel, obs) -> np.ndarray:
    obs = np.asarray(obs, dtype=np.int64).reshape(-1)
    if obs.size == 0:
        raise ValueError("observation sequence is empty")
    if (obs < 0).any() or (obs >= len(model.alphabet)).any():
        raise ValueError("observation symbol index out of range")
    return obs


def joint_log_prob(model: HiddenMarkovModel, path, obs) -> float:
    path = np.asarray(path, dtype=np.int64).reshape(-1)
    obs = _check_obs(model, obs)
    if path.size != obs.size:
        raise ValueError(f"path has {path.size} states but there are {obs.size} observations")
    if (path < 0).any() or (path >= model.n).any():
        raise ValueError("state index out of range")
    total = float(model.log_initial[path[0]])
    total += float(model.log_transition[path[:-1], path[1:]].sum())
    total += float(model.log_emission[path, obs].sum())
    return total


def _last_argmax(v: np.ndarray) -> int:
    return int(v.size - 1 - np.argmax(v[::-1]))


def backtrack(trellis: Trellis) -> np.ndarray:
    """Follow predecessors from the best final state."""
    m = trellis.log_q.shape[0]
    path = np.empty(m, dtype=np.int64)
    path[-1] = _last_argmax(trellis.final)
    for i in range(m - 1, 0, -1):
        path[i - 1] = trellis.back[i, path[i]]
    return path


def _finish(model: HiddenMarkovModel, obs, log_q, back) -> tuple[DecodeResult, Trellis]:
    final = log_q[-1] + model.log_emission[:, obs[-1]]
    trellis = Trellis(log_q, back, final)
    path = backtrack(trellis)
    return DecodeResult(path, float(final[path[-1]])), trellis


# ---------------------------------------------------------------------------
# Viterbi


@njit
def _viterbi_nb(log_tt, log_e, obs, log_q, back):
    m, n = log_q.shape
    v = np.empty(n)
    for i in range(1, m):
        a = obs[i - 1]
        for s in range(n):
            v[s] = log_q[i - 1, s] + log_e[s, a]
        for s in range(n):
            best = log_tt[s, 0] + v[0]
            arg = 0
            for sp in range(1, n):
                x = log_tt[s, sp] + v[sp]
                if x >= best:
                    best = x
                    arg = sp
            log_q[i, s] = best
            back[i, s] = arg


def _viterbi_np(log_tt, log_e, obs, log_q, back):
    m, n = log_q.shape
    for i in range(1, m):
        v = log_q[i - 1] + log_e[:, obs[i - 1]]
        S = log_tt + v[None, :]
        arg = n - 1 - np.argmax(S[:, ::-1], axis=1)
        log_q[i] = S[np.arange(n), arg]
        back[i] = arg


def viterbi_baseline(model: HiddenMarkovModel, obs) -> tuple[DecodeResult, Trellis]:
    obs = _check_obs(model, obs)
    m, n = obs.size, model.n
    log_q = np.empty((m, n))
    back = np.full((m, n), -1, dtype=np.int64)
    log_q[0] = model.log_initial
    log_tt = np.ascontiguousarray(model.log_transition.T)
    if get_backend() == "numba":
        _viterbi_nb(log_tt, np.ascontiguousarray(model.log_emission), obs, log_q, back)
    else:
        _viterbi_np(log_tt, model.log_emission, obs, log_q, back)
    # unreachable cells report the last state, as the multiplication engine does
    back[1:][np.isneginf(log_q[1:])] = n - 1
    return _finish(model, obs, log_q, back)


# ---------------------------------------------------------------------------
# GDFV


def block_width(n: int, alpha: float) -> int:
    """``max(1, floor(alpha * log2 n))``."""
    return max(1, math.floor(alpha * math.log2(n) + 1e-12))


@dataclass(frozen=True)
class GdfvDecoder:
    model: HiddenMarkovModel
    alpha: float
    t: int
    multiplier: SplicedMultiplier


def gdfv_preprocess(model: HiddenMarkovModel, alpha: float = 0.25,
                    mem_budget: int | None = DEFAULT_MEM_BUDGET, t: int | None = None) -> GdfvDecoder:
    """Preprocess ``log T^t`` once; ``t`` overrides the width derived from ``alpha``."""
    if model.n < 2:
        raise ValueError("GDFV needs at least two states")
    if not 0 < alpha < 0.5:
        raise ValueError(f"alpha must lie in (0, 0.5), got {alpha}")
    width = block_width(model.n, alpha) if t is None else int(t)
    sm = preprocess_spliced(model.log_transition.T, width, mem_budget=mem_budget)
    return GdfvDecoder(model, alpha, width, sm)


def _forward_with(multiply, model, obs):
    m, n = obs.size, model.n
    log_q = np.empty((m, n))
    back = np.full((m, n), -1, dtype=np.int64)
    log_q[0] = model.log_initial
    log_e = model.log_emission
    for i in range(1, m):
        r = multiply(log_q[i - 1] + log_e[:, obs[i - 1]])
        log_q[i] = r.values
        back[i] = r.argmax
    return _finish(model, obs, log_q, back)


def gdfv_decode(decoder: GdfvDecoder, obs, stats: MulStats | None = None) -> tuple[DecodeResult, Trellis]:
    obs = _check_obs(decoder.model, obs)
    sm = decoder.multiplier
    return _forward_with(lambda v: multiply_spliced(sm, v, stats), decoder.model, obs)


def gdfv_table_decode(model: HiddenMarkovModel, obs, t: int, budget: int | None = None,
                      stats: MulStats | None = None) -> DecodeResult:
    """GDFV with lookup-table dominance; only sensible for a handful of states."""
    obs = _check_obs(model, obs)
    tm: TableMultiplier = preprocess_spliced_table(model.log_transition.T, t, budget=budget)
    result, _ = _forward_with(lambda v: multiply_spliced_table(tm, v, stats), model, obs)
    return result


# ---------------------------------------------------------------------------
# exhaustive reference


def brute_force_decode(model: HiddenMarkovModel, obs) -> DecodeResult:
    """Score all ``n ** m`` paths.

    Terms are added in the order the forward recurrence adds them, so a path
    scores bitwise the same here as in the trellis. Ties go to the largest
    last state, then the largest state before it, and so on: the rule
    backtracking applies.
    """
    obs = _check_obs(model, obs)
    n, m = model.n, obs.size
    if n**m > BRUTE_FORCE_LIMIT:
        raise ValueError(f"{n}^{m} paths exceed the brute-force limit of {BRUTE_FORCE_LIMIT}")
    # flat index of a prefix x_1..x_i: x_i is the most significant digit
    scores = model.log_initial.copy()
    for i in range(1, m):
        last = np.arange(scores.size) // n ** (i - 1)
        scores = scores + model.log_emission[last, obs[i - 1]]
        scores = scores[None, :] + model.log_transition[last].T
        scores = scores.reshape(-1)
    last = np.arange(scores.size) // n ** (m - 1)
    scores = scores + model.log_emission[last, obs[m - 1]]
    best = _last_argmax(scores)
    path = np.array(np.unravel_index(best, (n,) * m), dtype=np.int64).reshape(-1)[::-1].copy()
    return DecodeResult(path, float(scores[best]))
