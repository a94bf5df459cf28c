"""Hidden Markov error process: model, sampling and forward recursion.

LLR convention used throughout the package: ``log P(bit=1) / P(bit=0)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

PROB_FLOOR = 1e-12
LLR_CLAMP = 30.0
_ROW_SUM_TOL = 1e-12
_EXACT_SOLVE_MAX_STATES = 8
_POWER_MAX_ITERS = 10**6
_POWER_TOL = 1e-13


class InvalidModelError(ValueError):
    """Model parameters violate the probability constraints."""


class SingularChainError(RuntimeError):
    """The chain has no unique stationary distribution we could find."""


@dataclass(frozen=True)
class TwoStateParams:
    p00: float
    p11: float
    q0: float
    q1: float

    def __post_init__(self):
        for name in ("p00", "p11", "q0", "q1"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise InvalidModelError(f"{name}={v} is not a probability")


@dataclass(frozen=True, eq=False)
class HmmModel:
    """Binary-output HMM.

    ``transition[i, j]`` is P(S_i -> S_j); ``emission_zero[i]`` is P(e=0 | S_i).
    """

    transition: np.ndarray
    emission_zero: np.ndarray
    name: str = ""

    def __post_init__(self):
        P = np.array(self.transition, dtype=np.float64)
        mu = np.array(self.emission_zero, dtype=np.float64).reshape(-1)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] < 1:
            raise InvalidModelError(f"transition must be square, got shape {P.shape}")
        if mu.shape[0] != P.shape[0]:
            raise InvalidModelError("emission_zero length must equal number of states")
        if np.any(~np.isfinite(P)) or np.any(P < 0) or np.any(P > 1):
            raise InvalidModelError("transition entries must lie in [0, 1]")
        if np.any(~np.isfinite(mu)) or np.any(mu < 0) or np.any(mu > 1):
            raise InvalidModelError("emission_zero entries must lie in [0, 1]")
        if np.any(np.abs(P.sum(axis=1) - 1.0) > _ROW_SUM_TOL):
            raise InvalidModelError("transition rows must sum to 1")
        P.setflags(write=False)
        mu.setflags(write=False)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "emission_zero", mu)

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    def emission(self, bit: int) -> np.ndarray:
        """P(e=bit | state) for every state."""
        return self.emission_zero if bit == 0 else 1.0 - self.emission_zero

    def to_dict(self) -> dict:
        return {
            "states": self.num_states,
            "transition": self.transition.reshape(-1).tolist(),
            "emission_zero": self.emission_zero.tolist(),
        }


def from_two_state(params: TwoStateParams | tuple | list, name: str = "") -> HmmModel:
    if not isinstance(params, TwoStateParams):
        params = TwoStateParams(*params)
    P = [[params.p00, 1.0 - params.p00], [1.0 - params.p11, params.p11]]
    return HmmModel(P, [params.q0, 1.0 - params.q1], name=name)


NAMED_MODELS = {
    "M1": TwoStateParams(0.01, 0.065, 0.95, 0.925),
    "M2": TwoStateParams(0.97, 0.967, 0.93, 0.973),
    "M3": TwoStateParams(0.99, 0.989, 0.945, 0.9895),
}


def named_model(name: str) -> HmmModel:
    try:
        return from_two_state(NAMED_MODELS[name.upper()], name=name.upper())
    except KeyError:
        raise InvalidModelError(
            f"unknown model {name!r}; choose one of {sorted(NAMED_MODELS)}"
        ) from None


def model_from_mapping(cfg: dict) -> HmmModel:
    """Build a model from a config mapping.

    Accepted keys: ``two_state = [p00, p11, q0, q1]``, or ``states``,
    ``transition`` (row-major flat list or nested rows) and ``emission_zero``.
    A bare ``name`` refers to a built-in model.
    """
    if "two_state" in cfg:
        vals = [float(v) for v in cfg["two_state"]]
        if len(vals) != 4:
            raise InvalidModelError("two_state needs exactly four values")
        return from_two_state(vals, name=cfg.get("name", ""))
    if "transition" in cfg:
        mu = [float(v) for v in cfg["emission_zero"]]
        n = int(cfg.get("states", len(mu)))
        flat = np.asarray(cfg["transition"], dtype=np.float64).reshape(-1)
        if flat.size != n * n:
            raise InvalidModelError(f"transition needs {n * n} entries, got {flat.size}")
        return HmmModel(flat.reshape(n, n), mu, name=cfg.get("name", ""))
    if "name" in cfg:
        return named_model(cfg["name"])
    raise InvalidModelError("model config needs 'two_state', 'transition' or 'name'")


def load_model(path: str | Path) -> HmmModel:
    """Load a model from a JSON or YAML file (optionally under a ``model`` key)."""
    cfg = load_mapping(path)
    return model_from_mapping(cfg.get("model", cfg))


def load_mapping(path: str | Path) -> dict:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() in (".yaml", ".yml"):
        import yaml

        data = yaml.safe_load(text)
    else:
        data = json.loads(text)
    if not isinstance(data, dict):
        raise InvalidModelError(f"{path}: expected a key-value mapping")
    return data


def stationary_distribution(model: HmmModel) -> np.ndarray:
    P = model.transition
    n = model.num_states
    if n <= _EXACT_SOLVE_MAX_STATES:
        A = np.vstack([(P - np.eye(n)).T, np.ones((1, n))])
        if np.linalg.matrix_rank(A) < n:
            raise SingularChainError("stationary distribution is not unique")
        b = np.zeros(n + 1)
        b[-1] = 1.0
        pi, *_ = np.linalg.lstsq(A, b, rcond=None)
        pi = np.clip(pi, 0.0, None)
        pi /= pi.sum()
        if np.max(np.abs(pi @ P - pi)) >= 1e-12:
            raise SingularChainError("linear solve left a residual above 1e-12")
        return pi
    pi = np.full(n, 1.0 / n)
    for _ in range(_POWER_MAX_ITERS):
        nxt = pi @ P
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - pi)) < _POWER_TOL:
            return nxt
        pi = nxt
    raise SingularChainError("power iteration did not converge")


def marginal_zero_prob(model: HmmModel) -> float:
    return float(stationary_distribution(model) @ model.emission_zero)


def sample(
    model: HmmModel, length: int, seed: int, initial_state: int | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``length`` error bits and the hidden state path.

    The initial state comes from the stationary distribution unless
    ``initial_state`` pins it (needed for reducible chains).
    """
    if length < 0:
        raise ValueError("length must be nonnegative")
    bits = np.zeros(length, dtype=np.uint8)
    states = np.zeros(length, dtype=np.int64)
    if length == 0:
        return bits, states
    rng = np.random.default_rng(seed)
    cum = np.cumsum(model.transition, axis=1)
    cum[:, -1] = 1.0
    u_state = rng.random(length)
    u_emit = rng.random(length)

    if initial_state is None:
        pi = stationary_distribution(model)
        first = int(np.searchsorted(np.cumsum(pi), u_state[0], side="right"))
        first = min(first, model.num_states - 1)
    else:
        first = int(initial_state)
    if model.num_states == 2:
        # the next state is 1 iff u >= P(s -> 0)
        to_zero0 = float(cum[0, 0])
        to_zero1 = float(cum[1, 0])
        s = first
        out = states.tolist()
        out[0] = s
        for t, u in enumerate(u_state[1:].tolist(), start=1):
            s = int(u >= (to_zero0 if s == 0 else to_zero1))
            out[t] = s
        states[:] = out
    else:
        rows = [list(r) for r in cum.tolist()]
        s = first
        out = [0] * length
        out[0] = s
        for t, u in enumerate(u_state[1:].tolist(), start=1):
            row = rows[s]
            k = 0
            while k < len(row) - 1 and u >= row[k]:
                k += 1
            s = k
            out[t] = s
        states[:] = out
    bits[:] = u_emit >= model.emission_zero[states]
    return bits, states


def forward_update(model: HmmModel, belief: np.ndarray, observed_bit: int) -> np.ndarray:
    """Condition on the emitted bit, then step through the transition matrix."""
    out = forward_update_many(
        model, np.asarray(belief, dtype=np.float64)[None, :], np.array([observed_bit])
    )
    return out[0]


def forward_update_many(
    model: HmmModel, beliefs: np.ndarray, observed: np.ndarray, mask: np.ndarray | None = None
) -> np.ndarray:
    """Row-wise :func:`forward_update` for a stack of beliefs, shape (rows, states).

    Rows where ``mask`` is False are treated as unobserved: they only pass
    through the transition matrix.
    """
    observed = np.asarray(observed).reshape(-1)
    lik = np.where(observed[:, None] == 0, model.emission_zero, 1.0 - model.emission_zero)
    if mask is not None:
        lik = np.where(np.asarray(mask, dtype=bool)[:, None], lik, 1.0)
    post = beliefs * lik
    total = post.sum(axis=1, keepdims=True)
    bad = total[:, 0] <= 0.0
    if np.any(bad):
        clamped = np.clip(lik[bad], PROB_FLOOR, 1.0 - PROB_FLOOR)
        post[bad] = beliefs[bad] * clamped
        total[bad] = post[bad].sum(axis=1, keepdims=True)
    post /= total
    nxt = post @ model.transition
    nxt /= nxt.sum(axis=1, keepdims=True)
    return nxt


def prob_one(model: HmmModel, beliefs: np.ndarray) -> np.ndarray:
    """Predictive P(e=1) for a belief or a stack of beliefs."""
    return np.asarray(beliefs) @ (1.0 - model.emission_zero)


def llr_from_prob(p1):
    p1 = np.clip(p1, PROB_FLOOR, 1.0 - PROB_FLOOR)
    return np.clip(np.log(p1) - np.log1p(-p1), -LLR_CLAMP, LLR_CLAMP)


def predict_llr(model: HmmModel, belief: np.ndarray) -> float:
    return float(llr_from_prob(prob_one(model, belief)))


def predict_llr_many(model: HmmModel, beliefs: np.ndarray) -> np.ndarray:
    return llr_from_prob(prob_one(model, beliefs))


def binary_entropy(p):
    """H_b(p) in bits, with 0 log 0 = 0. Works elementwise on arrays."""
    p = np.asarray(p, dtype=np.float64)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(np.where(p > 0, p * np.log2(p), 0.0) + np.where(q > 0, q * np.log2(q), 0.0))
    return h if h.ndim else float(h)


def is_valid_belief(belief, tol: float = 1e-9) -> bool:
    b = np.asarray(belief)
    return bool(np.all(b >= 0) and math.isclose(float(b.sum()), 1.0, abs_tol=tol))
