"""Information-theoretic limits of the decision-feedback scheme.

All entropies are in bits.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .hmm import HmmModel, binary_entropy, forward_update_many, prob_one, stationary_distribution

MAX_EXACT_DEPTH = 24
# prefix-tree levels expanded in one numpy block; deeper trees are walked in chunks
_BLOCK_DEPTH = 18
_MC_CHUNK = 1 << 17


class InfeasibleDepthError(ValueError):
    """Exact enumeration was asked for a depth beyond the supported bound."""


@dataclass(frozen=True)
class RateParams:
    N: int
    K: int
    L: int
    M: int

    def __post_init__(self):
        if not (0 < self.K < self.N):
            raise ValueError(f"need 0 < K < N, got K={self.K}, N={self.N}")
        if self.L < 1 or not (0 <= self.M <= self.L):
            raise ValueError(f"need L >= 1 and 0 <= M <= L, got L={self.L}, M={self.M}")


def compression_rate(params: RateParams) -> Fraction:
    """Rate of the pilot + syndrome stream, as an exact fraction."""
    return 1 - Fraction(params.K, params.N) * (1 - Fraction(params.M, params.L))


def payload_bits(params: RateParams) -> int:
    return params.N * params.M + (params.N - params.K) * (params.L - params.M)


class CurvePoint(NamedTuple):
    M: int
    entropy: float
    method: str
    std_err: float


@dataclass
class EntropyCurve:
    model_name: str
    points: list[CurvePoint] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("M,entropy_bits,method,std_err\n")
        for p in self.points:
            buf.write(f"{p.M},{p.entropy!r},{p.method},{p.std_err!r}\n")
        return buf.getvalue()


def _expand(model: HmmModel, alpha: np.ndarray, levels: int) -> np.ndarray:
    """Grow the prefix tree of joint forward vectors by ``levels`` symbols."""
    P = model.transition
    lik0 = model.emission_zero
    lik1 = 1.0 - lik0
    for _ in range(levels):
        alpha = np.concatenate([(alpha * lik0) @ P, (alpha * lik1) @ P])
    return alpha


def _prefix_entropy(model: HmmModel, alpha: np.ndarray) -> float:
    total = alpha.sum(axis=1)
    p1 = alpha @ (1.0 - model.emission_zero)
    keep = total > 0
    return float(np.sum(total[keep] * binary_entropy(p1[keep] / total[keep])))


def conditional_entropy_exact(model: HmmModel, M: int) -> float:
    """H(e_{M+1} | e_1..e_M) by enumerating every length-M prefix."""
    if M < 0:
        raise ValueError("M must be nonnegative")
    if M > MAX_EXACT_DEPTH:
        raise InfeasibleDepthError(
            f"M={M} exceeds the enumeration bound {MAX_EXACT_DEPTH}; "
            "use conditional_entropy_mc instead"
        )
    alpha = stationary_distribution(model)[None, :]
    head = max(0, M - _BLOCK_DEPTH)
    alpha = _expand(model, alpha, head)
    total = 0.0
    for row in alpha:
        total += _prefix_entropy(model, _expand(model, row[None, :], M - head))
    return total


def exact_curve(model: HmmModel, max_M: int) -> list[float]:
    """Exact conditional entropies for M = 0..max_M in one pass down the tree."""
    if max_M > MAX_EXACT_DEPTH:
        raise InfeasibleDepthError(f"max_M={max_M} exceeds {MAX_EXACT_DEPTH}")
    if max_M > _BLOCK_DEPTH:
        return [conditional_entropy_exact(model, m) for m in range(max_M + 1)]
    alpha = stationary_distribution(model)[None, :]
    out = [_prefix_entropy(model, alpha)]
    for _ in range(max_M):
        alpha = _expand(model, alpha, 1)
        out.append(_prefix_entropy(model, alpha))
    return out


def capacity(model: HmmModel, M: int) -> float:
    return 1.0 - conditional_entropy_exact(model, M)


def _mc_depths(model: HmmModel, depths: list[int], samples: int, seed: int):
    """Monte Carlo estimates at several depths from shared sample paths.

    Chunk ``c`` of the sample set draws from child ``c`` of
    ``SeedSequence(seed)``; each step draws the emission uniforms, then the
    transition uniforms. Paths therefore agree across calls on their common
    prefix, whatever depths are requested.
    """
    depths = sorted(set(depths))
    pi = stationary_distribution(model)
    cum_pi = np.cumsum(pi)
    cum_P = np.cumsum(model.transition, axis=1)
    cum_P[:, -1] = 1.0
    mu = model.emission_zero
    n_chunks = -(-samples // _MC_CHUNK)
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    # running (count, mean, M2) per depth, merged across chunks
    stats = {d: [0, 0.0, 0.0] for d in depths}
    for c, child in enumerate(children):
        n = min(_MC_CHUNK, samples - c * _MC_CHUNK)
        rng = np.random.default_rng(child)
        state = np.minimum(np.searchsorted(cum_pi, rng.random(n), side="right"), len(pi) - 1)
        belief = np.tile(pi, (n, 1))
        for t in range(depths[-1] + 1):
            if t in stats:
                h = binary_entropy(prob_one(model, belief))
                _merge(stats[t], h)
            if t == depths[-1]:
                break
            bits = (rng.random(n) >= mu[state]).astype(np.uint8)
            belief = forward_update_many(model, belief, bits)
            u = rng.random(n)
            state = np.minimum((u[:, None] >= cum_P[state]).sum(axis=1), len(pi) - 1)
    out = {}
    for d, (cnt, mean, m2) in stats.items():
        var = m2 / (cnt - 1) if cnt > 1 else 0.0
        out[d] = (mean, float(np.sqrt(max(var, 0.0) / cnt)))
    return out


def _merge(acc: list, values: np.ndarray) -> None:
    n_b = values.size
    mean_b = float(values.mean())
    m2_b = float(np.sum((values - mean_b) ** 2))
    n_a, mean_a, m2_a = acc
    n = n_a + n_b
    delta = mean_b - mean_a
    acc[0] = n
    acc[1] = mean_a + delta * n_b / n
    acc[2] = m2_a + m2_b + delta * delta * n_a * n_b / n


def conditional_entropy_mc(
    model: HmmModel, M: int, samples: int, seed: int
) -> tuple[float, float]:
    """Monte Carlo H(e_{M+1} | e_1..e_M): (estimate, standard error)."""
    if samples < 100:
        raise ValueError("samples must be at least 100")
    if M == 0:
        return binary_entropy(float(prob_one(model, stationary_distribution(model)))), 0.0
    return _mc_depths(model, [M], samples, seed)[M]


class EntropyRateResult(NamedTuple):
    value: float
    depth: int
    converged: bool
    method: str


def entropy_rate(
    model: HmmModel,
    tol: float = 1e-4,
    max_depth: int = 64,
    *,
    exact_depth: int = 20,
    mc_samples: int = 200_000,
    seed: int = 0,
) -> EntropyRateResult:
    """Upper estimate of the entropy rate H(e).

    Deepens the conditioning until successive conditional entropies differ by
    less than ``tol``; exact up to ``exact_depth``, Monte Carlo beyond.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    exact_depth = min(exact_depth, max_depth, MAX_EXACT_DEPTH)
    curve = exact_curve(model, exact_depth)
    for m in range(1, len(curve)):
        if abs(curve[m] - curve[m - 1]) < tol:
            return EntropyRateResult(curve[m], m, True, "exact")
    if max_depth <= exact_depth:
        return EntropyRateResult(curve[-1], exact_depth, False, "exact")
    depths = list(range(exact_depth, max_depth + 1))
    est = _mc_depths(model, depths, mc_samples, seed)
    prev = est[exact_depth][0]
    for m in depths[1:]:
        if abs(est[m][0] - prev) < tol:
            return EntropyRateResult(est[m][0], m, True, "monte-carlo")
        prev = est[m][0]
    return EntropyRateResult(prev, max_depth, False, "monte-carlo")


def fig3_curve(
    model: HmmModel,
    max_M: int,
    mc_samples: int = 200_000,
    seed: int = 0,
    exact_max: int = 20,
) -> EntropyCurve:
    """Conditional entropy against conditioning depth M = 0..max_M."""
    if max_M < 1:
        raise ValueError("max_M must be at least 1")
    exact_max = min(exact_max, max_M, MAX_EXACT_DEPTH)
    curve = EntropyCurve(model.name or "custom")
    for m, h in enumerate(exact_curve(model, exact_max)):
        curve.points.append(CurvePoint(m, h, "exact", 0.0))
    if max_M > exact_max:
        depths = list(range(exact_max + 1, max_M + 1))
        est = _mc_depths(model, depths, mc_samples, seed)
        for m in depths:
            curve.points.append(CurvePoint(m, est[m][0], "monte-carlo", est[m][1]))
    return curve
