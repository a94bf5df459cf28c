"""Sparse parity-check codes: construction, syndromes, alist I/O and a
syndrome-target sum-product decoder.

Priors and posteriors use the package LLR convention log P(1)/P(0).
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

MSG_CLAMP = 30.0
_TANH_CLAMP = np.tanh(MSG_CLAMP / 2)
_MAX_ATTEMPTS = 50


class CodeConstructionError(ValueError):
    pass


class DimensionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ParityCheckMatrix:
    """Binary matrix stored as an edge list sorted by (check, bit)."""

    n_bits: int
    n_checks: int
    edge_check: np.ndarray
    edge_bit: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.edge_check, dtype=np.int64)
        b = np.asarray(self.edge_bit, dtype=np.int64)
        if c.shape != b.shape or c.ndim != 1:
            raise ValueError("edge arrays must be 1-D and equally long")
        if c.size and (c.min() < 0 or c.max() >= self.n_checks or b.min() < 0 or b.max() >= self.n_bits):
            raise ValueError("edge index out of range")
        order = np.lexsort((b, c))
        c, b = c[order], b[order]
        if np.any((np.diff(c) == 0) & (np.diff(b) == 0)):
            raise ValueError("duplicate edge")
        for a in (c, b):
            a.setflags(write=False)
        object.__setattr__(self, "edge_check", c)
        object.__setattr__(self, "edge_bit", b)

    @classmethod
    def from_dense(cls, H) -> ParityCheckMatrix:
        H = np.asarray(H)
        c, b = np.nonzero(H)
        return cls(H.shape[1], H.shape[0], c, b)

    def to_dense(self) -> np.ndarray:
        H = np.zeros((self.n_checks, self.n_bits), dtype=np.uint8)
        H[self.edge_check, self.edge_bit] = 1
        return H

    @property
    def n_edges(self) -> int:
        return int(self.edge_check.size)

    @property
    def k(self) -> int:
        """Design dimension N - (number of checks)."""
        return self.n_bits - self.n_checks

    @property
    def rate(self) -> float:
        return self.k / self.n_bits

    @cached_property
    def check_degrees(self) -> np.ndarray:
        return np.bincount(self.edge_check, minlength=self.n_checks)

    @cached_property
    def bit_degrees(self) -> np.ndarray:
        return np.bincount(self.edge_bit, minlength=self.n_bits)

    @cached_property
    def check_neighbors(self) -> list[np.ndarray]:
        splits = np.cumsum(self.check_degrees)[:-1]
        return np.split(self.edge_bit, splits)

    @cached_property
    def bit_neighbors(self) -> list[np.ndarray]:
        order = np.lexsort((self.edge_check, self.edge_bit))
        splits = np.cumsum(self.bit_degrees)[:-1]
        return np.split(self.edge_check[order], splits)

    @cached_property
    def _padded(self) -> tuple[np.ndarray, np.ndarray]:
        # (n_checks, max_degree) edge-index table; padding slots hold -1
        deg = self.check_degrees
        width = int(deg.max()) if deg.size else 0
        table = np.full((self.n_checks, width), -1, dtype=np.int64)
        start = np.concatenate([[0], np.cumsum(deg)[:-1]])
        slot = np.arange(self.n_edges) - start[self.edge_check]
        table[self.edge_check, slot] = np.arange(self.n_edges)
        return table, table >= 0

    def same_edges(self, other: ParityCheckMatrix) -> bool:
        return (
            self.n_bits == other.n_bits
            and self.n_checks == other.n_checks
            and np.array_equal(self.edge_check, other.edge_check)
            and np.array_equal(self.edge_bit, other.edge_bit)
        )


def has_four_cycle(H: ParityCheckMatrix) -> bool:
    """True when two checks share two or more bits (exhaustive pair scan)."""
    seen: set[tuple[int, int]] = set()
    for bits in H.check_neighbors:
        bl = bits.tolist()
        for i in range(len(bl)):
            for j in range(i + 1, len(bl)):
                pair = (bl[i], bl[j])
                if pair in seen:
                    return True
                seen.add(pair)
    return False


# ----- construction -----

def build_regular(n_bits: int, col_weight: int, row_weight: int, seed: int) -> ParityCheckMatrix:
    if n_bits < 1 or col_weight < 1 or row_weight < 1:
        raise CodeConstructionError("sizes and degrees must be positive")
    if (n_bits * col_weight) % row_weight:
        raise CodeConstructionError(
            f"n_bits*col_weight = {n_bits * col_weight} is not divisible by row_weight={row_weight}"
        )
    n_checks = n_bits * col_weight // row_weight
    return _peg([col_weight] * n_bits, [row_weight] * n_checks, seed)


def _apportion(total: int, dist: list[tuple[int, float]]) -> list[int]:
    """Largest-remainder split of ``total`` nodes over the degree classes."""
    quotas = [total * f for _, f in dist]
    counts = [int(np.floor(q)) for q in quotas]
    short = total - sum(counts)
    order = sorted(range(len(dist)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[:short]:
        counts[i] += 1
    return counts


def _check_dist(dist, label: str) -> list[tuple[int, float]]:
    dist = [(int(d), float(f)) for d, f in (dist.items() if isinstance(dist, dict) else dist)]
    if not dist:
        raise CodeConstructionError(f"{label} degree distribution is empty")
    if abs(sum(f for _, f in dist) - 1.0) > 1e-9:
        raise CodeConstructionError(f"{label} degree fractions must sum to 1")
    if any(d < 1 or f < 0 for d, f in dist):
        raise CodeConstructionError(f"{label} degrees must be >= 1 with nonnegative fractions")
    return sorted(dist)


def build_irregular(n_bits: int, bit_degree_distribution, check_degree_distribution, seed: int) -> ParityCheckMatrix:
    """PEG code with prescribed node-fraction degree distributions.

    Distributions are ``[(degree, node_fraction), ...]`` or ``{degree: fraction}``.
    """
    bit_dist = _check_dist(bit_degree_distribution, "bit")
    chk_dist = _check_dist(check_degree_distribution, "check")
    bit_counts = _apportion(n_bits, bit_dist)
    bit_degs = [d for (d, _), c in zip(bit_dist, bit_counts) for _ in range(c)]
    n_edges = sum(bit_degs)
    mean_check = sum(d * f for d, f in chk_dist)
    n_checks = max(1, int(round(n_edges / mean_check)))
    chk_counts = _apportion(n_checks, chk_dist)
    chk_degs = [d for (d, _), c in zip(chk_dist, chk_counts) for _ in range(c)]
    gap = n_edges - sum(chk_degs)
    if gap:
        # repair on one maximum-degree check
        slack = max(d for d, _ in chk_dist)
        if abs(gap) > slack or chk_degs[-1] + gap < 1:
            raise CodeConstructionError(
                f"edge counts differ by {gap} after rounding (bits {n_edges}, checks {sum(chk_degs)})"
            )
        chk_degs[-1] += gap
    return _peg(bit_degs, chk_degs, seed)


def check_degrees_for_rate(n_bits: int, rate: float, bit_degree: int) -> list[tuple[int, float]]:
    """Concentrated check distribution giving a code of (design) rate ``rate``."""
    n_checks = int(round(n_bits * (1.0 - rate)))
    if not (0 < n_checks < n_bits):
        raise CodeConstructionError(f"rate {rate} leaves {n_checks} checks for N={n_bits}")
    edges = n_bits * bit_degree
    lo, extra = divmod(edges, n_checks)
    if extra == 0:
        return [(lo, 1.0)]
    return [(lo, (n_checks - extra) / n_checks), (lo + 1, extra / n_checks)]


def build_for_rate(n_bits: int, rate: float, bit_degree: int, seed: int) -> ParityCheckMatrix:
    """Bit-regular code whose check degrees differ by at most one."""
    n_checks = int(round(n_bits * (1.0 - rate)))
    if not (0 < n_checks < n_bits):
        raise CodeConstructionError(f"rate {rate} leaves {n_checks} checks for N={n_bits}")
    lo, extra = divmod(n_bits * bit_degree, n_checks)
    chk_degs = [lo] * (n_checks - extra) + [lo + 1] * extra
    return _peg([bit_degree] * n_bits, chk_degs, seed)


def _peg(bit_degs: list[int], chk_degs: list[int], seed: int) -> ParityCheckMatrix:
    n_bits, n_checks = len(bit_degs), len(chk_degs)
    if sum(bit_degs) != sum(chk_degs):
        raise CodeConstructionError("bit and check edge totals differ")
    if max(bit_degs) > n_checks:
        raise CodeConstructionError("a bit degree exceeds the number of checks")
    rng = np.random.default_rng(seed)
    for _ in range(_MAX_ATTEMPTS):
        H = _peg_attempt(bit_degs, chk_degs, rng)
        if H is not None:
            return H
    raise CodeConstructionError(
        f"could not place {sum(bit_degs)} edges without 4-cycles "
        f"(N={n_bits}, checks={n_checks}) after {_MAX_ATTEMPTS} attempts"
    )


def _peg_attempt(bit_degs, chk_degs, rng) -> ParityCheckMatrix | None:
    n_bits, n_checks = len(bit_degs), len(chk_degs)
    bit_adj: list[list[int]] = [[] for _ in range(n_bits)]
    chk_adj: list[list[int]] = [[] for _ in range(n_checks)]
    cap = list(chk_degs)
    # random tie-break keys, fixed per attempt
    tie = rng.permutation(n_checks).tolist()
    bit_tie = rng.permutation(n_bits).tolist()
    # low-degree bits first, shuffled within each degree class
    order = sorted(range(n_bits), key=lambda j: (bit_degs[j], bit_tie[j]))
    open_checks = set(c for c in range(n_checks) if cap[c] > 0)
    for j in order:
        for k in range(bit_degs[j]):
            if k == 0:
                cands = open_checks
            else:
                cands = _farthest_open(j, bit_adj, chk_adj, open_checks)
                if cands is None:
                    c = _swap_in(j, bit_adj, chk_adj, open_checks, rng)
                    if c is None:
                        return None
                    cap[c] -= 1
                    if cap[c] == 0:
                        open_checks.discard(c)
                    continue
            c = min(cands, key=lambda x: (len(chk_adj[x]), tie[x]))
            bit_adj[j].append(c)
            chk_adj[c].append(j)
            cap[c] -= 1
            if cap[c] == 0:
                open_checks.discard(c)
    if any(len(a) == 0 for a in chk_adj):
        return None
    edge_check = [c for c in range(n_checks) for _ in chk_adj[c]]
    edge_bit = [b for c in range(n_checks) for b in chk_adj[c]]
    return ParityCheckMatrix(n_bits, n_checks, np.array(edge_check), np.array(edge_bit))


def _farthest_open(j, bit_adj, chk_adj, open_checks) -> set[int] | None:
    """Open checks at maximal distance from bit ``j``; None if every open
    check would close a 4-cycle (or already neighbours ``j``)."""
    seen_checks = set(bit_adj[j])
    seen_bits = {j}
    frontier = list(seen_checks)
    remaining = open_checks - seen_checks
    if not remaining:
        return None
    depth = 0
    while True:
        new_checks = []
        for c in frontier:
            for b in chk_adj[c]:
                if b in seen_bits:
                    continue
                seen_bits.add(b)
                for c2 in bit_adj[b]:
                    if c2 not in seen_checks:
                        seen_checks.add(c2)
                        new_checks.append(c2)
        depth += 1
        if not new_checks:
            return remaining
        reached = remaining.intersection(new_checks)
        if len(reached) == len(remaining):
            # all open checks reached at this layer: they are the farthest,
            # unless this is the two-hop layer where they would form 4-cycles
            return remaining if depth >= 2 else None
        remaining -= reached
        frontier = new_checks


def _clashes(chk_adj, bit_checks, x, drop_check=None, drop_bit=None) -> bool:
    """Would joining check ``x`` to a bit with checks ``bit_checks`` close a 4-cycle?"""
    if x in bit_checks:
        return True
    xs = set(chk_adj[x])
    xs.discard(drop_bit)
    return any(y != drop_check and not xs.isdisjoint(chk_adj[y]) for y in bit_checks)


def _swap_in(j, bit_adj, chk_adj, open_checks, rng, tries: int = 2000):
    """Give bit ``j`` an edge when every open check would close a 4-cycle.

    Moves an existing edge (c2, b2) to (c2, j) and reattaches b2 to an open
    check. Returns the open check consumed, or None.
    """
    n_checks = len(chk_adj)
    opens = sorted(open_checks)
    for _ in range(tries):
        c2 = int(rng.integers(n_checks))
        if not chk_adj[c2]:
            continue
        b2 = chk_adj[c2][int(rng.integers(len(chk_adj[c2])))]
        if b2 == j or _clashes(chk_adj, bit_adj[j], c2, drop_bit=b2):
            continue
        rest = [y for y in bit_adj[b2] if y != c2]
        for c in opens:
            if c == c2 or _clashes(chk_adj, rest, c):
                continue
            chk_adj[c2].remove(b2)
            bit_adj[b2].remove(c2)
            chk_adj[c2].append(j)
            bit_adj[j].append(c2)
            chk_adj[c].append(b2)
            bit_adj[b2].append(c)
            return c
    return None


# ----- alist -----

def to_alist(H: ParityCheckMatrix) -> str:
    buf = io.StringIO()
    col_deg, row_deg = H.bit_degrees, H.check_degrees
    max_c, max_r = int(col_deg.max()), int(row_deg.max())
    buf.write(f"{H.n_bits} {H.n_checks}\n{max_c} {max_r}\n")
    buf.write(" ".join(map(str, col_deg.tolist())) + "\n")
    buf.write(" ".join(map(str, row_deg.tolist())) + "\n")
    for nbrs in H.bit_neighbors:
        row = (nbrs + 1).tolist() + [0] * (max_c - len(nbrs))
        buf.write(" ".join(map(str, row)) + "\n")
    for nbrs in H.check_neighbors:
        row = (nbrs + 1).tolist() + [0] * (max_r - len(nbrs))
        buf.write(" ".join(map(str, row)) + "\n")
    return buf.getvalue()


def from_alist(text: str) -> ParityCheckMatrix:
    """Parse alist text; zero padding is optional."""
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    try:
        n, m = int(lines[0][0]), int(lines[0][1])
        col_deg = [int(v) for v in lines[2]]
        row_deg = [int(v) for v in lines[3]]
        if len(col_deg) != n or len(row_deg) != m:
            raise ValueError("degree list length mismatch")
        edges_c, edges_b = [], []
        for j in range(n):
            nbrs = [int(v) for v in lines[4 + j] if int(v) > 0]
            if len(nbrs) != col_deg[j]:
                raise ValueError(f"column {j + 1} lists {len(nbrs)} checks, degree says {col_deg[j]}")
            edges_b += [j] * len(nbrs)
            edges_c += [c - 1 for c in nbrs]
        H = ParityCheckMatrix(n, m, np.array(edges_c, dtype=np.int64), np.array(edges_b, dtype=np.int64))
        if len(lines) >= 4 + n + m:
            for i in range(m):
                nbrs = sorted(int(v) - 1 for v in lines[4 + n + i] if int(v) > 0)
                if nbrs != H.check_neighbors[i].tolist():
                    raise ValueError(f"row {i + 1} disagrees with the column lists")
    except (IndexError, ValueError) as exc:
        raise ValueError(f"malformed alist: {exc}") from exc
    return H


def save_alist(H: ParityCheckMatrix, path: str | Path) -> None:
    Path(path).write_text(to_alist(H))


def load_alist(path: str | Path) -> ParityCheckMatrix:
    return from_alist(Path(path).read_text())


# ----- syndromes and decoding -----

def syndrome(H: ParityCheckMatrix, bits) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.uint8).reshape(-1)
    if bits.size != H.n_bits:
        raise DimensionError(f"expected {H.n_bits} bits, got {bits.size}")
    counts = np.bincount(H.edge_check, weights=bits[H.edge_bit], minlength=H.n_checks)
    return (counts.astype(np.int64) & 1).astype(np.uint8)


@dataclass
class DecodeResult:
    hard_bits: np.ndarray
    iterations_used: int
    syndrome_satisfied: bool
    posterior_llrs: np.ndarray


def decode_syndrome_bp(H: ParityCheckMatrix, priors, target, max_iters: int = 100) -> DecodeResult:
    """Flooding sum-product decoding towards the coset with syndrome ``target``.

    Checks whose target bit is 1 flip the sign of their outgoing messages.
    Hard decisions are tested before the first iteration, so consistent
    priors return with ``iterations_used == 0``. An LLR of exactly 0 decodes to 0.
    """
    priors = np.asarray(priors, dtype=np.float64).reshape(-1)
    target = np.asarray(target, dtype=np.uint8).reshape(-1)
    if priors.size != H.n_bits:
        raise DimensionError(f"expected {H.n_bits} priors, got {priors.size}")
    if target.size != H.n_checks:
        raise DimensionError(f"expected {H.n_checks} target bits, got {target.size}")

    # internal messages use log P(0)/P(1), the usual tanh-rule orientation
    prior0 = -np.clip(priors, -MSG_CLAMP, MSG_CLAMP)
    table, mask = H._padded
    eb, ec = H.edge_bit, H.edge_check
    check_sign = 1.0 - 2.0 * target.astype(np.float64)
    c2v = np.zeros(H.n_edges)
    post = prior0.copy()
    hard = (post < 0).astype(np.uint8)
    if np.array_equal(syndrome(H, hard), target):
        return DecodeResult(hard, 0, True, -post)

    t = np.ones(table.shape)
    it = 0
    ok = False
    for it in range(1, max_iters + 1):
        v2c = np.clip(post[eb] - c2v, -MSG_CLAMP, MSG_CLAMP)
        t[mask] = np.tanh(0.5 * v2c)
        # leave-one-out products via exclusive prefix and suffix products
        left = np.ones_like(t)
        left[:, 1:] = np.cumprod(t[:, :-1], axis=1)
        right = np.ones_like(t)
        right[:, :-1] = np.cumprod(t[:, :0:-1], axis=1)[:, ::-1]
        prod = np.clip(left * right * check_sign[:, None], -_TANH_CLAMP, _TANH_CLAMP)
        c2v = 2.0 * np.arctanh(prod[mask])
        post = prior0 + np.bincount(eb, weights=c2v, minlength=H.n_bits)
        hard = (post < 0).astype(np.uint8)
        if np.array_equal(syndrome(H, hard), target):
            ok = True
            break
    return DecodeResult(hard, it, ok, -post)
