"""Decision-feedback Slepian-Wolf codec.

A sequence of ``N * L`` bits is framed as an ``N x L`` uint8 array whose
row ``i`` holds the contiguous segment ``i*L .. i*L + L - 1``. Each column is
one LDPC block: the first ``M`` columns travel verbatim as pilots, every later
column is replaced by the syndrome of its interleaved bits. Column indices
are 0-based throughout.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import hmm
from .ldpc import DimensionError, ParityCheckMatrix, decode_syndrome_bp, syndrome

MAGIC = b"SWHMMDF1"
VERSION = 1
_HEADER = struct.Struct("<8sBIIIIQ")


class FormatError(ValueError):
    """Stream bytes or header fields do not match what the decoder expects."""


class FeedbackPolicy(str, Enum):
    FEED_HARD_DECISIONS = "feed-hard-decisions"
    FREEZE_ON_FAILURE = "freeze-on-failure"


@dataclass(frozen=True)
class FrameConfig:
    codeword_len: int
    num_columns: int
    num_pilots: int
    interleaver_seed: int = 0
    feedback_policy: FeedbackPolicy = FeedbackPolicy.FEED_HARD_DECISIONS
    # None: condition on the whole decided past of the row; k: on the last k symbols only
    window: int | None = None
    max_bp_iters: int = 100

    def __post_init__(self):
        object.__setattr__(self, "feedback_policy", FeedbackPolicy(self.feedback_policy))
        if self.codeword_len < 1 or self.num_columns < 1:
            raise ValueError("codeword_len and num_columns must be positive")
        if not (0 <= self.num_pilots <= self.num_columns):
            raise ValueError(f"need 0 <= M <= L, got M={self.num_pilots}, L={self.num_columns}")
        if not (0 <= self.interleaver_seed < 2**64):
            raise ValueError("interleaver_seed must fit in 64 unsigned bits")
        if self.window is not None and self.window < 0:
            raise ValueError("window must be nonnegative")


@dataclass(eq=False)
class CompressedStream:
    n: int
    l: int
    m: int
    k: int
    interleaver_seed: int
    pilots: np.ndarray     # (m, n) uint8, one row per pilot column
    syndromes: np.ndarray  # (l - m, n - k) uint8

    @property
    def payload_bits(self) -> int:
        return self.n * self.m + (self.n - self.k) * (self.l - self.m)

    def to_bytes(self) -> bytes:
        head = _HEADER.pack(MAGIC, VERSION, self.n, self.l, self.m, self.k, self.interleaver_seed)
        parts = [head]
        parts += [np.packbits(col, bitorder="little").tobytes() for col in self.pilots]
        parts += [np.packbits(s, bitorder="little").tobytes() for s in self.syndromes]
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> CompressedStream:
        if len(data) < _HEADER.size:
            raise FormatError("stream shorter than its header")
        magic, version, n, l, m, k, seed = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise FormatError(f"bad magic {magic!r}")
        if version != VERSION:
            raise FormatError(f"unsupported version {version}")
        if not (0 <= m <= l and 0 < k < n):
            raise FormatError(f"inconsistent header N={n} L={l} M={m} K={k}")
        pilot_bytes = -(-n // 8)
        syn_bytes = -(-(n - k) // 8)
        expected = _HEADER.size + m * pilot_bytes + (l - m) * syn_bytes
        if len(data) != expected:
            raise FormatError(f"stream is {len(data)} bytes, header implies {expected}")
        buf = np.frombuffer(data, dtype=np.uint8, offset=_HEADER.size)
        split = m * pilot_bytes
        pilots = np.unpackbits(buf[:split].reshape(m, pilot_bytes), axis=1, count=n, bitorder="little")
        syn = np.unpackbits(
            buf[split:].reshape(l - m, syn_bytes), axis=1, count=n - k, bitorder="little"
        )
        return cls(n, l, m, k, seed, pilots, syn)


@dataclass
class DecodeReport:
    recovered: np.ndarray
    per_column_converged: np.ndarray  # flags for columns M..L-1
    per_column_iterations: np.ndarray
    gamma: np.ndarray  # (N, L - M) predicted error LLRs, one column per decoded column
    hamming_distortion: float | None = None
    per_column_bit_errors: np.ndarray | None = None


def frame(bits, config: FrameConfig) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.uint8).reshape(-1)
    n, l = config.codeword_len, config.num_columns
    if bits.size != n * l:
        raise DimensionError(f"expected {n * l} bits, got {bits.size}")
    return bits.reshape(n, l).copy()


def unframe(frame_bits: np.ndarray) -> np.ndarray:
    return np.asarray(frame_bits).reshape(-1).copy()


def column_permutation(config: FrameConfig, col_index: int) -> np.ndarray:
    """Interleaver for column ``col_index``: permuted row r holds original row perm[r]."""
    rng = np.random.default_rng([config.interleaver_seed, col_index])
    return rng.permutation(config.codeword_len)


def _check_dims(frame_bits: np.ndarray, H: ParityCheckMatrix, config: FrameConfig) -> None:
    if frame_bits.shape != (config.codeword_len, config.num_columns):
        raise DimensionError(
            f"frame shape {frame_bits.shape} != ({config.codeword_len}, {config.num_columns})"
        )
    if H.n_bits != config.codeword_len:
        raise DimensionError(f"code length {H.n_bits} != codeword_len {config.codeword_len}")


def encode(y_frame: np.ndarray, H: ParityCheckMatrix, config: FrameConfig) -> CompressedStream:
    y_frame = np.asarray(y_frame, dtype=np.uint8)
    _check_dims(y_frame, H, config)
    M, L = config.num_pilots, config.num_columns
    pilots = y_frame[:, :M].T.copy()
    syn = np.zeros((L - M, H.n_checks), dtype=np.uint8)
    for j in range(M, L):
        perm = column_permutation(config, j)
        syn[j - M] = syndrome(H, y_frame[perm, j])
    return CompressedStream(
        config.codeword_len, L, M, H.k, config.interleaver_seed, pilots, syn
    )


def _stream_matches(stream: CompressedStream, H: ParityCheckMatrix, config: FrameConfig) -> None:
    want = (config.codeword_len, config.num_columns, config.num_pilots, H.k, config.interleaver_seed)
    got = (stream.n, stream.l, stream.m, stream.k, stream.interleaver_seed)
    if want != got:
        raise FormatError(f"stream header (N, L, M, K, seed) = {got} but decoder expects {want}")


def _window_beliefs(model, pi, e_hat, observed, j, window) -> np.ndarray:
    """Row beliefs for column j from the last ``window`` decided symbols."""
    n = e_hat.shape[0]
    beliefs = np.tile(pi, (n, 1))
    for t in range(max(0, j - window), j):
        beliefs = hmm.forward_update_many(model, beliefs, e_hat[:, t], observed[:, t])
    return beliefs


def side_info_llr(gamma: np.ndarray, x_col: np.ndarray) -> np.ndarray:
    """LLR of Y from the LLR of e: Y = X xor e flips the sign where X = 1."""
    return np.where(np.asarray(x_col) == 0, gamma, -gamma)


def decode(
    x_frame: np.ndarray,
    stream: CompressedStream,
    H: ParityCheckMatrix,
    model: hmm.HmmModel,
    config: FrameConfig,
    y_truth: np.ndarray | None = None,
) -> DecodeReport:
    """Recover Y column by column from X, the stream and the error model.

    Decoding failures never raise; they show up in ``per_column_converged``.
    """
    x_frame = np.asarray(x_frame, dtype=np.uint8)
    _check_dims(x_frame, H, config)
    _stream_matches(stream, H, config)
    N, L, M = config.codeword_len, config.num_columns, config.num_pilots

    pi = hmm.stationary_distribution(model)
    beliefs = np.tile(pi, (N, 1))
    y_hat = np.zeros((N, L), dtype=np.uint8)
    e_hat = np.zeros((N, L), dtype=np.uint8)
    observed = np.ones((N, L), dtype=bool)
    for j in range(M):
        y_hat[:, j] = stream.pilots[j]
        e_hat[:, j] = x_frame[:, j] ^ y_hat[:, j]
        if config.window is None:
            beliefs = hmm.forward_update_many(model, beliefs, e_hat[:, j])

    converged = np.zeros(L - M, dtype=bool)
    iterations = np.zeros(L - M, dtype=np.int64)
    gammas = np.zeros((N, L - M))
    for j in range(M, L):
        if config.window is not None:
            beliefs = _window_beliefs(model, pi, e_hat, observed, j, config.window)
        gamma = hmm.predict_llr_many(model, beliefs)
        gammas[:, j - M] = gamma
        lam = side_info_llr(gamma, x_frame[:, j])
        perm = column_permutation(config, j)
        res = decode_syndrome_bp(H, lam[perm], stream.syndromes[j - M], config.max_bp_iters)
        y_hat[perm, j] = res.hard_bits
        e_hat[:, j] = x_frame[:, j] ^ y_hat[:, j]
        converged[j - M] = res.syndrome_satisfied
        iterations[j - M] = res.iterations_used
        if not res.syndrome_satisfied and config.feedback_policy is FeedbackPolicy.FREEZE_ON_FAILURE:
            observed[:, j] = False
        if config.window is None:
            beliefs = hmm.forward_update_many(model, beliefs, e_hat[:, j], observed[:, j])

    report = DecodeReport(y_hat, converged, iterations, gammas)
    if y_truth is not None:
        y_truth = np.asarray(y_truth, dtype=np.uint8)
        report.hamming_distortion = distortion(y_truth, y_hat)
        report.per_column_bit_errors = np.count_nonzero(y_truth[:, M:] != y_hat[:, M:], axis=0)
    return report


def distortion(truth: np.ndarray, recovered: np.ndarray) -> float:
    truth = np.asarray(truth)
    recovered = np.asarray(recovered)
    if truth.shape != recovered.shape:
        raise DimensionError(f"shapes differ: {truth.shape} vs {recovered.shape}")
    return float(np.count_nonzero(truth != recovered) / truth.size)
