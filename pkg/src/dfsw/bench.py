"""Monte Carlo compression experiments and rate sweeps."""
from __future__ import annotations

import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from . import codec, hmm, ldpc
from .limits import RateParams, compression_rate


class SpecError(ValueError):
    """Experiment description is inconsistent or incomplete."""


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to reproduce a simulation run.

    ``model`` is a built-in name (``"M1"``) or a mapping accepted by
    :func:`dfsw.hmm.model_from_mapping`. ``code`` is one of::

        {"kind": "regular", "bit_degree": 3, "check_degree": 6}
        {"kind": "rate", "rate": 0.375, "bit_degree": 3}
        {"kind": "irregular", "bit_degrees": [[2, 0.5], [3, 0.5]], "check_degrees": [[6, 1.0]]}
        {"kind": "alist", "path": "code.alist"}
    """

    model: str | dict = "M2"
    N: int = 2000
    L: int = 100
    M: int = 4
    code: dict = field(default_factory=lambda: {"kind": "rate", "rate": 0.375, "bit_degree": 3})
    code_seed: int = 0
    num_blocks: int = 50
    master_seed: int = 0
    max_bp_iters: int = 100
    feedback_policy: str = "feed-hard-decisions"
    window: int | None = None

    def validate(self) -> None:
        try:
            self.build_model()
            codec.FrameConfig(self.N, self.L, self.M, 0, self.feedback_policy, self.window, self.max_bp_iters)
        except (ValueError, hmm.SingularChainError) as exc:
            raise SpecError(str(exc)) from exc
        if self.num_blocks < 1:
            raise SpecError("num_blocks must be positive")
        if self.max_bp_iters < 1:
            raise SpecError("max_bp_iters must be positive")
        kind = self.code.get("kind")
        if kind not in ("regular", "rate", "irregular", "alist"):
            raise SpecError(f"unknown code kind {kind!r}")

    def build_model(self) -> hmm.HmmModel:
        if isinstance(self.model, str):
            return hmm.named_model(self.model)
        return hmm.model_from_mapping(self.model)

    def build_code(self) -> ldpc.ParityCheckMatrix:
        c = self.code
        try:
            kind = c["kind"]
            if kind == "regular":
                H = ldpc.build_regular(self.N, int(c["bit_degree"]), int(c["check_degree"]), self.code_seed)
            elif kind == "rate":
                H = ldpc.build_for_rate(self.N, float(c["rate"]), int(c.get("bit_degree", 3)), self.code_seed)
            elif kind == "irregular":
                H = ldpc.build_irregular(self.N, c["bit_degrees"], c["check_degrees"], self.code_seed)
            elif kind == "alist":
                H = ldpc.load_alist(c["path"])
            else:
                raise SpecError(f"unknown code kind {kind!r}")
        except KeyError as exc:
            raise SpecError(f"code spec is missing {exc}") from None
        if H.n_bits != self.N:
            raise SpecError(f"code has {H.n_bits} bits but N={self.N}")
        return H

    @classmethod
    def from_mapping(cls, cfg: dict) -> ExperimentSpec:
        known = set(cls.__dataclass_fields__)
        unknown = set(cfg) - known
        if unknown:
            raise SpecError(f"unknown experiment keys: {sorted(unknown)}")
        return cls(**cfg)


def block_seed(master_seed: int, block: int) -> int:
    """Seed of block ``block``: independent of how blocks are scheduled."""
    state = np.random.SeedSequence([master_seed, block]).generate_state(2, dtype=np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


def run_block(model: hmm.HmmModel, H: ldpc.ParityCheckMatrix, spec: ExperimentSpec, seed: int) -> dict:
    """One frame: sample e and X, encode Y = X xor e, decode, score."""
    N, L, M = spec.N, spec.L, spec.M
    e, _ = hmm.sample(model, N * L, seed=seed)
    x = np.random.default_rng([seed, 1]).integers(0, 2, N * L, dtype=np.uint8)
    cfg = codec.FrameConfig(N, L, M, seed, spec.feedback_policy, spec.window, spec.max_bp_iters)
    X = codec.frame(x, cfg)
    Y = codec.frame(x ^ e, cfg)
    stream = codec.encode(Y, H, cfg)
    rep = codec.decode(X, stream, H, model, cfg, y_truth=Y)
    return {
        "seed": seed,
        "distortion": rep.hamming_distortion,
        "bit_errors": int(rep.per_column_bit_errors.sum()),
        "converged": rep.per_column_converged.tolist(),
        "payload_bits": stream.payload_bits,
    }


def _run_block_star(args):
    return run_block(*args)


def simulate(
    spec: ExperimentSpec, H: ldpc.ParityCheckMatrix | None = None, workers: int = 1
) -> dict:
    """Run ``spec.num_blocks`` blocks and aggregate a JSON-ready report."""
    spec.validate()
    model = spec.build_model()
    if H is None:
        H = spec.build_code()
    seeds = [block_seed(spec.master_seed, b) for b in range(spec.num_blocks)]
    t0 = time.perf_counter()
    jobs = [(model, H, spec, s) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            blocks = list(pool.map(_run_block_star, jobs))
    else:
        blocks = [run_block(*job) for job in jobs]
    elapsed = time.perf_counter() - t0

    rate = compression_rate(RateParams(spec.N, H.k, spec.L, spec.M))
    n_cols = spec.L - spec.M
    conv = np.array([b["converged"] for b in blocks], dtype=bool).reshape(len(blocks), n_cols)
    dist = np.array([b["distortion"] for b in blocks])
    failed = ~conv.all(axis=1) if n_cols else np.zeros(len(blocks), dtype=bool)
    payload = blocks[0]["payload_bits"]
    if Fraction(payload, spec.N * spec.L) != rate:
        raise RuntimeError("stream size disagrees with the rate formula")
    return {
        "spec": asdict(spec),
        "code": {
            "n_bits": H.n_bits,
            "n_checks": H.n_checks,
            "k": H.k,
            "edges": H.n_edges,
            "code_rate": H.k / H.n_bits,
        },
        "compression_rate": float(rate),
        "compression_rate_exact": f"{rate.numerator}/{rate.denominator}",
        "syndrome_only_rate": 1.0 - H.k / H.n_bits,
        "payload_bits_per_block": payload,
        "mean_distortion": float(dist.mean()),
        "column_convergence_rate": float(conv.mean()) if conv.size else 1.0,
        "per_column_convergence_rate": conv.mean(axis=0).tolist() if n_cols else [],
        "blocks_run": len(blocks),
        "failed_blocks": int(failed.sum()),
        "failed_block_mean_distortion": float(dist[failed].mean()) if failed.any() else 0.0,
        "block_seeds": seeds,
        "block_distortions": dist.tolist(),
        "block_bit_errors": [b["bit_errors"] for b in blocks],
        "wall_clock_seconds": elapsed,
    }


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def report_schema() -> dict:
    text = resources.files("dfsw").joinpath("schemas/simulation_report.schema.json").read_text()
    return json.loads(text)


@dataclass
class SweepRow:
    code_rate: float
    compression_rate: float
    distortion: float
    convergence_rate: float
    met: bool = False
    best: bool = False


def sweep(spec: ExperimentSpec, rates: list[float], target: float, workers: int = 1) -> list[SweepRow]:
    """Simulate one fresh code per grid rate; flag the cheapest point meeting ``target``."""
    if not rates:
        raise SpecError("rate grid is empty")
    d = np.diff(rates)
    if not (np.all(d > 0) or np.all(d < 0)):
        raise SpecError("rate grid must be strictly monotone")
    bit_degree = int(spec.code.get("bit_degree", 3))
    rows = []
    for r in rates:
        s = replace(spec, code={"kind": "rate", "rate": float(r), "bit_degree": bit_degree})
        rep = simulate(s, workers=workers)
        rows.append(
            SweepRow(
                rep["code"]["code_rate"],
                rep["compression_rate"],
                rep["mean_distortion"],
                rep["column_convergence_rate"],
            )
        )
    mark_best(rows, target)
    return rows


def mark_best(rows: list[SweepRow], target: float) -> SweepRow | None:
    best = None
    for row in rows:
        row.met = row.distortion <= target
        row.best = False
        if row.met and (best is None or row.compression_rate < best.compression_rate):
            best = row
    if best is not None:
        best.best = True
    return best


def sweep_csv(rows: list[SweepRow], target: float) -> str:
    buf = io.StringIO()
    buf.write("code_rate,compression_rate,distortion,convergence_rate,met,best\n")
    for r in rows:
        buf.write(
            f"{r.code_rate!r},{r.compression_rate!r},{r.distortion!r},"
            f"{r.convergence_rate!r},{int(r.met)},{int(r.best)}\n"
        )
    best = next((r for r in rows if r.best), None)
    if best is None:
        buf.write(f"# target {target!r} not met\n")
    else:
        buf.write(f"# target {target!r} met at compression_rate {best.compression_rate!r}\n")
    return buf.getvalue()


def load_spec(path: str | Path, overrides: dict | None = None) -> tuple[ExperimentSpec, dict]:
    """Read an experiment file; returns the spec and any extra (sweep) keys."""
    cfg = dict(hmm.load_mapping(path))
    extra = {k: cfg.pop(k) for k in ("rates", "target", "workers") if k in cfg}
    cfg.update(overrides or {})
    return ExperimentSpec.from_mapping(cfg), extra
