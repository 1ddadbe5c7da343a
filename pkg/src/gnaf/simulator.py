"""Seeded Monte Carlo engine for symbol and codeword error rates.

Each SNR point is split into fixed-size blocks of trials.  Block ``b`` of
point ``p`` draws everything it needs (codeword indices, fades, noise) from
its own Philox stream keyed by ``(seed, p, b)``, so results do not depend on
how many worker processes evaluate the blocks.  Blocks are merged in index
order; with an error-count stopping rule the point ends after the first
block at which the running codeword-error count reaches the target, and
blocks computed beyond it are discarded.
"""

import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channel import draw_channels, draw_noises, frame_rng
from .codes import validate_code
from .decoder import (
    RealEquivalentSystem,
    build_systems_batch,
    decode_exhaustive_batch,
    sphere_decode,
)
from .numerics import to_real
from .protocol import observe_batch

CSV_HEADER = "snr_db,P,trials,symbol_errors,codeword_errors,ser,cer,ser_lo,ser_hi,cer_lo,cer_hi,mean_nodes"
DECODERS = ("exhaustive", "sphere")


class PlanValidationError(ValueError):
    pass


def wilson_interval(k, n, alpha=0.05):
    from statsmodels.stats.proportion import proportion_confint

    lo, hi = proportion_confint(k, n, alpha=alpha, method="wilson")
    return float(lo), float(hi)


@dataclass(frozen=True)
class SimulationPlan:
    """Everything that determines a simulation run.

    ``snr_grid`` holds total power values ``P`` (linear).  ``noise_scale``
    multiplies every noise draw and exists for diagnostics; the decoder
    always assumes unit-variance noise.
    """

    config: object
    code: object
    codebook: object
    snr_grid: tuple
    trials_per_point: int
    seed: int
    decoder: str = "exhaustive"
    min_codeword_errors: Optional[int] = None
    block_size: int = 2000
    noise_scale: float = 1.0
    force: bool = False

    def __post_init__(self):
        grid = tuple(float(P) for P in self.snr_grid)
        object.__setattr__(self, "snr_grid", grid)
        if not grid or any(P <= 0 for P in grid):
            raise PlanValidationError("snr_grid must hold positive power values")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise PlanValidationError("snr_grid must be strictly increasing")
        if int(self.trials_per_point) != self.trials_per_point or self.trials_per_point < 1:
            raise PlanValidationError("trials_per_point must be a positive integer")
        if self.decoder not in DECODERS:
            raise PlanValidationError(f"decoder must be one of {DECODERS}")
        if self.block_size < 1:
            raise PlanValidationError("block_size must be positive")
        if self.min_codeword_errors is not None and self.min_codeword_errors < 1:
            raise PlanValidationError("min_codeword_errors must be positive")
        if not 0 <= self.seed < 2**64:
            raise PlanValidationError("seed must be an unsigned 64-bit integer")

    def digest(self):
        h = hashlib.sha256()
        meta = {
            "config": {k: v for k, v in self.config.to_dict().items() if k != "P"},
            "snr_grid": [repr(P) for P in self.snr_grid],
            "trials": self.trials_per_point,
            "seed": self.seed,
            "decoder": self.decoder,
            "min_codeword_errors": self.min_codeword_errors,
            "block_size": self.block_size,
            "noise_scale": repr(self.noise_scale),
            "force": self.force,
        }
        h.update(json.dumps(meta, sort_keys=True).encode())
        for arr in (self.code.A, self.code.B, self.code.A0, self.code.B0,
                    self.codebook.alphabet, self.codebook.mapping):
            h.update(b"-" if arr is None else np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


@dataclass
class PointResult:
    P: float
    trials: int
    symbol_errors: int
    codeword_errors: int
    symbols_per_codeword: int
    nodes_total: int

    @property
    def snr_db(self):
        return 10 * math.log10(self.P)

    @property
    def ser(self):
        return self.symbol_errors / (self.trials * self.symbols_per_codeword)

    @property
    def cer(self):
        return self.codeword_errors / self.trials

    @property
    def ser_ci(self):
        return wilson_interval(self.symbol_errors, self.trials * self.symbols_per_codeword)

    @property
    def cer_ci(self):
        return wilson_interval(self.codeword_errors, self.trials)

    @property
    def mean_nodes(self):
        return self.nodes_total / self.trials


@dataclass
class SimResult:
    points: list
    seed: int
    plan_hash: str
    wall_time: float
    forced: bool = False
    validation: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def curve(self, metric="cer"):
        return [(p.P, getattr(p, metric)) for p in self.points]

    def to_csv(self):
        lines = [CSV_HEADER]
        for p in self.points:
            fields = [p.snr_db, p.P, p.trials, p.symbol_errors, p.codeword_errors, p.ser, p.cer,
                      *p.ser_ci, *p.cer_ci, p.mean_nodes]
            lines.append(",".join(str(v) if isinstance(v, int) else f"{v:.17g}" for v in fields))
        return "\n".join(lines) + "\n"

    def sidecar(self):
        return {
            "plan_hash": self.plan_hash,
            "seed": self.seed,
            "wall_time": self.wall_time,
            "forced": self.forced,
            "validation": self.validation,
            "warnings": self.warnings,
        }


def _run_block(plan, point, block):
    """Counters ``(trials, symbol_errors, codeword_errors, nodes)`` of one block."""
    cfg = plan.config.with_power(plan.snr_grid[point])
    code, cb = plan.code, plan.codebook
    start = block * plan.block_size
    n = min(plan.block_size, plan.trials_per_point - start)
    rng = frame_rng(plan.seed, point, block)
    sent = rng.integers(len(cb), size=n)
    g0, f, g = draw_channels(cfg.R, n, rng)
    v, w1, w2 = (x * plan.noise_scale for x in draw_noises(cfg, n, rng))
    y = observe_batch(cfg, code, cb.vectors[sent], g0, f, g, v, w1, w2)
    Hw, L_inv, G, C = build_systems_batch(cfg, code, g0, f, g)
    if plan.decoder == "exhaustive":
        z = np.einsum("nkm,nm->nk", L_inv, to_real(y))
        decided, _ = decode_exhaustive_batch(z, Hw, cb)
        nodes = n * len(cb)
    else:
        decided = np.empty(n, dtype=np.intp)
        nodes = 0
        for k in range(n):
            sys = RealEquivalentSystem(G[k], cfg.mean_scale, C[k], L_inv[k])
            res = sphere_decode(y[k], sys, cb)
            decided[k] = res.index
            nodes += res.nodes_visited
    sym_err = int(np.sum(cb.symbols[decided] != cb.symbols[sent]))
    cw_err = int(np.sum(decided != sent))
    return n, sym_err, cw_err, nodes


_WORKER_PLAN = None


def _init_worker(plan):
    global _WORKER_PLAN
    _WORKER_PLAN = plan


def _worker_block(args):
    return _run_block(_WORKER_PLAN, *args)


def _monotonicity_warnings(points):
    out = []
    for a, b in zip(points, points[1:]):
        if b.cer > a.cer:
            overlap = b.cer_ci[0] <= a.cer_ci[1]
            kind = "within confidence intervals" if overlap else "outside confidence intervals"
            out.append(f"cer rises from P={a.P:.6g} to P={b.P:.6g} ({kind})")
    return out


def run_plan(plan, workers=1):
    """Run every SNR point of ``plan``; the result depends only on the plan."""
    t0 = time.perf_counter()
    report = validate_code(plan.code, plan.codebook, plan.config)
    if not report.meets_criteria and not plan.force:
        raise PlanValidationError(
            f"code fails validation (diversity {report.diversity_claim} of {report.max_diversity}); "
            "set force to run anyway"
        )
    workers = max(1, int(workers))
    pool = ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(plan,)) if workers > 1 else None
    K = plan.codebook.n_symbols
    n_blocks = math.ceil(plan.trials_per_point / plan.block_size)
    points = []
    try:
        for p in range(len(plan.snr_grid)):
            tot = np.zeros(4, dtype=np.int64)
            b = 0
            done = False
            while b < n_blocks and not done:
                wave = [(p, k) for k in range(b, min(b + workers, n_blocks))]
                results = pool.map(_worker_block, wave) if pool else [_run_block(plan, *w) for w in wave]
                for res in results:
                    tot += res
                    b += 1
                    if plan.min_codeword_errors is not None and tot[2] >= plan.min_codeword_errors:
                        done = True
                        break
            points.append(PointResult(plan.snr_grid[p], int(tot[0]), int(tot[1]), int(tot[2]), K, int(tot[3])))
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
    return SimResult(
        points=points,
        seed=plan.seed,
        plan_hash=plan.digest(),
        wall_time=time.perf_counter() - t0,
        forced=plan.force and not report.meets_criteria,
        validation=report.to_dict(),
        warnings=_monotonicity_warnings(points),
    )


def pairwise_pep_estimate(config, code, s_i, s_j, P, trials, seed, block_size=10_000):
    """Fraction of frames in which ML prefers ``s_j`` when ``s_i`` was sent.

    Returns ``(estimate, ci_low, ci_high)`` with a 95% Wilson interval.
    """
    s_i = np.asarray(s_i, complex)
    s_j = np.asarray(s_j, complex)
    if np.allclose(s_i, s_j):
        raise ValueError("the two codewords must differ")
    cfg = config.with_power(P)
    pair = np.stack([s_i, s_j])
    Sr = to_real(pair)
    errors = 0
    for b in range(math.ceil(trials / block_size)):
        n = min(block_size, trials - b * block_size)
        rng = frame_rng(seed, b)
        g0, f, g = draw_channels(cfg.R, n, rng)
        v, w1, w2 = draw_noises(cfg, n, rng)
        y = observe_batch(cfg, code, np.broadcast_to(s_i, (n, cfg.T1)), g0, f, g, v, w1, w2)
        Hw, L_inv, _, _ = build_systems_batch(cfg, code, g0, f, g)
        z = np.einsum("nkm,nm->nk", L_inv, to_real(y))
        diff = z[:, None, :] - np.einsum("nkj,lj->nlk", Hw, Sr)
        m = np.einsum("nlk,nlk->nl", diff, diff)
        errors += int(np.sum(m[:, 1] < m[:, 0]))
    lo, hi = wilson_interval(errors, trials)
    return errors / trials, lo, hi
