"""Trial orchestration and failure statistics.

Trials run in fixed-size chunks. Chunk ``k`` draws all its randomness from
``SeedSequence([seed, k])``, so trial ``i`` is fully determined by the master
seed and ``i`` (it is trial ``i % chunk_size`` of chunk ``i // chunk_size``).
Aggregation walks the trials in index order and stops at the first prefix that
meets the stopping rule, which makes the counts independent of the number of
worker processes.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from . import noise
from .circuits import CircuitSchedule, Scheme, build_schedule, perfect_final_round, simulate
from .decoder import GraphDecoder, extract_defects
from .graph import (
    ERROR_TYPES,
    _KIND,
    build_conditional_graph,
    build_standard_graph,
    events_from_records,
    mask_L_syndromes,
)
from .lattice import build_lattice, logical_masks
from .noise import LOUT, NoiseParams

STANDARD, HL = "standard", "hl"
CSV_COLUMNS = ("d", "scheme", "decoder", "p", "q", "r", "s", "trials", "x_fail", "z_fail", "any_fail",
               "ci_lo", "ci_hi", "seed")


@dataclass(frozen=True)
class SimConfig:
    d: int
    scheme: str = "NoLRU"
    decoder: str = STANDARD
    p: float = 1e-3
    q: float | None = None
    r: float = 0.0
    s: float = 0.0
    rounds: int | None = None
    three_outcome: bool = False
    seed: int = 0
    min_trials: int = 10_000
    min_failures: int = 1_000
    max_trials: int = 10_000
    chunk_size: int = 500
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme).value)
        dec = str(self.decoder).lower()
        if dec not in (STANDARD, HL):
            raise ValueError(f"decoder must be 'standard' or 'hl', got {self.decoder!r}")
        object.__setattr__(self, "decoder", dec)
        if self.q is None:
            object.__setattr__(self, "q", self.p)
        if self.rounds is None:
            object.__setattr__(self, "rounds", self.d)
        if dec == HL:
            object.__setattr__(self, "three_outcome", True)
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.chunk_size < 1 or self.max_trials < 0 or self.min_trials < 0 or self.min_failures < 0:
            raise ValueError("trial counts must be non-negative and chunk_size positive")
        self.params  # validates probabilities

    @property
    def params(self) -> NoiseParams:
        return NoiseParams(self.p, self.r, self.s, self.q)


@dataclass
class RunStats:
    """Failure counts with Wilson score intervals (95%) on the any-failure rate."""

    config: SimConfig
    trials: int
    x_failures: int
    z_failures: int
    any_failures: int
    wall_time: float
    under_sampled: bool = False

    @property
    def seed(self) -> int:
        return self.config.seed

    @property
    def rate(self) -> float:
        return self.any_failures / self.trials if self.trials else float("nan")

    @property
    def x_rate(self) -> float:
        return self.x_failures / self.trials if self.trials else float("nan")

    @property
    def z_rate(self) -> float:
        return self.z_failures / self.trials if self.trials else float("nan")

    @property
    def ci(self) -> tuple[float, float]:
        return wilson_interval(self.any_failures, self.trials)

    def csv_row(self) -> dict:
        c = self.config
        lo, hi = self.ci
        return {"d": c.d, "scheme": c.scheme, "decoder": c.decoder, "p": c.p, "q": c.q, "r": c.r, "s": c.s,
                "trials": self.trials, "x_fail": self.x_failures, "z_fail": self.z_failures,
                "any_fail": self.any_failures, "ci_lo": lo, "ci_hi": hi, "seed": c.seed}


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if n == 0:
        return (0.0, 1.0)
    ph = k / n
    den = 1 + z * z / n
    mid = (ph + z * z / (2 * n)) / den
    half = z * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / den
    return (max(0.0, mid - half), min(1.0, mid + half))


# ---------------------------------------------------------------- equilibrium


def equilibrium_profile(schedule: CircuitSchedule, params: NoiseParams) -> np.ndarray:
    """Per-slot leaked probability at the start of a cycle in the steady state.

    Each location acts on a slot's leaked probability as an affine map (gate
    outputs excite and relax, idles only relax, preparation resets to
    ``p_up``) and relabels permute slots, so one cycle is ``P -> A P + c`` with
    ``A`` a scaled permutation. The fixed point solves ``(1 - A) P = c``.
    """
    n = schedule.n_slots
    up, dn = params.p_up, params.p_down
    if up == 0:
        return np.zeros(n)
    src = np.arange(n)  # slot -> source slot of the start-of-cycle value, or -1 once reset
    a = np.ones(n)
    b = np.zeros(n)

    def act(slots, ka, kb):
        a[slots] *= ka
        b[slots] = b[slots] * ka + kb

    for step in schedule.steps:
        for op in step:
            if op.kind == "cnot":
                act(op.a, 1 - up - dn, up)
                act(op.b, 1 - up - dn, up)
            elif op.kind == "idle":
                act(op.a, 1 - dn, 0.0)
            elif op.kind == "prep":
                src[op.a] = -1
                a[op.a] = 0.0
                b[op.a] = up
            elif op.kind == "relabel":
                for arr in (src, a, b):
                    arr[op.a], arr[op.b] = arr[op.b].copy(), arr[op.a].copy()
    A = np.zeros((n, n))
    keep = src >= 0
    A[np.flatnonzero(keep), src[keep]] = a[keep]
    return np.linalg.solve(np.eye(n) - A, b)


def init_equilibrium(schedule: CircuitSchedule, params: NoiseParams, rng: np.random.Generator,
                     size: int) -> np.ndarray:
    """(size, n_slots) labels: L with the steady-state probability of each slot, else I."""
    prob = equilibrium_profile(schedule, params)
    return np.where(rng.random((size, schedule.n_slots)) < prob, noise.L, noise.I).astype(np.uint8)


# ---------------------------------------------------------------- trials


@lru_cache(maxsize=32)
def _context(scheme: str, d: int, rounds: int, p: float, q: float):
    lat = build_lattice(d)
    sched = build_schedule(scheme, lat)
    graphs = {et: build_standard_graph(scheme, d, rounds, p, q, et) for et in ERROR_TYPES}
    decoders = {et: GraphDecoder(g) for et, g in graphs.items()}
    return lat, sched, graphs, decoders, logical_masks(lat)


def _context_for(config: SimConfig):
    # the graph needs strictly positive probabilities; a noiseless run still needs a graph
    pg = config.p if config.p > 0 else 1e-6
    qg = config.q if config.q > 0 else 1e-6
    return _context(config.scheme, config.d, config.rounds, min(pg, 0.49), min(qg, 0.49))


def simulate_chunk(config: SimConfig, chunk: int):
    """Noisy rows (B, rounds+1, 2, d²), final labels and LRU flags for one chunk."""
    lat, sched, *_ = _context_for(config)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, chunk]))
    labels = init_equilibrium(sched, config.params, rng, config.chunk_size)
    labels, rec = simulate(sched, labels, config.params, rng, config.rounds, config.three_outcome)
    labels, last = perfect_final_round(labels, lat, rng)
    rows = np.concatenate([rec.syndrome, last[:, None]], axis=1)
    return rows, labels, rec.lru_leak


def decode_chunk(config: SimConfig, rows: np.ndarray, labels: np.ndarray, lru_leak: np.ndarray) -> np.ndarray:
    """(B, 2) array of (x_fail, z_fail)."""
    lat, sched, graphs, decoders, logicals = _context_for(config)
    B = rows.shape[0]
    nd = lat.n_data
    corr = {}
    if config.decoder == STANDARD:
        std_rows = np.where(rows == LOUT, 1, rows)  # the standard decoder ignores the herald
        for et in ERROR_TYPES:
            defects, _ = mask_L_syndromes(std_rows[:, :, _KIND[et], :])
            corr[et] = decoders[et].decode_batch(defects.reshape(B, -1))
    else:
        for et in ERROR_TYPES:
            corr[et] = np.zeros((B, nd), dtype=bool)
        for b in range(B):
            events = events_from_records(rows[b, :-1], lru_leak[b])
            dfs = extract_defects(rows[b])
            for et in ERROR_TYPES:
                df = dfs[et]
                if events:
                    g = build_conditional_graph(graphs[et], events, config.scheme, masked=df.masked)
                    corr[et][b] = GraphDecoder(g).decode(df.nodes)
                else:
                    corr[et][b] = decoders[et].decode(df.nodes)
    data = labels[:, :nd]
    x = (data & 1).astype(bool) ^ corr["X"]
    z = ((data >> 1) & 1).astype(bool) ^ corr["Z"]
    if lat.syndrome("plaquette", x).any() or lat.syndrome("star", z).any():
        raise AssertionError("corrected state has a non-zero syndrome")
    xf = ((x.astype(np.uint8) @ logicals["Z"].T.astype(np.uint8)) % 2).any(axis=1)
    zf = ((z.astype(np.uint8) @ logicals["X"].T.astype(np.uint8)) % 2).any(axis=1)
    return np.stack([xf, zf], axis=1).astype(np.uint8)


def run_chunk(config: SimConfig, chunk: int) -> np.ndarray:
    try:
        return decode_chunk(config, *simulate_chunk(config, chunk))
    except AssertionError as exc:
        raise AssertionError(f"{exc} (seed={config.seed}, chunk={chunk}; replay with run_chunk)") from exc


def run_trial(config: SimConfig, trial_index: int) -> tuple[int, int]:
    """(x_fail, z_fail) of one trial; identical to its outcome inside :func:`run_batch`."""
    chunk, pos = divmod(int(trial_index), config.chunk_size)
    rows, labels, lru = simulate_chunk(config, chunk)
    out = decode_chunk(config, rows[pos:pos + 1], labels[pos:pos + 1], lru[pos:pos + 1])
    return int(out[0, 0]), int(out[0, 1])


def _stop_index(fails_any: np.ndarray, start_trials: int, start_fail: int, config: SimConfig) -> int | None:
    """Smallest prefix length (within this chunk) at which the run stops, or None."""
    cum = start_fail + np.cumsum(fails_any)
    n = start_trials + np.arange(1, len(fails_any) + 1)
    ok = ((n >= config.min_trials) & (cum >= config.min_failures)) | (n >= config.max_trials)
    hit = np.flatnonzero(ok)
    return int(hit[0]) + 1 if len(hit) else None


def run_batch(config: SimConfig) -> RunStats:
    t0 = time.perf_counter()
    totals = np.zeros(3, dtype=np.int64)
    trials = 0
    if config.max_trials == 0:
        return RunStats(config, 0, 0, 0, 0, 0.0, under_sampled=config.min_trials > 0 or config.min_failures > 0)
    pool = ProcessPoolExecutor(config.workers) if config.workers > 1 else None
    try:
        chunk = 0
        done = False
        while not done:
            wave = range(chunk, chunk + max(1, config.workers))
            if pool is None:
                results = [run_chunk(config, k) for k in wave]
            else:
                results = list(pool.map(run_chunk, [config] * len(wave), wave))
            for res in results:
                anyf = res.any(axis=1)
                stop = _stop_index(anyf, trials, int(totals[2]), config)
                take = res if stop is None else res[:stop]
                totals += [int(take[:, 0].sum()), int(take[:, 1].sum()), int(take.any(axis=1).sum())]
                trials += len(take)
                if stop is not None:
                    done = True
                    break
            chunk += len(wave)
    finally:
        if pool is not None:
            pool.shutdown()
    under = trials < config.min_trials or totals[2] < config.min_failures
    return RunStats(config, trials, int(totals[0]), int(totals[1]), int(totals[2]),
                    time.perf_counter() - t0, bool(under))


def long_run_leakage(scheme, d: int, params: NoiseParams, n_cycles: int, batch: int, seed: int = 0,
                     role: str = "data") -> np.ndarray:
    """Leaked indicator of every ``role`` qubit after ``n_cycles`` noisy cycles from an unleaked start."""
    lat = build_lattice(d)
    sched = build_schedule(scheme, lat)
    rng = np.random.default_rng(seed)
    labels = np.zeros((batch, sched.n_slots), dtype=np.uint8)
    labels, _ = simulate(sched, labels, params, rng, n_cycles)
    sl = slice(0, lat.n_data) if role == "data" else slice(lat.n_data, lat.n_data + 2 * lat.n_checks)
    return (labels[:, sl] == noise.L).ravel()


def config_dict(config: SimConfig) -> dict:
    return asdict(config)


__all__ = [
    "CSV_COLUMNS", "HL", "STANDARD", "RunStats", "SimConfig", "equilibrium_profile", "init_equilibrium",
    "long_run_leakage", "run_batch", "run_chunk", "run_trial", "simulate_chunk", "wilson_interval",
]
