"""Decoding graphs: fault enumeration, standard graphs, conditional (heralded) graphs.

Vertices of the graph for one error type are ``(t, c)`` with ``c`` a check
index and ``t = 0 .. rounds``; vertex ``(t, c)`` carries the comparison of
syndrome rows ``t-1`` and ``t`` (row ``-1`` is the all-zero reference, row
``rounds`` the perfect final readout). Node id is ``t * d² + c``.

X errors are detected by plaquettes (the ``"X"`` graph), Z errors by stars.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import noise
from .circuits import (
    PLAQUETTE,
    STAR,
    CircuitSchedule,
    Injections,
    Scheme,
    build_schedule,
    perfect_final_round,
    readout_histories,
    simulate,
)
from .lattice import ToricLattice, build_lattice
from .noise import LOUT, NoiseParams

ERROR_TYPES = ("X", "Z")
CLASSES = ("a", "b", "c", "d", "e", "f")
_KIND = {"X": PLAQUETTE, "Z": STAR}

# Edge-class probabilities per unit of p, plus the coefficient of q.
TABLE1 = {
    Scheme.NO_LRU: {"a": (Fraction(31, 15), 1), "b": (Fraction(28, 15), 0), "c": (Fraction(16, 15), 0),
                    "d": (Fraction(52, 15), 0), "e": (Fraction(8, 15), 0), "f": (Fraction(8, 15), 0)},
    Scheme.QUICK: {"a": (Fraction(7, 3), 1), "b": (Fraction(32, 15), 0), "c": (Fraction(4, 3), 0),
                   "d": (Fraction(4), 0), "e": (Fraction(8, 15), 0), "f": (Fraction(8, 15), 0)},
    Scheme.FULL_LRU: {"a": (Fraction(103, 15), 1), "b": (Fraction(52, 15), 0), "c": (Fraction(88, 15), 0),
                      "d": (Fraction(172, 15), 0), "e": (Fraction(32, 15), 0), "f": (Fraction(32, 15), 0)},
    Scheme.PARTIAL_LRU: {"a": (Fraction(31, 15), 1), "b": (Fraction(52, 15), 0), "c": (Fraction(16, 15), 0),
                         "d": (Fraction(76, 15), 0), "e": (Fraction(8, 15), 0), "f": (Fraction(8, 15), 0)},
}


# ---------------------------------------------------------------- syndrome -> defects


def mask_L_syndromes(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Defects from a syndrome history that may contain ``LOUT`` readouts.

    ``rows`` has shape (..., T, n) with time on axis -2. Returns ``(defects,
    masked)`` where ``defects`` is a bool array of the same shape and
    ``masked[..., t, c]`` marks the vertical edge between vertices ``t`` and
    ``t+1`` of check ``c`` (the readout at row ``t``) as zero weight. A run of
    L readouts is bridged: the defect, if the rows on either side of the gap
    disagree, goes on the earliest vertex of the gap.
    """
    rows = np.asarray(rows)
    T = rows.shape[-2]
    defects = np.zeros(rows.shape, dtype=bool)
    masked = rows == LOUT
    prev = np.zeros(rows.shape[:-2] + rows.shape[-1:], dtype=np.uint8)
    gap = np.full(prev.shape, -1, dtype=np.int64)
    for t in range(T):
        cur = rows[..., t, :]
        is_l = cur == LOUT
        if t == T - 1 and is_l.any():
            raise AssertionError("L readout in the perfect final round")
        ok = ~is_l
        diff = ok & ((cur ^ prev) & 1).astype(bool)
        direct = diff & (gap < 0)
        defects[..., t, :] |= direct
        bridged = diff & (gap >= 0)
        if bridged.any():
            idx = np.nonzero(bridged)
            g = gap[idx]
            defects[idx[:-1] + (g, idx[-1])] = True
        prev = np.where(ok, cur, prev)
        gap = np.where(ok, -1, np.where(gap < 0, t, gap))
    return defects, masked


# ---------------------------------------------------------------- fault enumeration


def _base_slot(schedule: CircuitSchedule, slot: int) -> int:
    n_base = schedule.lat.n_data + 2 * schedule.lat.n_checks
    return slot - n_base if slot >= n_base else slot


def _cell(schedule: CircuitSchedule, slot: int) -> tuple[int, int]:
    lat = schedule.lat
    s = _base_slot(schedule, slot)
    nd, nc = lat.n_data, lat.n_checks
    if s < nd:
        return divmod(s % nc, lat.d)
    return divmod((s - nd) % nc, lat.d)


@dataclass
class _FaultSet:
    inj: Injections
    weight_p: list
    weight_q: list


def _fundamental_faults(schedule: CircuitSchedule, n_cycles: int) -> _FaultSet:
    """One representative per translation orbit of every single fault."""
    trial, cyc_l, step_l, slot_l, pauli_l = [], [], [], [], []
    mt, mc, ms, mk, mch = [], [], [], [], []
    wp, wq = [], []
    b = 0
    third, fifteenth = Fraction(1, 3), Fraction(1, 15)
    for cyc in range(n_cycles):
        for k, step in enumerate(schedule.steps):
            for op in step:
                for i in range(len(op.a)):
                    if _cell(schedule, int(op.a[i])) != (0, 0):
                        continue
                    if op.kind == "prep":
                        trial.append(b); cyc_l.append(cyc); step_l.append(k)
                        slot_l.append(int(op.a[i])); pauli_l.append(noise.X if op.basis == "Z" else noise.Z)
                        wp.append(Fraction(1)); wq.append(0); b += 1
                    elif op.kind == "idle":
                        for pa in (noise.X, noise.Y, noise.Z):
                            trial.append(b); cyc_l.append(cyc); step_l.append(k)
                            slot_l.append(int(op.a[i])); pauli_l.append(pa)
                            wp.append(third); wq.append(0); b += 1
                    elif op.kind == "cnot":
                        for pair in range(1, 16):
                            for sl, pa in ((op.a[i], pair & 3), (op.b[i], pair >> 2)):
                                if pa:
                                    trial.append(b); cyc_l.append(cyc); step_l.append(k)
                                    slot_l.append(int(sl)); pauli_l.append(pa)
                            wp.append(fifteenth); wq.append(0); b += 1
                    elif op.kind == "meas" and op.record == "syndrome":
                        mt.append(b); mc.append(cyc); ms.append(k)
                        mk.append(op.check_kind); mch.append(int(op.sites[i]))
                        wp.append(Fraction(0)); wq.append(1); b += 1
    arr = lambda x: np.asarray(x, dtype=np.int64)  # noqa: E731
    inj = Injections(arr(trial), arr(cyc_l), arr(step_l), arr(slot_l), np.asarray(pauli_l, dtype=np.uint8),
                     arr(mt), arr(mc), arr(ms), arr(mk), arr(mch))
    return _FaultSet(inj, wp, wq)


def _run_injections(schedule: CircuitSchedule, inj: Injections, n_trials: int, n_cycles: int,
                    leaked: np.ndarray | None = None):
    """Noiseless propagation; returns (syndrome rows incl. perfect round, final labels)."""
    labels = np.zeros((n_trials, schedule.n_slots), dtype=np.uint8)
    if leaked is not None:
        labels[leaked] = noise.L
    out, rec = simulate(schedule, labels, NoiseParams.noiseless(), None, n_cycles,
                        three_outcome=True, leak_mode=noise.LEAK_ABSORB, injections=inj)
    # leaked qubits are dropped from the frame in the final readout
    final = np.where(out == noise.L, 0, out).astype(np.uint8)
    _, last = perfect_final_round(final, schedule.lat, np.random.default_rng(0))
    rows = np.concatenate([rec.syndrome, last[:, None]], axis=1)
    return rows, final


def propagate_fault(schedule: CircuitSchedule, cycle: int, step: int, slot: int, pauli: int,
                    n_cycles: int) -> np.ndarray:
    """Syndrome rows (n_cycles+1, 2, d²) of one Pauli injected after ``step`` of ``cycle``."""
    ar = lambda x: np.array([x], dtype=np.int64)  # noqa: E731
    inj = Injections(ar(0), ar(cycle), ar(step), ar(slot), np.array([pauli], dtype=np.uint8))
    rows, _ = _run_injections(schedule, inj, 1, n_cycles)
    return rows[0]


def _rel(lat: ToricLattice, a: int, b: int) -> tuple[int, int]:
    ai, aj = divmod(a, lat.d)
    bi, bj = divmod(b, lat.d)
    d = lat.d

    def wrap(x):
        x %= d
        return x - d if x > d // 2 else x

    return wrap(bi - ai), wrap(bj - aj)


@dataclass(frozen=True)
class EdgeClassInfo:
    """Geometry and data-qubit effect of one unit-cell edge class."""

    name: str
    disp: tuple[int, int, int]  # (di, dj, dt) from the earlier endpoint
    residual: tuple[tuple[int, int, int], ...]  # (0 = h / 1 = v, di, dj) data qubits flipped


@dataclass
class EnumerationResult:
    scheme: Scheme
    error_type: str
    probs: dict[tuple[int, int, int], tuple[Fraction, int]]  # disp -> (coef of p, coef of q)
    residuals: dict[tuple[int, int, int], tuple[tuple[int, int, int], ...]]

    def by_class(self) -> dict[str, tuple[Fraction, int]]:
        geo = class_geometry(self.error_type)
        return {name: self.probs.get(info.disp, (Fraction(0), 0)) for name, info in geo.items()}


def _residual_rel(lat: ToricLattice, chain: np.ndarray, anchor: int) -> tuple[tuple[int, int, int], ...]:
    ai, aj = divmod(anchor, lat.d)
    d = lat.d
    out = []
    for q in np.nonzero(chain)[0]:
        kind, rem = divmod(int(q), lat.n_checks)
        qi, qj = divmod(rem, d)
        di, dj = _rel(lat, ai * d + aj, qi * d + qj)
        out.append((kind, di, dj))
    return tuple(sorted(out))


def enumerate_single_faults(scheme, error_type: str, d: int = 5, n_cycles: int = 5) -> EnumerationResult:
    """Sum single-fault probabilities onto the edges they produce.

    Every location in a window of ``n_cycles`` cycles gets each of its equally
    weighted Pauli faults (p/3 per idle outcome, p/15 per CNOT outcome, p for a
    wrong preparation, q for a syndrome flip); the fault is propagated without
    noise, the defect pair read off, and the probability credited to the edge
    joining it. Only edges whose earlier endpoint lies in the middle row are
    kept, so that every contributing fault is inside the window.
    """
    scheme = Scheme.parse(scheme)
    if error_type not in ERROR_TYPES:
        raise ValueError(f"error_type must be 'X' or 'Z', got {error_type!r}")
    lat = build_lattice(d)
    sched = build_schedule(scheme, lat)
    fs = _fundamental_faults(sched, n_cycles)
    n_trials = len(fs.weight_p)
    rows, final = _run_injections(sched, fs.inj, n_trials, n_cycles)
    kind = _KIND[error_type]
    defects, _ = mask_L_syndromes(rows[:, :, kind, :])
    bit = 1 if error_type == "X" else 2
    chains = (final[:, : lat.n_data] & bit).astype(bool)
    t_mid = n_cycles // 2
    probs: dict = defaultdict(lambda: [Fraction(0), 0])
    residuals: dict = {}
    for b in range(n_trials):
        ts, cs = np.nonzero(defects[b])
        if len(ts) == 0:
            continue
        if len(ts) != 2:
            raise RuntimeError(f"single fault produced {len(ts)} defects ({scheme.value}, trial {b})")
        order = np.lexsort((cs, ts))
        (t0, c0), (t1, c1) = (ts[order[0]], cs[order[0]]), (ts[order[1]], cs[order[1]])
        if t0 != t_mid:
            continue
        di, dj = _rel(lat, int(c0), int(c1))
        disp = _canonical((di, dj, int(t1 - t0)))
        probs[disp][0] += fs.weight_p[b]
        probs[disp][1] += fs.weight_q[b]
        res = _residual_rel(lat, chains[b], int(c0) if disp == (di, dj, int(t1 - t0)) else int(c1))
        residuals.setdefault(disp, res)
    return EnumerationResult(scheme, error_type, {k: (v[0], v[1]) for k, v in probs.items()}, residuals)


def _canonical(disp: tuple[int, int, int]) -> tuple[int, int, int]:
    di, dj, dt = disp
    if dt < 0 or (dt == 0 and (di, dj) < (0, 0)):
        return (-di, -dj, -dt)
    return disp


# ---------------------------------------------------------------- standard graph

# Unit-cell geometry fixed by the enumeration above (identical for all four
# schemes and for both error types): displacement (di, dj, dt) between the two
# checks and the data qubits (0 = horizontal edge, 1 = vertical edge, offset)
# flipped by a representative fault.
_GEOMETRY = {
    "X": {
        "a": ((0, 0, 1), ()),
        "b": ((1, 0, 0), ((0, 1, 0),)),
        "c": ((1, 0, 1), ((0, 1, 0),)),
        "d": ((0, 1, 0), ((1, 0, 1),)),
        "e": ((0, 1, 1), ((1, 0, 1),)),
        "f": ((1, -1, 1), ((0, 1, 0), (1, 1, 0))),
    },
    "Z": {
        "a": ((0, 0, 1), ()),
        "b": ((1, 0, 0), ((1, 0, 0),)),
        "c": ((1, 0, 1), ((1, 0, 0),)),
        "d": ((0, 1, 0), ((0, 0, 0),)),
        "e": ((0, 1, 1), ((0, 0, 0),)),
        "f": ((1, -1, 1), ((0, 1, -1), (1, 0, 0))),
    },
}


@lru_cache(maxsize=None)
def class_geometry(error_type: str) -> dict[str, EdgeClassInfo]:
    return {k: EdgeClassInfo(k, disp, res) for k, (disp, res) in _GEOMETRY[error_type].items()}


def derive_weights_by_fault_enumeration(scheme, d: int = 5, rounds: int = 5, error_type: str = "X"):
    """Edge-class -> (coefficient of p, coefficient of q) as exact rationals.

    Raises if a fault produces an edge outside the six unit-cell classes.
    """
    res = enumerate_single_faults(scheme, error_type, d=d, n_cycles=rounds)
    known = {info.disp: name for name, info in class_geometry(error_type).items()}
    extra = set(res.probs) - set(known)
    if extra:
        raise RuntimeError(f"faults produced edges outside the unit cell: {sorted(extra)}")
    return {known[disp]: val for disp, val in res.probs.items()}


def class_probabilities(scheme, p: float, q: float | None = None) -> dict[str, float]:
    q = p if q is None else q
    return {k: float(cp) * p + cq * q for k, (cp, cq) in TABLE1[Scheme.parse(scheme)].items()}


CONDITIONAL = "conditional"


@dataclass
class DecodingGraph:
    """Weighted space-time graph for one error type.

    ``residual`` is a (n_data, n_edges) 0/1 matrix: column ``e`` holds the data
    qubits flipped by the fault represented by edge ``e``.
    """

    d: int
    rounds: int
    error_type: str
    u: np.ndarray
    v: np.ndarray
    prob: np.ndarray
    weight: np.ndarray
    cls: np.ndarray  # edge-class name or "conditional"
    residual: "object"  # scipy.sparse csc matrix
    _index: dict = field(default=None, repr=False)

    @property
    def n_checks(self) -> int:
        return self.d * self.d

    @property
    def n_nodes(self) -> int:
        return (self.rounds + 1) * self.n_checks

    @property
    def n_edges(self) -> int:
        return len(self.u)

    def node(self, t: int, c: int) -> int:
        return int(t) * self.n_checks + int(c)

    def vertex(self, node: int) -> tuple[int, int, int]:
        """(x, y, t) coordinates of a node id."""
        t, c = divmod(int(node), self.n_checks)
        x, y = divmod(c, self.d)
        return x, y, t

    def edge_index(self) -> dict[tuple[int, int], int]:
        if self._index is None:
            self._index = {
                (min(a, b), max(a, b)): i for i, (a, b) in enumerate(zip(self.u.tolist(), self.v.tolist()))
            }
        return self._index

    def check_matrix(self):
        import scipy.sparse as sp

        n = self.n_edges
        rows = np.concatenate([self.u, self.v])
        cols = np.concatenate([np.arange(n), np.arange(n)])
        return sp.csc_matrix((np.ones(2 * n, dtype=np.uint8), (rows, cols)), shape=(self.n_nodes, n))

    def matching(self):
        import pymatching

        return pymatching.Matching.from_check_matrix(
            self.check_matrix(), weights=self.weight, faults_matrix=self.residual
        )

    def dump(self) -> str:
        """``x1 y1 t1  x2 y2 t2  weight  class`` per edge."""
        lines = []
        for a, b, w, c in zip(self.u, self.v, self.weight, self.cls):
            x1, y1, t1 = self.vertex(a)
            x2, y2, t2 = self.vertex(b)
            lines.append(f"{x1} {y1} {t1}  {x2} {y2} {t2}  {w:.6f}  {c}")
        return "\n".join(lines)

    def copy(self) -> "DecodingGraph":
        return DecodingGraph(self.d, self.rounds, self.error_type, self.u.copy(), self.v.copy(),
                             self.prob.copy(), self.weight.copy(), self.cls.copy(), self.residual.copy())


def _residual_matrix(lat: ToricLattice, anchors: list[int], rels: list[tuple], n_data: int):
    import scipy.sparse as sp

    rows, cols = [], []
    for e, (anchor, rel) in enumerate(zip(anchors, rels)):
        ai, aj = divmod(anchor, lat.d)
        for kind, di, dj in rel:
            rows.append(lat.h(ai + di, aj + dj) if kind == 0 else lat.v(ai + di, aj + dj))
            cols.append(e)
    data = np.ones(len(rows), dtype=np.uint8)
    m = sp.csc_matrix((data, (rows, cols)), shape=(n_data, len(anchors)))
    m.data %= 2
    m.eliminate_zeros()
    return m


def _prob_to_weight(prob: np.ndarray) -> np.ndarray:
    return -np.log(prob)


def build_standard_graph(scheme, d: int, rounds: int, p: float, q: float | None = None,
                         error_type: str = "X") -> DecodingGraph:
    q = p if q is None else q
    if not (0 < p < 0.5 and 0 < q < 0.5):
        raise ValueError("p and q must lie in (0, 0.5)")
    if error_type not in ERROR_TYPES:
        raise ValueError(f"error_type must be 'X' or 'Z', got {error_type!r}")
    lat = build_lattice(d)
    probs = class_probabilities(scheme, p, q)
    nc = lat.n_checks
    us, vs, ps, cl, anchors, rels = [], [], [], [], [], []
    seen = set()
    for name, info in class_geometry(error_type).items():
        di, dj, dt = info.disp
        for t in range(rounds + 1 - dt):
            for c in range(nc):
                i, j = divmod(c, d)
                u = t * nc + c
                v = (t + dt) * nc + lat.check_index(i + di, j + dj)
                key = (min(u, v), max(u, v))
                if u == v or key in seen:  # tiny lattices alias classes
                    continue
                seen.add(key)
                us.append(key[0]); vs.append(key[1]); ps.append(probs[name]); cl.append(name)
                anchors.append(c); rels.append(info.residual)
    prob = np.array(ps)
    return DecodingGraph(d, rounds, error_type, np.array(us), np.array(vs), prob, _prob_to_weight(prob),
                         np.array(cl, dtype=object), _residual_matrix(lat, anchors, rels, lat.n_data))


# ---------------------------------------------------------------- heralded leakage


@dataclass(frozen=True)
class LEvent:
    """An L readout seen in cycle ``cycle``.

    ``record`` is ``"syndrome"`` (``site`` is a check index of ``check_kind``)
    or ``"lru"`` (``site`` is the slot whose LRU measured the old qubit).
    """

    record: str
    site: int
    cycle: int
    check_kind: int = -1


@dataclass(frozen=True)
class ConditionalEdge:
    error_type: str
    u: tuple[int, int]  # (t, check) for a readout in cell (0, 0)
    v: tuple[int, int]
    prob: float
    i: int
    n: int
    residual: tuple[tuple[int, int, int], ...]


def combine_probability(p0: float, pi: float) -> float:
    """Probability that exactly one of two independent flips occurs."""
    return p0 + pi - 2 * p0 * pi


def _slot_class(schedule: CircuitSchedule, slot: int) -> int:
    """0 = horizontal data, 1 = vertical data, 2 = plaquette ancilla, 3 = star ancilla."""
    return _base_slot(schedule, int(slot)) // schedule.lat.n_checks


def _event_key(schedule: CircuitSchedule, ev: LEvent) -> tuple[str, int]:
    if ev.record == "syndrome":
        return ("syndrome", int(ev.check_kind))
    if ev.record == "lru":
        return ("lru", _slot_class(schedule, ev.site))
    raise ValueError(f"unknown record {ev.record!r}")


@lru_cache(maxsize=16)
def _scheme_context(scheme: Scheme, d: int):
    lat = build_lattice(d)
    sched = build_schedule(scheme, lat)
    reps = {}
    for h in readout_histories(sched):
        if h.record == "syndrome":
            if h.site == 0:
                reps[("syndrome", h.check_kind)] = h
        elif _cell(sched, h.site) == (0, 0):
            reps[("lru", _slot_class(sched, h.site))] = h
    return sched, reps


@lru_cache(maxsize=4096)
def conditional_template(scheme, d: int, rounds: int, key: tuple[str, int], t: int) -> tuple[ConditionalEdge, ...]:
    """Edges induced by one L readout of kind ``key`` in cell (0, 0) at cycle ``t``.

    Each gate partner of the leaked qubit whose gate came after ``i`` of the
    qubit's ``n`` leak-capable locations receives an X and, separately, a Z
    error, each with probability ``i / 2n``. Each error is propagated without
    noise (the leaked qubit absorbs anything sent to it) and the two resulting
    defects define the edge.
    """
    scheme = Scheme.parse(scheme)
    sched, reps = _scheme_context(scheme, d)
    h = reps[key]
    n = h.n_locations
    trials = []
    for it in h.interactions:
        tau = t + it.offset
        if tau < 0 or it.before == 0:
            continue
        for pauli, et in ((noise.X, "X"), (noise.Z, "Z")):
            trials.append((tau, it.step, it.partner, pauli, et, it.before))
    if not trials:
        return ()
    B = len(trials)
    tr = list(range(B))
    cyc = [x[0] for x in trials]
    stp = [x[1] for x in trials]
    slot = [x[2] for x in trials]
    pau = [x[3] for x in trials]
    leaked = None
    poff, pstep, pslot = h.prep
    if t + poff >= 0:
        tr += list(range(B))
        cyc += [t + poff] * B
        stp += [pstep] * B
        slot += [pslot] * B
        pau += [noise.L] * B
    else:  # prepared before the first cycle: leaked from the start
        leaked = np.zeros((B, sched.n_slots), dtype=bool)
        leaked[:, dict(h.start_slots)[-t]] = True
    arr = lambda x: np.asarray(x, dtype=np.int64)  # noqa: E731
    inj = Injections(arr(tr), arr(cyc), arr(stp), arr(slot), np.asarray(pau, dtype=np.uint8))
    rows, final = _run_injections(sched, inj, B, rounds, leaked=leaked)
    out = []
    for b, (_, _, _, _, et, before) in enumerate(trials):
        defects, _ = mask_L_syndromes(rows[b, :, _KIND[et], :])
        ts, cs = np.nonzero(defects)
        if len(ts) == 0:
            continue
        if len(ts) != 2:
            raise RuntimeError(f"conditional error produced {len(ts)} defects")
        bit = 1 if et == "X" else 2
        chain = (final[b, : sched.lat.n_data] & bit).astype(bool)
        out.append(ConditionalEdge(et, (int(ts[0]), int(cs[0])), (int(ts[1]), int(cs[1])),
                                   before / (2 * n), before, n, _residual_rel(sched.lat, chain, 0)))
    return tuple(out)


def events_from_records(syndrome: np.ndarray, lru_leak: np.ndarray) -> list[LEvent]:
    """L events of one trial from its syndrome rows (cycles, 2, d²) and LRU flags (cycles, slots)."""
    events = []
    cyc, kind, site = np.nonzero(np.asarray(syndrome) == LOUT)
    for c, k, s in zip(cyc.tolist(), kind.tolist(), site.tolist()):
        events.append(LEvent("syndrome", s, c, k))
    cyc, slot = np.nonzero(lru_leak)
    for c, s in zip(cyc.tolist(), slot.tolist()):
        events.append(LEvent("lru", s, c))
    return events


def _translate_node(lat: ToricLattice, tc: tuple[int, int], di: int, dj: int) -> int:
    t, c = tc
    i, j = divmod(c, lat.d)
    return t * lat.n_checks + lat.check_index(i + di, j + dj)


def build_conditional_graph(standard: DecodingGraph, events, scheme,
                            masked: np.ndarray | None = None) -> DecodingGraph:
    """Standard graph updated for the L events of one trial.

    Each conditional edge is merged into an existing edge with
    :func:`combine_probability` or appended as a new one. ``masked``
    (rounds+1, d²) marks vertical edges ``(t, c)-(t+1, c)`` whose readout
    was L; they get weight 0.
    """
    scheme = Scheme.parse(scheme)
    d, R = standard.d, standard.rounds
    sched, reps = _scheme_context(scheme, d)
    lat = sched.lat
    nc = lat.n_checks
    index = dict(standard.edge_index())
    prob = list(standard.prob.astype(float))
    cls = list(standard.cls)
    new_anchor, new_rel, new_u, new_v = [], [], [], []
    for ev in events:
        key = _event_key(sched, ev)
        if key not in reps:
            raise ValueError(f"scheme {scheme.value} has no readout of kind {key}")
        if not 0 <= ev.cycle < R:
            raise ValueError(f"event cycle {ev.cycle} outside 0..{R - 1}")
        if ev.record == "syndrome":
            if not 0 <= ev.site < nc:
                raise ValueError(f"unknown check {ev.site}")
            di, dj = divmod(int(ev.site), d)
        else:
            if not 0 <= ev.site < sched.n_slots:
                raise ValueError(f"unknown slot {ev.site}")
            di, dj = _cell(sched, ev.site)
        for ce in conditional_template(scheme, d, R, key, ev.cycle):
            if ce.error_type != standard.error_type:
                continue
            a = _translate_node(lat, ce.u, di, dj)
            b = _translate_node(lat, ce.v, di, dj)
            k = (min(a, b), max(a, b))
            e = index.get(k)
            if e is None:
                index[k] = len(prob)
                prob.append(ce.prob)
                cls.append(CONDITIONAL)
                new_u.append(k[0])
                new_v.append(k[1])
                new_anchor.append(lat.check_index(di, dj))
                new_rel.append(ce.residual)
            else:
                prob[e] = combine_probability(prob[e], ce.prob)
                cls[e] = CONDITIONAL
    g = standard.copy()
    if new_u:
        import scipy.sparse as sp

        g.u = np.concatenate([g.u, new_u]).astype(np.int64)
        g.v = np.concatenate([g.v, new_v]).astype(np.int64)
        g.residual = sp.hstack([g.residual, _residual_matrix(lat, new_anchor, new_rel, lat.n_data)]).tocsc()
    g.prob = np.asarray(prob)
    g.weight = _prob_to_weight(g.prob)
    g.cls = np.asarray(cls, dtype=object)
    g._index = index
    if masked is not None:
        apply_mask(g, masked)
    return g


def apply_mask(graph: DecodingGraph, masked: np.ndarray) -> DecodingGraph:
    """Zero (in place) the weight of vertical edges whose readout was L."""
    idx = graph.edge_index()
    nc = graph.n_checks
    for t, c in zip(*(x.tolist() for x in np.nonzero(masked))):
        e = idx.get((t * nc + c, (t + 1) * nc + c))
        if e is None:
            raise ValueError(f"no vertical edge below ({t}, {c})")
        graph.weight[e] = 0.0
    return graph


# ---------------------------------------------------------------- distances


def shortest_distance(graph: DecodingGraph, v1: int, v2: int) -> tuple[float, list[int]]:
    """Exact minimum-weight path between two node ids (Dijkstra)."""
    import scipy.sparse as sp
    from scipy.sparse.csgraph import dijkstra

    if v1 == v2:
        return 0.0, [int(v1)]
    adj = _adjacency(graph)
    dist, pred = dijkstra(adj, directed=False, indices=int(v1), return_predecessors=True)
    if not np.isfinite(dist[v2]):
        raise ValueError("vertices are not connected")
    path = [int(v2)]
    while path[-1] != v1:
        path.append(int(pred[path[-1]]))
    return float(dist[v2]), path[::-1]


def _adjacency(graph: DecodingGraph):
    import scipy.sparse as sp

    # csgraph treats explicit zeros as missing edges; nudge them to the smallest positive float
    w = np.where(graph.weight > 0, graph.weight, np.finfo(float).tiny)
    n = graph.n_nodes
    return sp.csr_matrix((w, (graph.u, graph.v)), shape=(n, n))


def all_pairs_distance(graph: DecodingGraph, nodes) -> np.ndarray:
    from scipy.sparse.csgraph import dijkstra

    nodes = np.asarray(nodes, dtype=np.int64)
    if len(nodes) == 0:
        return np.zeros((0, 0))
    dist = dijkstra(_adjacency(graph), directed=False, indices=nodes)
    return dist[:, nodes]


def standard_distance(graph: DecodingGraph, v1: int, v2: int) -> float:
    """Closed-form-style distance on a translation-invariant graph via a cached table.

    The distance from ``(t1, c1)`` to ``(t2, c2)`` only depends on the spatial
    offset and the two times, so one single-source search per source time row
    serves every pair.
    """
    table = _distance_table(graph)
    t1, c1 = divmod(int(v1), graph.n_checks)
    t2, c2 = divmod(int(v2), graph.n_checks)
    i1, j1 = divmod(c1, graph.d)
    i2, j2 = divmod(c2, graph.d)
    rel = ((i2 - i1) % graph.d) * graph.d + (j2 - j1) % graph.d
    return float(table[t1][t2 * graph.n_checks + rel])


def _distance_table(graph: DecodingGraph):
    if getattr(graph, "_dist_table", None) is None:
        from scipy.sparse.csgraph import dijkstra

        src = [t * graph.n_checks for t in range(graph.rounds + 1)]
        graph._dist_table = dijkstra(_adjacency(graph), directed=False, indices=src)
    return graph._dist_table
