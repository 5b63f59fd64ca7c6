"""Syndrome-extraction schedules and a vectorized label-frame executor.

Qubits are addressed by *slot*. Slots keep a fixed role at every cycle
boundary:

* ``0 .. 2d²-1``      data qubits (same indices as the lattice edges)
* ``2d² .. 3d²-1``    plaquette ancillas
* ``3d² .. 4d²-1``    star ancillas
* ``4d² ..``          spare qubits feeding the leakage reduction units

Physical qubits move between slots through noise-free ``relabel`` operations.
The swap at the end of a Quick cycle and the hand-over inside an LRU are
expressed that way, so a label travels with its physical qubit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import noise
from .lattice import ROLES, ToricLattice
from .noise import L, NoiseParams

PLAQUETTE, STAR = 0, 1
CHECK_KINDS = ("plaquette", "star")


class Scheme(str, Enum):
    NO_LRU = "NoLRU"
    QUICK = "Quick"
    PARTIAL_LRU = "PartialLRU"
    FULL_LRU = "FullLRU"

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, cls):
            return value
        key = str(value).replace("-", "").replace("_", "").lower()
        for s in cls:
            if s.value.lower() == key:
                return s
        raise ValueError(f"unknown scheme {value!r}")


@dataclass
class Op:
    kind: str  # prep | cnot | idle | meas | relabel
    a: np.ndarray  # slots (controls for cnot, first half of relabel)
    b: np.ndarray | None = None  # cnot targets / relabel partners
    basis: str = "Z"
    record: str = ""  # meas only: "syndrome" or "lru"
    check_kind: int = PLAQUETTE  # meas syndrome only
    sites: np.ndarray | None = None  # meas: check index, or the data slot an LRU serves
    leaky: bool = True  # gate outputs may leak (prep/cnot)
    tag: str = ""

    @property
    def slots(self) -> np.ndarray:
        if self.b is None:
            return self.a
        return np.concatenate([self.a, self.b])


@dataclass
class CircuitSchedule:
    scheme: Scheme
    lat: ToricLattice
    steps: list[list[Op]]
    n_slots: int
    quick_swap: str = "D"
    lru_slots: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def d(self) -> int:
        return self.lat.d

    @property
    def n_data(self) -> int:
        return self.lat.n_data

    def ancilla_slot(self, kind: int, check) -> np.ndarray:
        return self.lat.n_data + kind * self.lat.n_checks + np.asarray(check)

    def dump(self) -> str:
        """Human-readable listing, one location per line."""
        lines = []
        for k, step in enumerate(self.steps):
            for op in step:
                if op.kind == "cnot":
                    for c, t in zip(op.a, op.b):
                        lines.append(f"{k:3d} CNOT {c} {t} {op.tag}")
                elif op.kind == "relabel":
                    for a, b in zip(op.a, op.b):
                        lines.append(f"{k:3d} RELABEL {a} {b} {op.tag}")
                elif op.kind == "meas":
                    for q, s in zip(op.a, op.sites):
                        lines.append(f"{k:3d} MEAS{op.basis} {q} {op.record}:{s} {op.tag}")
                elif op.kind == "prep":
                    for q in op.a:
                        lines.append(f"{k:3d} PREP{op.basis} {q} {op.tag}")
                else:
                    for q in op.a:
                        lines.append(f"{k:3d} IDLE {q} {op.tag}")
        return "\n".join(lines)

    def gate_counts(self) -> dict[str, np.ndarray]:
        """Per-slot number of locations of each kind in one cycle (relabels followed)."""
        counts = {k: np.zeros(self.n_slots, dtype=np.int64) for k in ("prep", "cnot", "idle", "meas")}
        phys = np.arange(self.n_slots)  # slot -> physical id
        for step in self.steps:
            for op in step:
                if op.kind == "relabel":
                    pa, pb = phys[op.a].copy(), phys[op.b].copy()
                    phys[op.a], phys[op.b] = pb, pa
                    continue
                np.add.at(counts[op.kind], phys[op.slots], 1)
        return counts


# ---------------------------------------------------------------- building


def _ancilla_slots(lat: ToricLattice, kind: int) -> np.ndarray:
    return lat.n_data + kind * lat.n_checks + np.arange(lat.n_checks)


def _cnot_for_role(lat: ToricLattice, role: int) -> tuple[Op, Op]:
    """Both check types interacting with data qubit ``role`` (0=U .. 3=D)."""
    pa, sa = _ancilla_slots(lat, PLAQUETTE), _ancilla_slots(lat, STAR)
    pd, sd = lat.plaquette_support[:, role], lat.star_support[:, role]
    name = ROLES[role]
    return (
        Op("cnot", pd.copy(), pa.copy(), tag=f"plaquette:{name}"),
        Op("cnot", sa.copy(), sd.copy(), tag=f"star:{name}"),
    )


def lru_gadget(data_slots, fresh_slots) -> list[list[Op]]:
    """Leakage reduction unit: swap the data into a fresh |0> qubit and read out the old one.

    Locations: fresh preparation, three CNOTs (data->fresh, fresh->data,
    data->fresh), then the outgoing qubit is measured in Z. On contained inputs
    the three CNOTs are an exact SWAP, so the Pauli frame is transferred; a
    leaked input depolarizes the fresh qubit at each CNOT and reads out as L.
    """
    a = np.atleast_1d(np.asarray(data_slots, dtype=np.int64))
    f = np.atleast_1d(np.asarray(fresh_slots, dtype=np.int64))
    return [
        [Op("prep", f.copy(), basis="Z", tag="lru:prep")],
        [Op("cnot", a.copy(), f.copy(), tag="lru:cnot1")],
        [Op("cnot", f.copy(), a.copy(), tag="lru:cnot2")],
        [Op("cnot", a.copy(), f.copy(), tag="lru:cnot3")],
        [Op("relabel", a.copy(), f.copy(), tag="lru:handover")],
        [Op("meas", f.copy(), basis="Z", record="lru", sites=a.copy(), leaky=False, tag="lru:meas")],
    ]


def build_schedule(scheme, lat: ToricLattice, quick_swap: str = "D") -> CircuitSchedule:
    scheme = Scheme.parse(scheme)
    if quick_swap not in ("D", "U"):
        raise ValueError("quick_swap must be 'D' or 'U'")
    nd, nc = lat.n_data, lat.n_checks
    data = np.arange(nd)
    pa, sa = _ancilla_slots(lat, PLAQUETTE), _ancilla_slots(lat, STAR)
    anc = np.concatenate([pa, sa])
    n_base = nd + 2 * nc

    if scheme is Scheme.PARTIAL_LRU:
        n_slots = n_base + nd
        spare = {int(q): n_base + int(q) for q in data}
    elif scheme is Scheme.FULL_LRU:
        n_slots = 2 * n_base
        spare = {s: n_base + s for s in range(n_base)}
    else:
        n_slots = n_base
        spare = {}

    def lru(slots):
        slots = np.asarray(slots, dtype=np.int64)
        return lru_gadget(slots, np.array([spare[int(s)] for s in slots], dtype=np.int64))

    prep = [
        Op("prep", pa.copy(), basis="Z", tag="plaquette:prep"),
        Op("prep", sa.copy(), basis="X", tag="star:prep"),
    ]
    meas = [
        Op("meas", pa.copy(), basis="Z", record="syndrome", check_kind=PLAQUETTE,
           sites=np.arange(nc), leaky=False, tag="plaquette:meas"),
        Op("meas", sa.copy(), basis="X", record="syndrome", check_kind=STAR,
           sites=np.arange(nc), leaky=False, tag="star:meas"),
    ]
    # a freshly prepared ancilla gets no LRU: preparation already yields a new qubit
    steps: list[list[Op]] = [prep + [Op("idle", data.copy(), leaky=False, tag="data:idle")]]

    swap_role = 3 if quick_swap == "D" else 0
    for role in range(4):
        p_op, s_op = _cnot_for_role(lat, role)
        if scheme is Scheme.QUICK and role == swap_role:
            # CNOT followed by SWAP collapses to two CNOTs in the opposite order
            pd, sd = lat.plaquette_support[:, role], lat.star_support[:, role]
            name = ROLES[role]
            steps.append([
                Op("cnot", pa.copy(), pd.copy(), tag=f"plaquette:{name}:swap1"),
                Op("cnot", sd.copy(), sa.copy(), tag=f"star:{name}:swap1"),
            ])
            steps.append([
                Op("cnot", pd.copy(), pa.copy(), tag=f"plaquette:{name}:swap2"),
                Op("cnot", sa.copy(), sd.copy(), tag=f"star:{name}:swap2"),
            ])
            steps.append([
                Op("relabel", np.concatenate([pa, sa]), np.concatenate([pd, sd]), tag="quick:swap"),
            ])
        else:
            steps.append([p_op, s_op])
        if scheme is Scheme.FULL_LRU:
            steps += lru(data if role == 3 else np.concatenate([data, anc]))

    steps.append(meas + [Op("idle", data.copy(), leaky=False, tag="data:idle")])
    if scheme is Scheme.PARTIAL_LRU:
        steps += lru(data)

    lru_slots = np.array(sorted(spare), dtype=np.int64)
    return CircuitSchedule(scheme, lat, steps, n_slots, quick_swap, lru_slots)


# ---------------------------------------------------------------- execution


@dataclass
class Injections:
    """Deterministic faults for noiseless propagation runs.

    Gate faults XOR ``pauli`` into ``slot`` right after ``step`` of ``cycle``
    (``pauli == L`` marks the qubit leaked instead). Measurement faults flip the
    recorded syndrome bit of (``kind``, ``check``) measured during that step.
    """

    trial: np.ndarray
    cycle: np.ndarray
    step: np.ndarray
    slot: np.ndarray
    pauli: np.ndarray
    meas_trial: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    meas_cycle: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    meas_step: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    meas_kind: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    meas_check: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def _index(self):
        gate, meas = {}, {}
        for i, key in enumerate(zip(self.cycle.tolist(), self.step.tolist())):
            gate.setdefault(key, []).append(i)
        for i, key in enumerate(zip(self.meas_cycle.tolist(), self.meas_step.tolist())):
            meas.setdefault(key, []).append(i)
        return ({k: np.array(v) for k, v in gate.items()}, {k: np.array(v) for k, v in meas.items()})


@dataclass
class CycleRecords:
    syndrome: np.ndarray  # (B, cycles, 2, d²) uint8 in {0, 1, LOUT}
    lru_leak: np.ndarray  # (B, cycles, n_slots) bool, True where an LRU readout saw L


def simulate(
    schedule: CircuitSchedule,
    labels: np.ndarray,
    params: NoiseParams,
    rng: np.random.Generator | None,
    n_cycles: int,
    three_outcome: bool = False,
    leak_mode: str = noise.LEAK_DEPOLARIZE,
    injections: Injections | None = None,
) -> tuple[np.ndarray, CycleRecords]:
    """Run ``n_cycles`` noisy cycles on a batch of label frames of shape (B, n_slots)."""
    labels = np.array(labels, dtype=np.uint8)
    if labels.ndim != 2 or labels.shape[1] != schedule.n_slots:
        raise ValueError(f"labels must have shape (B, {schedule.n_slots})")
    if rng is None:
        rng = np.random.default_rng(0)
    B = labels.shape[0]
    nc = schedule.lat.n_checks
    syn = np.zeros((B, n_cycles, 2, nc), dtype=np.uint8)
    lru = np.zeros((B, n_cycles, schedule.n_slots), dtype=bool)
    gate_inj, meas_inj = injections._index() if injections is not None else ({}, {})

    for cyc in range(n_cycles):
        for k, step in enumerate(schedule.steps):
            for op in step:
                if op.kind == "cnot":
                    c, t = noise.cnot(labels[:, op.a], labels[:, op.b], params, rng, leak_mode)
                    labels[:, op.a] = c
                    labels[:, op.b] = t
                elif op.kind == "idle":
                    labels[:, op.a] = noise.idle(labels[:, op.a], params, rng)
                elif op.kind == "prep":
                    labels[:, op.a] = noise.prepare(op.basis, params, rng, (B, len(op.a)))
                elif op.kind == "relabel":
                    la, lb = labels[:, op.a].copy(), labels[:, op.b].copy()
                    labels[:, op.a], labels[:, op.b] = lb, la
                elif op.kind == "meas":
                    if op.record == "syndrome":
                        syn[:, cyc, op.check_kind, op.sites] = noise.measure(
                            labels[:, op.a], op.basis, params, rng, three_outcome
                        )
                    else:
                        lru[:, cyc, op.sites] = labels[:, op.a] == L
                else:
                    raise ValueError(f"unknown op kind {op.kind!r}")
            idx = gate_inj.get((cyc, k))
            if idx is not None:
                tr, sl, pa = injections.trial[idx], injections.slot[idx], injections.pauli[idx]
                cur = labels[tr, sl]
                mark = pa == L
                new = np.where(cur == L, cur, cur ^ pa)
                labels[tr, sl] = np.where(mark, L, new)
            idx = meas_inj.get((cyc, k))
            if idx is not None:
                tr = injections.meas_trial[idx]
                kd, ch = injections.meas_kind[idx], injections.meas_check[idx]
                cur = syn[tr, cyc, kd, ch]
                syn[tr, cyc, kd, ch] = np.where(cur == noise.LOUT, cur, cur ^ 1)
    return labels, CycleRecords(syn, lru)


def run_cycle(schedule, labels, params, rng, three_outcome=False):
    """One noisy cycle; returns the new labels and the syndrome row (2, d²)."""
    single = np.asarray(labels).ndim == 1
    lab = np.atleast_2d(labels)
    out, rec = simulate(schedule, lab, params, rng, 1, three_outcome)
    row = rec.syndrome[:, 0]
    return (out[0], row[0]) if single else (out, row)


def perfect_final_round(labels: np.ndarray, lat: ToricLattice, rng: np.random.Generator):
    """Replace leaked qubits by random Paulis and read every check noiselessly.

    Returns the new labels and a (…, 2, d²) syndrome row from the data slots.
    """
    labels = np.array(labels, dtype=np.uint8)
    leaked = labels == L
    if leaked.any():
        labels[leaked] = rng.integers(0, 4, size=int(leaked.sum()), dtype=np.uint8)
    data = labels[..., : lat.n_data]
    row = np.stack(
        [lat.syndrome("plaquette", data & 1), lat.syndrome("star", (data >> 1) & 1)], axis=-2
    ).astype(np.uint8)
    return labels, row


# ---------------------------------------------------------------- provenance


@dataclass(frozen=True)
class Interaction:
    offset: int  # cycle relative to the measurement cycle (<= 0)
    step: int
    partner: int  # partner slot at that step
    before: int  # leak-capable locations of the measured qubit strictly before this gate


@dataclass(frozen=True)
class ReadoutHistory:
    """Life of the physical qubit read out by one measurement location."""

    record: str
    site: int  # check index (syndrome) or served data slot (lru)
    check_kind: int
    n_locations: int
    interactions: tuple[Interaction, ...]
    prep: tuple[int, int, int] | None  # (offset, step, slot) of its initialization
    start_slots: tuple[tuple[int, int], ...]  # (offset, slot) held at the start of each cycle


def readout_histories(schedule: CircuitSchedule, max_cycles: int = 4) -> list[ReadoutHistory]:
    """Trace every measurement of the last simulated cycle back to its preparation."""
    n = schedule.n_slots
    phys = np.arange(n)  # slot -> physical id
    hist: dict[int, dict] = {}
    out: list[ReadoutHistory] = []

    def fresh(pid):
        hist[pid] = {"count": 0, "inter": [], "prep": None, "starts": []}

    for pid in range(n):
        fresh(pid)
    for cyc in range(max_cycles):
        last = cyc == max_cycles - 1
        for s in range(n):
            hist[int(phys[s])]["starts"].append((cyc, s))
        for k, step in enumerate(schedule.steps):
            for op in step:
                if op.kind == "relabel":
                    pa, pb = phys[op.a].copy(), phys[op.b].copy()
                    phys[op.a], phys[op.b] = pb, pa
                elif op.kind == "prep":
                    for s in op.a:
                        pid = int(phys[s])
                        fresh(pid)
                        hist[pid]["prep"] = (cyc, k, int(s))
                        hist[pid]["count"] = 1
                        hist[pid]["starts"] = []
                elif op.kind == "cnot":
                    for c, t in zip(op.a, op.b):
                        for me, other in ((c, t), (t, c)):
                            h = hist[int(phys[me])]
                            h["inter"].append((cyc, k, int(other), h["count"]))
                            h["count"] += 1
                elif op.kind == "meas" and last:
                    for s, site in zip(op.a, op.sites):
                        h = hist[int(phys[s])]
                        if h["prep"] is None:
                            raise RuntimeError("measured qubit was never prepared; raise max_cycles")
                        pc, pk, ps = h["prep"]
                        out.append(ReadoutHistory(
                            record=op.record,
                            site=int(site),
                            check_kind=op.check_kind if op.record == "syndrome" else -1,
                            n_locations=h["count"],
                            interactions=tuple(
                                Interaction(c0 - cyc, k0, o, b) for c0, k0, o, b in h["inter"]
                            ),
                            prep=(pc - cyc, pk, ps),
                            start_slots=tuple((c0 - cyc, s0) for c0, s0 in h["starts"]),
                        ))
    return out
