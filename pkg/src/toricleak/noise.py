"""Stochastic depolarizing + leakage noise acting on per-qubit frame labels.

Labels are small integers so arrays of them compose with bit operations:
``I=0, X=1, Z=2, Y=3`` (bit 0 is the X part, bit 1 the Z part) and ``L=4``
for a leaked qubit. Every function here is vectorized: ``labels`` may be a
scalar or an array of any shape, and each element is sampled independently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

I, X, Z, Y, L = 0, 1, 2, 3, 4
LABEL_NAMES = {I: "I", X: "X", Z: "Z", Y: "Y", L: "L"}
LOUT = 2  # third measurement outcome

LEAK_DEPOLARIZE = "depolarize"
LEAK_ABSORB = "absorb"  # noiseless propagation: leaked qubits neither spread nor receive errors


@dataclass(frozen=True)
class NoiseParams:
    p: float
    r: float = 0.0
    s: float = 0.0
    q: float | None = None

    def __post_init__(self):
        if self.q is None:
            object.__setattr__(self, "q", self.p)
        for name in ("p", "q", "p_up", "p_down"):
            val = getattr(self, name)
            if not 0.0 <= val <= 1.0:
                raise ValueError(f"{name}={val} is not a probability")
        if self.r < 0 or self.s < 0:
            raise ValueError("relative rates r and s must be non-negative")

    @property
    def p_up(self) -> float:
        return self.r * self.p

    @property
    def p_down(self) -> float:
        return self.s * self.p

    @classmethod
    def noiseless(cls) -> "NoiseParams":
        return cls(0.0, 0.0, 0.0, 0.0)


def _bernoulli(rng: np.random.Generator, prob: float, shape) -> np.ndarray:
    if prob <= 0.0:
        return np.zeros(shape, dtype=bool)
    if prob >= 1.0:
        return np.ones(shape, dtype=bool)
    return rng.random(shape) < prob


def _uniform_pauli(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.integers(0, 4, size=shape, dtype=np.uint8)


def relax(labels: np.ndarray, p_down: float, rng: np.random.Generator) -> np.ndarray:
    """Leaked entries return to the computational space as a uniformly random Pauli."""
    labels = np.array(labels, dtype=np.uint8)
    leaked = labels == L
    if p_down > 0 and leaked.any():
        hit = leaked & _bernoulli(rng, p_down, labels.shape)
        labels[hit] = _uniform_pauli(rng, int(hit.sum()))
    return labels


def excite_or_relax(labels: np.ndarray, params: NoiseParams, rng: np.random.Generator) -> np.ndarray:
    """Post-gate leakage step applied independently to each gate output."""
    labels = np.array(labels, dtype=np.uint8)
    leaked = labels == L
    if params.p_up > 0:
        up = ~leaked & _bernoulli(rng, params.p_up, labels.shape)
        labels[up] = L
    if params.p_down > 0 and leaked.any():
        down = leaked & _bernoulli(rng, params.p_down, labels.shape)
        labels[down] = _uniform_pauli(rng, int(down.sum()))
    return labels


def idle(labels, params: NoiseParams, rng: np.random.Generator) -> np.ndarray:
    """Idle location: depolarize contained qubits, let leaked ones relax. Never leaks."""
    labels = np.array(labels, dtype=np.uint8)
    contained = labels != L
    if params.p > 0:
        hit = contained & _bernoulli(rng, params.p, labels.shape)
        labels[hit] ^= rng.integers(1, 4, size=int(hit.sum()), dtype=np.uint8)
    return relax(labels, params.p_down, rng)


def prepare(basis: str, params: NoiseParams, rng: np.random.Generator, size=None) -> np.ndarray:
    """Fresh qubit in |0> (``basis="Z"``) or |+> (``basis="X"``)."""
    if basis not in ("Z", "X"):
        raise ValueError(f"unknown preparation basis {basis!r}")
    shape = () if size is None else size
    wrong = X if basis == "Z" else Z
    labels = np.where(_bernoulli(rng, params.p, shape), wrong, I).astype(np.uint8)
    labels[_bernoulli(rng, params.p_up, shape)] = L
    return labels


def propagate_cnot(control: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ideal CNOT conjugation on contained labels (X copies forward, Z copies back)."""
    return control ^ (target & 2), target ^ (control & 1)


def cnot(
    control,
    target,
    params: NoiseParams,
    rng: np.random.Generator,
    leak_mode: str = LEAK_DEPOLARIZE,
) -> tuple[np.ndarray, np.ndarray]:
    c = np.array(control, dtype=np.uint8)
    t = np.array(target, dtype=np.uint8)
    c, t = np.broadcast_arrays(c, t)
    c, t = c.copy(), t.copy()
    lc, lt = c == L, t == L
    both = ~lc & ~lt
    nc, nt = propagate_cnot(c, t)
    c = np.where(both, nc, c).astype(np.uint8)
    t = np.where(both, nt, t).astype(np.uint8)
    if leak_mode == LEAK_DEPOLARIZE:
        only_c, only_t = lc & ~lt, lt & ~lc
        if only_c.any():
            t[only_c] = _uniform_pauli(rng, int(only_c.sum()))
        if only_t.any():
            c[only_t] = _uniform_pauli(rng, int(only_t.sum()))
    elif leak_mode != LEAK_ABSORB:
        raise ValueError(f"unknown leak mode {leak_mode!r}")
    if params.p > 0:
        hit = both & _bernoulli(rng, params.p, c.shape)
        k = int(hit.sum())
        if k:
            pair = rng.integers(1, 16, size=k, dtype=np.uint8)
            c[hit] ^= pair & 3
            t[hit] ^= pair >> 2
    if params.p_up > 0 or params.p_down > 0:
        c = excite_or_relax(c, params, rng)
        t = excite_or_relax(t, params, rng)
    return c, t


def anticommutes(labels: np.ndarray, basis: str) -> np.ndarray:
    """Whether a contained label flips a measurement in ``basis``."""
    labels = np.asarray(labels)
    bit = 1 if basis == "Z" else 2
    return (labels & bit).astype(bool)


def measure(
    labels,
    basis: str,
    params: NoiseParams,
    rng: np.random.Generator,
    three_outcome: bool = False,
    flip_prob: float | None = None,
) -> np.ndarray:
    """Outcome 0/1 relative to the ideal result, or ``LOUT`` for a leaked qubit.

    Without three-outcome readout a leaked qubit deterministically reports 1.
    """
    if basis not in ("Z", "X"):
        raise ValueError(f"unknown measurement basis {basis!r}")
    labels = np.asarray(labels, dtype=np.uint8)
    flip = params.q if flip_prob is None else flip_prob
    leaked = labels == L
    out = anticommutes(labels, basis).astype(np.uint8) ^ _bernoulli(rng, flip, labels.shape)
    return np.where(leaked, LOUT if three_outcome else 1, out).astype(np.uint8)


def equilibrium_leakage(k_up: int, k_dn: int, params: NoiseParams) -> float:
    """Stationary leaked probability of a qubit that is never reset.

    One cycle is modelled as ``k_up`` gate outputs (which may excite or relax)
    followed by ``k_dn - k_up`` relax-only idle locations. Returns the exact
    fixed point of that two-state map at the cycle boundary.
    """
    if k_up < 0 or k_dn < 0:
        raise ValueError("location counts must be non-negative")
    if k_dn < k_up:
        raise ValueError("every excitation location is also a relaxation location (k_dn >= k_up)")
    up, dn = params.p_up, params.p_down
    if up == 0 or k_up == 0:
        return 0.0
    # per-location affine maps P -> a*P + b
    a, b = 1.0, 0.0
    for _ in range(k_up):
        a, b = a * (1 - dn - up), b * (1 - dn - up) + up
    for _ in range(k_dn - k_up):
        a, b = a * (1 - dn), b * (1 - dn)
    if a >= 1.0:
        raise ValueError("leakage chain has no unique fixed point")
    return b / (1.0 - a)
