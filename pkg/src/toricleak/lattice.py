"""Toric code geometry.

Indexing (all row-major, coordinates taken mod ``d``):

* horizontal edge ``h(i, j) = i*d + j`` is the top edge of plaquette ``(i, j)``
* vertical edge ``v(i, j) = d*d + i*d + j`` is the left edge of plaquette ``(i, j)``
* plaquette ``(i, j)`` has index ``i*d + j`` and support
  U = h(i, j), L = v(i, j), R = v(i, j+1), D = h(i+1, j)
* star ``(i, j)`` sits on the top-left corner of plaquette ``(i, j)`` and has support
  U = v(i-1, j), L = h(i, j-1), R = h(i, j), D = v(i, j)

Plaquettes are Z-type checks (they detect X errors), stars are X-type checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ROLES = ("U", "L", "R", "D")


@dataclass(frozen=True)
class ToricLattice:
    d: int
    plaquette_support: np.ndarray = field(repr=False)  # (d*d, 4) in U, L, R, D order
    star_support: np.ndarray = field(repr=False)

    @property
    def n_data(self) -> int:
        return 2 * self.d * self.d

    @property
    def n_checks(self) -> int:
        return self.d * self.d

    def h(self, i: int, j: int) -> int:
        d = self.d
        return (i % d) * d + (j % d)

    def v(self, i: int, j: int) -> int:
        d = self.d
        return d * d + (i % d) * d + (j % d)

    def check_index(self, i: int, j: int) -> int:
        return (i % self.d) * self.d + (j % self.d)

    def check_coords(self, c: int) -> tuple[int, int]:
        return divmod(int(c), self.d)

    def support(self, kind: str) -> np.ndarray:
        """Check supports for ``kind`` in {"plaquette", "star"}."""
        if kind == "plaquette":
            return self.plaquette_support
        if kind == "star":
            return self.star_support
        raise ValueError(f"unknown check kind {kind!r}")

    def incidence(self, kind: str) -> np.ndarray:
        """Boolean (n_checks, n_data) incidence matrix."""
        sup = self.support(kind)
        m = np.zeros((self.n_checks, self.n_data), dtype=bool)
        m[np.arange(self.n_checks)[:, None], sup] = True
        return m

    def syndrome(self, kind: str, chain: np.ndarray) -> np.ndarray:
        """Parity of ``chain`` (bool over data qubits, any leading batch dims) on each check."""
        chain = np.asarray(chain, dtype=np.uint8)
        return np.bitwise_xor.reduce(chain[..., self.support(kind)], axis=-1).astype(bool)

    def translate(self, qubit: int, di: int, dj: int) -> int:
        d = self.d
        q = int(qubit)
        if q < d * d:
            i, j = divmod(q, d)
            return self.h(i + di, j + dj)
        i, j = divmod(q - d * d, d)
        return self.v(i + di, j + dj)


def build_lattice(d: int) -> ToricLattice:
    if int(d) != d or d < 2:
        raise ValueError(f"code distance must be an integer >= 2, got {d!r}")
    d = int(d)

    def h(i, j):
        return (i % d) * d + (j % d)

    def v(i, j):
        return d * d + (i % d) * d + (j % d)

    plaq = np.empty((d * d, 4), dtype=np.int64)
    star = np.empty((d * d, 4), dtype=np.int64)
    for i in range(d):
        for j in range(d):
            c = i * d + j
            plaq[c] = (h(i, j), v(i, j), v(i, j + 1), h(i + 1, j))
            star[c] = (v(i - 1, j), h(i, j - 1), h(i, j), v(i, j))
    plaq.setflags(write=False)
    star.setflags(write=False)
    return ToricLattice(d, plaq, star)


@dataclass(frozen=True)
class LogicalOperators:
    """Straight-line representatives. ``x[k]`` anticommutes with ``z[k]`` only."""

    x: tuple[np.ndarray, np.ndarray]
    z: tuple[np.ndarray, np.ndarray]


def logical_operators(lat: ToricLattice) -> LogicalOperators:
    d = lat.d
    x1 = np.array([lat.v(0, j) for j in range(d)])  # row of vertical edges
    x2 = np.array([lat.h(i, 0) for i in range(d)])  # column of horizontal edges
    z1 = np.array([lat.v(i, 0) for i in range(d)])  # column of vertical edges
    z2 = np.array([lat.h(0, j) for j in range(d)])  # row of horizontal edges
    return LogicalOperators((x1, x2), (z1, z2))


def _mask(lat: ToricLattice, support: np.ndarray) -> np.ndarray:
    m = np.zeros(lat.n_data, dtype=bool)
    m[support] = True
    return m


def homology_class(
    lat: ToricLattice,
    chain: np.ndarray,
    logicals: LogicalOperators | None = None,
    error_type: str = "X",
) -> tuple[int, int]:
    """Homology bits of a closed ``error_type`` chain.

    ``chain`` is a bool mask (or an index multiset) over data qubits. An X chain is
    tested against the two Z logicals and must have no plaquette syndrome; a Z chain
    symmetrically against the X logicals and stars.
    """
    logicals = logicals or logical_operators(lat)
    chain = np.asarray(chain)
    if chain.dtype != bool:
        counts = np.bincount(chain.astype(np.int64).ravel(), minlength=lat.n_data)
        chain = (counts % 2).astype(bool)
    if error_type == "X":
        kind, ops = "plaquette", logicals.z
    elif error_type == "Z":
        kind, ops = "star", logicals.x
    else:
        raise ValueError(f"error_type must be 'X' or 'Z', got {error_type!r}")
    if lat.syndrome(kind, chain).any():
        raise ValueError("chain has a non-empty boundary")
    return tuple(int(np.count_nonzero(chain & _mask(lat, op)) % 2) for op in ops)


def logical_masks(lat: ToricLattice, logicals: LogicalOperators | None = None) -> dict[str, np.ndarray]:
    """Bool (2, n_data) matrices of the X and Z logical supports."""
    logicals = logicals or logical_operators(lat)
    return {
        "X": np.stack([_mask(lat, s) for s in logicals.x]),
        "Z": np.stack([_mask(lat, s) for s in logicals.z]),
    }
