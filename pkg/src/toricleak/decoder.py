"""Defect extraction, exact matching, corrections and failure judgement.

Two matching engines are available. :func:`mwpm` is an exact blossom solver
(networkx) on the complete defect graph with shortest-path distances; it is the
reference. :class:`GraphDecoder` hands the whole space-time graph to pymatching,
which returns the data-qubit correction directly and is the engine used by the
Monte Carlo driver.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import networkx as nx
import numpy as np

from .graph import ERROR_TYPES, DecodingGraph, _KIND, all_pairs_distance, mask_L_syndromes, shortest_distance
from .lattice import ToricLattice, homology_class, logical_operators


@dataclass(frozen=True)
class Defects:
    """Defect node ids of one graph, plus the L-masked vertical edges."""

    nodes: np.ndarray
    masked: np.ndarray  # (rounds+1, d²) bool


@dataclass(frozen=True)
class Matching:
    pairs: tuple[tuple[int, int], ...]
    weight: float


def extract_defects(rows: np.ndarray) -> dict[str, Defects]:
    """Defects of both graphs from one trial's syndrome rows (T, 2, d²).

    The last row must be the perfect final readout.
    """
    rows = np.asarray(rows)
    out = {}
    for et in ERROR_TYPES:
        defects, masked = mask_L_syndromes(rows[:, _KIND[et], :])
        nodes = np.flatnonzero(defects.ravel())
        if len(nodes) % 2:
            raise AssertionError(f"odd number of {et} defects ({len(nodes)})")
        out[et] = Defects(nodes, masked)
    return out


def mwpm(defects, distance: Callable[[int, int], float] | np.ndarray) -> Matching:
    """Exact minimum-weight perfect matching of ``defects``.

    ``distance`` is either a callable on two defect node ids or a precomputed
    square matrix indexed by position in ``defects``.
    """
    defects = [int(x) for x in defects]
    n = len(defects)
    if n % 2:
        raise ValueError(f"cannot perfectly match an odd number of defects ({n})")
    if n == 0:
        return Matching((), 0.0)
    if callable(distance):
        dist = np.array([[distance(a, b) if a != b else 0.0 for b in defects] for a in defects], dtype=float)
    else:
        dist = np.asarray(distance, dtype=float)
    big = float(dist.max()) + 1.0
    g = nx.Graph()
    for i in range(n):
        for j in range(i + 1, n):
            g.add_edge(i, j, weight=big - dist[i, j])
    sol = nx.max_weight_matching(g, maxcardinality=True)
    pairs = sorted(tuple(sorted((defects[i], defects[j]))) for i, j in sol)
    total = float(sum(dist[i, j] for i, j in sol))
    return Matching(tuple(pairs), total)


def brute_force_matching(defects, dist: np.ndarray) -> float:
    """Minimum perfect-matching weight by exhaustive recursion (reference only)."""
    n = len(defects)
    if n % 2:
        raise ValueError("odd defect count")

    def rec(rest: tuple[int, ...]) -> float:
        if not rest:
            return 0.0
        a, tail = rest[0], rest[1:]
        return min(dist[a, b] + rec(tail[:k] + tail[k + 1:]) for k, b in enumerate(tail))

    return rec(tuple(range(n)))


def match_graph(graph: DecodingGraph, defects) -> Matching:
    """Exact matching of ``defects`` with shortest-path distances in ``graph``."""
    defects = np.asarray(defects, dtype=np.int64)
    return mwpm(defects, all_pairs_distance(graph, defects))


def assemble_correction(matching: Matching, graph: DecodingGraph) -> np.ndarray:
    """Bool data-qubit correction: XOR of the residuals along each pair's shortest path."""
    corr = np.zeros(graph.residual.shape[0], dtype=np.uint8)
    index = graph.edge_index()
    res = graph.residual
    for a, b in matching.pairs:
        _, path = shortest_distance(graph, a, b)
        for u, v in zip(path[:-1], path[1:]):
            e = index[(min(u, v), max(u, v))]
            lo, hi = res.indptr[e], res.indptr[e + 1]
            corr[res.indices[lo:hi]] ^= 1
    return corr.astype(bool)


def judge_failure(frame: np.ndarray, correction: dict[str, np.ndarray], lat: ToricLattice,
                  logicals=None) -> tuple[int, int]:
    """(x_fail, z_fail) of the data frame after applying ``correction``.

    ``frame`` holds data-qubit labels (bit 0 = X part, bit 1 = Z part);
    ``correction`` maps "X"/"Z" to bool masks. Raises if the corrected chain
    still has a boundary.
    """
    logicals = logicals or logical_operators(lat)
    frame = np.asarray(frame)[: lat.n_data]
    x = (frame & 1).astype(bool) ^ np.asarray(correction["X"], dtype=bool)
    z = ((frame >> 1) & 1).astype(bool) ^ np.asarray(correction["Z"], dtype=bool)
    xf = any(homology_class(lat, x, logicals, "X"))
    zf = any(homology_class(lat, z, logicals, "Z"))
    return int(xf), int(zf)


class GraphDecoder:
    """pymatching on the full space-time graph; returns data-qubit corrections."""

    def __init__(self, graph: DecodingGraph):
        self.graph = graph
        self._m = graph.matching()

    def decode(self, defects) -> np.ndarray:
        syn = np.zeros(self.graph.n_nodes, dtype=np.uint8)
        syn[np.asarray(defects, dtype=np.int64)] = 1
        return self._m.decode(syn).astype(bool)

    def decode_batch(self, syndromes: np.ndarray) -> np.ndarray:
        """``syndromes`` is (B, n_nodes) 0/1; returns (B, n_data) bool."""
        return self._m.decode_batch(np.asarray(syndromes, dtype=np.uint8)).astype(bool)
