"""Undirected simple connected communication graphs.

Agents are indexed ``0..J-1``.  Every constructor validates the result
(symmetry, no self-loops, no duplicate edges, connectivity) before
returning it, so downstream engines never see a malformed topology.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MAX_REDRAWS = 1000


class GraphError(ValueError):
    """Invalid graph parameters or a malformed edge list."""


class DisconnectedGraphError(GraphError):
    """Raised where a connected graph is required (e.g. the diameter)."""


class GraphGenerationError(RuntimeError):
    """Random generation exhausted its retry budget."""


@dataclass(frozen=True)
class Graph:
    num_agents: int
    edges: tuple[tuple[int, int], ...]
    _neighbors: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        J = self.num_agents
        if J < 1:
            raise GraphError(f"graph needs at least one agent, got J={J}")
        canon = []
        seen = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise GraphError(f"self-loop at agent {i}")
            if not (0 <= i < J and 0 <= j < J):
                raise GraphError(f"edge ({i}, {j}) out of range for J={J}")
            e = (min(i, j), max(i, j))
            if e in seen:
                raise GraphError(f"duplicate edge {e}")
            seen.add(e)
            canon.append(e)
        canon.sort()
        object.__setattr__(self, "edges", tuple(canon))
        nbrs: list[list[int]] = [[] for _ in range(J)]
        for i, j in canon:
            nbrs[i].append(j)
            nbrs[j].append(i)
        object.__setattr__(self, "_neighbors", tuple(tuple(sorted(n)) for n in nbrs))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self._neighbors[i]

    @cached_property
    def degrees(self) -> np.ndarray:
        d = np.array([len(n) for n in self._neighbors], dtype=float)
        d.setflags(write=False)
        return d

    @cached_property
    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.num_agents, self.num_agents), dtype=np.int8)
        for i, j in self.edges:
            A[i, j] = A[j, i] = 1
        A.setflags(write=False)
        return A

    @property
    def average_degree(self) -> float:
        return 2.0 * self.num_edges / self.num_agents

    @cached_property
    def links(self) -> tuple[tuple[int, int], ...]:
        """Directed links as ``(sender, receiver)``, ordered by receiver then sender."""
        return tuple((j, i) for i in range(self.num_agents) for j in self._neighbors[i])

    @property
    def num_links(self) -> int:
        return 2 * self.num_edges

    @cached_property
    def slot_tables(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Padded per-receiver tables ``(sender, link_index, mask)``, each shape (J, max_degree).

        Slot ``m`` of row ``i`` holds the m-th neighbor of agent ``i`` and the
        index of the directed link it transmits on.  Padding entries point at
        agent 0 / link 0 and are masked out.
        """
        J = self.num_agents
        width = max(1, max((len(n) for n in self._neighbors), default=0))
        senders = np.zeros((J, width), dtype=np.intp)
        link_idx = np.zeros((J, width), dtype=np.intp)
        mask = np.zeros((J, width), dtype=bool)
        pos = 0
        for i in range(J):
            for m, j in enumerate(self._neighbors[i]):
                senders[i, m] = j
                link_idx[i, m] = pos
                mask[i, m] = True
                pos += 1
        return senders, link_idx, mask

    def is_connected(self) -> bool:
        return len(_bfs_distances(self, 0)) == self.num_agents

    def validate(self) -> None:
        A = self.adjacency
        if not np.array_equal(A, A.T):
            raise GraphError("adjacency is not symmetric")
        if np.any(np.diag(A)):
            raise GraphError("self-loop present")
        if int(self.degrees.sum()) != 2 * self.num_edges:
            raise GraphError("degree sum does not equal twice the edge count")
        if not self.is_connected():
            raise DisconnectedGraphError("graph is not connected")


def _bfs_distances(g: Graph, source: int) -> dict[int, int]:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for w in g.neighbors(u):
            if w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def from_edges(num_agents: int, edges: Iterable[Sequence[int]]) -> Graph:
    g = Graph(num_agents, tuple((int(e[0]), int(e[1])) for e in edges))
    g.validate()
    return g


def path_graph(num_agents: int) -> Graph:
    if num_agents < 1:
        raise GraphError(f"path graph needs J >= 1, got {num_agents}")
    return from_edges(num_agents, [(i, i + 1) for i in range(num_agents - 1)])


def complete_graph(num_agents: int) -> Graph:
    if num_agents < 1:
        raise GraphError(f"complete graph needs J >= 1, got {num_agents}")
    return from_edges(
        num_agents, [(i, j) for i in range(num_agents) for j in range(i + 1, num_agents)]
    )


def random_connected_graph(
    num_agents: int, target_avg_degree: float, seed: int, max_redraws: int = MAX_REDRAWS
) -> Graph:
    """Erdős–Rényi graph with edge probability ``target_avg_degree / (J - 1)``.

    Redraws until the sample is connected.  The draw is a pure function of
    ``(num_agents, target_avg_degree, seed)``.
    """
    J = num_agents
    if J < 2:
        raise GraphError(f"random graph needs J >= 2, got {J}")
    lo, hi = 2.0 * (J - 1) / J, float(J - 1)
    if not (lo - 1e-12 <= target_avg_degree <= hi + 1e-12):
        raise GraphError(
            f"target average degree {target_avg_degree} outside [{lo:g}, {hi:g}] for J={J}"
        )
    p = min(1.0, target_avg_degree / (J - 1))
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(J, k=1)
    for _ in range(max_redraws):
        keep = rng.random(iu.size) < p
        g = Graph(J, tuple(zip(iu[keep].tolist(), ju[keep].tolist())))
        if g.is_connected():
            g.validate()
            return g
    raise GraphGenerationError(
        f"no connected graph after {max_redraws} draws (J={J}, p={p:.4g}, seed={seed})"
    )


def eccentricity(g: Graph, source: int) -> int:
    dist = _bfs_distances(g, source)
    if len(dist) != g.num_agents:
        raise DisconnectedGraphError("eccentricity is infinite on a disconnected graph")
    return max(dist.values())


def diameter(g: Graph) -> int:
    """Longest shortest-path hop count, by BFS from every agent."""
    return max(eccentricity(g, s) for s in range(g.num_agents))


def write_edge_list(g: Graph, path: str | Path) -> None:
    lines = [f"{g.num_agents} {g.num_edges}"]
    lines += [f"{i} {j}" for i, j in g.edges]
    Path(path).write_text("\n".join(lines) + "\n")


def read_edge_list(path: str | Path) -> Graph:
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not rows or len(rows[0]) != 2:
        raise GraphError(f"{path}: header must be 'J E'")
    J, E = int(rows[0][0]), int(rows[0][1])
    body = rows[1:]
    if len(body) != E:
        raise GraphError(f"{path}: header announces {E} edges, found {len(body)}")
    edges = []
    for r in body:
        if len(r) != 2:
            raise GraphError(f"{path}: malformed edge line {' '.join(r)!r}")
        i, j = int(r[0]), int(r[1])
        if i >= j:
            raise GraphError(f"{path}: edge ({i}, {j}) must satisfy i < j")
        edges.append((i, j))
    return from_edges(J, edges)
