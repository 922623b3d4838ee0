"""Inter-agent communication graph and the per-round message exchange.

Rounds are synchronous: every agent publishes its price vector, and the
exchange delivers it to each neighbor unless the link drops this round.
Dropped links deliver in neither direction and the affected neighbor is
simply omitted from the receiver's view for that round.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "Topology",
    "LinkFaultModel",
    "build_topology",
    "graph_diameter",
    "exchange_round",
    "delivered_edges",
    "consensus_sums",
]


@dataclass(frozen=True)
class Topology:
    """Undirected, connected communication graph without self-loops."""

    num_agents: int
    edges: tuple[tuple[int, int], ...]  # canonical (u, v) with u < v, sorted

    def __post_init__(self) -> None:
        if self.num_agents < 1:
            raise ValueError("num_agents must be >= 1")
        seen = set()
        for u, v in self.edges:
            if not (0 <= u < self.num_agents and 0 <= v < self.num_agents):
                raise ValueError(f"edge ({u}, {v}) references a missing agent")
            if u == v:
                raise ValueError(f"self-loop at agent {u}")
            if u > v or (u, v) in seen:
                raise ValueError(f"edges must be canonical and unique, got ({u}, {v})")
            seen.add((u, v))
        if not self._connected():
            raise ValueError("communication graph must be connected")

    def _connected(self) -> bool:
        reached = {0}
        frontier = [0]
        adj = self.neighbor_lists()
        while frontier:
            node = frontier.pop()
            for nxt in adj[node]:
                if nxt not in reached:
                    reached.add(nxt)
                    frontier.append(nxt)
        return len(reached) == self.num_agents

    def neighbor_lists(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.num_agents)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return [sorted(n) for n in adj]

    def adjacency_matrix(self) -> np.ndarray:
        mat = np.zeros((self.num_agents, self.num_agents))
        for u, v in self.edges:
            mat[u, v] = mat[v, u] = 1.0
        return mat

    @cached_property
    def edge_array(self) -> np.ndarray:
        """Edges as an (E, 2) int array, canonical order."""
        return np.array(self.edges, dtype=np.int64).reshape(-1, 2)


def build_topology(kind: str, num_agents: int, edges=None) -> Topology:
    """Build a path, ring, or custom edge-list topology.

    Custom edge lists are normalized (symmetrized, deduplicated) before the
    connectivity check; a disconnected custom graph is rejected.
    """
    if num_agents < 1:
        raise ValueError("num_agents must be >= 1")
    if kind == "path":
        edge_set = {(i, i + 1) for i in range(num_agents - 1)}
    elif kind == "ring":
        edge_set = {(i, i + 1) for i in range(num_agents - 1)}
        if num_agents > 2:
            edge_set.add((0, num_agents - 1))
    elif kind == "custom":
        if edges is None:
            raise ValueError("custom topology requires an edge list")
        edge_set = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop at agent {u}")
            edge_set.add((min(u, v), max(u, v)))
    else:
        raise ValueError(f"unknown topology kind {kind!r}")
    return Topology(num_agents=num_agents, edges=tuple(sorted(edge_set)))


def graph_diameter(topology: Topology) -> int:
    """Exact diameter via breadth-first search from every agent."""
    adj = topology.neighbor_lists()
    diameter = 0
    for source in range(topology.num_agents):
        dist = {source: 0}
        frontier = [source]
        while frontier:
            nxt_frontier = []
            for node in frontier:
                for nbr in adj[node]:
                    if nbr not in dist:
                        dist[nbr] = dist[node] + 1
                        nxt_frontier.append(nbr)
            frontier = nxt_frontier
        diameter = max(diameter, max(dist.values()))
    return diameter


@dataclass(frozen=True)
class LinkFaultModel:
    """Independent symmetric link drops, deterministic for a fixed seed.

    Each round draws one fate per edge from a generator keyed by
    (seed, round), so replaying any round is order-independent.
    """

    drop_probability: float
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.drop_probability < 1:
            raise ValueError(f"drop_probability must lie in [0, 1), got {self.drop_probability}")

    def dropped(self, num_edges: int, round_index: int) -> np.ndarray:
        if self.drop_probability == 0.0:
            return np.zeros(num_edges, dtype=bool)
        rng = np.random.default_rng([self.seed, round_index])
        return rng.random(num_edges) < self.drop_probability


def delivered_edges(
    topology: Topology, fault: LinkFaultModel | None, round_index: int
) -> tuple[tuple[int, int], ...]:
    """Edges that deliver this round (both directions or neither)."""
    if fault is None:
        return topology.edges
    keep = ~fault.dropped(len(topology.edges), round_index)
    return tuple(edge for edge, ok in zip(topology.edges, keep) if ok)


def exchange_round(
    topology: Topology,
    fault: LinkFaultModel | None,
    payloads: list[np.ndarray],
    round_index: int,
) -> list[dict[int, np.ndarray]]:
    """Deliver each agent's price vector to its neighbors for one round.

    Returns, per agent, the mapping {neighbor: neighbor's payload} restricted
    to links that survived this round.
    """
    if len(payloads) != topology.num_agents:
        raise ValueError(
            f"expected {topology.num_agents} payloads, got {len(payloads)}"
        )
    delivered: list[dict[int, np.ndarray]] = [{} for _ in range(topology.num_agents)]
    for u, v in delivered_edges(topology, fault, round_index):
        delivered[u][v] = payloads[v]
        delivered[v][u] = payloads[u]
    return delivered


def consensus_sums(
    topology: Topology,
    fault: LinkFaultModel | None,
    prices: np.ndarray,
    round_index: int,
) -> np.ndarray:
    """Neighborhood disagreement sums over the delivered links of one round.

    Row v of the result is sum over delivered neighbors w of
    (prices[v] - prices[w]). Only price vectors ever cross this interface.
    """
    prices = np.asarray(prices)
    if prices.shape[0] != topology.num_agents:
        raise ValueError(
            f"expected {topology.num_agents} price rows, got {prices.shape[0]}"
        )
    out = np.zeros_like(prices)
    edges = topology.edge_array
    if fault is not None:
        edges = edges[~fault.dropped(len(topology.edges), round_index)]
    if edges.size:
        u, v = edges[:, 0], edges[:, 1]
        diff = prices[u] - prices[v]
        np.add.at(out, u, diff)
        np.subtract.at(out, v, diff)
    return out
