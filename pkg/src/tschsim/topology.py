"""Static convergecast routing trees.

The routing tree is an input, not an emergent structure: node 0 is the DAG
root (the sink), every other node has exactly one parent, and links are
symmetric. Generators for chain, star and seeded random trees are provided
since experiments need concrete topologies.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping

ROOT = 0


class TopologyError(Exception):
    """Edge list does not describe a valid routing tree."""


@dataclass(frozen=True)
class RoutingTree:
    """Immutable parent/children view of a convergecast tree."""

    node_count: int
    parent: dict[int, int]
    children: dict[int, tuple[int, ...]] = field(init=False)

    def __post_init__(self) -> None:
        kids: dict[int, list[int]] = {n: [] for n in range(self.node_count)}
        for child, par in sorted(self.parent.items()):
            kids[par].append(child)
        object.__setattr__(
            self, "children", {n: tuple(c) for n, c in kids.items()}
        )

    def nodes(self) -> range:
        return range(self.node_count)

    def depth(self, node: int) -> int:
        """Hop count from `node` up to the root."""
        self._check(node)
        d = 0
        while node != ROOT:
            node = self.parent[node]
            d += 1
        return d

    def subtree(self, node: int) -> set[int]:
        """`node` plus all of its descendants."""
        self._check(node)
        members = set()
        stack = [node]
        while stack:
            n = stack.pop()
            members.add(n)
            stack.extend(self.children[n])
        return members

    def total_packets(self, generated: Mapping[int, int], node: int) -> int:
        """Sum of generated packet counts over the subtree rooted at `node`.

        For a leaf this is just its own generation count; for interior nodes
        it is the traffic volume the node must relay (own plus descendants).
        """
        total = 0
        for member in self.subtree(node):
            if member not in generated:
                raise KeyError(f"no generation count for node {member}")
            count = generated[member]
            if count < 0:
                raise ValueError(f"negative packet count for node {member}")
            total += count
        return total

    def _check(self, node: int) -> None:
        if not 0 <= node < self.node_count:
            raise TopologyError(f"unknown node id {node}")


def build_tree(edges: Iterable[tuple[int, int]], node_count: int) -> RoutingTree:
    """Build a routing tree from (child, parent) edges.

    Every non-root node must appear exactly once as a child; the result must
    be acyclic and connected with node 0 as the only root.
    """
    if node_count <= 0:
        raise TopologyError("node count must be positive")
    parent: dict[int, int] = {}
    for child, par in edges:
        if not 0 <= child < node_count or not 0 <= par < node_count:
            raise TopologyError(f"edge ({child}, {par}) names an unknown node")
        if child == ROOT:
            raise TopologyError("root cannot have a parent")
        if child == par:
            raise TopologyError(f"node {child} cannot be its own parent")
        if child in parent:
            raise TopologyError(f"node {child} has two parents")
        parent[child] = par

    for node in range(1, node_count):
        if node not in parent:
            raise TopologyError(f"node {node} is disconnected (no parent)")

    # Walking up from any node must reach the root in < node_count steps.
    for node in range(1, node_count):
        cur = node
        for _ in range(node_count):
            cur = parent[cur]
            if cur == ROOT:
                break
        else:
            raise TopologyError(f"cycle detected on the path from node {node}")

    return RoutingTree(node_count=node_count, parent=parent)


def chain(node_count: int) -> RoutingTree:
    """0 <- 1 <- 2 <- ... , a worst-depth line."""
    return build_tree([(n, n - 1) for n in range(1, node_count)], node_count)


def star(node_count: int) -> RoutingTree:
    """All nodes are direct children of the root."""
    return build_tree([(n, ROOT) for n in range(1, node_count)], node_count)


def random_tree(node_count: int, max_degree: int = 8, seed: int = 1) -> RoutingTree:
    """Random recursive tree: each new node picks a parent among the nodes
    already attached, skipping parents that reached `max_degree` children.
    """
    if max_degree < 1:
        raise TopologyError("max degree must be at least 1")
    rng = random.Random(f"topology/{seed}")
    degree = {ROOT: 0}
    edges = []
    for node in range(1, node_count):
        candidates = [n for n, d in degree.items() if d < max_degree]
        par = rng.choice(candidates)
        edges.append((node, par))
        degree[par] += 1
        degree[node] = 0
    return build_tree(edges, node_count)


def parse_topology(text: str) -> RoutingTree:
    """Parse the plain-text edge format: one "child parent" pair per line,
    '#' starts a comment, node 0 is the root.
    """
    edges = []
    max_id = ROOT
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise TopologyError(f"line {lineno}: expected 'child parent'")
        try:
            child, par = int(parts[0]), int(parts[1])
        except ValueError:
            raise TopologyError(f"line {lineno}: non-integer node id") from None
        edges.append((child, par))
        max_id = max(max_id, child, par)
    return build_tree(edges, max_id + 1)


def load_topology(path: str) -> RoutingTree:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_topology(fh.read())
