"""Relay network graphs: parsing, cut weights, min-cut and max-flow paths.

Nodes are labelled ``0..n-1``. Edges are undirected pairs ``(a, b)`` with
``a < b``. Every node carries an antenna count; the antenna-weighted
capacity of an edge is ``N_a * N_b``.
"""

from __future__ import annotations

import itertools
import re
from collections import defaultdict
from dataclasses import dataclass, field

__all__ = [
    "TopologyError",
    "NetworkTopology",
    "Path",
    "parse_topology",
    "serialize_topology",
    "two_hop_topology",
    "edge_key",
    "cut_weight",
    "min_cut",
    "min_cut_exhaustive",
    "max_flow_path_decomposition",
    "simple_paths",
    "max_path_length",
    "has_hamiltonian_complement_cycle",
]

MAX_EXHAUSTIVE_NODES = 16
MAX_HAMILTONIAN_RELAYS = 12


class TopologyError(ValueError):
    """Raised for malformed topology text or graphs violating a precondition."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def edge_key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class NetworkTopology:
    node_count: int
    antennas: dict[int, int]
    edges: frozenset[tuple[int, int]]
    sources: tuple[int, ...]
    sink: int
    full_duplex: bool = False
    _adj: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.node_count
        if n < 2:
            raise TopologyError("need at least two nodes")
        edges = frozenset(edge_key(a, b) for a, b in self.edges)
        for a, b in edges:
            if a == b:
                raise TopologyError(f"self-loop on node {a}")
            if not (0 <= a < n and 0 <= b < n):
                raise TopologyError(f"edge {a}-{b} references an unknown node")
        ants = {v: int(self.antennas.get(v, 1)) for v in range(n)}
        for v, a in self.antennas.items():
            if not 0 <= v < n:
                raise TopologyError(f"antenna entry for unknown node {v}")
            if a < 1:
                raise TopologyError(f"node {v} has {a} antennas")
        if not self.sources:
            raise TopologyError("at least one source is required")
        for s in self.sources:
            if not 0 <= s < n:
                raise TopologyError(f"unknown source node {s}")
        if not 0 <= self.sink < n:
            raise TopologyError(f"unknown sink node {self.sink}")
        if self.sink in self.sources:
            raise TopologyError("sink listed as source")
        if len(set(self.sources)) != len(self.sources):
            raise TopologyError("duplicate source label")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "antennas", ants)
        object.__setattr__(self, "sources", tuple(self.sources))
        adj = defaultdict(set)
        for a, b in edges:
            adj[a].add(b)
            adj[b].add(a)
        object.__setattr__(self, "_adj", {v: frozenset(adj[v]) for v in range(n)})

    @property
    def source(self) -> int:
        return self.sources[0]

    @property
    def relays(self) -> tuple[int, ...]:
        ends = set(self.sources) | {self.sink}
        return tuple(v for v in range(self.node_count) if v not in ends)

    def neighbors(self, v: int) -> frozenset[int]:
        return self._adj[v]

    def has_edge(self, a: int, b: int) -> bool:
        return b in self._adj[a]

    def weight(self, a: int, b: int) -> int:
        return self.antennas[a] * self.antennas[b]

    @property
    def single_antenna(self) -> bool:
        return all(v == 1 for v in self.antennas.values())

    def with_edges(self, add=(), remove=()) -> "NetworkTopology":
        edges = set(self.edges) | {edge_key(*e) for e in add}
        edges -= {edge_key(*e) for e in remove}
        return NetworkTopology(self.node_count, dict(self.antennas), frozenset(edges),
                               self.sources, self.sink, self.full_duplex)


@dataclass(frozen=True)
class Path:
    nodes: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(int(v) for v in self.nodes))
        if len(self.nodes) < 2:
            raise TopologyError("a path needs at least one hop")
        if len(set(self.nodes)) != len(self.nodes):
            raise TopologyError(f"path {self.nodes} revisits a node")

    @property
    def length(self) -> int:
        return len(self.nodes) - 1

    def __getitem__(self, j):
        return self.nodes[j]

    def __len__(self):
        return len(self.nodes)

    def hop_edges(self) -> list[tuple[int, int]]:
        """Undirected edge of every hop, hop ``j`` at index ``j - 1``."""
        return [edge_key(self.nodes[j - 1], self.nodes[j]) for j in range(1, len(self.nodes))]

    def check(self, g: NetworkTopology) -> None:
        if self.nodes[0] not in g.sources:
            raise TopologyError(f"path {self.nodes} does not start at a source")
        if self.nodes[-1] != g.sink:
            raise TopologyError(f"path {self.nodes} does not end at the sink")
        for a, b in zip(self.nodes, self.nodes[1:]):
            if not g.has_edge(a, b):
                raise TopologyError(f"path {self.nodes} uses missing edge {a}-{b}")

    def __str__(self):
        return "(" + ",".join(map(str, self.nodes)) + ")"


# -- text format -------------------------------------------------------------

_SECTION = re.compile(r"^(nodes|ant|edges|src|sink|full_duplex)\b(.*)$", re.S)


def _sections(text):
    """Yield ``(line_no, section_text)`` for every non-empty section."""
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        for part in line.split(";"):
            part = part.strip()
            if part:
                yield line_no, part


def _int(token, line, what):
    try:
        return int(token)
    except ValueError:
        raise TopologyError(f"bad {what} {token!r}", line) from None


def parse_topology(text: str) -> NetworkTopology:
    """Parse the ``nodes; ant; edges; src; sink[; full_duplex]`` format.

    Sections may share a line or sit on separate lines. Nodes without an
    ``ant`` entry default to one antenna.
    """
    n = None
    antennas = {}
    edges = set()
    sources = None
    sink = None
    full_duplex = False
    seen = {}
    pending = []
    for line, part in _sections(text):
        m = _SECTION.match(part)
        if not m:
            raise TopologyError(f"unrecognised section {part!r}", line)
        key, body = m.group(1), m.group(2).split()
        if key in seen:
            raise TopologyError(f"section {key!r} repeated", line)
        seen[key] = line
        if key == "nodes":
            if len(body) != 1:
                raise TopologyError("'nodes' takes exactly one count", line)
            n = _int(body[0], line, "node count")
        elif key == "ant":
            for tok in body:
                if ":" not in tok:
                    raise TopologyError(f"antenna entry {tok!r} is not id:N", line)
                a, c = tok.split(":", 1)
                node = _int(a, line, "node label")
                if node in antennas:
                    raise TopologyError(f"duplicate antenna entry for node {node}", line)
                antennas[node] = _int(c, line, "antenna count")
                if antennas[node] < 1:
                    raise TopologyError(f"node {node} needs at least one antenna", line)
                pending.append((node, line))
        elif key == "edges":
            for tok in body:
                if tok.count("-") != 1:
                    raise TopologyError(f"edge {tok!r} is not a-b", line)
                a, b = (_int(x, line, "node label") for x in tok.split("-"))
                if a == b:
                    raise TopologyError(f"self-loop {tok}", line)
                e = edge_key(a, b)
                if e in edges:
                    raise TopologyError(f"duplicate edge {a}-{b}", line)
                edges.add(e)
                pending.append((a, line))
                pending.append((b, line))
        elif key == "src":
            toks = ",".join(body).split(",")
            sources = tuple(_int(t, line, "source label") for t in toks if t)
            if not sources:
                raise TopologyError("'src' needs at least one label", line)
            pending.extend((s, line) for s in sources)
        elif key == "sink":
            if len(body) != 1:
                raise TopologyError("'sink' takes exactly one label", line)
            sink = _int(body[0], line, "sink label")
            pending.append((sink, line))
        elif key == "full_duplex":
            if body:
                raise TopologyError("'full_duplex' takes no arguments", line)
            full_duplex = True
    for key in ("nodes", "src", "sink"):
        if key not in seen:
            raise TopologyError(f"missing '{key}' section")
    for node, line in pending:
        if not 0 <= node < n:
            raise TopologyError(f"dangling node label {node} (nodes 0..{n - 1})", line)
    if sink in sources:
        raise TopologyError("sink listed as source", seen["sink"])
    return NetworkTopology(n, antennas, frozenset(edges), sources, sink, full_duplex)


def serialize_topology(g: NetworkTopology) -> str:
    ant = " ".join(f"{v}:{g.antennas[v]}" for v in range(g.node_count))
    edges = " ".join(f"{a}-{b}" for a, b in sorted(g.edges))
    parts = [f"nodes {g.node_count}", f"ant {ant}", f"edges {edges}",
             "src " + ",".join(map(str, g.sources)), f"sink {g.sink}"]
    if g.full_duplex:
        parts.append("full_duplex")
    return "; ".join(parts)


def two_hop_topology(K: int, relay_edges=(), antennas=None, sources=1,
                     full_duplex=False) -> NetworkTopology:
    """Parallel-relay star: sources ``0..M-1``, relays, sink last.

    With ``sources=1`` the relays are ``1..K`` and the sink is ``K+1``.
    """
    if K < 1:
        raise TopologyError("K must be at least 1")
    M = sources
    relays = range(M, M + K)
    sink = M + K
    edges = {edge_key(m, k) for m in range(M) for k in relays}
    edges |= {edge_key(k, sink) for k in relays}
    edges |= {edge_key(a, b) for a, b in relay_edges}
    return NetworkTopology(M + K + 1, dict(antennas or {}), frozenset(edges),
                           tuple(range(M)), sink, full_duplex)


# -- cuts ---------------------------------------------------------------------

def _check_cut(g, members):
    s = frozenset(members)
    if not set(g.sources) <= s:
        raise TopologyError("cut-set must contain every source")
    if g.sink in s:
        raise TopologyError("cut-set must not contain the sink")
    return s


def cut_weight(g: NetworkTopology, members) -> int:
    """Sum of ``N_a * N_b`` over edges with exactly one end in ``members``."""
    s = _check_cut(g, members)
    return sum(g.weight(a, b) for a, b in g.edges if (a in s) != (b in s))


def min_cut_exhaustive(g: NetworkTopology) -> tuple[int, frozenset[int]]:
    """Minimum cut by enumerating every valid cut-set (|V| <= 16)."""
    if g.node_count > MAX_EXHAUSTIVE_NODES:
        raise TopologyError(f"exhaustive cut enumeration limited to {MAX_EXHAUSTIVE_NODES} nodes")
    free = [v for v in range(g.node_count) if v not in g.sources and v != g.sink]
    best = None
    for k in range(len(free) + 1):
        for extra in itertools.combinations(free, k):
            s = frozenset(g.sources) | frozenset(extra)
            w = cut_weight(g, s)
            if best is None or w < best[0]:
                best = (w, s)
    return best


def _max_flow(g):
    """Integral max flow with unit augmentations along DFS paths.

    Each undirected edge has capacity ``N_a * N_b`` in both directions;
    sources are tied to a virtual super-source. Neighbours are explored in
    ascending label order so the result is deterministic.
    """
    n = g.node_count
    sup = n
    cap = defaultdict(int)
    adj = defaultdict(set)
    for a, b in g.edges:
        w = g.weight(a, b)
        cap[a, b] += w
        cap[b, a] += w
        adj[a].add(b)
        adj[b].add(a)
    big = sum(g.weight(a, b) for a, b in g.edges) + 1
    for s in g.sources:
        cap[sup, s] = big
        adj[sup].add(s)
        adj[s].add(sup)
    order = {v: sorted(adj[v]) for v in list(adj)}
    flow = defaultdict(int)

    def augment():
        parent = {sup: None}
        stack = [(sup, iter(order.get(sup, ())))]
        while stack:
            v, it = stack[-1]
            for u in it:
                if u not in parent and cap[v, u] - flow[v, u] > 0:
                    parent[u] = v
                    if u == g.sink:
                        return parent
                    stack.append((u, iter(order.get(u, ()))))
                    break
            else:
                stack.pop()
        return None

    value = 0
    while True:
        parent = augment()
        if parent is None:
            break
        v = g.sink
        while parent[v] is not None:
            u = parent[v]
            flow[u, v] += 1
            flow[v, u] -= 1
            v = u
        value += 1
    # residual reachability gives the minimum cut witness
    seen = {sup}
    stack = [sup]
    while stack:
        v = stack.pop()
        for u in order.get(v, ()):
            if u not in seen and cap[v, u] - flow[v, u] > 0:
                seen.add(u)
                stack.append(u)
    witness = frozenset(v for v in seen if v != sup)
    net = {(a, b): f for (a, b), f in flow.items() if f > 0 and a != sup and b != sup}
    return value, witness, net


def min_cut(g: NetworkTopology) -> tuple[int, frozenset[int]]:
    """Minimum antenna-weighted cut via max flow, with a witness cut-set."""
    value, witness, _ = _max_flow(g)
    return value, witness


def max_flow_path_decomposition(g: NetworkTopology) -> list[Path]:
    """Split an integral maximum flow into ``min_cut`` source-sink paths.

    Every edge carries at most ``N_a * N_b`` of the returned paths; with
    single antennas the paths are edge-disjoint.
    """
    value, _, net = _max_flow(g)
    if value == 0:
        raise TopologyError("source and sink are disconnected")
    rest = dict(net)
    paths = []
    for _ in range(value):
        # follow positive flow from any source; DFS avoids flow cycles
        found = None
        for s in sorted(g.sources):
            parent = {s: None}
            stack = [s]
            while stack and found is None:
                v = stack.pop()
                for u in sorted((b for (a, b), f in rest.items() if a == v and f > 0), reverse=True):
                    if u in parent:
                        continue
                    parent[u] = v
                    if u == g.sink:
                        found = parent
                        break
                    stack.append(u)
            if found is not None:
                break
        if found is None:  # pragma: no cover - flow conservation guarantees a path
            raise RuntimeError("flow decomposition lost a unit of flow")
        nodes = [g.sink]
        while found[nodes[-1]] is not None:
            nodes.append(found[nodes[-1]])
        nodes.reverse()
        for a, b in zip(nodes, nodes[1:]):
            rest[a, b] -= 1
        paths.append(Path(tuple(nodes)))
    return sorted(paths, key=lambda p: p.nodes)


def simple_paths(g: NetworkTopology, limit: int | None = None):
    """Yield every simple source-to-sink path in lexicographic order."""
    count = 0
    for s in sorted(g.sources):
        stack = [(s, [s], iter(sorted(g.neighbors(s))))]
        on_path = {s}
        while stack:
            v, nodes, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                on_path.discard(v)
                continue
            if nxt in on_path or nxt in g.sources:
                continue
            if nxt == g.sink:
                yield Path(tuple(nodes + [nxt]))
                count += 1
                if limit is not None and count >= limit:
                    return
                continue
            on_path.add(nxt)
            stack.append((nxt, nodes + [nxt], iter(sorted(g.neighbors(nxt)))))


def max_path_length(g: NetworkTopology) -> int:
    """Length of the longest simple source-to-sink path (exhaustive search)."""
    if g.node_count > MAX_EXHAUSTIVE_NODES:
        raise TopologyError(f"path enumeration limited to {MAX_EXHAUSTIVE_NODES} nodes")
    best = 0
    for p in simple_paths(g):
        best = max(best, p.length)
    if best == 0:
        raise TopologyError("source and sink are disconnected")
    return best


def has_hamiltonian_complement_cycle(g: NetworkTopology):
    """Look for a Hamiltonian cycle in the complement of the relay subgraph.

    Returns ``(True, ordering)`` with the lexicographically smallest relay
    ordering that starts at the lowest relay, or ``(False, None)``. With two
    relays the single complement edge counts as a cycle; a lone relay is
    trivially ordered.
    """
    relays = list(g.relays)
    K = len(relays)
    if K > MAX_HAMILTONIAN_RELAYS:
        raise TopologyError(f"Hamiltonian search limited to {MAX_HAMILTONIAN_RELAYS} relays")
    if K == 0:
        return False, None
    if K == 1:
        return True, (relays[0],)
    comp = [[a != b and not g.has_edge(relays[a], relays[b]) for b in range(K)] for a in range(K)]
    if K == 2:
        return (True, tuple(relays)) if comp[0][1] else (False, None)
    full = (1 << K) - 1
    # done[mask][v]: a path through the unvisited nodes (~mask) can start at v's
    # successor and end next to relay 0
    memo = {}

    def can_finish(mask, v):
        if mask == full:
            return comp[v][0]
        key = (mask, v)
        if key not in memo:
            memo[key] = any(comp[v][u] and can_finish(mask | (1 << u), u)
                            for u in range(K) if not mask & (1 << u))
        return memo[key]

    if not can_finish(1, 0):
        return False, None
    order = [0]
    mask, v = 1, 0
    while mask != full:
        for u in range(K):
            if not mask & (1 << u) and comp[v][u] and can_finish(mask | (1 << u), u):
                order.append(u)
                mask |= 1 << u
                v = u
                break
    return True, tuple(relays[i] for i in order)
