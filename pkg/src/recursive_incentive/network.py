"""Social graphs, recruitment forests and their on-disk formats.

Edge lists are whitespace-separated ``u v`` pairs, one per line, with ``#``
comments. Cascade logs are CSV files with the header
``child,parent,signup_time``; a blank parent marks a seed.
"""

from __future__ import annotations

import csv
import io
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Mapping, TextIO

from .errors import ChronologyError, ParseError, UnknownAgentError, ValidationError

AgentId = int
TaskId = int

CASCADE_HEADER = ("child", "parent", "signup_time")


@dataclass(frozen=True)
class SocialGraph:
    agents: frozenset[AgentId] = frozenset()
    edges: frozenset[tuple[AgentId, AgentId]] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "agents", frozenset(self.agents))
        object.__setattr__(self, "edges", frozenset(self.edges))
        for u, v in self.edges:
            if u == v:
                raise ValidationError(f"self-loop on agent {u}")
            if u not in self.agents or v not in self.agents:
                raise ValidationError(f"edge ({u}, {v}) references an agent outside the graph")

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[AgentId, AgentId]],
                   agents: Iterable[AgentId] = ()) -> SocialGraph:
        edges = frozenset((int(u), int(v)) for u, v in edges)
        nodes = set(agents)
        for u, v in edges:
            nodes.add(u)
            nodes.add(v)
        return cls(frozenset(nodes), edges)

    def symmetrized(self) -> SocialGraph:
        return SocialGraph(self.agents, self.edges | {(v, u) for u, v in self.edges})

    @cached_property
    def sorted_edges(self) -> tuple[tuple[AgentId, AgentId], ...]:
        """Edges in canonical order; the position of an edge is its stable id."""
        return tuple(sorted(self.edges))

    @cached_property
    def _adjacency(self) -> dict[AgentId, tuple[int, ...]]:
        adj: dict[AgentId, list[int]] = {a: [] for a in self.agents}
        for idx, (u, _) in enumerate(self.sorted_edges):
            adj[u].append(idx)
        return {a: tuple(ids) for a, ids in adj.items()}

    def out_edge_ids(self, agent: AgentId) -> tuple[int, ...]:
        if agent not in self.agents:
            raise UnknownAgentError(agent)
        return self._adjacency[agent]

    def out_neighbors(self, agent: AgentId) -> list[AgentId]:
        return [self.sorted_edges[i][1] for i in self.out_edge_ids(agent)]

    def __len__(self) -> int:
        return len(self.agents)


@dataclass(frozen=True)
class RecruitmentRecord:
    child: AgentId
    parent: AgentId | None
    signup_time: float


@dataclass(frozen=True)
class WinningSequence:
    task: TaskId
    chain: tuple[AgentId, ...]

    def __post_init__(self):
        object.__setattr__(self, "chain", tuple(self.chain))
        if not self.chain:
            raise ValidationError("winning sequence must be non-empty")
        if len(set(self.chain)) != len(self.chain):
            raise ValidationError("agents in a winning sequence must be unique")

    def __len__(self) -> int:
        return len(self.chain)

    @property
    def finder(self) -> AgentId:
        return self.chain[-1]


@dataclass(frozen=True)
class DescendantProfile:
    """Descendant counts per generation below a node, zero-terminated.

    ``counts[0]`` is the number of children, ``counts[1]`` grandchildren, and
    so on. A leaf has profile ``(0,)``.
    """

    counts: tuple[int, ...] = (0,)

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if not counts or counts[-1] != 0:
            counts = counts + (0,)
        if any(c < 0 for c in counts):
            raise ValidationError("descendant counts must be non-negative")
        seen_zero = False
        for c in counts:
            if seen_zero and c:
                raise ValidationError("a non-zero count cannot follow a zero count")
            seen_zero = seen_zero or c == 0
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return sum(self.counts)

    @property
    def discounted(self) -> Fraction:
        """Sum of ``x_i / 2**i`` with generations numbered from 1."""
        return sum((Fraction(x, 2 ** i) for i, x in enumerate(self.counts, 1)), Fraction(0))

    def __iter__(self) -> Iterator[int]:
        return iter(self.counts)

    def __len__(self) -> int:
        return len(self.counts)


class RecruitmentForest:
    """Validated, immutable set of recruitment records.

    Records are kept sorted by ``(signup_time, child)``. Roots sit at depth 1.
    """

    def __init__(self, records: Iterable[RecruitmentRecord]):
        records = list(records)
        parents: dict[AgentId, AgentId | None] = {}
        times: dict[AgentId, float] = {}
        for rec in records:
            if rec.child in parents:
                raise ValidationError(f"agent {rec.child} recruited more than once")
            if rec.signup_time < 0:
                raise ValidationError(f"negative signup time for agent {rec.child}")
            parents[rec.child] = rec.parent
            times[rec.child] = rec.signup_time
        for child, parent in parents.items():
            if parent is not None and parent not in parents:
                raise ValidationError(f"parent {parent} of agent {child} has no record")
        _check_acyclic(parents)
        for child, parent in parents.items():
            if parent is not None and not times[parent] < times[child]:
                raise ChronologyError(
                    f"agent {child} (t={times[child]}) does not sign up after "
                    f"its recruiter {parent} (t={times[parent]})")

        self._records = tuple(sorted(records, key=lambda r: (r.signup_time, r.child)))
        self._parent = parents
        self._time = times
        children: dict[AgentId, list[AgentId]] = {a: [] for a in parents}
        for rec in self._records:
            if rec.parent is not None:
                children[rec.parent].append(rec.child)
        self._children = {a: tuple(c) for a, c in children.items()}
        self._roots = tuple(r.child for r in self._records if r.parent is None)
        self._depth: dict[AgentId, int] = {}
        self._root_of: dict[AgentId, AgentId] = {}
        for root in self._roots:
            queue = deque([(root, 1)])
            while queue:
                node, d = queue.popleft()
                self._depth[node] = d
                self._root_of[node] = root
                queue.extend((c, d + 1) for c in self._children[node])

    @classmethod
    def from_parents(cls, parents: Mapping[AgentId, AgentId | None]) -> RecruitmentForest:
        """Build a forest from a child -> parent map, timing each node by its depth."""
        _check_acyclic(parents)
        depth: dict[AgentId, int] = {}

        for start in parents:
            chain = []
            node = start
            while node not in depth:
                parent = parents[node]
                if parent is None:
                    depth[node] = 0
                    break
                if parent not in parents:
                    raise ValidationError(f"parent {parent} of agent {node} has no record")
                chain.append(node)
                node = parent
            d = depth[node]
            for n in reversed(chain):
                d += 1
                depth[n] = d
        return cls(RecruitmentRecord(a, p, float(depth[a])) for a, p in parents.items())

    @property
    def records(self) -> tuple[RecruitmentRecord, ...]:
        return self._records

    @property
    def roots(self) -> tuple[AgentId, ...]:
        return self._roots

    @property
    def agents(self) -> tuple[AgentId, ...]:
        return tuple(r.child for r in self._records)

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, agent) -> bool:
        return agent in self._parent

    def __eq__(self, other) -> bool:
        if not isinstance(other, RecruitmentForest):
            return NotImplemented
        return self._records == other._records

    def __hash__(self) -> int:
        return hash(self._records)

    def __repr__(self) -> str:
        return f"RecruitmentForest(n={len(self)}, trees={len(self._roots)})"

    def _require(self, agent: AgentId) -> None:
        if agent not in self._parent:
            raise UnknownAgentError(agent)

    def parent(self, agent: AgentId) -> AgentId | None:
        self._require(agent)
        return self._parent[agent]

    def children(self, agent: AgentId) -> tuple[AgentId, ...]:
        self._require(agent)
        return self._children[agent]

    def signup_time(self, agent: AgentId) -> float:
        self._require(agent)
        return self._time[agent]

    def depth(self, agent: AgentId) -> int:
        self._require(agent)
        return self._depth[agent]

    def root_of(self, agent: AgentId) -> AgentId:
        self._require(agent)
        return self._root_of[agent]

    def is_leaf(self, agent: AgentId) -> bool:
        return not self.children(agent)

    def descendants(self, agent: AgentId) -> list[AgentId]:
        """All strict descendants in breadth-first order."""
        self._require(agent)
        out: list[AgentId] = []
        queue = deque(self._children[agent])
        while queue:
            node = queue.popleft()
            out.append(node)
            queue.extend(self._children[node])
        return out

    def subtree_size(self, agent: AgentId) -> int:
        return 1 + len(self.descendants(agent))

    def trees(self) -> dict[AgentId, list[AgentId]]:
        """Members of each tree keyed by root, root first."""
        out: dict[AgentId, list[AgentId]] = {r: [r] for r in self._roots}
        for root in self._roots:
            out[root].extend(self.descendants(root))
        return out

    def tree_sizes(self) -> dict[AgentId, int]:
        return {root: len(members) for root, members in self.trees().items()}

    def tree_depths(self) -> dict[AgentId, int]:
        out = {r: 1 for r in self._roots}
        for node, d in self._depth.items():
            root = self._root_of[node]
            out[root] = max(out[root], d)
        return out

    def restrict(self, agents: Iterable[AgentId]) -> RecruitmentForest:
        """Sub-forest on ``agents``; each kept node's parent must also be kept."""
        keep = set(agents)
        for a in keep:
            self._require(a)
            p = self._parent[a]
            if p is not None and p not in keep:
                raise ValidationError(f"agent {a} kept without its recruiter {p}")
        return RecruitmentForest(r for r in self._records if r.child in keep)


def _check_acyclic(parents: Mapping[AgentId, AgentId | None]) -> None:
    state: dict[AgentId, int] = {}
    for start in parents:
        path = []
        node = start
        while node is not None and node in parents and node not in state:
            state[node] = 1
            path.append(node)
            node = parents[node]
        if node is not None and state.get(node) == 1:
            raise ValidationError(f"recruitment cycle through agent {node}")
        for n in path:
            state[n] = 2


def path_to_root(forest: RecruitmentForest, finder: AgentId, task: TaskId) -> WinningSequence:
    """Recruitment chain from the finder's root down to the finder."""
    chain = [finder]
    node = forest.parent(finder)
    while node is not None:
        chain.append(node)
        node = forest.parent(node)
    return WinningSequence(task, tuple(reversed(chain)))


def descendant_profile(forest: RecruitmentForest, node: AgentId) -> DescendantProfile:
    counts = []
    level = list(forest.children(node))
    while level:
        counts.append(len(level))
        level = [c for n in level for c in forest.children(n)]
    counts.append(0)
    return DescendantProfile(tuple(counts))


# -- ingestion ---------------------------------------------------------------

def _lines(source: TextIO | Iterable[str] | str) -> Iterable[str]:
    if isinstance(source, str):
        return io.StringIO(source)
    return source


def load_graph(source: TextIO | Iterable[str] | str, symmetrize: bool = False) -> SocialGraph:
    """Parse an edge list. A ``str`` argument is treated as the text itself."""
    agents: set[AgentId] = set()
    edges: set[tuple[AgentId, AgentId]] = set()
    for lineno, raw in enumerate(_lines(source), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"expected 'u v', got {raw.strip()!r}", lineno)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"non-integer agent id in {raw.strip()!r}", lineno) from None
        if u < 0 or v < 0:
            raise ParseError("agent ids must be non-negative", lineno)
        if u == v:
            raise ValidationError(f"line {lineno}: self-loop on agent {u}")
        agents.update((u, v))
        edges.add((u, v))
    graph = SocialGraph(frozenset(agents), frozenset(edges))
    return graph.symmetrized() if symmetrize else graph


def read_graph(path: str | Path, symmetrize: bool = False) -> SocialGraph:
    with open(path) as fh:
        return load_graph(fh, symmetrize=symmetrize)


def dump_graph(graph: SocialGraph, stream: TextIO) -> None:
    for u, v in graph.sorted_edges:
        stream.write(f"{u} {v}\n")


def load_cascade(source: TextIO | Iterable[str] | str) -> RecruitmentForest:
    reader = csv.reader(_lines(source))
    header = next(reader, None)
    if header is None:
        return RecruitmentForest(())
    if tuple(h.strip() for h in header) != CASCADE_HEADER:
        raise ParseError(f"expected header {','.join(CASCADE_HEADER)}", 1)
    records = []
    for row in reader:
        lineno = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", lineno)
        child_s, parent_s, time_s = (c.strip() for c in row)
        try:
            child = int(child_s)
            parent = int(parent_s) if parent_s and parent_s != "-" else None
            t = float(time_s)
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        records.append(RecruitmentRecord(child, parent, t))
    return RecruitmentForest(records)


def read_cascade(path: str | Path) -> RecruitmentForest:
    with open(path, newline="") as fh:
        return load_cascade(fh)


def format_time(t: float) -> str:
    t = float(t)
    return str(int(t)) if t.is_integer() else repr(t)


def dump_cascade(forest: RecruitmentForest, stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CASCADE_HEADER)
    for rec in forest.records:
        parent = "" if rec.parent is None else str(rec.parent)
        writer.writerow((rec.child, parent, format_time(rec.signup_time)))


def cascade_to_text(forest: RecruitmentForest) -> str:
    buf = io.StringIO()
    dump_cascade(forest, buf)
    return buf.getvalue()


def write_cascade(forest: RecruitmentForest, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        dump_cascade(forest, fh)
