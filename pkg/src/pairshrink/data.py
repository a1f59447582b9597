"""Comparison datasets, comparison graphs, and data partitioning.

A dataset is an ordered sequence of (winner, loser) index pairs over a
universe of items. From it we derive the directed win-count matrix M and
the symmetric matchup-count matrix B, test strong connectivity of the win
graph (the existence condition for the unregularized MLE), restrict to the
largest strongly connected core, split into cross-validation folds, and
detect bipartite (two-group) structure.

All types are immutable after construction and safe to share across
threads; every operation is a pure function of its inputs.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class ParseError(ValueError):
    """Malformed comparison input (carries a 1-based line number when known)."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class PartitionError(ValueError):
    """A declared two-group partition is violated by the data."""


@dataclass(frozen=True)
class ItemUniverse:
    """Ordered set of item identifiers mapped to dense indexes 0..n-1."""

    items: tuple[str, ...]
    index: dict[str, int] = field(repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        if len(set(self.items)) != len(self.items):
            raise ValueError("item identifiers must be unique")
        if len(self.items) < 2:
            raise ValueError("universe needs at least 2 items")
        object.__setattr__(self, "index", {item: i for i, item in enumerate(self.items)})

    @property
    def n(self) -> int:
        return len(self.items)


@dataclass(frozen=True)
class Dataset:
    """Ordered (winner_index, loser_index) records over an item universe."""

    universe: ItemUniverse
    records: tuple[tuple[int, int], ...]

    def __post_init__(self):
        n = self.universe.n
        for k, (w, l) in enumerate(self.records):
            if w == l:
                raise ValueError(f"record {k}: item compared with itself")
            if not (0 <= w < n and 0 <= l < n):
                raise ValueError(f"record {k}: index out of range")

    @property
    def n(self) -> int:
        return self.universe.n

    @property
    def N(self) -> int:
        return len(self.records)

    def replace_records(self, records: Iterable[tuple[int, int]]) -> "Dataset":
        """New dataset over the same universe with different records."""
        return Dataset(self.universe, tuple((int(w), int(l)) for w, l in records))

    def to_json(self) -> str:
        doc = {"items": list(self.universe.items),
               "records": [[w, l] for w, l in self.records]}
        return json.dumps(doc)

    @staticmethod
    def from_json(text: str) -> "Dataset":
        doc = json.loads(text)
        universe = ItemUniverse(tuple(str(x) for x in doc["items"]))
        records = tuple((int(w), int(l)) for w, l in doc["records"])
        return Dataset(universe, records)


@dataclass(frozen=True)
class ComparisonGraph:
    """Win counts M (M[i, j] = times i beat j) and matchup counts B = M + M^T."""

    M: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        if np.any(np.diag(self.M) != 0):
            raise ValueError("self-comparisons on the diagonal of M")
        self.M.setflags(write=False)
        self.B.setflags(write=False)

    @property
    def n(self) -> int:
        return self.M.shape[0]


@dataclass(frozen=True)
class RaschStructure:
    """Assignment of each item to one of two groups; comparisons cross groups."""

    groups: tuple[int, ...]

    def __post_init__(self):
        sizes = self.group_sizes
        if sizes[0] == 0 or sizes[1] == 0:
            raise ValueError("both groups must be non-empty")
        if any(g not in (0, 1) for g in self.groups):
            raise ValueError("group labels must be 0 or 1")

    @property
    def group_sizes(self) -> tuple[int, int]:
        ones = sum(self.groups)
        return (len(self.groups) - ones, ones)

    def members(self, group: int) -> list[int]:
        return [i for i, g in enumerate(self.groups) if g == group]


def parse_comparisons(text: str | io.TextIOBase) -> Dataset:
    """Parse a `winner,loser[,count]` CSV into a Dataset.

    Each data row expands into `count` records (default 1). The universe is
    built from all ids in first-appearance order, winner before loser.

    Raises:
        ParseError: naming the offending 1-based line number.
    """
    if isinstance(text, str):
        text = io.StringIO(text)
    reader = csv.reader(text)

    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty input, expected header winner,loser[,count]", line=1)
    header = [h.strip().lower() for h in header]
    if header not in (["winner", "loser"], ["winner", "loser", "count"]):
        raise ParseError(f"bad header {header!r}, expected winner,loser[,count]", line=1)
    has_count = len(header) == 3

    items: list[str] = []
    index: dict[str, int] = {}
    records: list[tuple[int, int]] = []

    def intern(ident: str) -> int:
        if ident not in index:
            index[ident] = len(items)
            items.append(ident)
        return index[ident]

    for lineno, row in enumerate(reader, start=2):
        if not row or all(not f.strip() for f in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=lineno)
        winner, loser = row[0].strip(), row[1].strip()
        if not winner or not loser:
            raise ParseError("missing winner or loser id", line=lineno)
        if winner == loser:
            raise ParseError(f"item {winner!r} compared with itself", line=lineno)
        count = 1
        if has_count:
            try:
                count = int(row[2])
            except ValueError:
                raise ParseError(f"count {row[2]!r} is not an integer", line=lineno)
            if count <= 0:
                raise ParseError(f"count must be positive, got {count}", line=lineno)
        w, l = intern(winner), intern(loser)
        records.extend([(w, l)] * count)

    if not items:
        raise ParseError("no comparison rows found")
    return Dataset(ItemUniverse(tuple(items)), tuple(records))


def build_graph(data: Dataset) -> ComparisonGraph:
    """Count wins into M and matchups into B = M + M^T."""
    n = data.n
    M = np.zeros((n, n), dtype=np.int64)
    if data.records:
        rec = np.asarray(data.records)
        np.add.at(M, (rec[:, 0], rec[:, 1]), 1)
    return ComparisonGraph(M=M, B=M + M.T)


def _strongly_connected_components(adj: list[list[int]]) -> list[list[int]]:
    """Tarjan's algorithm, iterative. Returns components as index lists."""
    n = len(adj)
    preorder: dict[int, int] = {}
    lowlink: dict[int, int] = {}
    on_stack = [False] * n
    stack: list[int] = []
    components: list[list[int]] = []
    counter = 0

    for root in range(n):
        if root in preorder:
            continue
        work = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                preorder[v] = lowlink[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            recurse = False
            for i in range(pi, len(adj[v])):
                w = adj[v][i]
                if w not in preorder:
                    work[-1] = (v, i + 1)
                    work.append((w, 0))
                    recurse = True
                    break
                if on_stack[w]:
                    lowlink[v] = min(lowlink[v], preorder[w])
            if recurse:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[v])
            if lowlink[v] == preorder[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                components.append(comp)
    return components


def _win_adjacency(graph: ComparisonGraph) -> list[list[int]]:
    # Edge i -> j whenever j beat i (loser to winner); strong connectivity
    # is invariant under reversing every edge, so the convention is free.
    n = graph.n
    M = graph.M
    return [[j for j in range(n) if M[j, i] > 0] for i in range(n)]


def is_strongly_connected(graph: ComparisonGraph) -> bool:
    """True iff every item is reachable from every other along chains of wins."""
    comps = _strongly_connected_components(_win_adjacency(graph))
    return len(comps) == 1


def restrict_to_largest_scc(data: Dataset) -> tuple[Dataset, list[str]]:
    """Keep only comparisons within the largest strongly connected component.

    Ties between equal-sized components break toward the one containing the
    smallest item index. Returns the restricted dataset (universe reindexed,
    preserving original order) and the list of removed item ids.

    Raises:
        ValueError: if the largest component has fewer than 2 items
            ("no estimable core").
    """
    graph = build_graph(data)
    comps = _strongly_connected_components(_win_adjacency(graph))
    best = max(comps, key=lambda c: (len(c), -min(c)))
    if len(best) < 2:
        raise ValueError("no estimable core: largest strongly connected "
                         "component has fewer than 2 items")
    keep = sorted(best)
    keep_set = set(keep)
    old_items = data.universe.items
    new_universe = ItemUniverse(tuple(old_items[i] for i in keep))
    remap = {old: new for new, old in enumerate(keep)}
    records = tuple((remap[w], remap[l]) for w, l in data.records
                    if w in keep_set and l in keep_set)
    removed = [old_items[i] for i in range(data.n) if i not in keep_set]
    return Dataset(new_universe, records), removed


def split_folds(data: Dataset, k: int, seed: int) -> list[tuple[Dataset, Dataset]]:
    """Randomly partition records into k near-equal folds, seed-deterministic.

    Returns one (train, test) pair per fold; test folds are disjoint and
    jointly cover every record.
    """
    if k < 2:
        raise ValueError(f"need k >= 2 folds, got {k}")
    if k > data.N:
        raise ValueError(f"cannot split {data.N} records into {k} folds")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(data.N)
    parts = np.array_split(perm, k)
    out = []
    for i in range(k):
        test_idx = parts[i]
        train_idx = np.concatenate([parts[j] for j in range(k) if j != i])
        out.append((data.replace_records(data.records[t] for t in train_idx),
                    data.replace_records(data.records[t] for t in test_idx)))
    return out


def detect_rasch(data: Dataset,
                 declared_partition: Sequence[int] | None = None) -> RaschStructure | None:
    """Validate a declared two-group partition, or recover one by 2-coloring.

    With a declared partition (one 0/1 label per item), every record must
    cross groups; a violation raises PartitionError naming the record.
    Without one, the undirected matchup graph is 2-colored; returns the
    bipartition if the graph is bipartite and both sides are used, else None.
    """
    n = data.n
    if declared_partition is not None:
        groups = tuple(int(g) for g in declared_partition)
        if len(groups) != n:
            raise PartitionError(f"partition labels {len(groups)} items, data has {n}")
        structure = RaschStructure(groups)
        for k, (w, l) in enumerate(data.records):
            if groups[w] == groups[l]:
                ids = data.universe.items
                raise PartitionError(
                    f"record {k} ({ids[w]!r} vs {ids[l]!r}) does not cross groups")
        return structure

    adj: list[set[int]] = [set() for _ in range(n)]
    for w, l in data.records:
        adj[w].add(l)
        adj[l].add(w)
    color = [-1] * n
    for start in range(n):
        if color[start] != -1:
            continue
        color[start] = 0
        frontier = [start]
        while frontier:
            v = frontier.pop()
            for w in adj[v]:
                if color[w] == -1:
                    color[w] = 1 - color[v]
                    frontier.append(w)
                elif color[w] == color[v]:
                    return None
    if all(c == 0 for c in color) or all(c == 1 for c in color):
        return None
    return RaschStructure(tuple(color))
