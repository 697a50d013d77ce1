"""Typed program graphs shared by the AST, CFG and PDG builders."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Iterator, Optional, Sequence


class EdgeLabel(str, Enum):
    AST = "AST"
    CFG = "CFG"
    CDG = "CDG"
    DDG = "DDG"


START = "START"
END = "END"


@dataclass(frozen=True)
class Node:
    id: int
    node_type: str
    token: str = ""
    leaf_index: Optional[int] = None

    @property
    def is_terminal(self) -> bool:
        return self.leaf_index is not None


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    label: EdgeLabel
    guard: Optional[str] = None


@dataclass(frozen=True)
class CodeGraph:
    """One function's nodes plus every edge layer built for it so far.

    Nodes are stored in id order. AST edges are kept in child order, which
    is what makes the AST an *ordered* tree.
    """

    function_name: str
    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...] = ()
    start_id: Optional[int] = None
    end_id: Optional[int] = None
    _index: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        index = {n.id: n for n in self.nodes}
        if len(index) != len(self.nodes):
            raise ValueError(f"duplicate node ids in graph {self.function_name!r}")
        object.__setattr__(self, "_index", index)

    def node(self, node_id: int) -> Node:
        return self._index[node_id]

    def __contains__(self, node_id: int) -> bool:
        return node_id in self._index

    def edges_with(self, *labels: EdgeLabel) -> Iterator[Edge]:
        wanted = set(labels)
        return (e for e in self.edges if e.label in wanted)

    def successors(self, label: EdgeLabel) -> dict[int, list[int]]:
        """Ordered, de-duplicated successor lists for one edge layer."""
        succ: dict[int, list[int]] = defaultdict(list)
        for e in self.edges:
            if e.label == label and e.dst not in succ[e.src]:
                succ[e.src].append(e.dst)
        return succ

    def predecessors(self, label: EdgeLabel) -> dict[int, list[int]]:
        pred: dict[int, list[int]] = defaultdict(list)
        for e in self.edges:
            if e.label == label and e.src not in pred[e.dst]:
                pred[e.dst].append(e.src)
        return pred

    # -- AST helpers -------------------------------------------------------

    def ast_children(self) -> dict[int, list[int]]:
        return self.successors(EdgeLabel.AST)

    def ast_parent(self) -> dict[int, int]:
        return {e.dst: e.src for e in self.edges if e.label == EdgeLabel.AST}

    def ast_root(self) -> Optional[int]:
        parent = self.ast_parent()
        roots = [n.id for n in self.nodes if n.id not in parent and n.node_type not in (START, END)]
        return roots[0] if roots else None

    def terminals(self) -> list[Node]:
        return sorted((n for n in self.nodes if n.leaf_index is not None), key=lambda n: n.leaf_index)

    def subtree(self, root: int) -> list[int]:
        """Pre-order ids of the AST subtree under ``root``."""
        children = self.ast_children()
        out, stack = [], [root]
        while stack:
            nid = stack.pop()
            out.append(nid)
            stack.extend(reversed(children.get(nid, ())))
        return out

    # -- CFG helpers -------------------------------------------------------

    def cfg_nodes(self) -> set[int]:
        ids = set()
        for e in self.edges_with(EdgeLabel.CFG):
            ids.add(e.src)
            ids.add(e.dst)
        return ids

    def with_edges(self, edges: Iterable[Edge], **changes) -> "CodeGraph":
        return replace(self, edges=tuple(self.edges) + tuple(edges), **changes)

    def with_nodes(self, nodes: Sequence[Node]) -> "CodeGraph":
        return replace(self, nodes=tuple(nodes))

    def without(self, *labels: EdgeLabel) -> "CodeGraph":
        drop = set(labels)
        return replace(self, edges=tuple(e for e in self.edges if e.label not in drop))
