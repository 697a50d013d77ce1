"""Statement-granularity control flow graphs built from parsed function ASTs."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

from .model import END, START, CodeGraph, Edge, EdgeLabel, Node
from .parser import UnsupportedConstruct

log = logging.getLogger(__name__)

CONDITION_TYPES = frozenset({"IfCondition", "WhileCondition", "ForCondition"})
_TRANSPARENT = frozenset({"EmptyStatement"})

Pending = list[tuple[int, Optional[str]]]


@dataclass
class _Loop:
    header: int
    breaks: Pending = field(default_factory=list)
    continues: Pending = field(default_factory=list)


class _Builder:
    def __init__(self, graph: CodeGraph, start: int, end: int):
        self.graph = graph
        self.children = graph.ast_children()
        self.start, self.end = start, end
        self.edges: list[Edge] = []
        self.loops: list[_Loop] = []
        self.returns: Pending = []

    def connect(self, pending: Pending, dst: int) -> None:
        for src, guard in pending:
            self.edges.append(Edge(src, dst, EdgeLabel.CFG, guard))

    def kids(self, nid: int) -> list[int]:
        return self.children.get(nid, [])

    def child_of_type(self, nid: int, node_type: str) -> Optional[int]:
        for c in self.kids(nid):
            if self.graph.node(c).node_type == node_type:
                return c
        return None

    def visit(self, nid: int, pending: Pending) -> Pending:
        kind = self.graph.node(nid).node_type
        if kind == "CompoundStatement":
            for child in self.kids(nid):
                pending = self.visit(child, pending)
            return pending
        if kind in _TRANSPARENT:
            return pending
        if kind == "IfStatement":
            return self.visit_if(nid, pending)
        if kind == "WhileStatement":
            return self.visit_while(nid, pending)
        if kind == "ForStatement":
            return self.visit_for(nid, pending)
        if kind in ("BreakStatement", "ContinueStatement"):
            if not self.loops:
                raise UnsupportedConstruct(f"{kind} outside a loop")
            self.connect(pending, nid)
            loop = self.loops[-1]
            (loop.breaks if kind == "BreakStatement" else loop.continues).append((nid, None))
            return []
        if kind == "ReturnStatement":
            self.connect(pending, nid)
            self.returns.append((nid, None))
            return []
        # any other statement (declaration or expression) is a single CFG node
        self.connect(pending, nid)
        return [(nid, None)]

    def visit_if(self, nid: int, pending: Pending) -> Pending:
        cond, then, *rest = self.kids(nid)
        self.connect(pending, cond)
        out = self.visit(then, [(cond, "true")])
        if rest:
            (else_body,) = self.kids(rest[0])
            out = out + self.visit(else_body, [(cond, "false")])
        else:
            out = out + [(cond, "false")]
        return out

    def visit_while(self, nid: int, pending: Pending) -> Pending:
        cond, body = self.kids(nid)
        self.connect(pending, cond)
        loop = _Loop(cond)
        self.loops.append(loop)
        body_out = self.visit(body, [(cond, "true")])
        self.loops.pop()
        self.connect(body_out + loop.continues, cond)
        return [(cond, "false")] + loop.breaks

    def visit_for(self, nid: int, pending: Pending) -> Pending:
        kids = self.kids(nid)
        init = self.child_of_type(nid, "ForInit")
        cond = self.child_of_type(nid, "ForCondition")
        step = self.child_of_type(nid, "ForIncrement")
        body = kids[-1]
        if init is not None:
            (init_stmt,) = self.kids(init)
            self.connect(pending, init_stmt)
            pending = [(init_stmt, None)]
        self.connect(pending, cond)
        loop = _Loop(cond)
        self.loops.append(loop)
        body_out = self.visit(body, [(cond, "true")])
        self.loops.pop()
        latch = body_out + loop.continues
        if step is not None:
            (step_expr,) = self.kids(step)
            self.connect(latch, step_expr)
            self.connect([(step_expr, None)], cond)
        else:
            self.connect(latch, cond)
        return [(cond, "false")] + loop.breaks


def _reachable(start: int, edges: list[Edge]) -> set[int]:
    succ: dict[int, list[int]] = {}
    for e in edges:
        succ.setdefault(e.src, []).append(e.dst)
    seen, stack = {start}, [start]
    while stack:
        for nxt in succ.get(stack.pop(), ()):
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen


def build_cfg(ast: CodeGraph) -> CodeGraph:
    """Add synthetic START/END nodes and CFG edges to a function AST.

    Conditions get ``true``/``false`` guarded out-edges, loops get a back
    edge to their condition node, and statements unreachable from START are
    dropped from the CFG (they stay in the AST).
    """
    graph = ast.without(EdgeLabel.CFG, EdgeLabel.CDG, EdgeLabel.DDG)
    nodes = [n for n in graph.nodes if n.node_type not in (START, END)]
    next_id = max((n.id for n in nodes), default=-1) + 1
    start, end = next_id, next_id + 1
    nodes += [Node(start, START, START), Node(end, END, END)]
    graph = graph.with_nodes(nodes)

    root = graph.ast_root()
    builder = _Builder(graph, start, end)
    pending: Pending = [(start, None)]
    if root is not None:
        body = builder.child_of_type(root, "CompoundStatement")
        if body is not None:
            pending = builder.visit(body, pending)
    builder.connect(pending + builder.returns, end)

    live = _reachable(start, builder.edges)
    edges = [e for e in builder.edges if e.src in live]
    dead = sorted({e.src for e in builder.edges} - live)
    if dead:
        log.warning("%s: pruned %d unreachable statement(s) from the CFG: %s",
                    ast.function_name, len(dead), ", ".join(graph.node(d).token for d in dead))
    return graph.with_edges(edges, start_id=start, end_id=end)
