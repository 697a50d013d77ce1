"""Program dependence graphs: control dependence via post-dominators, data
dependence via reaching definitions."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .model import CodeGraph, Edge, EdgeLabel


class PostDominanceFailure(Exception):
    """END is unreachable from some CFG node."""


@dataclass(frozen=True)
class DefUse:
    defs: frozenset[str]
    kills: frozenset[str]  # strong definitions; element/pointer writes do not kill
    uses: frozenset[str]


_NO_DEFUSE = DefUse(frozenset(), frozenset(), frozenset())
_UPDATE_TYPES = {"UnaryExpr:PreIncrement", "UnaryExpr:PreDecrement", "PostfixExpr:Increment", "PostfixExpr:Decrement"}


def _lvalue_base(graph: CodeGraph, children, nid: int) -> tuple[int | None, bool]:
    """Identifier written by an lvalue expression and whether the write is total."""
    node = graph.node(nid)
    if node.node_type == "Identifier":
        return nid, True
    if node.node_type in ("ArrayIndexing", "UnaryExpr:Deref") and children.get(nid):
        base, _ = _lvalue_base(graph, children, children[nid][0])
        return base, False
    return None, False


def statement_def_use(graph: CodeGraph, nid: int) -> DefUse:
    """Variables defined, killed and used by the CFG node ``nid``.

    Assignment targets and declarators define; calls define nothing; every
    other identifier occurrence is a use.
    """
    children = graph.ast_children()
    defs, kills, uses = set(), set(), set()
    def_sites: set[int] = set()

    for cur in graph.subtree(nid):
        node = graph.node(cur)
        kids = children.get(cur, [])
        if node.node_type.startswith("AssignmentExpr") and kids:
            target, total = _lvalue_base(graph, children, kids[0])
            if target is not None:
                name = graph.node(target).token
                defs.add(name)
                if total:
                    kills.add(name)
                if node.node_type != "AssignmentExpr":
                    uses.add(name)  # compound assignment reads its target
                def_sites.add(target)
        elif node.node_type in _UPDATE_TYPES and kids:
            target, total = _lvalue_base(graph, children, kids[0])
            if target is not None:
                name = graph.node(target).token
                defs.add(name)
                uses.add(name)
                if total:
                    kills.add(name)
                def_sites.add(target)
        elif node.node_type == "Declarator" and kids and graph.node(kids[0]).node_type == "Identifier":
            name = graph.node(kids[0]).token
            defs.add(name)
            kills.add(name)
            def_sites.add(kids[0])

    for cur in graph.subtree(nid):
        node = graph.node(cur)
        if node.node_type == "Identifier" and cur not in def_sites:
            uses.add(node.token)
    return DefUse(frozenset(defs), frozenset(kills), frozenset(uses))


def parameter_names(graph: CodeGraph) -> frozenset[str]:
    children = graph.ast_children()
    names = set()
    for n in graph.nodes:
        if n.node_type == "Parameter":
            for c in children.get(n.id, []):
                if graph.node(c).node_type == "Identifier":
                    names.add(graph.node(c).token)
    return frozenset(names)


def def_use_table(graph: CodeGraph) -> dict[int, DefUse]:
    """Def/use sets for every CFG node; START defines the parameters."""
    table = {}
    for nid in graph.cfg_nodes():
        if nid == graph.start_id:
            params = parameter_names(graph)
            table[nid] = DefUse(params, params, frozenset())
        elif nid == graph.end_id:
            table[nid] = _NO_DEFUSE
        else:
            table[nid] = statement_def_use(graph, nid)
    return table


# ---------------------------------------------------------------------------
# Dominators (Cooper, Harvey & Kennedy iterative scheme)

def _postorder(succ: Mapping[int, Sequence[int]], root: int) -> list[int]:
    order, seen = [], {root}
    stack = [(root, iter(succ.get(root, ())))]
    while stack:
        node, it = stack[-1]
        for nxt in it:
            if nxt not in seen:
                seen.add(nxt)
                stack.append((nxt, iter(succ.get(nxt, ()))))
                break
        else:
            stack.pop()
            order.append(node)
    return order


def immediate_dominators(succ: Mapping[int, Sequence[int]], root: int) -> dict[int, int]:
    """Immediate dominator of every node reachable from ``root`` (root maps to itself)."""
    order = _postorder(succ, root)
    rank = {n: i for i, n in enumerate(order)}
    pred: dict[int, list[int]] = {n: [] for n in order}
    for n in order:
        for s in succ.get(n, ()):
            if s in pred:
                pred[s].append(n)

    idom = {root: root}

    def intersect(a: int, b: int) -> int:
        while a != b:
            while rank[a] < rank[b]:
                a = idom[a]
            while rank[b] < rank[a]:
                b = idom[b]
        return a

    changed = True
    while changed:
        changed = False
        for n in reversed(order):
            if n == root:
                continue
            done = [p for p in pred[n] if p in idom]
            new = done[0]
            for p in done[1:]:
                new = intersect(p, new)
            if idom.get(n) != new:
                idom[n] = new
                changed = True
    return idom


def immediate_post_dominators(graph: CodeGraph) -> dict[int, int]:
    """Post-dominator tree over the CFG augmented with a START->END edge."""
    rev: dict[int, list[int]] = {}
    for e in graph.edges_with(EdgeLabel.CFG):
        rev.setdefault(e.dst, []).append(e.src)
    rev.setdefault(graph.end_id, []).append(graph.start_id)
    ipdom = immediate_dominators(rev, graph.end_id)
    missing = graph.cfg_nodes() - ipdom.keys()
    if missing:
        raise PostDominanceFailure(
            f"{graph.function_name}: END unreachable from node(s) {sorted(missing)}")
    return ipdom


def control_dependences(graph: CodeGraph) -> list[Edge]:
    ipdom = immediate_post_dominators(graph)
    cfg_edges = list(graph.edges_with(EdgeLabel.CFG)) + [Edge(graph.start_id, graph.end_id, EdgeLabel.CFG)]
    seen: set[tuple[int, int]] = set()
    out = []
    for e in cfg_edges:
        # b is control dependent on a for every node on the post-dominator
        # tree path from b up to (excluding) ipdom(a)
        stop = ipdom[e.src]
        cur = e.dst
        while cur != stop and cur != graph.end_id:
            if cur != e.src and (e.src, cur) not in seen:
                seen.add((e.src, cur))
                out.append(Edge(e.src, cur, EdgeLabel.CDG, e.guard))
            cur = ipdom[cur]
    return out


# ---------------------------------------------------------------------------
# Reaching definitions

def reaching_definitions(graph: CodeGraph, table: Mapping[int, DefUse]) -> dict[int, frozenset[tuple[int, str]]]:
    """(definition site, variable) pairs live on entry to each CFG node."""
    succ = graph.successors(EdgeLabel.CFG)
    pred = graph.predecessors(EdgeLabel.CFG)
    nodes = sorted(table)
    gen = {n: {(n, v) for v in table[n].defs} for n in nodes}
    entry: dict[int, set] = {n: set() for n in nodes}
    exit_: dict[int, set] = {n: set(gen[n]) for n in nodes}
    work = list(nodes)
    while work:
        n = work.pop()
        new_in = set().union(*(exit_[p] for p in pred.get(n, ()))) if pred.get(n) else set()
        entry[n] = new_in
        kills = table[n].kills
        new_out = gen[n] | {d for d in new_in if d[1] not in kills}
        if new_out != exit_[n]:
            exit_[n] = new_out
            work.extend(succ.get(n, ()))
    return {n: frozenset(entry[n]) for n in nodes}


def data_dependences(graph: CodeGraph, table: Mapping[int, DefUse] | None = None) -> list[Edge]:
    table = table if table is not None else def_use_table(graph)
    reach = reaching_definitions(graph, table)
    pairs = set()
    for n, defs in reach.items():
        for site, var in defs:
            if var in table[n].uses:
                pairs.add((site, n))
    return [Edge(s, d, EdgeLabel.DDG) for s, d in sorted(pairs)]


def build_pdg(cfg: CodeGraph, ast: CodeGraph | None = None) -> CodeGraph:
    """Add CDG and DDG edges to a graph that already carries its CFG.

    ``ast`` defaults to ``cfg`` itself, since CFG graphs built here keep
    their AST edges.
    """
    if cfg.start_id is None or cfg.end_id is None:
        raise PostDominanceFailure(f"{cfg.function_name}: graph has no START/END")
    graph = cfg.without(EdgeLabel.CDG, EdgeLabel.DDG)
    source = graph if ast is None else _merge_ast(graph, ast)
    cdg = control_dependences(source)
    ddg = data_dependences(source)
    return graph.with_edges(cdg + ddg)


def _merge_ast(cfg: CodeGraph, ast: CodeGraph) -> CodeGraph:
    if any(e.label == EdgeLabel.AST for e in cfg.edges):
        return cfg
    return cfg.with_edges(ast.edges_with(EdgeLabel.AST))


def dependence_edges(graph: CodeGraph) -> Iterable[Edge]:
    return graph.edges_with(EdgeLabel.CDG, EdgeLabel.DDG)
