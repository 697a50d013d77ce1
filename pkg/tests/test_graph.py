from __future__ import annotations

import warnings
from collections import Counter

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from multirep.graph import (
    END, START, CodeGraph, CSyntaxError, Edge, EdgeLabel, MissingLabelError, Node, DotParseError,
    UnsupportedConstruct, build_cfg, build_pdg, export_dot, import_dot, parse_c,
)
from multirep.graph.pdg import immediate_post_dominators

import oracles
from cgen import random_function


def _cfg(src: str) -> CodeGraph:
    (ast,) = parse_c(src)
    return build_cfg(ast)


def _by_token(graph: CodeGraph, token: str) -> int:
    (nid,) = [n.id for n in graph.nodes if n.token == token and n.id in graph.cfg_nodes()]
    return nid


# ---------------------------------------------------------------------------
# parser

def test_assignment_subtree_has_identifier_and_bool_terminals(loop_source):
    (ast,) = parse_c(loop_source)
    assert ast.function_name == "randomFunction"
    children = ast.ast_children()
    (assign,) = [n for n in ast.nodes if n.node_type == "AssignmentExpr"]
    kids = [ast.node(c) for c in children[assign.id]]
    assert [(k.node_type, k.token) for k in kids] == [("Identifier", "flag"), ("BoolLiteral", "true")]
    assert all(k.leaf_index is not None for k in kids)


def test_empty_function_has_only_header_terminals():
    (ast,) = parse_c("void f(){}")
    assert [(t.node_type, t.token) for t in ast.terminals()] == [("TypeName", "void"), ("FunctionName", "f")]
    body = [n for n in ast.nodes if n.node_type == "CompoundStatement"]
    assert len(body) == 1 and not ast.ast_children().get(body[0].id)


def _token_walk_terminals(src: str) -> list[str]:
    """Hand-built operand list for the body of ``g``: declared names and
    expression operands, excluding type keywords."""
    body = src[src.index("{") + 1:src.rindex("}")]
    words = body.replace(";", " ; ").replace("=", " ").replace("+", " ").split()
    return [w for w in words if w not in (";", "int")]


def test_expression_terminal_count_matches_token_walk():
    src = "void g(){int x; x = 1 + 2;}"
    (ast,) = parse_c(src)
    body_terms = [t for t in ast.terminals() if t.node_type not in ("TypeName", "FunctionName")]
    assert [t.token for t in body_terms] == _token_walk_terminals(src) == ["x", "x", "1", "2"]


def test_leaf_indices_are_consecutive_left_to_right():
    for seed in range(30):
        (ast,) = parse_c(random_function(seed))
        leaves = sorted(ast.terminals(), key=lambda n: n.leaf_index)
        assert [n.leaf_index for n in leaves] == list(range(len(leaves)))
        order = [n for n in ast.subtree(ast.ast_root()) if ast.node(n).leaf_index is not None]
        assert order == [n.id for n in leaves]


def test_ast_is_a_rooted_tree():
    for seed in range(30):
        (ast,) = parse_c(random_function(seed))
        g = nx.DiGraph([(e.src, e.dst) for e in ast.edges_with(EdgeLabel.AST)])
        assert nx.is_arborescence(g)


@pytest.mark.parametrize("src, construct", [
    ("void f(){ goto end; }", "goto"),
    ("void f(int x){ switch (x) { } }", "switch"),
])
def test_unsupported_constructs(src, construct):
    with pytest.raises(UnsupportedConstruct) as info:
        parse_c(src)
    assert info.value.construct == construct


def test_syntax_error_reports_position():
    with pytest.raises(CSyntaxError) as info:
        parse_c("void f(){ x = ; }")
    assert info.value.line == 1 and info.value.column > 0


def test_preprocessor_lines_are_ignored():
    (ast,) = parse_c("#include <stdio.h>\n#define N 10\nint main(){ return 0; }")
    assert ast.function_name == "main"


def test_multiple_functions():
    graphs = parse_c("int a(){return 1;}\nint b(int x){return x;}")
    assert [g.function_name for g in graphs] == ["a", "b"]


# ---------------------------------------------------------------------------
# CFG

def test_loop_cfg_edges(loop_source):
    cfg = _cfg(loop_source)
    w, i, a = _by_token(cfg, "while (!flag)"), _by_token(cfg, "if (rand() % 2 == 0)"), _by_token(cfg, "flag = true")
    edges = {(e.src, e.dst): e.guard for e in cfg.edges_with(EdgeLabel.CFG)}
    assert edges[(w, i)] == "true"
    assert edges[(i, a)] == "true"
    assert (a, w) in edges
    assert edges[(w, cfg.end_id)] == "false"
    assert edges[(i, w)] == "false"


def test_straight_line_cfg():
    cfg = _cfg("void f(){ x = 1; y = 2; }")
    edges = [(cfg.node(e.src).token, cfg.node(e.dst).token) for e in cfg.edges_with(EdgeLabel.CFG)]
    assert edges == [(START, "x = 1"), ("x = 1", "y = 2"), ("y = 2", END)]


def _executions(cfg: CodeGraph) -> list[list[int]]:
    """All START-to-END executions of an acyclic CFG, by walking every branch."""
    succ = cfg.successors(EdgeLabel.CFG)
    out, stack = [], [[cfg.start_id]]
    while stack:
        walk = stack.pop()
        if walk[-1] == cfg.end_id:
            out.append(walk)
        stack.extend(walk + [n] for n in succ.get(walk[-1], []))
    return out


def test_if_else_diamond():
    cfg = _cfg("void f(int c){ if (c) { x = 1; } else { x = 2; } y = x; }")
    runs = _executions(cfg)
    assert len(runs) == 2
    walked = {(a, b) for run in runs for a, b in zip(run, run[1:])}
    assert len(walked) == 6 == len(list(cfg.edges_with(EdgeLabel.CFG)))
    guards = sorted(e.guard for e in cfg.edges_with(EdgeLabel.CFG) if e.guard)
    assert guards == ["false", "true"]


def test_break_and_continue_targets():
    cfg = _cfg("void f(int n){ int i; for (i = 0; i < n; i++) { if (i == 3) { break; } if (i == 1) { continue; } g(i); } h(); }")
    tok = lambda t: _by_token(cfg, t)
    succ = cfg.successors(EdgeLabel.CFG)
    assert succ[tok("break")] == [tok("h()")]
    assert succ[tok("continue")] == [tok("i++")]
    assert succ[tok("i++")] == [tok("for (i < n)")]


def test_unreachable_statements_are_pruned(caplog):
    cfg = _cfg("int f(){ return 1; x = 2; }")
    assert "x = 2" not in {cfg.node(n).token for n in cfg.cfg_nodes()}
    assert "unreachable" in caplog.text


def test_every_cfg_node_lies_on_a_start_end_walk():
    for seed in range(40):
        cfg = _cfg(random_function(seed))
        g = nx.DiGraph([(e.src, e.dst) for e in cfg.edges_with(EdgeLabel.CFG)])
        reach = nx.descendants(g, cfg.start_id) | {cfg.start_id}
        coreach = nx.ancestors(g, cfg.end_id) | {cfg.end_id}
        assert set(g.nodes) <= reach & coreach
        assert g.in_degree(cfg.start_id) == 0 and g.out_degree(cfg.end_id) == 0


# ---------------------------------------------------------------------------
# PDG

def test_loop_pdg_has_flag_dependence(loop_source):
    pdg = build_pdg(_cfg(loop_source))
    ddg = {(pdg.node(e.src).token, pdg.node(e.dst).token) for e in pdg.edges_with(EdgeLabel.DDG)}
    assert ("flag = true", "while (!flag)") in ddg


def test_single_statement_pdg():
    pdg = build_pdg(_cfg("void f(){ x = 1; }"))
    assert not list(pdg.edges_with(EdgeLabel.DDG))
    cdg = [(pdg.node(e.src).token, pdg.node(e.dst).token) for e in pdg.edges_with(EdgeLabel.CDG)]
    assert cdg == [(START, "x = 1")]


def test_redefinition_kills_earlier_definition():
    cfg = _cfg("void f(){ x = 1; y = x; x = 2; z = x; }")
    pdg = build_pdg(cfg)
    got = {(pdg.node(e.src).token, pdg.node(e.dst).token) for e in pdg.edges_with(EdgeLabel.DDG)}
    assert got == {("x = 1", "y = x"), ("x = 2", "z = x")}
    assert {(e.src, e.dst) for e in pdg.edges_with(EdgeLabel.DDG)} == oracles.reaching_pairs(cfg)


def test_array_writes_do_not_kill():
    pdg = build_pdg(_cfg("void f(){ int a[3]; a[0] = 1; a[1] = 2; g(a); }"))
    got = {(pdg.node(e.src).token, pdg.node(e.dst).token) for e in pdg.edges_with(EdgeLabel.DDG)}
    assert ("a[0] = 1", "g(a)") in got and ("a[1] = 2", "g(a)") in got


def test_parameters_are_defined_at_start():
    pdg = build_pdg(_cfg("int f(int n){ return n; }"))
    got = [(pdg.node(e.src).token, pdg.node(e.dst).token) for e in pdg.edges_with(EdgeLabel.DDG)]
    assert got == [(START, "return n")]


def test_ddg_matches_kill_test_oracle_on_random_programs():
    for seed in range(60):
        cfg = _cfg(random_function(seed))
        pdg = build_pdg(cfg)
        assert {(e.src, e.dst) for e in pdg.edges_with(EdgeLabel.DDG)} == oracles.reaching_pairs(cfg), seed


def test_post_dominators_match_networkx():
    for seed in range(40):
        cfg = _cfg(random_function(seed))
        rev = nx.DiGraph([(e.dst, e.src) for e in cfg.edges_with(EdgeLabel.CFG)])
        rev.add_edge(cfg.end_id, cfg.start_id)
        expected = nx.immediate_dominators(rev, cfg.end_id)
        got = immediate_post_dominators(cfg)
        assert {n: got[n] for n in expected} == expected


def _control_dependence_oracle(cfg: CodeGraph) -> set[tuple[int, int]]:
    """b depends on a when some successor of a is post-dominated by b while a is not
    strictly post-dominated by b (definition-level check using networkx)."""
    rev = nx.DiGraph([(e.dst, e.src) for e in cfg.edges_with(EdgeLabel.CFG)])
    rev.add_edge(cfg.end_id, cfg.start_id)
    ipdom = nx.immediate_dominators(rev, cfg.end_id)

    def pdoms(n):
        out = {n}
        while ipdom[n] != n:
            n = ipdom[n]
            out.add(n)
        return out

    succ = cfg.successors(EdgeLabel.CFG)
    succ.setdefault(cfg.start_id, []).append(cfg.end_id)
    pairs = set()
    for a, outs in succ.items():
        strict = pdoms(a) - {a}
        for s in outs:
            for b in pdoms(s):
                if b not in strict and b != a and b != cfg.end_id:
                    pairs.add((a, b))
    return pairs


def test_cdg_matches_definition():
    for seed in range(40):
        cfg = _cfg(random_function(seed))
        pdg = build_pdg(cfg)
        assert {(e.src, e.dst) for e in pdg.edges_with(EdgeLabel.CDG)} == _control_dependence_oracle(cfg)


def test_pdg_nodes_are_cfg_nodes():
    for seed in range(20):
        pdg = build_pdg(_cfg(random_function(seed)))
        dep = {n for e in pdg.edges_with(EdgeLabel.CDG, EdgeLabel.DDG) for n in (e.src, e.dst)}
        assert dep <= pdg.cfg_nodes()


def test_straight_line_statements_depend_only_on_entry():
    pdg = build_pdg(_cfg("void f(){ a = 1; b = 2; c = 3; }"))
    assert {pdg.node(e.src).node_type for e in pdg.edges_with(EdgeLabel.CDG)} == {START}


# ---------------------------------------------------------------------------
# DOT

def _signature(g: CodeGraph):
    nodes = Counter((n.node_type, n.token, n.leaf_index) for n in g.nodes)
    edges = Counter((g.node(e.src).node_type, g.node(e.src).token, g.node(e.dst).node_type, g.node(e.dst).token,
                     e.label, e.guard) for e in g.edges)
    return nodes, edges


def _isomorphic(a: CodeGraph, b: CodeGraph) -> bool:
    def nxg(g):
        out = nx.MultiDiGraph()
        for n in g.nodes:
            out.add_node(n.id, key=(n.node_type, n.token, n.leaf_index))
        for e in g.edges:
            out.add_edge(e.src, e.dst, key=None, sig=(e.label.value, e.guard or ""))
        return out
    return nx.is_isomorphic(nxg(a), nxg(b), node_match=lambda x, y: x["key"] == y["key"],
                            edge_match=lambda x, y: sorted(d["sig"] for d in x.values())
                            == sorted(d["sig"] for d in y.values()))


def test_dot_import_of_exported_ast_is_isomorphic(loop_source):
    (ast,) = parse_c(loop_source)
    (back,) = import_dot([export_dot(ast)])
    assert back.function_name == "randomFunction"
    assert _isomorphic(ast, back)


def test_dot_round_trip_of_full_pdg(loop_source):
    pdg = build_pdg(_cfg(loop_source))
    (back,) = import_dot([export_dot(pdg)])
    assert _isomorphic(pdg, back)
    assert (back.start_id, back.end_id) == (pdg.start_id, pdg.end_id)


def test_empty_digraph_warns():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        assert import_dot(["digraph empty { }"]) == []
    assert caught


def test_single_node_export():
    g = CodeGraph("one", (Node(0, "Identifier", "x", 0),))
    text = export_dot(g)
    assert 'label="(Identifier,x)"' in text
    assert text.count("[") == 1


def test_comma_token_survives_round_trip():
    g = CodeGraph("f", (Node(0, "CallExpr", "f(a, b)"), Node(1, "StringLiteral", '"q\\"x"\n', 0)),
                  (Edge(0, 1, EdgeLabel.AST),))
    (back,) = import_dot([export_dot(g)])
    assert [n.token for n in back.nodes] == ["f(a, b)", '"q\\"x"\n']


def test_missing_label_reports_line():
    with pytest.raises(MissingLabelError) as info:
        import_dot([("bad.dot", 'digraph f {\n  0 [label="(A,x)"];\n  1 [shape=box];\n}')])
    assert info.value.line == 3 and info.value.source == "bad.dot"


def test_bad_edge_label_is_parse_error():
    with pytest.raises(DotParseError):
        import_dot(['digraph f { 0 [label="(A,x)"]; 1 [label="(B,y)"]; 0 -> 1 [label="XYZ"]; }'])


def test_start_end_synthesized_when_absent():
    text = 'digraph f { 0 [label="(S,a = 1)"]; 1 [label="(S,b = a)"]; 0 -> 1 [label="CFG"]; }'
    (g,) = import_dot([text])
    assert g.node(g.start_id).node_type == START and g.node(g.end_id).node_type == END
    succ = g.successors(EdgeLabel.CFG)
    assert succ[g.start_id] == [0] and succ[1] == [g.end_id]


_types = st.sampled_from(["Identifier", "IntLiteral", "BinaryExpr:Plus", "CallExpr", "S"])
_tokens = st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=8)


@st.composite
def _graphs(draw):
    n = draw(st.integers(1, 8))
    nodes = tuple(Node(i, draw(_types), draw(_tokens), draw(st.one_of(st.none(), st.integers(0, 20))))
                  for i in range(n))
    edges = tuple(Edge(draw(st.integers(0, n - 1)), draw(st.integers(0, n - 1)),
                       draw(st.sampled_from([EdgeLabel.CDG, EdgeLabel.DDG])),
                       draw(st.one_of(st.none(), st.sampled_from(["true", "false"]))))
                  for _ in range(draw(st.integers(0, 10))))
    return CodeGraph(draw(st.text(alphabet="abcxyz_", min_size=1, max_size=6)), nodes, edges)


@settings(max_examples=20, deadline=None)
@given(_graphs())
def test_dot_round_trip_random_graphs(g):
    # leaf indices survive only when at least one node carries one
    (back,) = import_dot([export_dot(g)])
    if all(n.leaf_index is None for n in g.nodes):
        back = back.with_nodes([Node(n.id, n.node_type, n.token, None) for n in back.nodes])
    assert _isomorphic(g, back)
    assert export_dot(back) == export_dot(import_dot([export_dot(back)])[0])
