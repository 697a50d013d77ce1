"""Read and write CodeGraphs as Graphviz DOT digraphs.

Dialect: one function per ``digraph``, named after the function. Nodes carry
``label="(TYPE,CODE)"`` and, for AST terminals, ``leaf_index``; edges carry
``label="AST|CFG|CDG|DDG"`` and an optional ``guard``.
"""
from __future__ import annotations

import logging
import re
import warnings
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .model import END, START, CodeGraph, Edge, EdgeLabel, Node

log = logging.getLogger(__name__)


class DotParseError(Exception):
    def __init__(self, message: str, source: str = "<dot>", line: int = 0):
        super().__init__(f"{source}:{line}: {message}")
        self.source = source
        self.line = line


class MissingLabelError(DotParseError):
    pass


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def _unquote(text: str) -> str:
    out, i = [], 0
    while i < len(text):
        ch = text[i]
        if ch == "\\" and i + 1 < len(text):
            nxt = text[i + 1]
            out.append({"n": "\n", '"': '"', "\\": "\\"}.get(nxt, "\\" + nxt))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def export_dot(graph: CodeGraph) -> str:
    lines = [f"digraph {_quote(graph.function_name)} {{"]
    for node in sorted(graph.nodes, key=lambda n: n.id):
        attrs = f"label={_quote(f'({node.node_type},{node.token})')}"
        if node.leaf_index is not None:
            attrs += f" leaf_index={node.leaf_index}"
        lines.append(f"  {node.id} [{attrs}];")
    for e in graph.edges:
        attrs = f"label={_quote(e.label.value)}"
        if e.guard is not None:
            attrs += f" guard={_quote(e.guard)}"
        lines.append(f"  {e.src} -> {e.dst} [{attrs}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Reader

_DOT_TOKEN = re.compile(r'''
    (?P<ws>[ \t\r\f\v]+|\n)
  | (?P<comment>//[^\n]*|/\*.*?\*/|\#[^\n]*)
  | (?P<string>"(?:\\.|[^"\\])*")
  | (?P<arrow>->|--)
  | (?P<id>[A-Za-z_\x80-\uffff][A-Za-z0-9_\x80-\uffff]*|-?(?:\.\d+|\d+(?:\.\d*)?))
  | (?P<punct>[{}\[\];,=:])
''', re.VERBOSE | re.DOTALL)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int


def _lex(text: str, source: str) -> list[_Tok]:
    toks, pos, line = [], 0, 1
    while pos < len(text):
        m = _DOT_TOKEN.match(text, pos)
        if m is None:
            raise DotParseError(f"unexpected character {text[pos]!r}", source, line)
        kind, value = m.lastgroup, m.group()
        if kind == "string":
            toks.append(_Tok("id", _unquote(value[1:-1]), line))
        elif kind not in ("ws", "comment"):
            toks.append(_Tok(kind, value, line))
        line += value.count("\n")
        pos = m.end()
    return toks


@dataclass
class _RawGraph:
    name: str
    line: int
    nodes: dict  # dot id -> (attrs, line)
    edges: list  # (src, dst, attrs, line)


class _DotReader:
    def __init__(self, toks: list[_Tok], source: str):
        self.toks, self.pos, self.source = toks, 0, source

    def error(self, message: str):
        line = self.toks[min(self.pos, len(self.toks) - 1)].line if self.toks else 0
        raise DotParseError(message, self.source, line)

    def peek(self) -> Optional[_Tok]:
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def take(self, text: Optional[str] = None, kind: Optional[str] = None) -> _Tok:
        tok = self.peek()
        if tok is None:
            self.error(f"unexpected end of input, expected {text or kind}")
        if (text is not None and tok.text != text) or (kind is not None and tok.kind != kind):
            self.error(f"expected {text or kind}, found {tok.text!r}")
        self.pos += 1
        return tok

    def graphs(self) -> list[_RawGraph]:
        out = []
        while self.peek() is not None:
            tok = self.take(kind="id")
            if tok.text.lower() == "strict":
                tok = self.take(kind="id")
            if tok.text.lower() != "digraph":
                self.error(f"expected 'digraph', found {tok.text!r}")
            name = ""
            if self.peek() is not None and self.peek().kind == "id":
                name = self.take().text
            out.append(self.body(name, tok.line))
        return out

    def attr_list(self) -> dict:
        attrs = {}
        while self.peek() is not None and self.peek().text == "[":
            self.take("[")
            while self.peek() is not None and self.peek().text != "]":
                key = self.take(kind="id").text
                self.take("=")
                attrs[key] = self.take(kind="id").text
                if self.peek() is not None and self.peek().text in (",", ";"):
                    self.pos += 1
            self.take("]")
        return attrs

    def body(self, name: str, line: int) -> _RawGraph:
        raw = _RawGraph(name, line, {}, [])
        self.take("{")
        while True:
            tok = self.peek()
            if tok is None:
                self.error("unterminated digraph body")
            if tok.text == "}":
                self.pos += 1
                return raw
            if tok.text == ";":
                self.pos += 1
                continue
            first = self.take(kind="id")
            if first.text in ("graph", "node", "edge") and self.peek() is not None and self.peek().text == "[":
                self.attr_list()
                continue
            if self.peek() is not None and self.peek().text == "=":
                self.take("=")
                self.take(kind="id")
                continue
            chain = [first.text]
            while self.peek() is not None and self.peek().kind == "arrow":
                self.take()
                chain.append(self.take(kind="id").text)
            attrs = self.attr_list()
            if len(chain) == 1:
                prev = raw.nodes.get(first.text, ({}, first.line))[0]
                raw.nodes[first.text] = ({**prev, **attrs}, first.line)
            else:
                for node_id in chain:
                    raw.nodes.setdefault(node_id, ({}, first.line))
                for src, dst in zip(chain, chain[1:]):
                    raw.edges.append((src, dst, attrs, first.line))


def _split_label(label: str) -> Optional[tuple[str, str]]:
    if len(label) < 3 or not (label.startswith("(") and label.endswith(")")) or "," not in label:
        return None
    node_type, _, code = label[1:-1].partition(",")
    if not node_type:
        return None
    return node_type, code


def _to_codegraph(raw: _RawGraph, source: str) -> CodeGraph:
    ids: dict[str, int] = {}
    numeric = all(k.lstrip("-").isdigit() for k in raw.nodes)
    for order, key in enumerate(raw.nodes):
        ids[key] = int(key) if numeric else order
    if len(set(ids.values())) != len(ids):
        ids = {k: i for i, k in enumerate(raw.nodes)}

    nodes = []
    for key, (attrs, line) in raw.nodes.items():
        parsed = _split_label(attrs.get("label", ""))
        if parsed is None:
            raise MissingLabelError(f"node {key!r} has no parseable \"(TYPE,CODE)\" label", source, line)
        leaf = attrs.get("leaf_index")
        if leaf is not None and not leaf.isdigit():
            raise DotParseError(f"node {key!r} has non-integer leaf_index {leaf!r}", source, line)
        nodes.append(Node(ids[key], parsed[0], parsed[1], int(leaf) if leaf is not None else None))

    edges = []
    for src, dst, attrs, line in raw.edges:
        try:
            label = EdgeLabel(attrs.get("label", ""))
        except ValueError:
            raise DotParseError(f"edge {src}->{dst} has label {attrs.get('label')!r}; expected AST/CFG/CDG/DDG",
                                source, line) from None
        edges.append(Edge(ids[src], ids[dst], label, attrs.get("guard")))

    graph = CodeGraph(raw.name, tuple(sorted(nodes, key=lambda n: n.id)), tuple(edges))
    if all(n.leaf_index is None for n in graph.nodes):
        graph = _assign_leaf_indices(graph)
    return _attach_start_end(graph)


def _assign_leaf_indices(graph: CodeGraph) -> CodeGraph:
    """Number AST leaves left to right when the export did not record indices."""
    children = graph.ast_children()
    if not children:
        return graph
    parent = graph.ast_parent()
    order: dict[int, int] = {}
    for root in (n.id for n in graph.nodes if n.id not in parent and n.id in children):
        for nid in graph.subtree(root):
            if nid not in children:
                order[nid] = len(order)
    nodes = [Node(n.id, n.node_type, n.token, order.get(n.id)) for n in graph.nodes]
    return graph.with_nodes(nodes)


def _attach_start_end(graph: CodeGraph) -> CodeGraph:
    cfg = graph.cfg_nodes()
    if not cfg:
        return graph
    by_type = {n.node_type: n.id for n in graph.nodes if n.id in cfg and n.node_type in (START, END)}
    start, end = by_type.get(START), by_type.get(END)
    extra_nodes, extra_edges = [], []
    next_id = max(n.id for n in graph.nodes) + 1
    if start is None:
        start, next_id = next_id, next_id + 1
        extra_nodes.append(Node(start, START, START))
        has_pred = {e.dst for e in graph.edges_with(EdgeLabel.CFG)}
        extra_edges += [Edge(start, n, EdgeLabel.CFG) for n in sorted(cfg - has_pred)]
    if end is None:
        end = next_id
        extra_nodes.append(Node(end, END, END))
        has_succ = {e.src for e in graph.edges_with(EdgeLabel.CFG)}
        extra_edges += [Edge(n, end, EdgeLabel.CFG) for n in sorted(cfg - has_succ)]
    if extra_nodes:
        log.info("%s: synthesized %s", graph.function_name, ", ".join(n.node_type for n in extra_nodes))
        graph = graph.with_nodes(list(graph.nodes) + extra_nodes)
    return graph.with_edges(extra_edges, start_id=start, end_id=end)


def import_dot(files: Sequence[str] | Iterable[tuple[str, str]]) -> list[CodeGraph]:
    """Parse DOT documents into CodeGraphs.

    ``files`` holds document texts, or ``(name, text)`` pairs so errors can
    cite the file they came from.
    """
    graphs = []
    for i, item in enumerate(files):
        source, text = item if isinstance(item, tuple) else (f"<dot #{i}>", item)
        raws = _DotReader(_lex(text, source), source).graphs()
        for raw in raws:
            if not raw.nodes:
                warnings.warn(f"{source}:{raw.line}: empty digraph {raw.name!r} skipped", stacklevel=2)
                continue
            graphs.append(_to_codegraph(raw, source))
    return graphs
