"""AST, CFG and PDG path contexts: enumeration, sampling and rendering."""
from __future__ import annotations

import logging
import random
import re
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

from .graph.model import CodeGraph, EdgeLabel

log = logging.getLogger(__name__)

UP = "↑"
DOWN = "↓"


class PathKind(str, Enum):
    AST = "AST"
    CFG = "CFG"
    PDG = "PDG"


@dataclass(frozen=True)
class PathContext:
    kind: PathKind
    start_token: str
    path_string: str
    end_token: str


@dataclass(frozen=True)
class ExtractionLimits:
    ast_max_len: int = 8
    ast_max_width: int = 2
    max_ast: int = 200
    max_cfg: int = 10
    max_pdg: int = 100
    enumeration_cap: int = 10000
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("ast_max_len", "ast_max_width", "max_ast", "max_cfg", "max_pdg", "enumeration_cap"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

    def cap(self, kind: PathKind) -> int:
        return {PathKind.AST: self.max_ast, PathKind.CFG: self.max_cfg, PathKind.PDG: self.max_pdg}[kind]


class Paths(list):
    """A list of path contexts that remembers whether enumeration was cut short."""

    truncated: bool = False


class EnumerationCapExceeded(UserWarning):
    pass


_UNSAFE_TYPE_CHARS = re.compile(r"[\s,↑↓]")


def _type(graph: CodeGraph, nid: int) -> str:
    return _UNSAFE_TYPE_CHARS.sub("_", graph.node(nid).node_type)


def _truncate(out: Paths, graph: CodeGraph, kind: PathKind, cap: int) -> None:
    out.truncated = True
    log.warning("%s: %s path enumeration stopped at the cap of %d", graph.function_name, kind.value, cap)


# ---------------------------------------------------------------------------
# AST

def extract_ast_paths(ast: CodeGraph, limits: ExtractionLimits = ExtractionLimits()) -> Paths:
    """Leaf-to-leaf paths with at most ``ast_max_len`` edges between leaves at
    most ``ast_max_width`` positions apart. Each unordered pair appears once,
    oriented left to right."""
    parent = ast.ast_parent()
    depth: dict[int, int] = {}

    def get_depth(nid: int) -> int:
        chain = []
        while nid not in depth and nid in parent:
            chain.append(nid)
            nid = parent[nid]
        base = depth.setdefault(nid, 0)
        for i, n in enumerate(reversed(chain), 1):
            depth[n] = base + i
        return depth[chain[0]] if chain else base

    def ancestors(nid: int, steps: int) -> list[int]:
        out = [nid]
        for _ in range(steps):
            nid = parent[nid]
            out.append(nid)
        return out

    leaves = ast.terminals()
    out = Paths()
    for i, left in enumerate(leaves):
        for right in leaves[i + 1:i + 1 + limits.ast_max_width]:
            if right.leaf_index - left.leaf_index > limits.ast_max_width:
                break
            a, b = left.id, right.id
            da, db = get_depth(a), get_depth(b)
            # climb both sides to the lowest common ancestor
            up, down = [a], [b]
            while da > db:
                a = parent[a]; da -= 1; up.append(a)
            while db > da:
                b = parent[b]; db -= 1; down.append(b)
            while a != b:
                if a not in parent or b not in parent:
                    break
                a, b = parent[a], parent[b]
                up.append(a)
                down.append(b)
            if a != b:
                continue  # leaves in different trees
            length = len(up) - 1 + len(down) - 1
            if length > limits.ast_max_len:
                continue
            rendered = UP.join(_type(ast, n) for n in up)
            tail = [_type(ast, n) for n in reversed(down[:-1])]
            if tail:
                rendered += DOWN + DOWN.join(tail)
            out.append(PathContext(PathKind.AST, left.token, rendered, right.token))
            if len(out) >= limits.enumeration_cap:
                _truncate(out, ast, PathKind.AST, limits.enumeration_cap)
                return out
    return out


# ---------------------------------------------------------------------------
# CFG

def back_edges(graph: CodeGraph) -> set[tuple[int, int]]:
    """Retreating edges of a depth-first search from START, in edge order."""
    succ = graph.successors(EdgeLabel.CFG)
    start = graph.start_id
    if start is None:
        return set()
    on_stack, done, result = {start}, set(), set()
    stack = [(start, iter(succ.get(start, ())))]
    while stack:
        node, it = stack[-1]
        for nxt in it:
            if nxt in on_stack:
                result.add((node, nxt))
            elif nxt not in done:
                on_stack.add(nxt)
                stack.append((nxt, iter(succ.get(nxt, ()))))
                break
        else:
            stack.pop()
            on_stack.discard(node)
            done.add(node)
    return result


def loop_headers(graph: CodeGraph) -> set[int]:
    return {dst for _, dst in back_edges(graph)}


def extract_cfg_paths(cfg: CodeGraph, limits: ExtractionLimits = ExtractionLimits()) -> Paths:
    """Walks from START that end at END (final arrow down) or on re-entering
    a loop header (final arrow up).

    Each loop header may be re-entered at most once per walk, so a loop is
    either skipped or run through once; the walk is reported both when it
    returns to the header and, continuing, when it leaves the loop. Other
    nodes are never revisited.
    """
    out = Paths()
    start, end = cfg.start_id, cfg.end_id
    if start is None or end is None or not cfg.cfg_nodes():
        return out
    succ = cfg.successors(EdgeLabel.CFG)
    headers = loop_headers(cfg)
    start_token = cfg.node(start).token

    def emit(walk: list[int], arrow: str) -> bool:
        types = [_type(cfg, n) for n in walk]
        rendered = DOWN.join(types[:-1]) + arrow + types[-1]
        out.append(PathContext(PathKind.CFG, start_token, rendered, cfg.node(walk[-1]).token))
        if len(out) >= limits.enumeration_cap:
            _truncate(out, cfg, PathKind.CFG, limits.enumeration_cap)
            return False
        return True

    # iterative DFS over (walk, visit counts); each frame holds a successor iterator
    walk = [start]
    visits = {start: 1}
    stack = [iter(succ.get(start, ()))]
    while stack:
        nxt = next(stack[-1], None)
        if nxt is None:
            stack.pop()
            node = walk.pop()
            visits[node] -= 1
            continue
        seen = visits.get(nxt, 0)
        if nxt == end:
            if not emit(walk + [nxt], DOWN):
                return out
            continue
        if seen and (nxt not in headers or seen >= 2):
            continue
        if seen and not emit(walk + [nxt], UP):
            return out
        walk.append(nxt)
        visits[nxt] = seen + 1
        stack.append(iter(succ.get(nxt, ())))
    return out


# ---------------------------------------------------------------------------
# PDG

def extract_pdg_paths(pdg: CodeGraph, limits: ExtractionLimits = ExtractionLimits()) -> Paths:
    """Maximal simple paths whose edges all carry the same dependence label.

    A path is maximal when no same-label edge extends it at either end
    without repeating a node. All arrows are rendered downward.
    """
    out = Paths()
    for label in (EdgeLabel.CDG, EdgeLabel.DDG):
        succ = {k: [v for v in vs if v != k] for k, vs in pdg.successors(label).items()}
        pred = {k: [v for v in vs if v != k] for k, vs in pdg.predecessors(label).items()}
        for s in sorted(k for k, vs in succ.items() if vs):
            path = [s]
            on_path = {s}
            stack = [iter(succ[s])]
            while stack:
                nxt = next(stack[-1], None)
                if nxt is None:
                    stack.pop()
                    on_path.discard(path.pop())
                    continue
                if nxt in on_path:
                    continue
                path.append(nxt)
                on_path.add(nxt)
                if all(v in on_path for v in succ.get(nxt, ())):
                    if all(v in on_path for v in pred.get(s, ())):
                        rendered = DOWN.join(_type(pdg, n) for n in path)
                        out.append(PathContext(PathKind.PDG, pdg.node(s).token, rendered, pdg.node(nxt).token))
                        if len(out) >= limits.enumeration_cap:
                            _truncate(out, pdg, PathKind.PDG, limits.enumeration_cap)
                            return out
                    on_path.discard(path.pop())
                    continue
                stack.append(iter(succ.get(nxt, ())))
    return out


# ---------------------------------------------------------------------------
# Sampling and serialization

def sample_paths(paths: Sequence[PathContext], limits: ExtractionLimits = ExtractionLimits(),
                 rng: Optional[random.Random] = None) -> list[PathContext]:
    """Keep everything under the kind's cap, else a uniform sample of exactly the cap.

    The sample keeps input order. ``rng`` defaults to ``Random(limits.seed)``.
    """
    if not paths:
        return []
    kinds = {p.kind for p in paths}
    if len(kinds) != 1:
        raise ValueError(f"sample_paths expects one path kind, got {sorted(k.value for k in kinds)}")
    cap = limits.cap(paths[0].kind)
    if len(paths) <= cap:
        return list(paths)
    rng = rng if rng is not None else random.Random(limits.seed)
    keep = sorted(rng.sample(range(len(paths)), cap))
    return [paths[i] for i in keep]


_TOKEN_UNSAFE = re.compile(r"[\s,]")


def normalize_token(token: str, fallback: str = "") -> str:
    token = token.strip() or fallback
    return _TOKEN_UNSAFE.sub("_", token.lower())


def _end_types(path_string: str) -> tuple[str, str]:
    parts = re.split(f"[{UP}{DOWN}]", path_string)
    return parts[0], parts[-1]


def normalize_context(pc: PathContext) -> PathContext:
    first, last = _end_types(pc.path_string)
    return PathContext(
        pc.kind,
        normalize_token(pc.start_token, first),
        _TOKEN_UNSAFE.sub("_", pc.path_string),
        normalize_token(pc.end_token, last),
    )


def render_path_context(pc: PathContext) -> str:
    n = normalize_context(pc)
    return f"{n.start_token},{n.path_string},{n.end_token}"


def parse_path_context(text: str, kind: PathKind) -> PathContext:
    fields = text.split(",")
    if len(fields) != 3 or not all(fields):
        raise ValueError(f"path context must have 3 non-empty comma-separated fields: {text!r}")
    return PathContext(kind, *fields)
