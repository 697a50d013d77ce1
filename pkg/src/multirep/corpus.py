"""Labeled samples of path contexts: building, splitting, serializing, vocabularies."""
from __future__ import annotations

import hashlib
import logging
import random
import re
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .graph import (
    CodeGraph, CSyntaxError, DotParseError, EdgeLabel, Node, PostDominanceFailure, UnsupportedConstruct,
    build_cfg, build_pdg, import_dot, parse_c,
)
from .paths import (
    ExtractionLimits, PathContext, PathKind, extract_ast_paths, extract_cfg_paths, extract_pdg_paths,
    normalize_context, parse_path_context, render_path_context, sample_paths,
)

log = logging.getLogger(__name__)

MASK_TOKEN = "<method>"
PAD, UNK, MASK = 0, 1, 2
ALL_KINDS = (PathKind.AST, PathKind.CFG, PathKind.PDG)


class EmptyLabel(ValueError):
    pass


class FormatError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ClassTooSmall(ValueError):
    pass


class Task(str, Enum):
    METHOD_LEVEL = "method_level"
    FILE_LEVEL = "file_level"


@dataclass(frozen=True)
class Sample:
    label: str
    ast_contexts: tuple[PathContext, ...] = ()
    cfg_contexts: tuple[PathContext, ...] = ()
    pdg_contexts: tuple[PathContext, ...] = ()

    def contexts(self, kind: PathKind) -> tuple[PathContext, ...]:
        return {PathKind.AST: self.ast_contexts, PathKind.CFG: self.cfg_contexts,
                PathKind.PDG: self.pdg_contexts}[kind]

    def is_valid(self, kinds: Iterable[PathKind] = ALL_KINDS) -> bool:
        return all(self.contexts(k) for k in kinds)


# ---------------------------------------------------------------------------
# Labels and masking

_SUBTOKEN = re.compile(r"[A-Z]+(?![a-z])|[A-Z]?[a-z]+|\d+")


def normalize_label(name: str) -> str:
    """``HTTP_server2handler`` -> ``http|server|2|handler``."""
    parts = _SUBTOKEN.findall(name)
    if not parts:
        raise EmptyLabel(f"no subtokens in label {name!r}")
    return "|".join(p.lower() for p in parts)


def mask_method_name(graph: CodeGraph, name: str) -> tuple[CodeGraph, str]:
    """Replace every occurrence of ``name`` among node tokens with the mask token.

    Terminals matching exactly are replaced outright; statement-level tokens
    (the text carried by CFG/PDG nodes) have whole-word occurrences replaced.
    Returns the masked graph and the raw name.
    """
    word = re.compile(rf"\b{re.escape(name)}\b")
    nodes = []
    for n in graph.nodes:
        if n.token == name:
            token = MASK_TOKEN
        elif n.leaf_index is None and name in n.token:
            token = word.sub(MASK_TOKEN, n.token)
        else:
            token = n.token
        nodes.append(n if token == n.token else Node(n.id, n.node_type, token, n.leaf_index))
    return graph.with_nodes(nodes), name


# ---------------------------------------------------------------------------
# Extraction

@dataclass(frozen=True)
class SourceFile:
    name: str
    text: str
    label: str = ""


@dataclass
class DropReport:
    counts: Counter = field(default_factory=Counter)

    def add(self, reason: str, n: int = 1) -> None:
        self.counts[reason] += n

    def merge(self, other: "DropReport") -> None:
        self.counts.update(other.counts)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def to_csv(self) -> str:
        rows = ["reason,count"] + [f"{r},{c}" for r, c in sorted(self.counts.items())]
        return "\n".join(rows) + "\n"


def function_paths(graph: CodeGraph, limits: ExtractionLimits,
                   kinds: Sequence[PathKind] = ALL_KINDS) -> dict[PathKind, list[PathContext]]:
    """Unsampled path contexts of one function for the requested kinds.

    Graphs that already carry CFG edges (DOT imports) are used as they are.
    """
    out: dict[PathKind, list[PathContext]] = {k: [] for k in ALL_KINDS}
    if PathKind.AST in kinds:
        out[PathKind.AST] = extract_ast_paths(graph, limits)
    if PathKind.CFG in kinds or PathKind.PDG in kinds:
        has_cfg = any(e.label == EdgeLabel.CFG for e in graph.edges)
        cfg = graph if has_cfg else build_cfg(graph)
        if PathKind.CFG in kinds:
            out[PathKind.CFG] = extract_cfg_paths(cfg, limits)
        if PathKind.PDG in kinds:
            has_pdg = any(e.label in (EdgeLabel.CDG, EdgeLabel.DDG) for e in cfg.edges)
            pdg = cfg if has_pdg else build_pdg(cfg)
            out[PathKind.PDG] = extract_pdg_paths(pdg, limits)
    return out


def _make_sample(label: str, key: str, paths: dict[PathKind, list[PathContext]],
                 limits: ExtractionLimits) -> Sample:
    bags = {}
    for kind in ALL_KINDS:
        rng = random.Random(f"{limits.seed}:{key}:{kind.value}")
        bags[kind] = tuple(normalize_context(p) for p in sample_paths(paths[kind], limits, rng))
    return Sample(label, bags[PathKind.AST], bags[PathKind.CFG], bags[PathKind.PDG])


def _graphs_of(source: SourceFile) -> list[CodeGraph]:
    if source.name.endswith(".dot"):
        return import_dot([(source.name, source.text)])
    return parse_c(source.text)


_FAILURES = {
    CSyntaxError: "syntax_error",
    UnsupportedConstruct: "unsupported_construct",
    PostDominanceFailure: "post_dominance_failure",
    DotParseError: "dot_parse_error",
}


def _failure_reason(exc: Exception) -> str:
    for cls, reason in _FAILURES.items():
        if isinstance(exc, cls):
            return reason
    raise exc


def _samples_for_source(args) -> tuple[list[Sample], DropReport]:
    source, task, limits, kinds = args
    report = DropReport()
    samples: list[Sample] = []
    try:
        graphs = _graphs_of(source)
    except Exception as exc:  # noqa: BLE001 - classified below, unknown errors re-raised
        reason = _failure_reason(exc)
        log.warning("%s: skipped (%s)", source.name, exc)
        report.add(reason)
        return samples, report

    if task == Task.METHOD_LEVEL:
        for graph in graphs:
            try:
                label = normalize_label(graph.function_name)
                masked, _ = mask_method_name(graph, graph.function_name)
                paths = function_paths(masked, limits, kinds)
            except EmptyLabel:
                report.add("empty_label")
                continue
            except Exception as exc:  # noqa: BLE001
                report.add(_failure_reason(exc))
                continue
            sample = _make_sample(label, f"{source.name}:{graph.function_name}", paths, limits)
            _keep_if_valid(sample, kinds, report, samples)
        return samples, report

    merged: dict[PathKind, list[PathContext]] = {k: [] for k in ALL_KINDS}
    for graph in graphs:
        try:
            paths = function_paths(graph, limits, kinds)
        except Exception as exc:  # noqa: BLE001
            report.add(_failure_reason(exc))
            continue
        for k in ALL_KINDS:
            merged[k].extend(paths[k])
    _keep_if_valid(_make_sample(source.label, source.name, merged, limits), kinds, report, samples)
    return samples, report


def _keep_if_valid(sample: Sample, kinds: Sequence[PathKind], report: DropReport, out: list) -> None:
    for kind in kinds:
        if not sample.contexts(kind):
            report.add(f"missing_{kind.value.lower()}")
            return
    out.append(sample)


def build_samples(sources: Sequence[SourceFile], task: Task | str, limits: ExtractionLimits = ExtractionLimits(),
                  kinds: Sequence[PathKind] = ALL_KINDS, workers: int = 1) -> tuple[list[Sample], DropReport]:
    """Extract one sample per method or per file and drop samples lacking any requested kind.

    File-level samples pool the paths of every function in the file before
    the per-kind caps are applied.
    """
    task = Task(task)
    kinds = tuple(PathKind(k) for k in kinds)
    jobs = [(s, task, limits, kinds) for s in sources]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_samples_for_source, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_samples_for_source(j) for j in jobs]
    samples: list[Sample] = []
    report = DropReport()
    for s, r in results:
        samples.extend(s)
        report.merge(r)
    return samples, report


def load_sources(root: Path | str, task: Task | str) -> list[SourceFile]:
    """C (``.c``) and DOT (``.dot``) files under ``root``; the file's parent
    directory names its class for file-level tasks."""
    root = Path(root)
    files = sorted(p for p in root.rglob("*") if p.suffix in (".c", ".dot") and p.is_file())
    out = []
    for p in files:
        label = p.parent.name if p.parent != root else ""
        if Task(task) == Task.FILE_LEVEL:
            label = re.sub(r"\s", "_", label) or "unlabeled"
        out.append(SourceFile(p.relative_to(root).as_posix(), p.read_text(encoding="utf-8", errors="replace"), label))
    return out


# ---------------------------------------------------------------------------
# Splits

@dataclass(frozen=True)
class SplitSpec:
    train: float = 0.7
    test: float = 0.2
    validation: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if abs(self.train + self.test + self.validation - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")

    def sizes(self, n: int) -> tuple[int, int, int]:
        n_train = int(round(n * self.train))
        n_test = min(n - n_train, int(round(n * self.test)))
        return n_train, n_test, n - n_train - n_test


def natural_key(label: str):
    return (0, int(label), "") if label.isdigit() else (1, 0, label)


def make_splits(samples: Sequence[Sample], fractions: SplitSpec = SplitSpec(),
                stratified: bool = True, min_class_size: int = 10) -> tuple[list[Sample], list[Sample], list[Sample]]:
    """Train/test/validation split; per class when ``stratified``.

    Each split keeps input order.
    """
    rng = random.Random(fractions.seed)
    groups: dict[str, list[int]] = {}
    if stratified:
        for i, s in enumerate(samples):
            groups.setdefault(s.label, []).append(i)
    else:
        groups[""] = list(range(len(samples)))
    chosen: tuple[list[int], list[int], list[int]] = ([], [], [])
    for label in sorted(groups, key=natural_key):
        idx = groups[label]
        if stratified and len(idx) < min_class_size:
            raise ClassTooSmall(f"class {label!r} has {len(idx)} samples; need at least {min_class_size}")
        idx = idx[:]
        rng.shuffle(idx)
        n_train, n_test, _ = fractions.sizes(len(idx))
        chosen[0].extend(idx[:n_train])
        chosen[1].extend(idx[n_train:n_train + n_test])
        chosen[2].extend(idx[n_train + n_test:])
    return tuple([samples[i] for i in sorted(part)] for part in chosen)  # type: ignore[return-value]


# ---------------------------------------------------------------------------
# Dataset text format

def format_sample(sample: Sample) -> str:
    bags = [" ".join(render_path_context(p) for p in sample.contexts(k)) for k in ALL_KINDS]
    return f"{sample.label} {bags[0]}\t{bags[1]}\t{bags[2]}"


def parse_sample(line: str, lineno: int = 0) -> Sample:
    if not line.strip():
        raise FormatError("blank line", lineno)
    parts = line.split("\t")
    if len(parts) != 3:
        raise FormatError(f"expected 3 tab-separated fields, found {len(parts)}", lineno)
    label, _, ast_text = parts[0].partition(" ")
    if not label:
        raise FormatError("missing label", lineno)
    bags = []
    for kind, text in zip(ALL_KINDS, (ast_text, parts[1], parts[2])):
        try:
            bags.append(tuple(parse_path_context(c, kind) for c in text.split(" ") if c))
        except ValueError as exc:
            raise FormatError(str(exc), lineno) from None
    return Sample(label, *bags)


def write_dataset(samples: Iterable[Sample], path: Path | str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in samples:
            fh.write(format_sample(s) + "\n")


def read_dataset(path: Path | str) -> list[Sample]:
    with open(path, encoding="utf-8", newline="\n") as fh:
        text = fh.read()
    if not text:
        return []
    lines = text.split("\n")
    if lines[-1] == "":
        lines.pop()
    return [parse_sample(line, i) for i, line in enumerate(lines, 1)]


# ---------------------------------------------------------------------------
# Vocabularies

@dataclass
class Vocab:
    itos: list[str]
    counts: list[int]
    unk: Optional[int] = None
    stoi: dict[str, int] = field(init=False)

    def __post_init__(self) -> None:
        self.stoi = {s: i for i, s in enumerate(self.itos)}

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, item: str) -> bool:
        return item in self.stoi

    def lookup(self, item: str) -> int:
        idx = self.stoi.get(item, self.unk)
        if idx is None:
            raise KeyError(item)
        return idx

    @classmethod
    def build(cls, counter: Counter, min_count: int, reserved: Sequence[str] = ()) -> "Vocab":
        entries = sorted((s for s, c in counter.items() if c >= min_count and s not in reserved),
                         key=lambda s: (-counter[s], s))
        itos = list(reserved) + entries
        counts = [counter.get(s, 0) for s in itos]
        return cls(itos, counts, UNK if reserved else None)


_PATH_KIND_NAMES = {PathKind.AST: "ast_path", PathKind.CFG: "cfg_path", PathKind.PDG: "pdg_path"}


@dataclass
class Vocabularies:
    tokens: Vocab
    paths: dict[PathKind, Vocab]
    labels: Vocab

    def _sections(self):
        yield "token", self.tokens
        for kind in ALL_KINDS:
            yield _PATH_KIND_NAMES[kind], self.paths[kind]
        yield "label", self.labels

    def dumps(self) -> str:
        rows = []
        for name, vocab in self._sections():
            rows += [f"{name}\t{s}\t{i}\t{c}" for i, (s, c) in enumerate(zip(vocab.itos, vocab.counts))]
        return "\n".join(rows) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.dumps().encode("utf-8")).hexdigest()

    def save(self, path: Path | str) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path: Path | str) -> "Vocabularies":
        sections: dict[str, list[tuple[int, str, int]]] = {}
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").split("\n"), 1):
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise FormatError("vocabulary rows need kind, string, index, count", lineno)
            sections.setdefault(fields[0], []).append((int(fields[2]), fields[1], int(fields[3])))

        def vocab(name: str, reserved: bool) -> Vocab:
            rows = sorted(sections.get(name, []))
            if [r[0] for r in rows] != list(range(len(rows))):
                raise FormatError(f"{name} indices are not dense", 0)
            return Vocab([r[1] for r in rows], [r[2] for r in rows], UNK if reserved else None)

        return cls(vocab("token", True), {k: vocab(n, True) for k, n in _PATH_KIND_NAMES.items()},
                   vocab("label", False))


def build_vocabularies(train: Sequence[Sample], min_count: int = 2, label_min_count: int = 1) -> Vocabularies:
    """Vocabularies from the training split only; rare entries fall back to UNK."""
    tokens: Counter = Counter()
    paths = {k: Counter() for k in ALL_KINDS}
    labels: Counter = Counter()
    for s in train:
        labels[s.label] += 1
        for kind in ALL_KINDS:
            for pc in s.contexts(kind):
                tokens[pc.start_token] += 1
                tokens[pc.end_token] += 1
                paths[kind][pc.path_string] += 1
    return Vocabularies(
        Vocab.build(tokens, min_count, ("<pad>", "<unk>", MASK_TOKEN)),
        {k: Vocab.build(paths[k], min_count, ("<pad>", "<unk>")) for k in ALL_KINDS},
        Vocab.build(labels, label_min_count),
    )
