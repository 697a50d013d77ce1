from __future__ import annotations

import random
import re
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from multirep.corpus import (
    ALL_KINDS, MASK_TOKEN, PAD, UNK, ClassTooSmall, EmptyLabel, FormatError, Sample, SourceFile, SplitSpec,
    Vocabularies, build_samples, build_vocabularies, format_sample, function_paths, load_sources, make_splits,
    mask_method_name, normalize_label, read_dataset, write_dataset,
)
from multirep.graph import parse_c
from multirep.paths import ExtractionLimits, PathContext, PathKind


# ---------------------------------------------------------------------------
# Labels and masking

@pytest.mark.parametrize("raw, expected", [
    ("openFile", "open|file"),
    ("HTTP_server2handler", "http|server|2|handler"),
    ("getHTTPResponse", "get|http|response"),
    ("x", "x"),
    ("__init__", "init"),
])
def test_normalize_label(raw, expected):
    assert normalize_label(raw) == expected


def test_normalize_label_rejects_empty():
    with pytest.raises(EmptyLabel):
        normalize_label("__")


@settings(max_examples=200, deadline=None)
@given(st.from_regex(r"[A-Za-z_][A-Za-z0-9_]{0,15}", fullmatch=True).filter(lambda s: re.search(r"[A-Za-z0-9]", s)))
def test_normalize_label_idempotent(name):
    once = normalize_label(name)
    assert normalize_label(once.replace("|", "_")) == once


def test_recursive_call_is_masked():
    (ast,) = parse_c("int fact(int n){ if (n < 2) { return 1; } return n * fact(n - 1); }")
    masked, raw = mask_method_name(ast, "fact")
    assert raw == "fact"
    assert not [t for t in masked.terminals() if t.token == "fact"]
    assert sum(t.token == MASK_TOKEN for t in masked.terminals()) == 2
    assert all("fact" not in re.findall(r"\w+", n.token) for n in masked.nodes)


def test_non_recursive_mask_touches_only_declaration():
    (ast,) = parse_c("int add(int a, int b){ return a + b; }")
    masked, _ = mask_method_name(ast, "add")
    changed = [(a, b) for a, b in zip(ast.nodes, masked.nodes) if a != b]
    assert [(a.node_type, b.token) for a, b in changed if a.leaf_index is not None] == [("FunctionName", MASK_TOKEN)]


def test_masking_over_corpus_methods(corpus_dir):
    count = 0
    for src in load_sources(corpus_dir, "method_level"):
        for g in parse_c(src.text):
            masked, _ = mask_method_name(g, g.function_name)
            assert not [t for t in masked.terminals() if t.token == g.function_name]
            count += 1
    assert count >= 50


# ---------------------------------------------------------------------------
# Samples

def test_method_sample_of_loop_function(loop_source):
    samples, report = build_samples([SourceFile("f.c", loop_source)], "method_level")
    (s,) = samples
    assert s.label == "random|function"
    assert all(s.contexts(k) for k in ALL_KINDS)
    assert report.total == 0


def test_file_level_pools_method_paths():
    text = "\n".join(f"int f{i}(int a){{ int b = a + {i}; return b * a; }}" for i in range(3))
    limits = ExtractionLimits()
    per_method = [function_paths(g, limits) for g in parse_c(text)]
    (s,), _ = build_samples([SourceFile("x.c", text, "7")], "file_level", limits)
    for k in ALL_KINDS:
        assert len(s.contexts(k)) == min(sum(len(p[k]) for p in per_method), limits.cap(k))
    assert s.label == "7"


def test_sample_without_dependences_is_dropped():
    samples, report = build_samples([SourceFile("e.c", "void empty(){}")], "method_level")
    assert samples == [] and report.counts["missing_pdg"] + report.counts["missing_cfg"] == 1


def test_parse_failures_are_counted():
    sources = [SourceFile("bad.c", "int f( {"), SourceFile("goto.c", "void f(){ goto x; }"),
               SourceFile("ok.c", "int ok(int a){ int b = a; return b; }")]
    samples, report = build_samples(sources, "method_level")
    assert len(samples) == 1
    assert report.counts == Counter({"syntax_error": 1, "unsupported_construct": 1})
    assert report.to_csv().startswith("reason,count\n")


def test_dot_sources_are_accepted():
    from multirep.graph import build_cfg, build_pdg, export_dot
    (ast,) = parse_c("int twice(int a){ int b = a * 2; return b; }")
    dot = export_dot(build_pdg(build_cfg(ast)))
    (from_dot,), _ = build_samples([SourceFile("twice.dot", dot)], "method_level")
    (from_c,), _ = build_samples([SourceFile("twice.c", "int twice(int a){ int b = a * 2; return b; }")],
                                 "method_level")
    assert from_dot == from_c


def test_caps_respected_on_corpus(corpus_dir):
    samples, _ = build_samples(load_sources(corpus_dir, "file_level"), "file_level")
    limits = ExtractionLimits()
    assert samples
    for s in samples:
        assert all(1 <= len(s.contexts(k)) <= limits.cap(k) for k in ALL_KINDS)


def test_parallel_extraction_matches_serial(corpus_dir):
    sources = load_sources(corpus_dir, "file_level")[:12]
    assert build_samples(sources, "file_level", workers=2) == build_samples(sources, "file_level", workers=1)


# ---------------------------------------------------------------------------
# Splits

def _labeled(n_classes: int, per_class: int) -> list[Sample]:
    ctx = (PathContext(PathKind.AST, "a", "X↑Y", "b"),)
    return [Sample(str(c), ctx + (PathContext(PathKind.AST, str(i), "X↑Y", "b"),), ctx, ctx)
            for c in range(n_classes) for i in range(per_class)]


def test_large_corpus_split():
    train, test, val = make_splits(_labeled(104, 500))
    assert (len(train), len(test), len(val)) == (36400, 10400, 5200)


def test_small_class_split():
    assert tuple(map(len, make_splits(_labeled(1, 10)))) == (7, 2, 1)


def test_class_too_small():
    with pytest.raises(ClassTooSmall):
        make_splits(_labeled(2, 9))


@pytest.mark.parametrize("stratified", [True, False])
def test_split_set_algebra(stratified):
    samples = _labeled(7, 23)
    parts = make_splits(samples, SplitSpec(seed=5), stratified=stratified)
    again = make_splits(samples, SplitSpec(seed=5), stratified=stratified)
    assert parts == again
    ids = [{id(s) for s in p} for p in parts]
    assert sum(map(len, ids)) == len(samples) == len(set.union(*ids))
    if stratified:
        for label in {s.label for s in samples}:
            n = sum(s.label == label for s in samples)
            for frac, part in zip((0.7, 0.2, 0.1), parts):
                assert abs(sum(s.label == label for s in part) - n * frac) <= 1


def test_split_fractions_must_sum_to_one():
    with pytest.raises(ValueError):
        SplitSpec(0.5, 0.2, 0.2)


# ---------------------------------------------------------------------------
# Dataset format

def test_single_sample_round_trip(tmp_path, loop_source):
    (s,), _ = build_samples([SourceFile("f.c", loop_source)], "method_level")
    path = tmp_path / "d.txt"
    write_dataset([s], path)
    text = path.read_bytes()
    assert read_dataset(path) == [s]
    write_dataset(read_dataset(path), path)
    assert path.read_bytes() == text


def test_blank_line_is_format_error(tmp_path):
    (s,), _ = build_samples([SourceFile("f.c", "int f(int a){ return a; }")], "method_level")
    path = tmp_path / "d.txt"
    path.write_text(format_sample(s) + "\n\n" + format_sample(s) + "\n", encoding="utf-8")
    with pytest.raises(FormatError) as info:
        read_dataset(path)
    assert info.value.line == 2


def _random_sample(rng: random.Random) -> Sample:
    def bag(kind):
        return tuple(PathContext(kind, rng.choice("abc") + str(rng.randint(0, 9)),
                                 rng.choice(["X↑Y", "A↓B↓C", "S↑T↓U"]), rng.choice(["q", "<method>", "r_s"]))
                     for _ in range(rng.randint(1, 5)))
    return Sample(rng.choice(["get|name", "1", "set"]), bag(PathKind.AST), bag(PathKind.CFG), bag(PathKind.PDG))


def test_thousand_sample_round_trip(tmp_path):
    rng = random.Random(0)
    samples = [_random_sample(rng) for _ in range(1000)]
    write_dataset(samples, tmp_path / "d.txt")
    assert read_dataset(tmp_path / "d.txt") == samples


# ---------------------------------------------------------------------------
# Vocabularies

def test_vocab_min_count_one():
    rng = random.Random(1)
    s = _random_sample(rng)
    v = build_vocabularies([s], min_count=1)
    tokens = {t for k in ALL_KINDS for p in s.contexts(k) for t in (p.start_token, p.end_token)}
    assert len(v.tokens) == 3 + len(tokens - {MASK_TOKEN})
    for k in ALL_KINDS:
        assert len(v.paths[k]) == 2 + len({p.path_string for p in s.contexts(k)})
    assert v.labels.itos == [s.label]


def test_reserved_indices_and_unk_lookup():
    v = build_vocabularies([_random_sample(random.Random(2))], min_count=1)
    assert v.tokens.itos[PAD] == "<pad>" and v.tokens.itos[UNK] == "<unk>" and v.tokens.itos[2] == MASK_TOKEN
    assert v.tokens.lookup("never-seen") == UNK
    assert v.paths[PathKind.CFG].lookup("Nope↓Never") == UNK


def test_vocab_save_load_round_trip(tmp_path):
    rng = random.Random(3)
    v = build_vocabularies([_random_sample(rng) for _ in range(50)])
    v.save(tmp_path / "v.tsv")
    back = Vocabularies.load(tmp_path / "v.tsv")
    assert back.dumps() == v.dumps() and back.digest() == v.digest()


def test_vocab_built_from_train_only(corpus_dir):
    samples, _ = build_samples(load_sources(corpus_dir, "file_level"), "file_level")
    train, test, _ = make_splits(samples)
    v = build_vocabularies(train, min_count=1)
    train_tokens = {t for s in train for k in ALL_KINDS for p in s.contexts(k) for t in (p.start_token, p.end_token)}
    test_only = {t for s in test for k in ALL_KINDS for p in s.contexts(k)
                 for t in (p.start_token, p.end_token)} - train_tokens
    assert not test_only & set(v.tokens.itos)
