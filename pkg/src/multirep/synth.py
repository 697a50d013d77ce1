"""Synthetic OJ-style corpus: small C solutions to numbered programming problems.

Problems come in families sharing one syntactic skeleton (a reading loop,
a digit loop, a product loop, a divisor loop) that differ in which values feed
which statements. Each file draws identifiers from a shared pool, picks
``for`` or ``while`` loops and output formats at random, may move the
solution into a helper function and may add unrelated statements.
"""
from __future__ import annotations

import random
from pathlib import Path
from typing import Callable

NAME_POOL = (
    "a", "b", "c", "d", "i", "j", "k", "m", "n", "p", "q", "r", "s", "t", "x", "y", "z",
    "cnt", "res", "ans", "num", "val", "tmp", "sum", "cur", "len", "idx", "total", "flag", "acc",
)
HELPER_POOL = ("solve", "calc", "work", "compute", "run", "process", "helper", "go", "doit", "check")


class Writer:
    """Indented line emitter with per-file naming and style choices."""

    def __init__(self, rng: random.Random):
        self.rng = rng
        self.lines: list[str] = []
        self.depth = 0
        self.used: set[str] = set()
        self.use_for = rng.random() < 0.5
        self.fmt = rng.choice(('"%d\\n"', '"%d"', '"%d "'))

    def name(self) -> str:
        free = [n for n in NAME_POOL if n not in self.used]
        chosen = self.rng.choice(free)
        self.used.add(chosen)
        return chosen

    def emit(self, text: str) -> None:
        self.lines.append("    " * self.depth + text)

    def open(self, head: str) -> None:
        self.emit(head + " {")
        self.depth += 1

    def close(self) -> None:
        self.depth -= 1
        self.emit("}")

    def counted(self, var: str, lo: str, hi: str, body: Callable[[], None], cmp: str = "<") -> None:
        if self.use_for:
            self.open(f"for ({var} = {lo}; {var} {cmp} {hi}; {var}++)")
            body()
            self.close()
        else:
            self.emit(f"{var} = {lo};")
            self.open(f"while ({var} {cmp} {hi})")
            body()
            self.emit(f"{var}++;")
            self.close()

    def noise(self) -> None:
        """An unrelated statement or two, sometimes."""
        roll = self.rng.random()
        if roll < 0.25:
            v = self.name()
            self.emit(f"int {v} = {self.rng.randint(0, 9)};")
            self.emit(f"{v} = {v} * 2 + 1;")
        elif roll < 0.4:
            self.emit('printf("\\n");')
        elif roll < 0.5:
            v = self.name()
            self.emit(f"int {v};")
            self.emit(f'scanf("%d", &{v});')

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def _read(w: Writer, *names: str) -> None:
    if len(names) > 1 and w.rng.random() < 0.5:
        fmt = " ".join(["%d"] * len(names))
        w.emit(f'scanf("{fmt}", ' + ", ".join(f"&{n}" for n in names) + ");")
    else:
        for n in names:
            w.emit(f'scanf("%d", &{n});')


def _print(w: Writer, expr: str) -> None:
    w.emit(f"printf({w.fmt}, {expr});")


def _add(w: Writer, target: str, expr: str) -> None:
    if w.rng.random() < 0.5:
        w.emit(f"{target} += {expr};")
    else:
        w.emit(f"{target} = {target} + {expr};")


def _declare(w: Writer, plain: list[str], init: dict[str, str]) -> None:
    items = plain + [f"{k} = {v}" for k, v in init.items()]
    w.rng.shuffle(items)
    if w.rng.random() < 0.5:
        w.emit("int " + ", ".join(items) + ";")
    else:
        for item in items:
            w.emit(f"int {item};")


def _read_array(w: Writer, arr: str, n: str, i: str) -> None:
    _read(w, n)
    w.counted(i, "0", n, lambda: w.emit(f'scanf("%d", &{arr}[{i}]);'))


# ---------------------------------------------------------------------------
# Problems. Several share a skeleton and differ only in which values feed
# which statements.

def _reading_loop(update: Callable[[Writer, str, str, str], None], init: str = "0"):
    """read n; repeat n times: read x, fold it into acc; print acc."""
    def problem(w: Writer) -> None:
        n, i, acc, x = w.name(), w.name(), w.name(), w.name()
        _declare(w, [n, i, x], {acc: init})
        _read(w, n)
        w.noise()

        def body():
            _read(w, x)
            update(w, acc, x, i)
        w.counted(i, "0", n, body)
        _print(w, acc)
    return problem


def _keep_max(w: Writer, acc: str, x: str, i: str) -> None:
    w.open(f"if ({x} > {acc})")
    w.emit(f"{acc} = {x};")
    w.close()


def _digit_loop(update: Callable[[Writer, str, str], None], finish: Callable[[Writer, str, str], None] = None,
                keep_copy: bool = False):
    """read n; while n > 0: fold n % 10 into r, n /= 10; print."""
    def problem(w: Writer) -> None:
        n, r = w.name(), w.name()
        o = w.name() if keep_copy else None
        _declare(w, [n] + ([o] if o else []), {r: "0"})
        _read(w, n)
        if o:
            w.emit(f"{o} = {n};")
        w.noise()
        w.open(f"while ({n} > 0)")
        update(w, r, n)
        w.emit(f"{n} = {n} / 10;")
        w.close()
        if finish:
            finish(w, r, o or n)
        else:
            _print(w, r)
    return problem


def _reverse_step(w: Writer, r: str, n: str) -> None:
    w.emit(f"{r} = {r} * 10 + {n} % 10;")


def _yes_no(w: Writer, r: str, o: str) -> None:
    w.open(f"if ({o} == {r})")
    _print(w, "1")
    w.close()
    w.open("else")
    _print(w, "0")
    w.close()


def _max_digit(w: Writer, r: str, n: str) -> None:
    w.open(f"if ({n} % 10 > {r})")
    w.emit(f"{r} = {n} % 10;")
    w.close()


def _product_loop(use_base: bool):
    """f = 1; for i in 1..k: f *= (i or a); print f."""
    def problem(w: Writer) -> None:
        k, i, f = w.name(), w.name(), w.name()
        a = w.name() if use_base else None
        _declare(w, [k, i] + ([a] if a else []), {f: "1"})
        if a:
            _read(w, a, k)
        else:
            _read(w, k)
        w.noise()
        factor = a if a else i
        w.counted(i, "1", k, lambda: w.emit(f"{f} = {f} * {factor};"), cmp="<=")
        _print(w, f)
    return problem


def _divisor_loop(update: Callable[[Writer, str, str], None], breaks: bool = False):
    """for i in 2..n: if n % i == 0, update; print."""
    def problem(w: Writer) -> None:
        n, i, c = w.name(), w.name(), w.name()
        _declare(w, [n, i], {c: "0"})
        _read(w, n)
        w.noise()

        def body():
            w.open(f"if ({n} % {i} == 0)")
            update(w, c, i)
            if breaks:
                w.emit("break;")
            w.close()
        w.counted(i, "2", n, body)
        _print(w, c)
    return problem


def _gcd(w: Writer) -> None:
    a, b, t = w.name(), w.name(), w.name()
    _declare(w, [a, b, t], {})
    _read(w, a, b)
    w.noise()
    w.open(f"while ({b} != 0)")
    w.emit(f"{t} = {a} % {b};")
    w.emit(f"{a} = {b};")
    w.emit(f"{b} = {t};")
    w.close()
    _print(w, a)


def _fibonacci(w: Writer) -> None:
    n, i, a, b, t = w.name(), w.name(), w.name(), w.name(), w.name()
    _declare(w, [n, i, t], {a: "0", b: "1"})
    _read(w, n)
    w.noise()

    def body():
        w.emit(f"{t} = {a} + {b};")
        w.emit(f"{a} = {b};")
        w.emit(f"{b} = {t};")
    w.counted(i, "0", n, body)
    _print(w, a)


def _bubble_sort(w: Writer) -> None:
    arr, n, i, j, t = w.name(), w.name(), w.name(), w.name(), w.name()
    w.emit(f"int {arr}[100];")
    _declare(w, [n, i, j, t], {})
    _read_array(w, arr, n, i)
    w.noise()

    def inner():
        w.open(f"if ({arr}[{j}] > {arr}[{j} + 1])")
        w.emit(f"{t} = {arr}[{j}];")
        w.emit(f"{arr}[{j}] = {arr}[{j} + 1];")
        w.emit(f"{arr}[{j} + 1] = {t};")
        w.close()
    w.counted(i, "0", n, lambda: w.counted(j, "0", f"{n} - 1", inner))
    w.counted(i, "0", n, lambda: _print(w, f"{arr}[{i}]"))


def _count_matches(w: Writer) -> None:
    arr, n, i, k, c = w.name(), w.name(), w.name(), w.name(), w.name()
    w.emit(f"int {arr}[100];")
    _declare(w, [n, i, k], {c: "0"})
    _read_array(w, arr, n, i)
    _read(w, k)
    w.noise()

    def body():
        w.open(f"if ({arr}[{i}] == {k})")
        _add(w, c, "1")
        w.close()
    w.counted(i, "0", n, body)
    _print(w, c)


PROBLEMS: tuple[Callable[[Writer], None], ...] = (
    _reading_loop(lambda w, acc, x, i: _add(w, acc, x)),             # sum of the inputs
    _reading_loop(lambda w, acc, x, i: _add(w, acc, i)),             # sum of the positions
    _reading_loop(lambda w, acc, x, i: _add(w, acc, f"{x} * {x}")),  # sum of squares
    _reading_loop(lambda w, acc, x, i: _add(w, acc, f"{x} * {i}")),  # position-weighted sum
    _reading_loop(_keep_max, init="-1000000"),                       # maximum
    _digit_loop(_reverse_step),                                      # reversed number
    _digit_loop(lambda w, r, n: _add(w, r, f"{n} % 10")),            # digit sum
    _digit_loop(_reverse_step, _yes_no, keep_copy=True),             # palindrome test
    _product_loop(use_base=False),                                   # factorial
    _product_loop(use_base=True),                                    # power
    _digit_loop(lambda w, r, n: _add(w, r, "1")),                    # digit count
    _digit_loop(_max_digit),                                         # largest digit
    _divisor_loop(lambda w, c, i: _add(w, c, "1")),                  # divisor count
    _divisor_loop(lambda w, c, i: _add(w, c, i)),                    # divisor sum
    _divisor_loop(lambda w, c, i: w.emit(f"{c} = {i};"), breaks=True),  # smallest divisor
    _gcd,
    _fibonacci,
    _bubble_sort,
    _count_matches,
)


def generate_program(problem: int, rng: random.Random) -> str:
    """C source of one solution to ``problem`` (0-based index into PROBLEMS)."""
    w = Writer(rng)
    as_helper = rng.random() < 0.35
    if as_helper:
        helper = rng.choice(HELPER_POOL)
        w.open(f"void {helper}()")
        PROBLEMS[problem](w)
        w.close()
        w.emit("")
        w.open("int main()")
        w.emit(f"{helper}();")
    else:
        w.open("int main()")
        PROBLEMS[problem](w)
    w.emit("return 0;")
    w.close()
    return w.text()


def write_corpus(root: Path | str, n_classes: int, per_class: int, seed: int = 0) -> Path:
    """Write ``root/<class>/<k>.c`` with classes numbered from 1."""
    if not 1 <= n_classes <= len(PROBLEMS):
        raise ValueError(f"n_classes must be in [1, {len(PROBLEMS)}]")
    root = Path(root)
    for c in range(n_classes):
        folder = root / str(c + 1)
        folder.mkdir(parents=True, exist_ok=True)
        for k in range(per_class):
            rng = random.Random(f"{seed}:{c}:{k}")
            (folder / f"{k + 1}.c").write_text(generate_program(c, rng), encoding="utf-8")
    return root
