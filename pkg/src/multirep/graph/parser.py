"""Recursive-descent parser for a small C subset, producing one AST per function.

Supported: function definitions, declarations (scalars, pointers, arrays,
initializer lists), assignments, if/else, while, for, break, continue,
return, calls, unary/binary/ternary/cast/sizeof expressions and literals.
``goto``, ``switch``, ``do`` and aggregate types raise
:class:`UnsupportedConstruct`. Preprocessor lines are blanked out.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .model import CodeGraph, Edge, EdgeLabel, Node

TERMINAL_TYPES = frozenset({
    "Identifier", "Callee", "FunctionName", "TypeName",
    "IntLiteral", "FloatLiteral", "CharLiteral", "StringLiteral", "BoolLiteral",
})

OPERATOR_NAMES = {
    "+": "Plus", "-": "Minus", "*": "Times", "/": "Divide", "%": "Remainder",
    "<": "Less", ">": "Greater", "<=": "LessEquals", ">=": "GreaterEquals",
    "==": "Equals", "!=": "NotEquals", "&&": "And", "||": "Or",
    "&": "BitAnd", "|": "BitOr", "^": "Xor", "<<": "ShiftLeft", ">>": "ShiftRight",
}

BINARY_PRECEDENCE = {
    "||": 1, "&&": 2, "|": 3, "^": 4, "&": 5, "==": 6, "!=": 6,
    "<": 7, ">": 7, "<=": 7, ">=": 7, "<<": 8, ">>": 8,
    "+": 9, "-": 9, "*": 10, "/": 10, "%": 10,
}

ASSIGN_OPS = {"=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>="}

UNARY_NAMES = {"!": "Not", "~": "BitNot", "-": "Minus", "+": "Plus", "&": "AddressOf", "*": "Deref"}

TYPE_KEYWORDS = frozenset({
    "void", "char", "short", "int", "long", "float", "double", "signed", "unsigned",
    "const", "static", "extern", "register", "volatile", "inline", "_Bool", "bool",
})
UNSUPPORTED_KEYWORDS = frozenset({"goto", "switch", "case", "default", "do", "struct", "union", "enum", "typedef"})
KEYWORDS = TYPE_KEYWORDS | UNSUPPORTED_KEYWORDS | {"if", "else", "while", "for", "break", "continue", "return", "sizeof"}


class CSyntaxError(Exception):
    def __init__(self, message: str, line: int, column: int, expected: Optional[str] = None):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column
        self.expected = expected


class UnsupportedConstruct(Exception):
    def __init__(self, construct: str, line: int = 0, column: int = 0):
        super().__init__(f"{line}:{column}: unsupported construct {construct!r}")
        self.construct = construct
        self.line = line
        self.column = column


# ---------------------------------------------------------------------------
# Lexer

@dataclass(frozen=True)
class Token:
    kind: str  # ident, keyword, int, float, char, string, op, eof
    text: str
    line: int
    column: int


_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\f\v]+|\n)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<float>(?:\d+\.\d*|\.\d+)(?:[eE][+-]?\d+)?[fFlL]?|\d+[eE][+-]?\d+[fFlL]?)
  | (?P<int>0[xX][0-9a-fA-F]+[uUlL]*|\d+[uUlL]*)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<char>'(?:\\.|[^'\\\n])+')
  | (?P<string>"(?:\\.|[^"\\\n])*")
  | (?P<op><<=|>>=|\.\.\.|->|\+\+|--|<<|>>|<=|>=|==|!=|&&|\|\||[+\-*/%]=|[&|^]=|[-+*/%<>=!&|^~?:;,.(){}\[\]])
""", re.VERBOSE | re.DOTALL)


def strip_preprocessor(source: str) -> str:
    """Blank out preprocessor lines (and their continuations), keeping line numbers."""
    out, continuing = [], False
    for line in source.split("\n"):
        if continuing or line.lstrip().startswith("#"):
            continuing = line.rstrip().endswith("\\")
            out.append("")
        else:
            out.append(line)
    return "\n".join(out)


def tokenize(source: str) -> list[Token]:
    source = strip_preprocessor(source)
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise CSyntaxError(f"unexpected character {source[pos]!r}", line, pos - line_start + 1)
        kind, text = m.lastgroup, m.group()
        if kind not in ("ws", "comment"):
            if kind == "ident" and text in KEYWORDS:
                kind = "keyword"
            tokens.append(Token(kind, text, line, pos - line_start + 1))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = pos + text.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# ---------------------------------------------------------------------------
# Parse tree (flattened into a CodeGraph once a function is complete)

@dataclass
class _N:
    node_type: str
    token: str = ""
    children: list["_N"] = field(default_factory=list)


def _leaf(node_type: str, token: str) -> _N:
    return _N(node_type, token)


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    # -- token plumbing ----------------------------------------------------

    @property
    def cur(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def at(self, text: str) -> bool:
        tok = self.cur
        return tok.text == text and tok.kind in ("op", "keyword")

    def advance(self) -> Token:
        tok = self.cur
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}, found {self.cur.text or 'end of input'!r}", expected=text)
        return self.advance()

    def expect_ident(self) -> Token:
        if self.cur.kind != "ident":
            self.error(f"expected identifier, found {self.cur.text or 'end of input'!r}", expected="identifier")
        return self.advance()

    def error(self, message: str, expected: Optional[str] = None):
        raise CSyntaxError(message, self.cur.line, self.cur.column, expected)

    def check_supported(self) -> None:
        tok = self.cur
        if tok.kind == "keyword" and tok.text in UNSUPPORTED_KEYWORDS:
            raise UnsupportedConstruct(tok.text, tok.line, tok.column)

    def at_type(self) -> bool:
        self.check_supported()
        return self.cur.kind == "keyword" and self.cur.text in TYPE_KEYWORDS

    # -- top level ---------------------------------------------------------

    def translation_unit(self) -> list[_N]:
        functions = []
        while self.cur.kind != "eof":
            if self.at(";"):
                self.advance()
                continue
            fn = self.external_declaration()
            if fn is not None:
                functions.append(fn)
        return functions

    def type_specifiers(self) -> str:
        words = []
        while self.at_type():
            words.append(self.advance().text)
        if not words:
            self.error(f"expected type specifier, found {self.cur.text or 'end of input'!r}", expected="type")
        return " ".join(words)

    def external_declaration(self) -> Optional[_N]:
        if not self.at_type() and self.cur.kind == "ident" and self.peek().text == "(":
            base = "int"  # implicit-int function definitions, e.g. ``main() {...}``
        else:
            base = self.type_specifiers()
        save = self.pos
        stars = ""
        while self.at("*"):
            self.advance()
            stars += "*"
        if self.cur.kind == "ident" and self.peek().text == "(":
            name = self.advance().text
            params = self.parameter_list()
            if self.at(";"):
                self.advance()
                return None  # prototype
            body = self.compound()
            ret = _leaf("TypeName", base + (" " + stars if stars else ""))
            return _N("FunctionDef", name, [ret, _leaf("FunctionName", name), params, body])
        self.pos = save
        self.declarators(base)
        self.expect(";")
        return None  # global declaration: outside any function graph

    def parameter_list(self) -> _N:
        self.expect("(")
        params = _N("ParameterList", "")
        if self.at("void") and self.peek().text == ")":
            self.advance()
        while not self.at(")"):
            if self.at("..."):
                raise UnsupportedConstruct("...", self.cur.line, self.cur.column)
            base = self.type_specifiers()
            stars = ""
            while self.at("*"):
                self.advance()
                stars += "*"
            children = [_leaf("TypeName", base + (" " + stars if stars else ""))]
            text = base + " " + stars
            if self.cur.kind == "ident":
                name = self.advance().text
                children.append(_leaf("Identifier", name))
                text += name
            while self.at("["):
                self.advance()
                if not self.at("]"):
                    self.conditional()
                self.expect("]")
                text += "[]"
            params.children.append(_N("Parameter", text.strip(), children))
            if not self.at(")"):
                self.expect(",")
        self.expect(")")
        params.token = "(" + ", ".join(p.token for p in params.children) + ")"
        return params

    # -- declarations ------------------------------------------------------

    def declaration(self) -> _N:
        base = self.type_specifiers()
        decls = self.declarators(base)
        text = base + " " + ", ".join(d.token for d in decls)
        return _N("DeclStatement", text, [_leaf("TypeName", base)] + decls)

    def declarators(self, base: str) -> list[_N]:
        decls = []
        while True:
            stars = ""
            while self.at("*"):
                self.advance()
                stars += "*"
            name = self.expect_ident().text
            children = [_leaf("Identifier", name)]
            text = stars + name
            while self.at("["):
                self.advance()
                if self.at("]"):
                    text += "[]"
                else:
                    size = self.conditional()
                    children.append(_N("ArraySize", size.token, [size]))
                    text += f"[{size.token}]"
                self.expect("]")
            if self.at("="):
                self.advance()
                init = self.initializer()
                children.append(init)
                text += " = " + init.token
            decls.append(_N("Declarator", text, children))
            if not self.at(","):
                return decls
            self.advance()

    def initializer(self) -> _N:
        if self.at("{"):
            self.advance()
            items = []
            while not self.at("}"):
                items.append(self.initializer())
                if not self.at("}"):
                    self.expect(",")
                    if self.at("}"):
                        break
            self.expect("}")
            return _N("InitializerList", "{" + ", ".join(i.token for i in items) + "}", items)
        return self.assignment()

    # -- statements --------------------------------------------------------

    def compound(self) -> _N:
        self.expect("{")
        block = _N("CompoundStatement", "")
        while not self.at("}"):
            if self.cur.kind == "eof":
                self.error("unterminated block", expected="}")
            block.children.append(self.statement())
        self.expect("}")
        return block

    def statement(self) -> _N:
        self.check_supported()
        tok = self.cur
        if self.at("{"):
            return self.compound()
        if self.at(";"):
            self.advance()
            return _N("EmptyStatement", ";")
        if self.at_type():
            decl = self.declaration()
            self.expect(";")
            return decl
        if tok.kind == "keyword":
            if tok.text == "if":
                return self.if_statement()
            if tok.text == "while":
                self.advance()
                self.expect("(")
                cond = self.expression()
                self.expect(")")
                body = self.statement()
                header = _N("WhileCondition", f"while ({cond.token})", [cond])
                return _N("WhileStatement", header.token, [header, body])
            if tok.text == "for":
                return self.for_statement()
            if tok.text in ("break", "continue"):
                self.advance()
                self.expect(";")
                return _N(tok.text.capitalize() + "Statement", tok.text)
            if tok.text == "return":
                self.advance()
                if self.at(";"):
                    self.advance()
                    return _N("ReturnStatement", "return")
                value = self.expression()
                self.expect(";")
                return _N("ReturnStatement", f"return {value.token}", [value])
            if tok.text == "else":
                self.error("'else' without matching 'if'")
        expr = self.expression()
        self.expect(";")
        return expr

    def if_statement(self) -> _N:
        self.expect("if")
        self.expect("(")
        cond = self.expression()
        self.expect(")")
        header = _N("IfCondition", f"if ({cond.token})", [cond])
        node = _N("IfStatement", header.token, [header, self.statement()])
        if self.at("else"):
            self.advance()
            node.children.append(_N("ElseStatement", "else", [self.statement()]))
        return node

    def for_statement(self) -> _N:
        self.expect("for")
        self.expect("(")
        init = None
        if not self.at(";"):
            init = self.declaration() if self.at_type() else self.expression()
        self.expect(";")
        cond = None if self.at(";") else self.expression()
        self.expect(";")
        step = None if self.at(")") else self.expression()
        self.expect(")")
        body = self.statement()
        parts = [x.token if x is not None else "" for x in (init, cond, step)]
        header_text = "for (" + "; ".join(parts) + ")"
        children = []
        if init is not None:
            children.append(_N("ForInit", init.token, [init]))
        children.append(_N("ForCondition", f"for ({parts[1]})" if cond else "for (;;)", [cond] if cond else []))
        if step is not None:
            children.append(_N("ForIncrement", step.token, [step]))
        children.append(body)
        return _N("ForStatement", header_text, children)

    # -- expressions -------------------------------------------------------

    def expression(self) -> _N:
        first = self.assignment()
        if not self.at(","):
            return first
        items = [first]
        while self.at(","):
            self.advance()
            items.append(self.assignment())
        return _N("CommaExpr", ", ".join(i.token for i in items), items)

    def assignment(self) -> _N:
        lhs = self.conditional()
        if self.cur.kind == "op" and self.cur.text in ASSIGN_OPS:
            op = self.advance().text
            rhs = self.assignment()
            kind = "AssignmentExpr" if op == "=" else "AssignmentExpr:" + OPERATOR_NAMES[op[:-1]]
            return _N(kind, f"{lhs.token} {op} {rhs.token}", [lhs, rhs])
        return lhs

    def conditional(self) -> _N:
        cond = self.binary(1)
        if not self.at("?"):
            return cond
        self.advance()
        yes = self.expression()
        self.expect(":")
        no = self.conditional()
        return _N("ConditionalExpr", f"{cond.token} ? {yes.token} : {no.token}", [cond, yes, no])

    def binary(self, min_prec: int) -> _N:
        lhs = self.unary()
        while True:
            tok = self.cur
            prec = BINARY_PRECEDENCE.get(tok.text) if tok.kind == "op" else None
            if prec is None or prec < min_prec:
                return lhs
            self.advance()
            rhs = self.binary(prec + 1)
            lhs = _N("BinaryExpr:" + OPERATOR_NAMES[tok.text], f"{lhs.token} {tok.text} {rhs.token}", [lhs, rhs])

    def unary(self) -> _N:
        tok = self.cur
        if tok.kind == "op" and tok.text in ("++", "--"):
            self.advance()
            operand = self.unary()
            kind = "UnaryExpr:PreIncrement" if tok.text == "++" else "UnaryExpr:PreDecrement"
            return _N(kind, tok.text + operand.token, [operand])
        if tok.kind == "op" and tok.text in UNARY_NAMES:
            self.advance()
            operand = self.unary()
            return _N("UnaryExpr:" + UNARY_NAMES[tok.text], tok.text + operand.token, [operand])
        if self.at("sizeof"):
            self.advance()
            if self.at("(") and self.peek().kind == "keyword" and self.peek().text in TYPE_KEYWORDS:
                self.advance()
                typ = self.type_name()
                self.expect(")")
                return _N("SizeofExpr", f"sizeof({typ.token})", [typ])
            operand = self.unary()
            return _N("SizeofExpr", f"sizeof {operand.token}", [operand])
        if self.at("(") and self.peek().kind == "keyword" and self.peek().text in TYPE_KEYWORDS:
            self.advance()
            typ = self.type_name()
            self.expect(")")
            operand = self.unary()
            return _N("CastExpr", f"({typ.token}) {operand.token}", [typ, operand])
        return self.postfix()

    def type_name(self) -> _N:
        base = self.type_specifiers()
        stars = ""
        while self.at("*"):
            self.advance()
            stars += "*"
        return _leaf("TypeName", base + (" " + stars if stars else ""))

    def postfix(self) -> _N:
        node = self.primary()
        while True:
            if self.at("["):
                self.advance()
                index = self.expression()
                self.expect("]")
                node = _N("ArrayIndexing", f"{node.token}[{index.token}]", [node, index])
            elif self.at("("):
                if node.node_type != "Identifier":
                    self.error("only direct calls by name are supported")
                self.advance()
                args = []
                while not self.at(")"):
                    args.append(self.assignment())
                    if not self.at(")"):
                        self.expect(",")
                self.expect(")")
                arg_text = ", ".join(a.token for a in args)
                callee = _leaf("Callee", node.token)
                node = _N("CallExpr", f"{node.token}({arg_text})", [callee, _N("ArgumentList", f"({arg_text})", args)])
            elif self.cur.kind == "op" and self.cur.text in ("++", "--"):
                op = self.advance().text
                kind = "PostfixExpr:Increment" if op == "++" else "PostfixExpr:Decrement"
                node = _N(kind, node.token + op, [node])
            elif self.at(".") or self.at("->"):
                raise UnsupportedConstruct("member access", self.cur.line, self.cur.column)
            else:
                return node

    def primary(self) -> _N:
        tok = self.cur
        if tok.kind == "ident":
            self.advance()
            if tok.text in ("true", "false"):
                return _leaf("BoolLiteral", tok.text)
            return _leaf("Identifier", tok.text)
        if tok.kind == "int":
            self.advance()
            return _leaf("IntLiteral", tok.text)
        if tok.kind == "float":
            self.advance()
            return _leaf("FloatLiteral", tok.text)
        if tok.kind == "char":
            self.advance()
            return _leaf("CharLiteral", tok.text)
        if tok.kind == "string":
            parts = []
            while self.cur.kind == "string":
                parts.append(self.advance().text)
            return _leaf("StringLiteral", " ".join(parts))
        if self.at("("):
            self.advance()
            inner = self.expression()
            self.expect(")")
            inner.token = f"({inner.token})"
            return inner
        self.check_supported()
        self.error(f"expected expression, found {tok.text or 'end of input'!r}", expected="expression")


def _flatten(fn: _N) -> CodeGraph:
    nodes: list[Node] = []
    edges: list[Edge] = []
    leaf_count = 0
    stack: list[tuple[_N, Optional[int]]] = [(fn, None)]
    while stack:
        item, parent = stack.pop()
        nid = len(nodes)
        leaf = None
        if item.node_type in TERMINAL_TYPES:
            leaf = leaf_count
            leaf_count += 1
        nodes.append(Node(nid, item.node_type, item.token, leaf))
        if parent is not None:
            edges.append(Edge(parent, nid, EdgeLabel.AST))
        stack.extend((child, nid) for child in reversed(item.children))
    return CodeGraph(fn.token, tuple(nodes), tuple(edges))


def parse_c(source: str) -> list[CodeGraph]:
    """Parse ``source`` and return one AST :class:`CodeGraph` per function definition."""
    parser = _Parser(tokenize(source))
    return [_flatten(fn) for fn in parser.translation_unit()]
