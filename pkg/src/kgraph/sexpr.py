"""A small s-expression reader shared by the query, shapes and rule DSLs."""

from __future__ import annotations

from typing import Union


class SExprError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} at line {line}, column {col}")
        self.line = line
        self.col = col


class Quoted(str):
    """A double-quoted string literal, kept distinct from bare atoms."""

    __slots__ = ()

    def __repr__(self) -> str:
        return f"Quoted({str.__repr__(self)})"


SExpr = Union[str, Quoted, list]

_ESCAPES = {'"': '"', "\\": "\\", "n": "\n", "t": "\t"}


def _tokens(text: str):
    i, n = 0, len(text)
    line, line_start = 1, 0
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            line_start = i + 1
            i += 1
        elif ch.isspace():
            i += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "()":
            yield ch, line, i - line_start + 1
            i += 1
        elif ch == '"':
            col = i - line_start + 1
            i += 1
            buf = []
            while True:
                if i >= n:
                    raise SExprError("unterminated string", line, col)
                c = text[i]
                if c == "\\":
                    if i + 1 >= n or text[i + 1] not in _ESCAPES:
                        raise SExprError("bad escape", line, i - line_start + 1)
                    buf.append(_ESCAPES[text[i + 1]])
                    i += 2
                    continue
                if c == '"':
                    i += 1
                    break
                if c == "\n":
                    line += 1
                    line_start = i + 1
                buf.append(c)
                i += 1
            yield Quoted("".join(buf)), line, col
        else:
            start = i
            while i < n and not text[i].isspace() and text[i] not in '();"':
                i += 1
            yield text[start:i], line, start - line_start + 1


def read_all(text: str) -> list[SExpr]:
    """Parse every top-level form in ``text``."""
    stack: list[list] = [[]]
    opened: list[tuple[int, int]] = []
    for tok, line, col in _tokens(text):
        if isinstance(tok, Quoted):
            stack[-1].append(tok)
        elif tok == "(":
            stack.append([])
            opened.append((line, col))
        elif tok == ")":
            if len(stack) == 1:
                raise SExprError("unexpected ')'", line, col)
            done = stack.pop()
            opened.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    if len(stack) > 1:
        line, col = opened[-1]
        raise SExprError("unclosed '('", line, col)
    return stack[0]


def read_one(text: str) -> SExpr:
    forms = read_all(text)
    if len(forms) != 1:
        raise SExprError(f"expected exactly one form, found {len(forms)}", 1, 1)
    return forms[0]


def is_atom(x: SExpr, name: str | None = None) -> bool:
    if isinstance(x, list) or isinstance(x, Quoted):
        return False
    return name is None or x == name


def dump(x: SExpr) -> str:
    if isinstance(x, Quoted):
        return '"' + x.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(x, list):
        return "(" + " ".join(dump(y) for y in x) + ")"
    return x
