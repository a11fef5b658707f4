"""Tokenizer for ``.hl`` model files.

Statements are line-oriented; a newline inside ``()``, ``[]`` or ``{}`` does
not end the statement.  Names may contain ``.``, ``+`` and ``-`` after the
first character (``t1.5``, ``X+``), so binary ``+``/``-`` after a name needs
surrounding whitespace.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import syntax_error

NAME, NUMBER, KET, OP, NEWLINE, EOF = "NAME", "NUMBER", "KET", "OP", "NEWLINE", "EOF"

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\f]+)
  | (?P<comment>\#[^\n]*)
  | (?P<newline>\n)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?i?(?![A-Za-z_]))
  | (?P<name>[A-Za-z_](?:[A-Za-z0-9_.]|[+](?!>)|-(?!>))*)
  | (?P<ket>\|[^|>\n]*>)
  | (?P<op>=>|->|[{}()\[\],=@*/+\-;:])
""", re.VERBOSE)

_OPEN, _CLOSE = "([{", ")]}"


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int

    def is_op(self, text: str) -> bool:
        return self.kind == OP and self.text == text

    def is_word(self, text: str) -> bool:
        return self.kind == NAME and self.text == text


def tokenize(text: str) -> list[Token]:
    text = text.replace("\r\n", "\n")
    tokens: list[Token] = []
    depth: list[str] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise syntax_error(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        value = m.group()
        if kind == "newline":
            if not depth and tokens and tokens[-1].kind != NEWLINE:
                tokens.append(Token(NEWLINE, "\n", line, col))
            line += 1
            line_start = m.end()
        elif kind == "number":
            tokens.append(Token(NUMBER, value, line, col))
        elif kind == "name":
            tokens.append(Token(NAME, value, line, col))
        elif kind == "ket":
            tokens.append(Token(KET, value, line, col))
        elif kind == "op":
            if value in _OPEN:
                depth.append(value)
            elif value in _CLOSE:
                if not depth or _OPEN.index(depth[-1]) != _CLOSE.index(value):
                    raise syntax_error(f"unbalanced {value!r}", line, col)
                depth.pop()
            elif value == ";" and not depth:
                # ``;`` separates statements on one line
                if tokens and tokens[-1].kind != NEWLINE:
                    tokens.append(Token(NEWLINE, ";", line, col))
                pos = m.end()
                continue
            tokens.append(Token(OP, value, line, col))
        pos = m.end()
    if depth:
        raise syntax_error(f"unclosed {depth[-1]!r}", line, pos - line_start + 1)
    if tokens and tokens[-1].kind != NEWLINE:
        tokens.append(Token(NEWLINE, "\n", line, pos - line_start + 1))
    tokens.append(Token(EOF, "", line, pos - line_start + 1))
    return tokens
