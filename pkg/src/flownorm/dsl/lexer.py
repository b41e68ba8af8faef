"""Tokenizer shared by the policy, flow-log, and ledger formats.

The whole input is tokenized up front in one regex pass; characters the
grammar has no use for are folded into ``error`` tokens (one per run), which
keeps lexing total and linear on arbitrary bytes.
"""

from __future__ import annotations

import re
from typing import NamedTuple


class Token(NamedTuple):
    kind: str
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
      (?P<skip>[ \t\r\n]+|\#[^\n]*)
    | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
    | (?P<ident>[a-z_][a-z0-9_]*)
    | (?P<string>"(?:\\.|[^"\\\n])*")
    | (?P<ge>>=)
    | (?P<le><=)
    | (?P<punct>[{}\[\](),;*=])
    """,
    re.VERBOSE,
)

_PUNCT_KIND = {
    "{": "lbrace",
    "}": "rbrace",
    "[": "lbracket",
    "]": "rbracket",
    "(": "lparen",
    ")": "rparen",
    ",": "comma",
    ";": "semi",
    "*": "star",
    "=": "eq",
}

_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", '"': '"', "\\": "\\"}


def unescape_string(lexeme: str) -> str:
    """Decode a quoted string token (including the surrounding quotes)."""
    body = lexeme[1:-1]
    out: list[str] = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\" and i + 1 < len(body):
            out.append(_ESCAPES.get(body[i + 1], body[i + 1]))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def escape_string(value: str) -> str:
    out = ['"']
    for ch in value:
        if ch == "\\":
            out.append("\\\\")
        elif ch == '"':
            out.append('\\"')
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\t":
            out.append("\\t")
        elif ch == "\r":
            out.append("\\r")
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


def tokenize(text: str) -> list[Token]:
    """Tokenize ``text`` completely, ending with a single ``eof`` token."""
    tokens: list[Token] = []
    line, col, pos = 1, 1, 0

    def bump(chunk: str) -> None:
        nonlocal line, col
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)

    for match in _TOKEN_RE.finditer(text):
        if match.start() > pos:
            gap = text[pos : match.start()]
            tokens.append(Token("error", gap, line, col))
            bump(gap)
        lexeme = match.group(0)
        kind = match.lastgroup
        if kind == "punct":
            tokens.append(Token(_PUNCT_KIND[lexeme], lexeme, line, col))
        elif kind != "skip":
            assert kind is not None
            tokens.append(Token(kind, lexeme, line, col))
        bump(lexeme)
        pos = match.end()

    if pos < len(text):
        gap = text[pos:]
        tokens.append(Token("error", gap, line, col))
        bump(gap)

    tokens.append(Token("eof", "", line, col))
    return tokens
