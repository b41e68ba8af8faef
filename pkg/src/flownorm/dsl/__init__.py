"""Textual policy language: parser, canonical printer, and error types.

Policies live in `.cip` files, flow logs in `.cif` files, and persisted
budget ledgers in `.ledger` files; all three share one lexer and the
`# cip-version: 1` header convention. Files are UTF-8 with LF or CRLF line
endings; the canonical printer emits LF.
"""

from .lexer import Token, tokenize
from .parser import ParseError, parse_flows, parse_ledger, parse_policy, render_parse_error
from .printer import print_flows, print_ledger, print_policy

__all__ = [
    "ParseError",
    "Token",
    "parse_flows",
    "parse_ledger",
    "parse_policy",
    "print_flows",
    "print_ledger",
    "print_policy",
    "render_parse_error",
    "tokenize",
]
