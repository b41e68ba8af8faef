"""Recursive-descent parser for `.cip` policies, `.cif` flow logs, and ledgers.

Single-token lookahead over the token list produced by :mod:`.lexer`.
Keywords are contextual: the lexer emits plain identifiers and each
production matches the words it expects, so declared ids are never shadowed.

On a syntax error the parser records a positioned :class:`ParseError` and
recovers: declaration errors skip to the next ``;`` within the block, block
errors skip past the next ``}``. Parsing never raises on arbitrary input; a
document parses to a value only when no errors were recorded.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable

from ..model import (
    BudgetCap,
    Context,
    DpModel,
    FlowEvent,
    InformationNorm,
    KindRef,
    Modality,
    Pattern,
    PropertyKind,
    PropertyRequirement,
    TransmissionProperty,
)
from .lexer import Token, tokenize, unescape_string

MAX_ERRORS = 64
_INT_RE = re.compile(r"\d+$")

_KIND_WORDS = {
    "none": PropertyKind.NO_PET,
    "dp": PropertyKind.DP,
    "swapping": PropertyKind.SWAPPING,
    "encryption": PropertyKind.ENCRYPTION,
    "smpc": PropertyKind.SMPC,
}

_MODEL_WORDS = {
    "central": DpModel.CENTRAL,
    "shuffle": DpModel.SHUFFLE,
    "local": DpModel.LOCAL,
}

_VERB_WORDS = {
    "allow": Modality.PERMITTED,
    "forbid": Modality.FORBIDDEN,
    "require": Modality.REQUIRED,
}


@dataclass(frozen=True)
class ParseError:
    """A positioned syntax error; line and column are 1-based."""

    line: int
    column: int
    expected: str
    found: str
    message: str


def _describe(tok: Token) -> str:
    if tok.kind == "eof":
        return "end of input"
    text = tok.text
    if len(text) > 24:
        text = text[:24] + "..."
    return repr(text)


class _Bail(Exception):
    """Unwind to the nearest recovery point."""


class _Abort(Exception):
    """Too many errors; stop parsing."""


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0
        self.errors: list[ParseError] = []

    # -- token plumbing ----------------------------------------------------

    def peek(self) -> Token:
        return self.toks[self.i]

    def advance(self) -> Token:
        tok = self.toks[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def at(self, kind: str) -> bool:
        return self.peek().kind == kind

    def at_word(self, *words: str) -> bool:
        tok = self.peek()
        return tok.kind == "ident" and tok.text in words

    def record(self, expected: str, tok: Token | None = None) -> None:
        tok = tok or self.peek()
        found = _describe(tok)
        self.errors.append(
            ParseError(tok.line, tok.col, expected, tok.text, f"expected {expected}, found {found}")
        )
        if len(self.errors) >= MAX_ERRORS:
            raise _Abort

    def fail(self, expected: str, tok: Token | None = None) -> None:
        self.record(expected, tok)
        raise _Bail

    def expect(self, kind: str, expected: str) -> Token:
        if self.at(kind):
            return self.advance()
        self.fail(expected)
        raise AssertionError("unreachable")

    def expect_word(self, word: str) -> Token:
        if self.at_word(word):
            return self.advance()
        self.fail(f"`{word}`")
        raise AssertionError("unreachable")

    # -- recovery ----------------------------------------------------------

    def skip_past_rbrace(self) -> None:
        while not self.at("rbrace") and not self.at("eof"):
            self.advance()
        if self.at("rbrace"):
            self.advance()

    def skip_to_semi_or_rbrace(self) -> None:
        while self.peek().kind not in ("semi", "rbrace", "eof"):
            self.advance()
        if self.at("semi"):
            self.advance()

    # -- shared small productions -------------------------------------------

    def parse_ident(self, what: str) -> str:
        return self.expect("ident", what).text

    def parse_number(self, what: str = "a number") -> float:
        tok = self.peek()
        if tok.kind == "number":
            self.advance()
            return float(tok.text)
        if tok.kind == "ident" and tok.text == "inf":
            self.advance()
            return math.inf
        self.fail(what)
        raise AssertionError("unreachable")

    def parse_int(self, what: str = "an integer") -> int:
        tok = self.peek()
        if tok.kind == "number" and _INT_RE.fullmatch(tok.text):
            self.advance()
            return int(tok.text)
        self.fail(what)
        raise AssertionError("unreachable")

    def parse_delta(self, what: str = "a delta in [0, 1)") -> float:
        tok = self.peek()
        value = self.parse_number(what)
        if not 0.0 <= value < 1.0:
            self.fail(what, tok)
        return value

    def parse_id_list(self, *, allow_empty: bool, closer: str = "rbracket") -> list[str]:
        items: list[str] = []
        if self.at(closer):
            self.advance()
            if not allow_empty:
                self.fail("at least one id")
            return items
        items.append(self.parse_ident("an id"))
        while self.at("comma"):
            self.advance()
            items.append(self.parse_ident("an id"))
        self.expect(closer, "`,` or closing bracket")
        return items

    def parse_tag(self) -> str:
        tok = self.peek()
        if tok.kind == "ident":
            self.advance()
            return tok.text
        if tok.kind == "string":
            self.advance()
            return unescape_string(tok.text)
        self.fail("an id or quoted string")
        raise AssertionError("unreachable")

    def parse_tag_list(self) -> list[str]:
        self.expect("lbracket", "`[`")
        items: list[str] = []
        if self.at("rbracket"):
            self.advance()
            return items
        items.append(self.parse_tag())
        while self.at("comma"):
            self.advance()
            items.append(self.parse_tag())
        self.expect("rbracket", "`,` or `]`")
        return items

    def parse_pattern(self) -> Pattern:
        tok = self.peek()
        if tok.kind == "star":
            self.advance()
            return Pattern.ANY
        if tok.kind == "ident":
            self.advance()
            return Pattern.exact(tok.text)
        if tok.kind == "lbracket":
            self.advance()
            return Pattern.of(self.parse_id_list(allow_empty=False))
        self.fail("a pattern (`*`, an id, or `[id, ...]`)")
        raise AssertionError("unreachable")

    def parse_principle_list(self) -> list[str]:
        # Brackets are canonical; braces are accepted as an alternate spelling.
        if self.at("lbrace"):
            self.advance()
            return self.parse_id_list(allow_empty=True, closer="rbrace")
        self.expect("lbracket", "`[` or `{`")
        return self.parse_id_list(allow_empty=True)

    def parse_kind_ref(self) -> KindRef:
        tok = self.peek()
        if tok.kind == "ident" and tok.text in _KIND_WORDS:
            self.advance()
            return KindRef(_KIND_WORDS[tok.text])
        if self.at_word("custom"):
            self.advance()
            self.expect("lparen", "`(`")
            name = self.parse_ident("a custom kind name")
            self.expect("rparen", "`)`")
            return KindRef(PropertyKind.CUSTOM, name)
        self.fail("a property kind (none, dp, swapping, encryption, smpc, custom(...))")
        raise AssertionError("unreachable")

    def parse_kv_args(
        self, parsers: dict[str, Callable[[], object]], required: tuple[str, ...]
    ) -> dict[str, object]:
        """Parse `(key=value, ...)` with per-key value parsers; keys order-free."""
        self.expect("lparen", "`(`")
        out: dict[str, object] = {}
        if not self.at("rparen"):
            while True:
                key_tok = self.peek()
                key = self.parse_ident("an argument name")
                if key not in parsers:
                    self.fail(f"one of {', '.join(sorted(parsers))}", key_tok)
                if key in out:
                    self.fail(f"argument `{key}` given once", key_tok)
                self.expect("eq", "`=`")
                out[key] = parsers[key]()
                if not self.at("comma"):
                    break
                self.advance()
        close = self.peek()
        self.expect("rparen", "`,` or `)`")
        for key in required:
            if key not in out:
                self.fail(f"argument `{key}`", close)
        return out

    # -- property requirements / concrete properties -------------------------

    def parse_dp_ceiling_args(self) -> PropertyRequirement:
        """Shared tail of `dp_at_most(model>=m, eps<=x, delta<=y)`."""
        self.expect("lparen", "`(`")
        model_min: DpModel | None = None
        eps_max: float | None = None
        delta_max: float | None = None
        seen: set[str] = set()
        if not self.at("rparen"):
            while True:
                key_tok = self.peek()
                key = self.parse_ident("`model`, `eps`, or `delta`")
                if key not in ("model", "eps", "delta"):
                    self.fail("`model`, `eps`, or `delta`", key_tok)
                if key in seen:
                    self.fail(f"argument `{key}` given once", key_tok)
                seen.add(key)
                if key == "model":
                    self.expect("ge", "`>=`")
                    model_min = self.parse_model_floor()
                elif key == "eps":
                    self.expect("le", "`<=`")
                    eps_max = self.parse_number("a nonnegative epsilon ceiling")
                else:
                    self.expect("le", "`<=`")
                    delta_max = self.parse_delta("a delta ceiling in [0, 1)")
                if not self.at("comma"):
                    break
                self.advance()
        close = self.peek()
        self.expect("rparen", "`,` or `)`")
        if eps_max is None:
            self.fail("an `eps<=` ceiling", close)
        if delta_max is None:
            self.fail("a `delta<=` ceiling", close)
        assert eps_max is not None and delta_max is not None
        return PropertyRequirement.dp_at_most(model_min, eps_max, delta_max)

    def parse_model_floor(self) -> DpModel | None:
        tok = self.peek()
        if tok.kind == "ident" and tok.text in _MODEL_WORDS:
            self.advance()
            return _MODEL_WORDS[tok.text]
        if self.at_word("any"):
            self.advance()
            return None
        self.fail("a trust model (central, shuffle, local, any)")
        raise AssertionError("unreachable")

    def parse_model(self) -> DpModel:
        tok = self.peek()
        if tok.kind == "ident" and tok.text in _MODEL_WORDS:
            self.advance()
            return _MODEL_WORDS[tok.text]
        self.fail("a trust model (central, shuffle, local)")
        raise AssertionError("unreachable")

    def parse_property_requirement(self) -> PropertyRequirement:
        tok = self.peek()
        if self.at_word("any"):
            self.advance()
            return PropertyRequirement.any_property()
        if self.at_word("not"):
            self.advance()
            self.expect("lbracket", "`[`")
            refs = [self.parse_kind_ref()]
            while self.at("comma"):
                self.advance()
                refs.append(self.parse_kind_ref())
            self.expect("rbracket", "`,` or `]`")
            return PropertyRequirement.not_kinds(refs)
        if self.at_word("dp_at_most"):
            self.advance()
            return self.parse_dp_ceiling_args()
        if self.at_word("dp"):
            self.advance()
            if self.at("lparen"):
                # `dp(model=m, eps=x, delta=y)` in norm position is shorthand
                # for a ceiling at exactly those parameters.
                args = self.parse_kv_args(
                    {
                        "model": self.parse_model_floor,
                        "eps": lambda: self.parse_number("a nonnegative epsilon"),
                        "delta": lambda: self.parse_delta(),
                    },
                    required=("eps", "delta"),
                )
                return PropertyRequirement.dp_at_most(
                    args.get("model"),  # type: ignore[arg-type]
                    args["eps"],  # type: ignore[arg-type]
                    args["delta"],  # type: ignore[arg-type]
                )
            return PropertyRequirement.exact_kind(KindRef(PropertyKind.DP))
        if tok.kind == "ident" and (tok.text in _KIND_WORDS or tok.text == "custom"):
            return PropertyRequirement.exact_kind(self.parse_kind_ref())
        self.fail("a property requirement (any, none, swapping, encryption, smpc, custom(...), dp, dp_at_most(...), not [...])")
        raise AssertionError("unreachable")

    def parse_flow_property(self) -> tuple[TransmissionProperty, str | None]:
        """Concrete property in a flow's `with` clause, plus the dataset tag."""
        tok = self.peek()
        if self.at_word("dp"):
            self.advance()
            if not self.at("lparen"):
                self.fail("`(` (a DP property needs at least model=...)")
            args = self.parse_kv_args(
                {
                    "model": self.parse_model,
                    "eps": lambda: self.parse_number("a nonnegative epsilon"),
                    "delta": lambda: self.parse_delta(),
                    "mechanism": lambda: self.parse_ident("a mechanism name"),
                    "dataset": lambda: self.parse_ident("a dataset id"),
                    "releases": lambda: self.parse_int("a positive release count"),
                },
                required=("model",),
            )
            releases = args.get("releases", 1)
            assert isinstance(releases, int)
            if releases < 1:
                self.fail("a positive release count")
            prop = TransmissionProperty.dp(
                args["model"],  # type: ignore[arg-type]
                epsilon=args.get("eps"),  # type: ignore[arg-type]
                delta=args.get("delta"),  # type: ignore[arg-type]
                mechanism=args.get("mechanism"),  # type: ignore[arg-type]
                composed_release_count=releases,
            )
            return prop, args.get("dataset")  # type: ignore[return-value]
        if self.at_word("custom"):
            ref = self.parse_kind_ref()
            return TransmissionProperty.custom(ref.custom_name or ""), None
        if tok.kind == "ident" and tok.text in _KIND_WORDS and tok.text != "dp":
            self.advance()
            return TransmissionProperty(_KIND_WORDS[tok.text]), None
        self.fail("a transmission property (none, swapping, encryption, smpc, custom(...), dp(...))")
        raise AssertionError("unreachable")

    # -- policy --------------------------------------------------------------

    def parse_norm(self) -> InformationNorm:
        self.expect_word("norm")
        norm_id = self.parse_ident("a norm id")
        self.expect("lbrace", "`{`")
        verb_tok = self.peek()
        if not (verb_tok.kind == "ident" and verb_tok.text in _VERB_WORDS):
            self.fail("`allow`, `forbid`, or `require`")
        self.advance()
        modality = _VERB_WORDS[verb_tok.text]
        self.expect_word("from")
        sender = self.parse_pattern()
        self.expect_word("to")
        receiver = self.parse_pattern()
        self.expect_word("about")
        subject = self.parse_pattern()
        self.expect_word("attrs")
        attributes = self.parse_pattern()
        self.expect_word("when")
        principles = self.parse_principle_list()
        self.expect_word("with")
        requirement = self.parse_property_requirement()
        self.expect("rbrace", "`}`")
        return InformationNorm(
            id=norm_id,
            modality=modality,
            sender=sender,
            receiver=receiver,
            subject=subject,
            attributes=attributes,
            principles=frozenset(principles),
            property=requirement,
        )

    def parse_context(self) -> Context:
        self.expect_word("context")
        ctx_id = self.parse_ident("a context id")
        self.expect("lbrace", "`{`")

        purposes: set[str] = set()
        roles: set[str] = set()
        attributes: set[str] = set()
        principles: set[str] = set()
        properties: set[KindRef] = set()
        norms: list[InformationNorm] = []
        budget: BudgetCap | None = None

        while not self.at("rbrace") and not self.at("eof"):
            start = self.i
            tok = self.peek()
            try:
                if self.at_word("norm"):
                    norms.append(self.parse_norm())
                elif self.at_word("purposes"):
                    self.advance()
                    purposes.update(self.parse_tag_list())
                    self.expect("semi", "`;`")
                elif self.at_word("roles"):
                    self.advance()
                    self.expect("lbracket", "`[`")
                    roles.update(self.parse_id_list(allow_empty=True))
                    self.expect("semi", "`;`")
                elif self.at_word("attrs"):
                    self.advance()
                    self.expect("lbracket", "`[`")
                    attributes.update(self.parse_id_list(allow_empty=True))
                    self.expect("semi", "`;`")
                elif self.at_word("principles"):
                    self.advance()
                    self.expect("lbracket", "`[`")
                    principles.update(self.parse_id_list(allow_empty=True))
                    self.expect("semi", "`;`")
                elif self.at_word("props"):
                    self.advance()
                    self.expect("lbracket", "`[`")
                    if not self.at("rbracket"):
                        properties.add(self.parse_kind_ref())
                        while self.at("comma"):
                            self.advance()
                            properties.add(self.parse_kind_ref())
                    self.expect("rbracket", "`,` or `]`")
                    self.expect("semi", "`;`")
                elif self.at_word("budget"):
                    budget_tok = self.advance()
                    args = self.parse_kv_args(
                        {
                            "eps": lambda: self.parse_number("an epsilon budget"),
                            # Range defects in the cap are the validator's to
                            # report, so any number parses here.
                            "delta": lambda: self.parse_number("a delta budget"),
                        },
                        required=("eps", "delta"),
                    )
                    self.expect("semi", "`;`")
                    if budget is not None:
                        self.record("a single budget declaration", budget_tok)
                    else:
                        budget = BudgetCap(args["eps"], args["delta"])  # type: ignore[arg-type]
                else:
                    self.fail("a declaration (purposes/roles/attrs/principles/props/budget) or `norm`", tok)
            except _Bail:
                if tok.kind == "ident" and tok.text == "norm":
                    self.skip_past_rbrace()
                else:
                    self.skip_to_semi_or_rbrace()
            if self.i == start:  # ensure progress on pathological input
                self.advance()

        self.expect("rbrace", "`}`")
        return Context(
            id=ctx_id,
            purposes=frozenset(purposes),
            roles=frozenset(roles),
            attributes=frozenset(attributes),
            principles=frozenset(principles),
            properties=frozenset(properties),
            norms=tuple(norms),
            budget_cap=budget,
        )

    # -- flows ---------------------------------------------------------------

    def parse_id_set(self, what: str) -> frozenset[str]:
        tok = self.peek()
        if tok.kind == "ident":
            self.advance()
            return frozenset({tok.text})
        if tok.kind == "lbracket":
            self.advance()
            return frozenset(self.parse_id_list(allow_empty=False))
        self.fail(what)
        raise AssertionError("unreachable")

    def parse_flow(self, default_seq: int) -> FlowEvent:
        self.expect_word("flow")
        self.expect("lbrace", "`{`")
        seq = default_seq
        if self.at_word("seq"):
            self.advance()
            self.expect("eq", "`=`")
            seq = self.parse_int("a sequence number")
        self.expect_word("from")
        sender = self.parse_ident("a sender role id")
        self.expect_word("to")
        receiver = self.parse_ident("a receiver role id")
        self.expect_word("subjects")
        subjects = self.parse_id_set("a subject id or [id, ...]")
        self.expect_word("attrs")
        attributes = self.parse_id_set("an attribute id or [id, ...]")
        asserted: frozenset[str] = frozenset()
        if self.at_word("assert"):
            self.advance()
            asserted = frozenset(self.parse_principle_list())
        prop = TransmissionProperty.no_pet()
        dataset: str | None = None
        if self.at_word("with"):
            self.advance()
            prop, dataset = self.parse_flow_property()
        self.expect("rbrace", "`}`")
        return FlowEvent(
            sender=sender,
            receiver=receiver,
            subjects=subjects,
            attributes=attributes,
            asserted_principles=asserted,
            property=prop,
            dataset=dataset,
            seq=seq,
        )

    def parse_flow_file(self) -> list[FlowEvent]:
        flows: list[FlowEvent] = []
        next_seq = 1
        while not self.at("eof"):
            start = self.i
            try:
                if self.at_word("flow"):
                    flow = self.parse_flow(next_seq)
                    flows.append(flow)
                    next_seq = flow.seq + 1
                else:
                    self.fail("`flow`")
            except _Bail:
                self.skip_past_rbrace()
            if self.i == start:
                self.advance()
        return flows

    # -- ledgers ---------------------------------------------------------------

    def parse_ledger_file(self) -> list[tuple[str, float, float, int]]:
        """Parse persisted spend entries as (dataset, eps, delta, seq) rows."""
        rows: list[tuple[str, float, float, int]] = []
        self.expect_word("ledger")
        self.expect("lbrace", "`{`")
        while not self.at("rbrace") and not self.at("eof"):
            start = self.i
            try:
                self.expect_word("entry")
                args = self.parse_kv_args(
                    {
                        "dataset": lambda: self.parse_ident("a dataset id"),
                        "eps": lambda: self.parse_number("an epsilon spend"),
                        "delta": lambda: self.parse_delta(),
                        "seq": lambda: self.parse_int("a sequence number"),
                    },
                    required=("dataset", "eps", "delta", "seq"),
                )
                rows.append(
                    (args["dataset"], args["eps"], args["delta"], args["seq"])  # type: ignore[arg-type]
                )
            except _Bail:
                self.skip_to_semi_or_rbrace()
            if self.i == start:
                self.advance()
        self.expect("rbrace", "`}`")
        if not self.at("eof"):
            self.record("end of input")
        return rows


def _as_text(source: str | bytes) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8", errors="replace")
    return source


def _run(source: str | bytes, production: Callable[[_Parser], object]) -> tuple[object, list[ParseError]]:
    parser = _Parser(tokenize(_as_text(source)))
    value: object = None
    try:
        value = production(parser)
        if not parser.at("eof"):
            parser.record("end of input")
    except (_Bail, _Abort):
        pass
    if parser.errors:
        return None, parser.errors
    return value, []


def parse_policy(source: str | bytes) -> tuple[Context | None, list[ParseError]]:
    """Parse one `context` block. Returns (context, []) or (None, errors)."""

    def production(p: _Parser) -> Context:
        if not p.at_word("context"):
            p.fail("the `context` keyword")
        return p.parse_context()

    value, errors = _run(source, production)
    return value, errors  # type: ignore[return-value]


def parse_flows(source: str | bytes) -> tuple[list[FlowEvent] | None, list[ParseError]]:
    """Parse a flow log; sequence numbers count up from 1 unless `seq=` is given."""
    value, errors = _run(source, _Parser.parse_flow_file)
    return value, errors  # type: ignore[return-value]


def parse_ledger(source: str | bytes) -> tuple[list[tuple[str, float, float, int]] | None, list[ParseError]]:
    """Parse a persisted budget ledger. Returns spend rows or errors."""
    value, errors = _run(source, _Parser.parse_ledger_file)
    return value, errors  # type: ignore[return-value]


def render_parse_error(err: ParseError, origin: str = "<inline>") -> str:
    return f"{origin}:{err.line}:{err.column}: {err.message}"
