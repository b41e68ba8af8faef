"""Canonical text form for policies, flow logs, and ledgers.

The printer is deterministic: declaration sets are sorted, norms keep their
original order, numbers use the shortest representation that round-trips
(``repr`` of the float, ``inf`` for infinity), and output always ends with a
newline. Re-parsing printed text reconstructs the original value exactly.
"""

from __future__ import annotations

import math
import re

from ..model import (
    Context,
    DpModel,
    FlowEvent,
    InformationNorm,
    KindRef,
    Modality,
    Pattern,
    PropertyKind,
    PropertyRequirement,
    RequirementKind,
    TransmissionProperty,
)
from .lexer import escape_string

HEADER = "# cip-version: 1\n"

_IDENT_RE = re.compile(r"[a-z_][a-z0-9_]*")

_MODALITY_WORD = {
    Modality.PERMITTED: "allow",
    Modality.FORBIDDEN: "forbid",
    Modality.REQUIRED: "require",
}

_MODEL_WORD = {
    DpModel.CENTRAL: "central",
    DpModel.SHUFFLE: "shuffle",
    DpModel.LOCAL: "local",
}


def format_number(value: float) -> str:
    if math.isinf(value):
        return "inf"
    return repr(float(value))


def format_tag(tag: str) -> str:
    if _IDENT_RE.fullmatch(tag):
        return tag
    return escape_string(tag)


def format_kind_ref(ref: KindRef) -> str:
    if ref.kind is PropertyKind.CUSTOM:
        return f"custom({ref.custom_name})"
    return ref.kind.value


def _kind_sort_key(ref: KindRef) -> tuple[str, str]:
    return (ref.kind.value, ref.custom_name or "")


def format_pattern(pattern: Pattern) -> str:
    if pattern.ids is None:
        return "*"
    ids = sorted(pattern.ids)
    if len(ids) == 1:
        return ids[0]
    return "[" + ", ".join(ids) + "]"


def format_requirement(req: PropertyRequirement) -> str:
    if req.kind is RequirementKind.ANY:
        return "any"
    if req.kind is RequirementKind.EXACT_KIND:
        assert req.exact is not None
        return format_kind_ref(req.exact)
    if req.kind is RequirementKind.NOT_KIND:
        parts = ", ".join(format_kind_ref(r) for r in sorted(req.excluded, key=_kind_sort_key))
        return f"not [{parts}]"
    model = "any" if req.model_min is None else _MODEL_WORD[req.model_min]
    assert req.epsilon_max is not None and req.delta_max is not None
    return (
        f"dp_at_most(model>={model}, eps<={format_number(req.epsilon_max)}, "
        f"delta<={format_number(req.delta_max)})"
    )


def format_property(prop: TransmissionProperty, dataset: str | None = None) -> str:
    if prop.kind is PropertyKind.CUSTOM:
        return f"custom({prop.custom_name})"
    if prop.kind is not PropertyKind.DP:
        return prop.kind.value
    assert prop.model is not None
    args = [f"model={_MODEL_WORD[prop.model]}"]
    if prop.epsilon is not None:
        args.append(f"eps={format_number(prop.epsilon)}")
    if prop.delta is not None:
        args.append(f"delta={format_number(prop.delta)}")
    if prop.mechanism is not None:
        args.append(f"mechanism={prop.mechanism}")
    if dataset is not None:
        args.append(f"dataset={dataset}")
    if prop.composed_release_count != 1:
        args.append(f"releases={prop.composed_release_count}")
    return "dp(" + ", ".join(args) + ")"


def _format_id_set(ids: frozenset[str]) -> str:
    items = sorted(ids)
    if len(items) == 1:
        return items[0]
    return "[" + ", ".join(items) + "]"


def format_norm(norm: InformationNorm) -> str:
    when = ", ".join(sorted(norm.principles))
    return (
        f"norm {norm.id} {{ {_MODALITY_WORD[norm.modality]}"
        f" from {format_pattern(norm.sender)}"
        f" to {format_pattern(norm.receiver)}"
        f" about {format_pattern(norm.subject)}"
        f" attrs {format_pattern(norm.attributes)}"
        f" when [{when}]"
        f" with {format_requirement(norm.property)} }}"
    )


def print_policy(ctx: Context) -> str:
    """Render a context in canonical form; empty declarations are omitted."""
    lines = [HEADER.rstrip("\n"), f"context {ctx.id} {{"]
    if ctx.purposes:
        lines.append("  purposes [" + ", ".join(sorted(format_tag(p) for p in ctx.purposes)) + "];")
    if ctx.roles:
        lines.append("  roles [" + ", ".join(sorted(ctx.roles)) + "];")
    if ctx.attributes:
        lines.append("  attrs [" + ", ".join(sorted(ctx.attributes)) + "];")
    if ctx.principles:
        lines.append("  principles [" + ", ".join(sorted(ctx.principles)) + "];")
    if ctx.properties:
        refs = sorted(ctx.properties, key=_kind_sort_key)
        lines.append("  props [" + ", ".join(format_kind_ref(r) for r in refs) + "];")
    if ctx.budget_cap is not None:
        cap = ctx.budget_cap
        lines.append(f"  budget(eps={format_number(cap.epsilon)}, delta={format_number(cap.delta)});")
    for norm in ctx.norms:
        lines.append("  " + format_norm(norm))
    lines.append("}")
    return "\n".join(lines) + "\n"


def format_flow(flow: FlowEvent) -> str:
    parts = [
        f"seq={flow.seq}",
        f"from {flow.sender}",
        f"to {flow.receiver}",
        f"subjects {_format_id_set(flow.subjects)}",
        f"attrs {_format_id_set(flow.attributes)}",
        "assert [" + ", ".join(sorted(flow.asserted_principles)) + "]",
        f"with {format_property(flow.property, flow.dataset)}",
    ]
    return "flow { " + " ".join(parts) + " }"


def print_flows(flows: list[FlowEvent]) -> str:
    lines = [HEADER.rstrip("\n")]
    lines.extend(format_flow(flow) for flow in flows)
    return "\n".join(lines) + "\n"


def print_ledger(rows: list[tuple[str, float, float, int]]) -> str:
    """Render persisted spend rows, sorted by dataset then sequence number."""
    lines = [HEADER.rstrip("\n"), "ledger {"]
    for dataset, eps, delta, seq in sorted(rows, key=lambda r: (r[0], r[3])):
        lines.append(
            f"  entry(dataset={dataset}, eps={format_number(eps)}, "
            f"delta={format_number(delta)}, seq={seq})"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"
