"""Flow evaluation: norm matching, verdicts, audits, and budget accounting.

``check_flow`` is a pure function from (context, ledger, flow) to a verdict
and an updated ledger; callers thread the ledger through a flow sequence (or
use ``audit_flows``, which does so with a fresh ledger). The decision order
is fixed:

1. a matched forbidden norm makes the flow inappropriate;
2. otherwise a fully parameterized DP flow charges its dataset's budget, and
   a breached cap makes the flow inappropriate (the spend stays recorded:
   information may have leaked);
3. otherwise a matched permitted or required norm makes the flow appropriate;
4. otherwise a permitted/required norm that was on point but whose principle
   or property condition failed makes the flow inappropriate;
5. otherwise the context has nothing to say and the verdict is undetermined.

Budget accounting uses basic sequential composition: epsilon totals add
(absorbing infinity) and delta totals add, saturating at 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .model import (
    BudgetCap,
    Context,
    FlowEvent,
    InformationNorm,
    MatchOutcome,
    Modality,
    PropertyKind,
    PropertyRequirement,
    ReasonCode,
    RequirementKind,
    TransmissionProperty,
    Verdict,
    VerdictStatus,
    property_satisfies,
    trust_rank,
)


class CheckerError(ValueError):
    """Malformed input to the checker (e.g. flow ids the context never declared)."""


@dataclass(frozen=True)
class BudgetEntry:
    epsilon: float
    delta: float
    seq: int


@dataclass(frozen=True)
class BudgetLedger:
    """Per-dataset record of DP spends against an optional contextual cap.

    Immutable: ``charged`` returns a new ledger. Totals follow basic
    composition, so a single infinite-epsilon release exhausts any finite cap.
    """

    cap: BudgetCap | None = None
    entries: Mapping[str, tuple[BudgetEntry, ...]] = field(default_factory=dict)

    @classmethod
    def fresh(cls, ctx: Context) -> "BudgetLedger":
        return cls(cap=ctx.budget_cap)

    def charged(self, dataset: str, epsilon: float, delta: float, seq: int) -> "BudgetLedger":
        entries = dict(self.entries)
        entries[dataset] = entries.get(dataset, ()) + (BudgetEntry(epsilon, delta, seq),)
        return BudgetLedger(cap=self.cap, entries=entries)

    def totals(self, dataset: str) -> tuple[float, float]:
        return compose_budget((e.epsilon, e.delta) for e in self.entries.get(dataset, ()))

    def all_totals(self) -> dict[str, tuple[float, float]]:
        return {dataset: self.totals(dataset) for dataset in sorted(self.entries)}

    def exceeded(self, dataset: str) -> bool:
        if self.cap is None:
            return False
        eps_total, delta_total = self.totals(dataset)
        return eps_total > self.cap.epsilon or delta_total > self.cap.delta

    def rows(self) -> list[tuple[str, float, float, int]]:
        """Spend rows in (dataset, eps, delta, seq) form for persistence."""
        return [
            (dataset, e.epsilon, e.delta, e.seq)
            for dataset in sorted(self.entries)
            for e in self.entries[dataset]
        ]

    @classmethod
    def from_rows(
        cls, rows: Iterable[tuple[str, float, float, int]], cap: BudgetCap | None
    ) -> "BudgetLedger":
        ledger = cls(cap=cap)
        for dataset, eps, delta, seq in rows:
            ledger = ledger.charged(dataset, eps, delta, seq)
        return ledger


def compose_budget(entries: Iterable[tuple[float, float]]) -> tuple[float, float]:
    """Basic sequential composition: (sum of eps, sum of delta capped at 1)."""
    eps_total = 0.0
    delta_total = 0.0
    for eps, delta in entries:
        if eps < 0 or math.isnan(eps):
            raise ValueError("epsilon spends must be nonnegative")
        if not 0.0 <= delta < 1.0:
            raise ValueError("delta spends must lie in [0, 1)")
        eps_total += eps
        delta_total += delta
    return eps_total, min(1.0, delta_total)


def match_norm(norm: InformationNorm, flow: FlowEvent) -> MatchOutcome:
    """Match one norm against one flow.

    The norm is applicable only when its sender/receiver patterns cover the
    flow's endpoints and its subject/attribute patterns cover *every* subject
    and attribute of the flow. Among applicable flows, missing principles are
    reported before property failures.
    """
    if not norm.sender.covers(flow.sender):
        return MatchOutcome.NOT_APPLICABLE
    if not norm.receiver.covers(flow.receiver):
        return MatchOutcome.NOT_APPLICABLE
    if not norm.subject.covers_all(flow.subjects):
        return MatchOutcome.NOT_APPLICABLE
    if not norm.attributes.covers_all(flow.attributes):
        return MatchOutcome.NOT_APPLICABLE
    if not norm.principles <= flow.asserted_principles:
        return MatchOutcome.APPLICABLE_BUT_PRINCIPLE_MISSING
    if not property_satisfies(flow.property, norm.property):
        return MatchOutcome.APPLICABLE_BUT_PROPERTY_FAILS
    return MatchOutcome.MATCHED


def _property_failure_reasons(
    prop: TransmissionProperty, req: PropertyRequirement
) -> list[ReasonCode]:
    """Diagnose why a property missed a requirement it was checked against."""
    if req.kind is not RequirementKind.DP_AT_MOST:
        return [ReasonCode.PROPERTY_KIND_MISMATCH]
    if prop.kind is not PropertyKind.DP:
        return [ReasonCode.PROPERTY_KIND_MISMATCH]
    reasons: list[ReasonCode] = []
    assert prop.model is not None
    if req.model_min is not None and trust_rank(prop.model) < trust_rank(req.model_min):
        reasons.append(ReasonCode.TRUST_MODEL_TOO_WEAK)
    if prop.epsilon is None or prop.delta is None:
        reasons.append(ReasonCode.UNSPECIFIED_DP_PARAMETERS)
        return reasons
    assert req.epsilon_max is not None and req.delta_max is not None
    if prop.epsilon > req.epsilon_max:
        reasons.append(ReasonCode.EPSILON_EXCEEDS_MAX)
    if prop.delta > req.delta_max:
        reasons.append(ReasonCode.DELTA_EXCEEDS_MAX)
    return reasons


def _check_resolvable(ctx: Context, flow: FlowEvent) -> None:
    missing: list[str] = []
    for role in [flow.sender, flow.receiver, *sorted(flow.subjects)]:
        if role not in ctx.roles:
            missing.append(f"role '{role}'")
    for attr in sorted(flow.attributes):
        if attr not in ctx.attributes:
            missing.append(f"attribute '{attr}'")
    for principle in sorted(flow.asserted_principles):
        if principle not in ctx.principles:
            missing.append(f"principle '{principle}'")
    if missing:
        raise CheckerError(
            f"flow seq={flow.seq} references ids not declared in context '{ctx.id}': "
            + ", ".join(missing)
        )


def _dedup(reasons: Iterable[ReasonCode]) -> tuple[ReasonCode, ...]:
    out: list[ReasonCode] = []
    for reason in reasons:
        if reason not in out:
            out.append(reason)
    return tuple(out)


def check_flow(
    ctx: Context, ledger: BudgetLedger, flow: FlowEvent
) -> tuple[Verdict, BudgetLedger]:
    """Judge one flow and return the verdict plus the post-flow ledger."""
    _check_resolvable(ctx, flow)

    outcomes = [(norm, match_norm(norm, flow)) for norm in ctx.norms]
    applicable = tuple(
        (norm.id, outcome) for norm, outcome in outcomes if outcome is not MatchOutcome.NOT_APPLICABLE
    )

    # 1. Forbidden norms dominate everything else.
    if any(
        norm.modality is Modality.FORBIDDEN and outcome is MatchOutcome.MATCHED
        for norm, outcome in outcomes
    ):
        verdict = Verdict(
            VerdictStatus.INAPPROPRIATE, applicable, (ReasonCode.FORBIDDEN_NORM_MATCHED,)
        )
        return verdict, ledger

    # 2. Fully parameterized DP flows spend budget before any permission is
    #    weighed; the spend is kept even when the verdict goes against the flow.
    prop = flow.property
    if prop.dp_fully_specified:
        if flow.dataset is None:
            raise CheckerError(
                f"flow seq={flow.seq}: a parameterized DP flow must name a dataset"
            )
        assert prop.epsilon is not None and prop.delta is not None
        count = prop.composed_release_count
        ledger = ledger.charged(
            flow.dataset, prop.epsilon * count, min(1.0, prop.delta * count), flow.seq
        )
        if ledger.exceeded(flow.dataset):
            verdict = Verdict(
                VerdictStatus.INAPPROPRIATE, applicable, (ReasonCode.BUDGET_EXHAUSTED,)
            )
            return verdict, ledger

    # 3./4. Permission: required norms state flows that must happen, so a
    #    match grants permission exactly as an allow norm does.
    permissive = [
        (norm, outcome)
        for norm, outcome in outcomes
        if norm.modality in (Modality.PERMITTED, Modality.REQUIRED)
    ]
    if any(outcome is MatchOutcome.MATCHED for _, outcome in permissive):
        return Verdict(VerdictStatus.APPROPRIATE, applicable, ()), ledger

    reasons: list[ReasonCode] = []
    for norm, outcome in permissive:
        if outcome is MatchOutcome.APPLICABLE_BUT_PROPERTY_FAILS:
            reasons.append(ReasonCode.APPLICABLE_BUT_PROPERTY_FAILS)
            reasons.extend(_property_failure_reasons(flow.property, norm.property))
        elif outcome is MatchOutcome.APPLICABLE_BUT_PRINCIPLE_MISSING:
            reasons.append(ReasonCode.APPLICABLE_BUT_PRINCIPLE_MISSING)
    if reasons:
        return Verdict(VerdictStatus.INAPPROPRIATE, applicable, _dedup(reasons)), ledger

    # 5. No norm speaks to this flow; the context refuses to guess.
    return Verdict(VerdictStatus.UNDETERMINED, applicable, (ReasonCode.NO_MATCHING_NORM,)), ledger


@dataclass(frozen=True)
class AuditReport:
    """Verdicts for a flow sequence plus required-flow and budget summaries."""

    verdicts: tuple[tuple[FlowEvent, Verdict], ...]
    missing_required: tuple[str, ...]
    budget: BudgetLedger


def audit_flows(
    ctx: Context, flows: Iterable[FlowEvent], ledger: BudgetLedger | None = None
) -> AuditReport:
    """Fold ``check_flow`` over ``flows`` and report required norms never met."""
    ledger = BudgetLedger.fresh(ctx) if ledger is None else ledger
    verdicts: list[tuple[FlowEvent, Verdict]] = []
    satisfied: set[str] = set()

    for flow in flows:
        verdict, ledger = check_flow(ctx, ledger, flow)
        verdicts.append((flow, verdict))
        for norm in ctx.norms:
            if norm.modality is Modality.REQUIRED and norm.id not in satisfied:
                if match_norm(norm, flow) is MatchOutcome.MATCHED:
                    satisfied.add(norm.id)

    missing = tuple(
        norm.id
        for norm in ctx.norms
        if norm.modality is Modality.REQUIRED and norm.id not in satisfied
    )
    return AuditReport(tuple(verdicts), missing, ledger)
