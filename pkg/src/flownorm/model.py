"""Core vocabulary for contextual information-flow policies.

A :class:`Context` bundles the declared purposes, agent roles, information
attributes, normative principles, and descriptive transmission-property
vocabulary of a social setting, together with an ordered list of
:class:`InformationNorm` entries. A :class:`FlowEvent` describes one concrete
transmission and is judged against a context by :mod:`flownorm.checker`.

Norms constrain the descriptive side of a flow through a
:class:`PropertyRequirement` (e.g. "differential privacy in at least the
central trust model, with epsilon at most 8"), while flows carry a concrete
:class:`TransmissionProperty` (e.g. "central-model DP at epsilon 1"). The
bridge between the two is :func:`property_satisfies`.

Every type in this module is an immutable value; instances can be shared and
sent across threads freely.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import ClassVar, Iterable

INFINITY = math.inf


class Modality(enum.Enum):
    """Deontic force of an information norm."""

    PERMITTED = "allow"
    FORBIDDEN = "forbid"
    REQUIRED = "require"


class PropertyKind(enum.Enum):
    """Descriptive transformation applied to a flow's payload."""

    NO_PET = "none"
    DP = "dp"
    SWAPPING = "swapping"
    ENCRYPTION = "encryption"
    SMPC = "smpc"
    CUSTOM = "custom"


class DpModel(enum.Enum):
    """Trust model under which a DP guarantee is stated."""

    CENTRAL = "central"
    SHUFFLE = "shuffle"
    LOCAL = "local"


# Trust ranking used when a norm demands "at least" a given model. Local-model
# noise reaches the curator already randomized, shuffle sits in between, and
# central assumes a trusted curator, so local > shuffle > central.
_TRUST_RANK = {DpModel.CENTRAL: 0, DpModel.SHUFFLE: 1, DpModel.LOCAL: 2}


def trust_rank(model: DpModel) -> int:
    """Position of ``model`` in the total trust order (higher = stronger)."""
    return _TRUST_RANK[model]


class MatchOutcome(enum.Enum):
    """Result of matching one norm against one flow."""

    MATCHED = "Matched"
    NOT_APPLICABLE = "NotApplicable"
    APPLICABLE_BUT_PROPERTY_FAILS = "ApplicableButPropertyFails"
    APPLICABLE_BUT_PRINCIPLE_MISSING = "ApplicableButPrincipleMissing"


class VerdictStatus(enum.Enum):
    APPROPRIATE = "Appropriate"
    INAPPROPRIATE = "Inappropriate"
    UNDETERMINED = "Undetermined"


class ReasonCode(enum.Enum):
    """Structured explanation attached to a verdict."""

    FORBIDDEN_NORM_MATCHED = "ForbiddenNormMatched"
    BUDGET_EXHAUSTED = "BudgetExhausted"
    APPLICABLE_BUT_PROPERTY_FAILS = "ApplicableButPropertyFails"
    APPLICABLE_BUT_PRINCIPLE_MISSING = "ApplicableButPrincipleMissing"
    NO_MATCHING_NORM = "NoMatchingNorm"
    UNSPECIFIED_DP_PARAMETERS = "UnspecifiedDpParameters"
    EPSILON_EXCEEDS_MAX = "EpsilonExceedsMax"
    DELTA_EXCEEDS_MAX = "DeltaExceedsMax"
    TRUST_MODEL_TOO_WEAK = "TrustModelTooWeak"
    PROPERTY_KIND_MISMATCH = "PropertyKindMismatch"


class DefectCode(enum.Enum):
    """Structural problem found by :func:`validate_context`."""

    UNDECLARED_ROLE = "UndeclaredRole"
    UNDECLARED_ATTRIBUTE = "UndeclaredAttribute"
    UNDECLARED_PRINCIPLE = "UndeclaredPrinciple"
    DUPLICATE_NORM_ID = "DuplicateNormId"
    EPSILON_OUT_OF_RANGE = "EpsilonOutOfRange"
    DELTA_OUT_OF_RANGE = "DeltaOutOfRange"
    REQUIRED_NORM_WILDCARD = "RequiredNormWildcard"


def _clean_float(name: str, value: float, *, allow_inf: bool) -> float:
    value = float(value)
    if math.isnan(value):
        raise ValueError(f"{name} must not be NaN")
    if not allow_inf and math.isinf(value):
        raise ValueError(f"{name} must be finite")
    # Fold -0.0 into 0.0 so canonical printing is stable.
    return value + 0.0


@dataclass(frozen=True)
class Pattern:
    """Role/attribute selector in a norm: a set of ids or the wildcard.

    ``ids=None`` is the wildcard and covers every id; otherwise the pattern
    covers exactly the ids in the (nonempty) set.
    """

    ids: frozenset[str] | None = None

    ANY: ClassVar["Pattern"]

    def __post_init__(self) -> None:
        if self.ids is not None:
            object.__setattr__(self, "ids", frozenset(self.ids))
            if not self.ids:
                raise ValueError("a set pattern must contain at least one id")

    @classmethod
    def exact(cls, ident: str) -> "Pattern":
        return cls(frozenset({ident}))

    @classmethod
    def of(cls, ids: Iterable[str]) -> "Pattern":
        return cls(frozenset(ids))

    @property
    def is_wildcard(self) -> bool:
        return self.ids is None

    def covers(self, ident: str) -> bool:
        return self.ids is None or ident in self.ids

    def covers_all(self, idents: Iterable[str]) -> bool:
        return all(self.covers(i) for i in idents)


Pattern.ANY = Pattern(None)


@dataclass(frozen=True)
class KindRef:
    """Reference to a property kind, carrying the name for custom kinds."""

    kind: PropertyKind
    custom_name: str | None = None

    def __post_init__(self) -> None:
        if self.kind is PropertyKind.CUSTOM:
            if not self.custom_name:
                raise ValueError("custom kind reference requires a name")
        elif self.custom_name is not None:
            raise ValueError("only custom kinds carry a name")

    def matches(self, prop: "TransmissionProperty") -> bool:
        if prop.kind is not self.kind:
            return False
        if self.kind is PropertyKind.CUSTOM:
            return prop.custom_name == self.custom_name
        return True


@dataclass(frozen=True)
class TransmissionProperty:
    """Concrete descriptive transformation attached to a flow.

    For DP properties, ``epsilon``/``delta`` may be ``None``, a first-class
    "declared but unparameterized" state distinct from any numeric value.
    ``epsilon`` may be ``math.inf`` (no protection); ``delta`` is always in
    [0, 1) when given. ``composed_release_count`` declares that this flow
    stands for that many sequential releases and scales budget charging.
    """

    kind: PropertyKind
    model: DpModel | None = None
    epsilon: float | None = None
    delta: float | None = None
    mechanism: str | None = None
    custom_name: str | None = None
    composed_release_count: int = 1

    def __post_init__(self) -> None:
        if self.kind is PropertyKind.DP:
            if self.model is None:
                raise ValueError("DP property requires a trust model")
            if self.epsilon is not None:
                eps = _clean_float("epsilon", self.epsilon, allow_inf=True)
                if eps < 0:
                    raise ValueError("epsilon must be nonnegative")
                object.__setattr__(self, "epsilon", eps)
            if self.delta is not None:
                delta = _clean_float("delta", self.delta, allow_inf=False)
                if not 0.0 <= delta < 1.0:
                    raise ValueError("delta must lie in [0, 1)")
                object.__setattr__(self, "delta", delta)
        else:
            if any(v is not None for v in (self.model, self.epsilon, self.delta, self.mechanism)):
                raise ValueError(f"{self.kind.value} property carries no DP parameters")
        if self.kind is PropertyKind.CUSTOM:
            if not self.custom_name:
                raise ValueError("custom property requires a name")
        elif self.custom_name is not None:
            raise ValueError("only custom properties carry a name")
        if self.composed_release_count < 1:
            raise ValueError("composed_release_count must be a positive integer")

    @classmethod
    def no_pet(cls) -> "TransmissionProperty":
        return cls(PropertyKind.NO_PET)

    @classmethod
    def dp(
        cls,
        model: DpModel,
        epsilon: float | None = None,
        delta: float | None = None,
        mechanism: str | None = None,
        composed_release_count: int = 1,
    ) -> "TransmissionProperty":
        return cls(
            PropertyKind.DP,
            model=model,
            epsilon=epsilon,
            delta=delta,
            mechanism=mechanism,
            composed_release_count=composed_release_count,
        )

    @classmethod
    def swapping(cls) -> "TransmissionProperty":
        return cls(PropertyKind.SWAPPING)

    @classmethod
    def encryption(cls) -> "TransmissionProperty":
        return cls(PropertyKind.ENCRYPTION)

    @classmethod
    def smpc(cls) -> "TransmissionProperty":
        return cls(PropertyKind.SMPC)

    @classmethod
    def custom(cls, name: str) -> "TransmissionProperty":
        return cls(PropertyKind.CUSTOM, custom_name=name)

    @property
    def kind_ref(self) -> KindRef:
        if self.kind is PropertyKind.CUSTOM:
            return KindRef(PropertyKind.CUSTOM, self.custom_name)
        return KindRef(self.kind)

    @property
    def dp_fully_specified(self) -> bool:
        return self.kind is PropertyKind.DP and self.epsilon is not None and self.delta is not None


class RequirementKind(enum.Enum):
    ANY = "any"
    EXACT_KIND = "exact"
    DP_AT_MOST = "dp_at_most"
    NOT_KIND = "not"


@dataclass(frozen=True)
class PropertyRequirement:
    """Norm-side constraint on a flow's transmission property.

    Variants: ``any_property`` accepts everything; ``exact`` accepts one kind;
    ``not_kinds`` rejects a set of kinds; ``dp_at_most`` demands DP in at least
    ``model_min`` (``None`` = any model) with specified epsilon/delta at or
    below the stated ceilings. Unparameterized DP never meets ``dp_at_most``.
    """

    kind: RequirementKind
    exact: KindRef | None = None
    excluded: frozenset[KindRef] = field(default_factory=frozenset)
    model_min: DpModel | None = None
    epsilon_max: float | None = None
    delta_max: float | None = None

    def __post_init__(self) -> None:
        if self.kind is RequirementKind.EXACT_KIND and self.exact is None:
            raise ValueError("exact requirement needs a kind")
        if self.kind is RequirementKind.NOT_KIND:
            object.__setattr__(self, "excluded", frozenset(self.excluded))
            if not self.excluded:
                raise ValueError("not-kind requirement needs at least one kind")
        if self.kind is RequirementKind.DP_AT_MOST:
            if self.epsilon_max is None or self.delta_max is None:
                raise ValueError("dp_at_most requires epsilon and delta ceilings")
            eps = _clean_float("epsilon_max", self.epsilon_max, allow_inf=True)
            if eps < 0:
                raise ValueError("epsilon_max must be nonnegative")
            delta = _clean_float("delta_max", self.delta_max, allow_inf=False)
            if not 0.0 <= delta < 1.0:
                raise ValueError("delta_max must lie in [0, 1)")
            object.__setattr__(self, "epsilon_max", eps)
            object.__setattr__(self, "delta_max", delta)

    @classmethod
    def any_property(cls) -> "PropertyRequirement":
        return cls(RequirementKind.ANY)

    @classmethod
    def exact_kind(cls, ref: KindRef) -> "PropertyRequirement":
        return cls(RequirementKind.EXACT_KIND, exact=ref)

    @classmethod
    def not_kinds(cls, refs: Iterable[KindRef]) -> "PropertyRequirement":
        return cls(RequirementKind.NOT_KIND, excluded=frozenset(refs))

    @classmethod
    def dp_at_most(
        cls,
        model_min: DpModel | None,
        epsilon_max: float,
        delta_max: float,
    ) -> "PropertyRequirement":
        return cls(
            RequirementKind.DP_AT_MOST,
            model_min=model_min,
            epsilon_max=epsilon_max,
            delta_max=delta_max,
        )


def property_satisfies(prop: TransmissionProperty, req: PropertyRequirement) -> bool:
    """Decide whether a concrete property meets a norm's requirement.

    ``dp_at_most`` insists on specified parameters: a DP property whose
    epsilon or delta was left unspecified is insufficiently descriptive and
    never satisfies a parameterized ceiling. Epsilon 0 (perfect privacy)
    satisfies any ceiling; an infinite epsilon satisfies only an infinite one.
    """
    if req.kind is RequirementKind.ANY:
        return True
    if req.kind is RequirementKind.EXACT_KIND:
        assert req.exact is not None
        return req.exact.matches(prop)
    if req.kind is RequirementKind.NOT_KIND:
        return not any(ref.matches(prop) for ref in req.excluded)
    # DP_AT_MOST
    if prop.kind is not PropertyKind.DP:
        return False
    assert prop.model is not None
    if req.model_min is not None and trust_rank(prop.model) < trust_rank(req.model_min):
        return False
    if prop.epsilon is None or prop.delta is None:
        return False
    assert req.epsilon_max is not None and req.delta_max is not None
    return prop.epsilon <= req.epsilon_max and prop.delta <= req.delta_max


@dataclass(frozen=True)
class InformationNorm:
    """One augmented information norm.

    ``sender``/``receiver``/``subject`` select agent roles, ``attributes``
    selects information attributes, ``principles`` lists normative conditions
    that must all be asserted on the flow, and ``property`` constrains the
    flow's descriptive transmission property.
    """

    id: str
    modality: Modality
    sender: Pattern
    receiver: Pattern
    subject: Pattern
    attributes: Pattern
    principles: frozenset[str]
    property: PropertyRequirement

    def __post_init__(self) -> None:
        object.__setattr__(self, "principles", frozenset(self.principles))


@dataclass(frozen=True)
class BudgetCap:
    """Per-dataset ceiling on composed DP spend. Ranges checked by the validator."""

    epsilon: float
    delta: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "epsilon", float(self.epsilon) + 0.0)
        object.__setattr__(self, "delta", float(self.delta) + 0.0)


@dataclass(frozen=True)
class Context:
    """The six-parameter bundle all evaluation happens inside."""

    id: str
    purposes: frozenset[str] = field(default_factory=frozenset)
    roles: frozenset[str] = field(default_factory=frozenset)
    attributes: frozenset[str] = field(default_factory=frozenset)
    principles: frozenset[str] = field(default_factory=frozenset)
    properties: frozenset[KindRef] = field(default_factory=frozenset)
    norms: tuple[InformationNorm, ...] = ()
    budget_cap: BudgetCap | None = None

    def __post_init__(self) -> None:
        for name in ("purposes", "roles", "attributes", "principles", "properties"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        object.__setattr__(self, "norms", tuple(self.norms))


@dataclass(frozen=True)
class FlowEvent:
    """One concrete information flow, ready to be checked against a context."""

    sender: str
    receiver: str
    subjects: frozenset[str]
    attributes: frozenset[str]
    asserted_principles: frozenset[str]
    property: TransmissionProperty
    dataset: str | None = None
    seq: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "subjects", frozenset(self.subjects))
        object.__setattr__(self, "attributes", frozenset(self.attributes))
        object.__setattr__(self, "asserted_principles", frozenset(self.asserted_principles))
        if not self.subjects:
            raise ValueError("a flow needs at least one subject")
        if not self.attributes:
            raise ValueError("a flow needs at least one attribute")


@dataclass(frozen=True)
class Verdict:
    """Three-valued appropriateness judgment for one flow.

    ``matched_norms`` lists (norm id, outcome) for every norm that was
    applicable to the flow's shape; inappropriate verdicts always carry at
    least one reason.
    """

    status: VerdictStatus
    matched_norms: tuple[tuple[str, MatchOutcome], ...] = ()
    reasons: tuple[ReasonCode, ...] = ()


@dataclass(frozen=True)
class Defect:
    """One structural problem in a context; defects are data, not failures."""

    code: DefectCode
    subject: str
    message: str


def _pattern_defects(
    pattern: Pattern, declared: frozenset[str], code: DefectCode, norm_id: str, slot: str
) -> list[Defect]:
    if pattern.ids is None:
        return []
    return [
        Defect(code, ident, f"norm {norm_id}: {slot} references undeclared id '{ident}'")
        for ident in sorted(pattern.ids - declared)
    ]


def validate_context(ctx: Context) -> list[Defect]:
    """Collect every invariant violation in a context and its norms.

    An empty list means the context is internally consistent: every id a norm
    mentions is declared, norm ids are unique, the budget cap (if any) is in
    range, and required norms pin down concrete endpoints.
    """
    defects: list[Defect] = []

    seen: set[str] = set()
    for norm in ctx.norms:
        if norm.id in seen:
            defects.append(
                Defect(DefectCode.DUPLICATE_NORM_ID, norm.id, f"norm id '{norm.id}' declared twice")
            )
        seen.add(norm.id)

        for slot, pattern in (("sender", norm.sender), ("receiver", norm.receiver), ("subject", norm.subject)):
            defects.extend(_pattern_defects(pattern, ctx.roles, DefectCode.UNDECLARED_ROLE, norm.id, slot))
        defects.extend(
            _pattern_defects(norm.attributes, ctx.attributes, DefectCode.UNDECLARED_ATTRIBUTE, norm.id, "attrs")
        )
        for ident in sorted(norm.principles - ctx.principles):
            defects.append(
                Defect(
                    DefectCode.UNDECLARED_PRINCIPLE,
                    ident,
                    f"norm {norm.id}: when-clause references undeclared principle '{ident}'",
                )
            )
        if norm.modality is Modality.REQUIRED:
            for slot, pattern in (("sender", norm.sender), ("receiver", norm.receiver)):
                if pattern.is_wildcard:
                    defects.append(
                        Defect(
                            DefectCode.REQUIRED_NORM_WILDCARD,
                            norm.id,
                            f"required norm {norm.id} must name a concrete {slot}",
                        )
                    )

    cap = ctx.budget_cap
    if cap is not None:
        if math.isnan(cap.epsilon) or cap.epsilon < 0:
            defects.append(
                Defect(DefectCode.EPSILON_OUT_OF_RANGE, ctx.id, f"budget epsilon {cap.epsilon!r} must be >= 0")
            )
        if math.isnan(cap.delta) or not 0.0 <= cap.delta < 1.0:
            defects.append(
                Defect(DefectCode.DELTA_OUT_OF_RANGE, ctx.id, f"budget delta {cap.delta!r} must lie in [0, 1)")
            )

    return defects
