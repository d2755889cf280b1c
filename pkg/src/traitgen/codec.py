"""Score-sequence codec: essays to model inputs, score maps to targets,
generated text back to scores.

The sequence grammar (normative copy in ``docs/sequence-grammar.md``)::

    sequence = pair , { "," , SP , pair } ;
    pair     = surface-name , SP , value ;
    value    = integer | "nan" ;

Serialization always emits the complete trait universe of the family in
policy order, with ``nan`` for traits the prompt does not rate. Parsing is
order-agnostic and never fails: anomalies are collected in a ParseReport.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field

from .corpus import Essay, PromptSpec
from .errors import PolicyError
from .traits import Family, Trait, forward_order, universe

NAN_LITERAL = "nan"

PROMPTED_PREFIX = "score the essay of the prompt {n}: "
PLAIN_PREFIX = "score the essay: "

_INT_RE = re.compile(r"^[+-]?\d+$")


class PrefixPolicy(enum.Enum):
    WITH_PROMPT = "prompt"
    WITHOUT_PROMPT = "plain"


@dataclass(frozen=True)
class OrderPolicy:
    """Trait emission order: forward (rare traits first), its mirror, or a
    single trait on its own."""

    kind: str  # "forward" | "reverse" | "single"
    trait: Trait | None = None

    def __post_init__(self):
        if self.kind not in ("forward", "reverse", "single"):
            raise PolicyError(f"unknown order kind {self.kind!r}")
        if (self.kind == "single") != (self.trait is not None):
            raise PolicyError("single order needs a trait; forward/reverse take none")

    def trait_order(self, family: Family) -> tuple[Trait, ...]:
        fwd = forward_order(family)
        if self.kind == "forward":
            return fwd
        if self.kind == "reverse":
            return tuple(reversed(fwd))
        if self.trait not in fwd:
            raise PolicyError(f"{self.trait} is not a trait of the {family.value} family")
        return (self.trait,)

    def label(self) -> str:
        if self.kind == "single":
            return f"single:{self.trait.surface}"
        return self.kind


FORWARD = OrderPolicy("forward")
REVERSE = OrderPolicy("reverse")


def single(trait: Trait) -> OrderPolicy:
    return OrderPolicy("single", trait)


@dataclass(frozen=True)
class TraitScoreMap:
    """Trait -> integer category or None (the nan value), always completed
    to the family's full trait universe."""

    prompt_id: int | None
    family: Family
    scores: dict[Trait, int | None]

    def __post_init__(self):
        full = universe(self.family)
        extra = set(self.scores) - full
        if extra:
            names = ", ".join(sorted(t.surface for t in extra))
            raise PolicyError(f"traits outside the {self.family.value} universe: {names}")
        completed = {t: self.scores.get(t) for t in forward_order(self.family)}
        object.__setattr__(self, "scores", completed)

    @classmethod
    def from_essay(cls, essay: Essay, spec: PromptSpec, family: Family) -> "TraitScoreMap":
        scores: dict[Trait, int | None] = {}
        for trait, value in essay.gold.items():
            scores[trait] = None if math.isnan(value) else spec.to_category(trait, value)
        return cls(prompt_id=essay.prompt_id, family=family, scores=scores)

    def labeled(self) -> dict[Trait, int]:
        return {t: v for t, v in self.scores.items() if v is not None}


@dataclass
class ParseReport:
    """Anomalies observed while parsing one generated sequence."""

    missing: list[Trait] = field(default_factory=list)
    malformed: list[tuple[Trait, str]] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not self.missing and not self.malformed


@dataclass(frozen=True)
class EvalPair:
    """One (gold, prediction) pair retained for metric computation."""

    prompt_id: int | None
    trait: Trait
    gold: int
    pred: int
    repaired: bool = False


def build_input(essay: Essay, prefix: PrefixPolicy) -> str:
    """Prefix + essay text, the model's source side."""
    if prefix is PrefixPolicy.WITH_PROMPT:
        if essay.prompt_id is None:
            raise PolicyError("prompted prefix needs a concrete prompt id")
        return PROMPTED_PREFIX.format(n=essay.prompt_id) + essay.text
    return PLAIN_PREFIX + essay.text


def build_target(score_map: TraitScoreMap, order: OrderPolicy) -> str:
    """Serialize a score map into the comma-separated sequence grammar."""
    pairs = []
    for trait in order.trait_order(score_map.family):
        value = score_map.scores[trait]
        token = NAN_LITERAL if value is None else str(value)
        pairs.append(f"{trait.surface} {token}")
    return ", ".join(pairs)


def _value_after(text: str, end: int) -> str:
    """The token following a surface name: up to whitespace or comma."""
    i = end
    while i < len(text) and text[i] in " \t":
        i += 1
    j = i
    while j < len(text) and text[j] not in " \t\n,":
        j += 1
    return text[i:j]


def parse_prediction(text: str, family: Family,
                     prompt_id: int | None = None) -> tuple[TraitScoreMap, ParseReport]:
    """Recover trait scores from arbitrary generated text.

    Order-agnostic; first occurrence of each trait name wins. A value
    token may carry a trailing period; any other shape is Malformed.
    Never raises: anomalies land in the report, the map holds None there.
    ``prompt_id`` only stamps the returned map (generations carry none).
    """
    report = ParseReport()
    scores: dict[Trait, int | None] = {}
    for trait in forward_order(family):
        match = re.search(rf"\b{re.escape(trait.surface)}\b", text)
        if match is None:
            report.missing.append(trait)
            scores[trait] = None
            continue
        token = _value_after(text, match.end())
        stripped = token[:-1] if token.endswith(".") else token
        if stripped == NAN_LITERAL:
            scores[trait] = None
        elif _INT_RE.match(stripped):
            scores[trait] = int(stripped)
        else:
            report.malformed.append((trait, token))
            scores[trait] = None
    return TraitScoreMap(prompt_id=prompt_id, family=family, scores=scores), report


def mask_for_eval(pred: TraitScoreMap, gold: TraitScoreMap,
                  spec: PromptSpec) -> list[EvalPair]:
    """Pairs for metric computation: only traits with labeled gold.

    Prediction gaps (nan, missing, malformed) and out-of-range values are
    repaired to the trait's range minimum and flagged.
    """
    pairs = []
    for trait, gold_value in gold.labeled().items():
        lo, hi = spec.category_range(trait)
        pred_value = pred.scores.get(trait)
        if pred_value is None or not lo <= pred_value <= hi:
            pairs.append(EvalPair(gold.prompt_id, trait, gold_value, lo, repaired=True))
        else:
            pairs.append(EvalPair(gold.prompt_id, trait, gold_value, pred_value))
    return pairs
