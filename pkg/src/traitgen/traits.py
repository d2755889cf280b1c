"""Trait names, their canonical surface strings, and family trait orders.

Every trait carries exactly one surface string (the text used in score
sequences); the enum name <-> surface mapping is bijective so sequences
round-trip losslessly.
"""

from __future__ import annotations

import enum


class Trait(enum.Enum):
    OVERALL = "Overall"
    CONTENT = "Content"
    PROMPT_ADHERENCE = "Prompt Adherence"
    LANGUAGE = "Language"
    NARRATIVITY = "Narrativity"
    ORGANIZATION = "Organization"
    CONVENTIONS = "Conventions"
    WORD_CHOICE = "Word Choice"
    SENTENCE_FLUENCY = "Sentence Fluency"
    STYLE = "Style"
    VOICE = "Voice"
    # argumentative-essay traits (Conventions is shared with the set above)
    COHESION = "Cohesion"
    SYNTAX = "Syntax"
    VOCABULARY = "Vocabulary"
    PHRASEOLOGY = "Phraseology"
    GRAMMAR = "Grammar"

    @property
    def surface(self) -> str:
        return self.value


_BY_SURFACE = {t.surface: t for t in Trait}
assert len(_BY_SURFACE) == len(Trait), "surface strings must be unique"


def from_surface(surface: str) -> Trait:
    """Inverse of Trait.surface; raises KeyError for unknown strings."""
    return _BY_SURFACE[surface]


class Family(enum.Enum):
    """Which trait universe a corpus belongs to."""

    ASAP = "asap"
    FEEDBACK = "feedback"


# Prediction order: rarely-rated traits first, Overall last.
ASAP_FORWARD_ORDER = (
    Trait.VOICE,
    Trait.STYLE,
    Trait.SENTENCE_FLUENCY,
    Trait.WORD_CHOICE,
    Trait.CONVENTIONS,
    Trait.ORGANIZATION,
    Trait.NARRATIVITY,
    Trait.LANGUAGE,
    Trait.PROMPT_ADHERENCE,
    Trait.CONTENT,
    Trait.OVERALL,
)

FEEDBACK_FORWARD_ORDER = (
    Trait.CONVENTIONS,
    Trait.GRAMMAR,
    Trait.PHRASEOLOGY,
    Trait.VOCABULARY,
    Trait.SYNTAX,
    Trait.COHESION,
)

# Column order used in summary tables (Overall first for the ASAP family,
# which is the mirror of the forward prediction order).
ASAP_REPORT_ORDER = tuple(reversed(ASAP_FORWARD_ORDER))
FEEDBACK_REPORT_ORDER = FEEDBACK_FORWARD_ORDER


def forward_order(family: Family) -> tuple[Trait, ...]:
    return ASAP_FORWARD_ORDER if family is Family.ASAP else FEEDBACK_FORWARD_ORDER


def report_order(family: Family) -> tuple[Trait, ...]:
    return ASAP_REPORT_ORDER if family is Family.ASAP else FEEDBACK_REPORT_ORDER


def universe(family: Family) -> frozenset[Trait]:
    return frozenset(forward_order(family))
