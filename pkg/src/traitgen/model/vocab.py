"""Word-level vocabulary with reserved whole tokens for target sequences.

Source text is tokenized into words and single punctuation marks. Target
sequences tokenize against the grammar: each trait surface name (even the
multiword ones), each integer score literal in the configured global
range, "nan" and "," are single reserved tokens, so every well-formed
score sequence encodes with zero UNKs.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass

from ..codec import NAN_LITERAL
from ..corpus import Corpus
from ..errors import DataError
from ..traits import forward_order

PAD, BOS, EOS, UNK = 0, 1, 2, 3
_SPECIALS = ("<pad>", "<bos>", "<eos>", "<unk>")

# Input prefix words are reserved so prompted and plain prefixes tokenize
# identically across folds regardless of essay word frequencies.
_PREFIX_WORDS = ("score", "the", "essay", "of", "prompt", ":")

_SOURCE_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


def tokenize_source(text: str) -> list[str]:
    return _SOURCE_TOKEN_RE.findall(text)


@dataclass(frozen=True)
class Vocab:
    tokens: tuple[str, ...]
    index: dict[str, int]
    surfaces: tuple[str, ...]  # trait names reserved as whole tokens

    @classmethod
    def build(cls, corpus: Corpus, min_freq: int = 1,
              essay_ids: set[str] | None = None) -> "Vocab":
        """Vocabulary over the corpus (optionally restricted to a train
        split) plus all reserved target tokens.

        Ordering is deterministic: specials, trait surfaces, score
        literals ascending, "nan", ",", prefix words, then corpus tokens
        by frequency descending with lexicographic tie-break.
        """
        surfaces = tuple(t.surface for t in forward_order(corpus.family))
        lo = min(r[0] for s in corpus.specs.values() for r in s.score_range.values())
        hi = max(r[1] for s in corpus.specs.values() for r in s.score_range.values())
        reserved = list(_SPECIALS) + list(surfaces)
        reserved += [str(v) for v in range(lo, hi + 1)]
        reserved += [NAN_LITERAL, ","] + list(_PREFIX_WORDS)

        counts: Counter[str] = Counter()
        for essay in corpus.essays:
            if essay_ids is None or essay.essay_id in essay_ids:
                counts.update(tokenize_source(essay.text))

        seen = set(reserved)
        tokens = list(dict.fromkeys(reserved))  # keep first occurrence only
        corpus_tokens = [(tok, n) for tok, n in counts.items()
                         if n >= min_freq and tok not in seen]
        corpus_tokens.sort(key=lambda item: (-item[1], item[0]))
        tokens.extend(tok for tok, _ in corpus_tokens)
        return cls(tokens=tuple(tokens),
                   index={tok: i for i, tok in enumerate(tokens)},
                   surfaces=surfaces)

    def __len__(self) -> int:
        return len(self.tokens)

    def encode_source(self, text: str, max_len: int | None = None) -> list[int]:
        ids = [self.index.get(tok, UNK) for tok in tokenize_source(text)]
        return ids if max_len is None else ids[:max_len]

    def tokenize_target(self, sequence: str) -> list[str]:
        """Split a score sequence into reserved tokens; grammar-strict."""
        tokens: list[str] = []
        for i, pair in enumerate(sequence.split(", ")):
            if i:
                tokens.append(",")
            name, _, value = pair.rpartition(" ")
            if name not in self.surfaces:
                raise DataError(f"cannot tokenize target pair {pair!r}")
            tokens.extend((name, value))
        return tokens

    def encode_target(self, sequence: str) -> list[int]:
        ids = [self.index.get(tok, UNK) for tok in self.tokenize_target(sequence)]
        if UNK in ids:
            raise DataError(f"target contains out-of-vocabulary token: {sequence!r}")
        return ids

    def decode(self, ids: list[int]) -> str:
        """Render generated ids back to text; commas attach to the left."""
        out = []
        for i in ids:
            tok = self.tokens[i]
            if out and tok != ",":
                out.append(" ")
            out.append(tok)
        return "".join(out)

    def to_json(self) -> str:
        return json.dumps({"tokens": list(self.tokens), "surfaces": list(self.surfaces)},
                          ensure_ascii=False)

    @classmethod
    def from_json(cls, text: str) -> "Vocab":
        doc = json.loads(text)
        tokens = tuple(doc["tokens"])
        return cls(tokens=tokens, index={t: i for i, t in enumerate(tokens)},
                   surfaces=tuple(doc["surfaces"]))
