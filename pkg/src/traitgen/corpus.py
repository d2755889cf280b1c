"""Corpus ingestion: merged ASAP essays, argumentative-essay data, folds.

Two dataset families are supported:

* ASAP family: eight prompts, tab-separated main file plus per-prompt
  trait files. Overall comes from the main file; other trait scores come
  from the trait files for prompts 1-6 and are resolved from the rater
  columns of the main file for prompts 7-8.
* Feedback family: a single comma-separated file, six traits on every
  essay, no prompt division (prompt id is the ``None`` sentinel).

Score ranges are data, not code: they live in a range-config JSON file
(prompt -> trait surface -> [min, max]) and are validated at load time.
Half-point scores are carried internally as x2 integer categories; the
original scale is recovered through ``PromptSpec.display``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DataError, SchemaError
from .traits import Family, Trait, forward_order, from_surface

log = logging.getLogger(__name__)

FEEDBACK_PROMPT = None  # sentinel prompt id for the no-prompt-division family

# Expected per-prompt essay counts for the full official ASAP merge.
EXPECTED_ASAP_COUNTS = {1: 1785, 2: 1800, 3: 1726, 4: 1772, 5: 1805, 6: 1800, 7: 1569, 8: 723}

_ASAP_TRAITS = {
    1: (Trait.OVERALL, Trait.CONTENT, Trait.WORD_CHOICE, Trait.ORGANIZATION,
        Trait.SENTENCE_FLUENCY, Trait.CONVENTIONS),
    2: (Trait.OVERALL, Trait.CONTENT, Trait.WORD_CHOICE, Trait.ORGANIZATION,
        Trait.SENTENCE_FLUENCY, Trait.CONVENTIONS),
    3: (Trait.OVERALL, Trait.CONTENT, Trait.PROMPT_ADHERENCE, Trait.NARRATIVITY, Trait.LANGUAGE),
    4: (Trait.OVERALL, Trait.CONTENT, Trait.PROMPT_ADHERENCE, Trait.NARRATIVITY, Trait.LANGUAGE),
    5: (Trait.OVERALL, Trait.CONTENT, Trait.PROMPT_ADHERENCE, Trait.NARRATIVITY, Trait.LANGUAGE),
    6: (Trait.OVERALL, Trait.CONTENT, Trait.PROMPT_ADHERENCE, Trait.NARRATIVITY, Trait.LANGUAGE),
    7: (Trait.OVERALL, Trait.CONTENT, Trait.ORGANIZATION, Trait.CONVENTIONS, Trait.STYLE),
    8: (Trait.OVERALL, Trait.CONTENT, Trait.WORD_CHOICE, Trait.ORGANIZATION,
        Trait.SENTENCE_FLUENCY, Trait.CONVENTIONS, Trait.VOICE),
}

_FEEDBACK_TRAITS = (Trait.COHESION, Trait.SYNTAX, Trait.VOCABULARY,
                    Trait.PHRASEOLOGY, Trait.GRAMMAR, Trait.CONVENTIONS)

# Main-file rater trait columns for prompts 7 and 8, in rubric order.
_RATER_TRAITS = {
    7: (Trait.CONTENT, Trait.ORGANIZATION, Trait.STYLE, Trait.CONVENTIONS),
    8: (Trait.CONTENT, Trait.ORGANIZATION, Trait.VOICE, Trait.WORD_CHOICE,
        Trait.SENTENCE_FLUENCY, Trait.CONVENTIONS),
}


@dataclass(frozen=True)
class PromptSpec:
    """Trait set and per-trait score range for one prompt.

    ``score_range`` is in integer category units; ``scale`` maps between
    category units and the dataset's display scale (1 for whole-point
    datasets, 2 where half points occur).
    """

    prompt_id: int | None
    traits: tuple[Trait, ...]
    score_range: dict[Trait, tuple[int, int]]
    scale: int = 1
    essay_count_expected: int | None = None

    def __post_init__(self):
        for trait, (lo, hi) in self.score_range.items():
            if lo >= hi:
                raise DataError(f"prompt {self.prompt_id}: empty range {lo}..{hi} for {trait.surface}")
        missing = set(self.traits) - set(self.score_range)
        if missing:
            names = ", ".join(sorted(t.surface for t in missing))
            raise DataError(f"prompt {self.prompt_id}: no score range configured for {names}")

    def category_range(self, trait: Trait) -> tuple[int, int]:
        return self.score_range[trait]

    def to_category(self, trait: Trait, value: float) -> int:
        """Map a raw score to its integer category; rejects off-grid values."""
        scaled = value * self.scale
        cat = round(scaled)
        if abs(scaled - cat) > 1e-9:
            raise DataError(
                f"prompt {self.prompt_id}: score {value} for {trait.surface} "
                f"is not on the 1/{self.scale} grid")
        return cat

    def display(self, category: int) -> float | int:
        """Original-scale value for an integer category."""
        return category // self.scale if category % self.scale == 0 else category / self.scale


@dataclass(frozen=True)
class Essay:
    essay_id: str
    prompt_id: int | None
    text: str
    gold: dict[Trait, float]  # raw-scale values; math.nan where unlabeled

    def __post_init__(self):
        if not self.text:
            raise DataError(f"essay {self.essay_id}: empty text")


@dataclass(frozen=True)
class Corpus:
    family: Family
    essays: tuple[Essay, ...]
    specs: dict[int | None, PromptSpec]

    def spec_for(self, essay: Essay) -> PromptSpec:
        return self.specs[essay.prompt_id]

    def by_id(self) -> dict[str, Essay]:
        return {e.essay_id: e for e in self.essays}

    def counts_by_prompt(self) -> dict[int | None, int]:
        counts: dict[int | None, int] = {p: 0 for p in self.specs}
        for e in self.essays:
            counts[e.prompt_id] += 1
        return counts


@dataclass(frozen=True)
class FoldAssignment:
    fold_index: int
    train: tuple[str, ...]
    dev: tuple[str, ...]
    test: tuple[str, ...]

    def __post_init__(self):
        roles = [set(self.train), set(self.dev), set(self.test)]
        total = sum(len(r) for r in roles)
        union = set().union(*roles)
        if len(union) != total:
            raise DataError(f"fold {self.fold_index}: an essay id appears in two roles")


# ---------------------------------------------------------------------------
# Range config


def default_ranges_path() -> Path:
    return Path(str(resources.files("traitgen").joinpath("data/default_ranges.json")))


def load_ranges(path: str | Path | None = None) -> dict[str, dict[Trait, tuple[float, float]]]:
    """Load and validate a range-config file (prompt -> trait -> [min, max])."""
    path = Path(path) if path is not None else default_ranges_path()
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    ranges: dict[str, dict[Trait, tuple[float, float]]] = {}
    for prompt_key, entries in raw.items():
        per_trait: dict[Trait, tuple[float, float]] = {}
        for surface, bounds in entries.items():
            try:
                trait = from_surface(surface)
            except KeyError:
                raise SchemaError(f"range config: unknown trait name {surface!r}") from None
            if not (isinstance(bounds, list) and len(bounds) == 2 and bounds[0] < bounds[1]):
                raise SchemaError(f"range config: bad bounds {bounds!r} for {surface}")
            per_trait[trait] = (bounds[0], bounds[1])
        ranges[prompt_key] = per_trait
    return ranges


def _build_spec(prompt_id: int | None, traits: tuple[Trait, ...],
                ranges: dict[str, dict[Trait, tuple[float, float]]],
                scale: int, expected: int | None) -> PromptSpec:
    key = "feedback" if prompt_id is None else str(prompt_id)
    if key not in ranges:
        raise SchemaError(f"range config has no entry for prompt {key}")
    raw = ranges[key]
    missing = [t.surface for t in traits if t not in raw]
    if missing:
        raise SchemaError(f"range config for prompt {key} lacks traits: {', '.join(missing)}")
    cat_range = {t: (round(raw[t][0] * scale), round(raw[t][1] * scale)) for t in traits}
    return PromptSpec(prompt_id=prompt_id, traits=traits, score_range=cat_range,
                      scale=scale, essay_count_expected=expected)


def prompt_spec(prompt_id: int | None,
                ranges: dict[str, dict[Trait, tuple[float, float]]] | None = None) -> PromptSpec:
    """Spec for one prompt id (1-8) or the ``None`` sentinel."""
    if ranges is None:
        ranges = load_ranges()
    if prompt_id is None:
        return _build_spec(None, _FEEDBACK_TRAITS, ranges, scale=2, expected=None)
    if prompt_id not in _ASAP_TRAITS:
        raise KeyError(f"unknown prompt id: {prompt_id!r}")
    order = forward_order(Family.ASAP)
    traits = tuple(t for t in order if t in _ASAP_TRAITS[prompt_id])
    return _build_spec(prompt_id, traits, ranges, scale=1,
                       expected=EXPECTED_ASAP_COUNTS[prompt_id])


# ---------------------------------------------------------------------------
# File readers


def _read_delimited(path: str | Path, delimiter: str) -> tuple[list[str], list[dict[str, str]]]:
    """Read a delimited file with a header row; utf-8 with cp1252 fallback."""
    data = Path(path).read_bytes()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError:
        text = data.decode("cp1252")
    # StringIO (not splitlines) so quoted fields may contain newlines
    reader = csv.reader(io.StringIO(text, newline=""), delimiter=delimiter)
    rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: empty file, expected a header row")
    header = [h.strip() for h in rows[0]]
    records = []
    for cells in rows[1:]:
        if not any(cell.strip() for cell in cells):
            continue
        records.append({h: (cells[i] if i < len(cells) else "") for i, h in enumerate(header)})
    return header, records


def _norm_col(name: str) -> str:
    return name.strip().lower().replace("_", " ")


def _find_column(header: list[str], wanted: tuple[str, ...], path: str | Path) -> str:
    normalized = {_norm_col(h): h for h in header}
    for candidate in wanted:
        if candidate in normalized:
            return normalized[candidate]
    raise SchemaError(f"{path}: missing column {wanted[0]!r}")


def _parse_score(cell: str, essay_id: str, column: str) -> float | None:
    cell = cell.strip()
    if cell == "" or cell.lower() in ("nan", "na"):
        return None
    try:
        return float(cell)
    except ValueError:
        raise DataError(f"essay {essay_id}: non-numeric value {cell!r} in column {column!r}") from None


def _check_in_range(essay_id: str, trait: Trait, value: float, spec: PromptSpec) -> None:
    cat = spec.to_category(trait, value)
    lo, hi = spec.category_range(trait)
    if not lo <= cat <= hi:
        raise DataError(
            f"essay {essay_id}: {trait.surface} score {value} outside configured "
            f"range {spec.display(lo)}..{spec.display(hi)} for prompt {spec.prompt_id}")


# ---------------------------------------------------------------------------
# Loaders


def load_asap_combined(asap_path: str | Path, asap_pp_paths: list[str | Path],
                       ranges_path: str | Path | None = None) -> Corpus:
    """Merge the main ASAP file with per-prompt trait files into one corpus.

    Rows of prompts 1-6 without a matching trait-file row are dropped with
    a warning; trait rows without a main-file row are ignored.
    """
    ranges = load_ranges(ranges_path)
    specs = {p: prompt_spec(p, ranges) for p in range(1, 9)}

    header, records = _read_delimited(asap_path, "\t")
    col_id = _find_column(header, ("essay id",), asap_path)
    col_set = _find_column(header, ("essay set",), asap_path)
    col_text = _find_column(header, ("essay",), asap_path)
    col_overall = _find_column(header, ("domain1 score",), asap_path)

    trait_rows: dict[str, dict[Trait, float | None]] = {}
    for pp_path in asap_pp_paths:
        pp_header, pp_records = _read_delimited(pp_path, "\t")
        pp_id = _find_column(pp_header, ("essay id", "essayid"), pp_path)
        surface_cols = {}
        for h in pp_header:
            if h == pp_id:
                continue
            try:
                surface_cols[from_surface(h.strip())] = h
            except KeyError:
                pass  # non-trait columns are allowed and ignored
        for rec in pp_records:
            essay_id = rec[pp_id].strip()
            if essay_id in trait_rows:
                raise DataError(f"duplicate essay_id {essay_id} across trait files")
            trait_rows[essay_id] = {
                t: _parse_score(rec[col], essay_id, col) for t, col in surface_cols.items()
            }

    essays: list[Essay] = []
    seen: set[str] = set()
    dropped = 0
    for rec in records:
        essay_id = rec[col_id].strip()
        if essay_id in seen:
            raise DataError(f"duplicate essay_id {essay_id} in {asap_path}")
        seen.add(essay_id)
        try:
            prompt_id = int(rec[col_set].strip())
        except ValueError:
            raise DataError(f"essay {essay_id}: non-integer prompt id {rec[col_set]!r}") from None
        if prompt_id not in specs:
            raise DataError(f"essay {essay_id}: unknown prompt id {prompt_id}")
        spec = specs[prompt_id]

        overall = _parse_score(rec[col_overall], essay_id, col_overall)
        if overall is None:
            raise DataError(f"essay {essay_id}: non-numeric value in column {col_overall!r}")

        gold: dict[Trait, float] = {t: math.nan for t in spec.traits}
        gold[Trait.OVERALL] = overall
        if prompt_id <= 6:
            if essay_id not in trait_rows:
                dropped += 1
                continue
            for trait, value in trait_rows[essay_id].items():
                if trait in gold and value is not None:
                    gold[trait] = value
        else:
            for k, trait in enumerate(_RATER_TRAITS[prompt_id], start=1):
                if trait not in gold:
                    continue
                cols = [f"rater1_trait{k}", f"rater2_trait{k}", f"rater3_trait{k}"]
                for c in cols[:2]:
                    if c not in rec:
                        raise SchemaError(f"{asap_path}: missing column {c!r}")
                r1 = _parse_score(rec[cols[0]], essay_id, cols[0])
                r2 = _parse_score(rec[cols[1]], essay_id, cols[1])
                r3 = _parse_score(rec.get(cols[2], ""), essay_id, cols[2])
                if prompt_id == 8 and r3 is not None:
                    gold[trait] = 2 * r3  # adjudicated rating replaces the pair
                elif r1 is not None and r2 is not None:
                    gold[trait] = r1 + r2

        for trait, value in gold.items():
            if not math.isnan(value):
                _check_in_range(essay_id, trait, value, spec)
        essays.append(Essay(essay_id=essay_id, prompt_id=prompt_id,
                            text=rec[col_text].strip(), gold=gold))

    if dropped:
        log.warning("dropped %d essays with no matching trait-file row", dropped)
    return Corpus(family=Family.ASAP, essays=tuple(essays), specs=specs)


def load_feedback_prize(path: str | Path,
                        ranges_path: str | Path | None = None) -> Corpus:
    """Load the six-trait argumentative-essay file (no prompt division)."""
    ranges = load_ranges(ranges_path)
    spec = prompt_spec(FEEDBACK_PROMPT, ranges)

    header, records = _read_delimited(path, ",")
    col_id = _find_column(header, ("text id", "essay id"), path)
    col_text = _find_column(header, ("full text", "essay", "text"), path)
    trait_cols = {t: _find_column(header, (_norm_col(t.surface),), path) for t in spec.traits}

    essays: list[Essay] = []
    seen: set[str] = set()
    for rec in records:
        essay_id = rec[col_id].strip()
        if essay_id in seen:
            raise DataError(f"duplicate essay_id {essay_id} in {path}")
        seen.add(essay_id)
        gold: dict[Trait, float] = {}
        for trait, col in trait_cols.items():
            value = _parse_score(rec[col], essay_id, col)
            if value is None:
                raise DataError(f"essay {essay_id}: missing {trait.surface} score")
            _check_in_range(essay_id, trait, value, spec)
            gold[trait] = value
        essays.append(Essay(essay_id=essay_id, prompt_id=FEEDBACK_PROMPT,
                            text=rec[col_text].strip(), gold=gold))
    return Corpus(family=Family.FEEDBACK, essays=tuple(essays),
                  specs={FEEDBACK_PROMPT: spec})


# ---------------------------------------------------------------------------
# Folds


def folds(corpus: Corpus, split_source: str | Path | int) -> list[FoldAssignment]:
    """Five-fold assignments, from split files or a deterministic seed.

    A path names a directory of ``fold_<k>.<role>`` files (one essay id
    per line; ``dev`` optional, carved as every 8th train id when absent).
    An integer seed generates a stratified-by-prompt split where each
    essay is tested exactly once: per prompt the shuffled ids are cut into
    five chunks, fold k tests chunk k and uses chunk k+1 (mod 5) as dev.
    """
    if isinstance(split_source, (str, Path)):
        return _folds_from_files(corpus, Path(split_source))
    return _folds_from_seed(corpus, int(split_source))


def _folds_from_files(corpus: Corpus, split_dir: Path) -> list[FoldAssignment]:
    known = {e.essay_id for e in corpus.essays}

    def read_ids(path: Path) -> list[str]:
        ids = [line.strip() for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
        unknown = [i for i in ids if i not in known]
        if unknown:
            raise DataError(f"{path}: unknown essay_id {unknown[0]}")
        return ids

    assignments = []
    for k in range(5):
        train_path = split_dir / f"fold_{k}.train"
        test_path = split_dir / f"fold_{k}.test"
        dev_path = split_dir / f"fold_{k}.dev"
        if not train_path.exists() or not test_path.exists():
            raise DataError(f"{split_dir}: missing split files for fold {k}")
        train = read_ids(train_path)
        test = read_ids(test_path)
        if dev_path.exists():
            dev = read_ids(dev_path)
        else:
            dev = [i for idx, i in enumerate(train) if idx % 8 == 0]
            train = [i for idx, i in enumerate(train) if idx % 8 != 0]
        assignments.append(FoldAssignment(k, tuple(train), tuple(dev), tuple(test)))
    return assignments


def _folds_from_seed(corpus: Corpus, seed: int) -> list[FoldAssignment]:
    rng = np.random.Generator(np.random.PCG64(seed))
    by_prompt: dict[int | None, list[str]] = {}
    for e in corpus.essays:
        by_prompt.setdefault(e.prompt_id, []).append(e.essay_id)

    chunks_by_prompt = {}
    for prompt_id in sorted(by_prompt, key=lambda p: (p is None, p)):
        ids = sorted(by_prompt[prompt_id])
        perm = rng.permutation(len(ids))
        shuffled = [ids[i] for i in perm]
        chunks_by_prompt[prompt_id] = [list(c) for c in np.array_split(shuffled, 5)]

    assignments = []
    for k in range(5):
        train: list[str] = []
        dev: list[str] = []
        test: list[str] = []
        for chunks in chunks_by_prompt.values():
            test.extend(chunks[k])
            dev.extend(chunks[(k + 1) % 5])
            for j in range(5):
                if j not in (k, (k + 1) % 5):
                    train.extend(chunks[j])
        assignments.append(FoldAssignment(k, tuple(train), tuple(dev), tuple(test)))
    return assignments


# ---------------------------------------------------------------------------
# Serialization


def _gold_to_json(gold: dict[Trait, float]) -> dict[str, float | None]:
    return {t.surface: (None if math.isnan(v) else v) for t, v in gold.items()}


def corpus_to_json(corpus: Corpus) -> str:
    """Canonical JSON serialization; identical inputs give identical bytes."""
    specs = []
    for key in sorted(corpus.specs, key=lambda p: (p is None, p)):
        spec = corpus.specs[key]
        specs.append({
            "prompt_id": "none" if spec.prompt_id is None else spec.prompt_id,
            "traits": [t.surface for t in spec.traits],
            "score_range": {t.surface: list(spec.score_range[t]) for t in spec.traits},
            "scale": spec.scale,
            "essay_count_expected": spec.essay_count_expected,
        })
    essays = [{
        "essay_id": e.essay_id,
        "prompt_id": "none" if e.prompt_id is None else e.prompt_id,
        "text": e.text,
        "gold": _gold_to_json(e.gold),
    } for e in corpus.essays]
    doc = {"family": corpus.family.value, "specs": specs, "essays": essays}
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def corpus_from_json(text: str) -> Corpus:
    doc = json.loads(text)
    specs: dict[int | None, PromptSpec] = {}
    for s in doc["specs"]:
        pid = None if s["prompt_id"] == "none" else int(s["prompt_id"])
        traits = tuple(from_surface(x) for x in s["traits"])
        ranges = {from_surface(k): (int(v[0]), int(v[1])) for k, v in s["score_range"].items()}
        specs[pid] = PromptSpec(prompt_id=pid, traits=traits, score_range=ranges,
                                scale=int(s["scale"]),
                                essay_count_expected=s["essay_count_expected"])
    essays = []
    for e in doc["essays"]:
        pid = None if e["prompt_id"] == "none" else int(e["prompt_id"])
        gold = {from_surface(k): (math.nan if v is None else float(v))
                for k, v in e["gold"].items()}
        essays.append(Essay(essay_id=e["essay_id"], prompt_id=pid, text=e["text"], gold=gold))
    return Corpus(family=Family(doc["family"]), essays=tuple(essays), specs=specs)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    Path(path).write_text(corpus_to_json(corpus), encoding="utf-8")


def load_corpus(path: str | Path) -> Corpus:
    return corpus_from_json(Path(path).read_text(encoding="utf-8"))


def corpus_hash(corpus: Corpus) -> str:
    return hashlib.sha256(corpus_to_json(corpus).encode("utf-8")).hexdigest()
