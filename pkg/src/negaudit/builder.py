"""Protocol construction from study-level finding labels.

Every builder is a pure function of ``(LabelTable, BuildConfig)`` and emits
items sorted by ``(study_id, target_finding)``. The default layout puts the
target concept in slot 0, its negated form in slot 1 and the distractor in
slot 2.
"""

from __future__ import annotations

import csv
import enum
import functools
import hashlib
import json
import random
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path, PurePosixPath
from typing import Any, Iterable, Mapping, Sequence

from negaudit.answers import AnswerOption, Polarity, ProtocolItem, ProtocolKind
from negaudit.lexicon import EXTENDED, canonicalize, render_negated, render_positive

PRESENCE_QUESTION = "Which of the following findings is present on this chest X-ray study?"
ABSENCE_QUESTION = "Which of the following findings is absent on this chest X-ray study?"

DEFAULT_VOCABULARY = (
    "atelectasis",
    "cardiomegaly",
    "consolidation",
    "edema",
    "pleural effusion",
    "pneumothorax",
)
PARAPHRASE_VARIANTS = ("canonical_no", "absence_of", "not_present", "no_evidence_of", "clear_of")

_ID_PREFIX = {
    ProtocolKind.DIRECT_PRESENCE: "dp",
    ProtocolKind.REPORT_ABSENCE: "ra",
    ProtocolKind.POSITIVE_CONTROL: "pc",
    ProtocolKind.RETRO_PRESENCE: "rp",
    ProtocolKind.RETRO_ABSENCE: "rx",
}
_PRESENCE_KINDS = (ProtocolKind.DIRECT_PRESENCE, ProtocolKind.RETRO_PRESENCE)
_ABSENCE_KINDS = (ProtocolKind.REPORT_ABSENCE, ProtocolKind.RETRO_ABSENCE)


class Label(str, enum.Enum):
    PRESENT = "PRESENT"
    ABSENT = "ABSENT"
    UNCERTAIN = "UNCERTAIN"
    UNMENTIONED = "UNMENTIONED"


_NUMERIC_LABELS = {1.0: Label.PRESENT, 0.0: Label.ABSENT, -1.0: Label.UNCERTAIN}


def parse_numeric_label(raw: str) -> Label:
    text = raw.strip()
    if not text:
        return Label.UNMENTIONED
    try:
        return _NUMERIC_LABELS[float(text)]
    except (ValueError, KeyError):
        raise ValueError(f"unrecognised label value {raw!r}") from None


@dataclass(frozen=True)
class StudyLabels:
    study_id: str
    image_refs: tuple[str, ...]
    labels: dict[str, Label] = field(hash=False)

    def with_label(self, label: Label, vocabulary: Sequence[str]) -> list[str]:
        """Findings carrying exactly ``label``, in vocabulary order."""
        return [f for f in vocabulary if self.labels.get(f, Label.UNMENTIONED) is label]


@dataclass(frozen=True)
class LabelTable:
    rows: tuple[StudyLabels, ...]

    @classmethod
    def from_records(cls, records: Iterable[Mapping[str, Any]]) -> LabelTable:
        """Group per-view records by study, merging image refs.

        Each record has ``study_id``, ``image_refs`` and a ``labels`` mapping.
        Conflicting labels for the same study/finding are a hard error.
        """
        merged: dict[str, tuple[list[str], dict[str, Label]]] = {}
        for rec in records:
            sid = str(rec.get("study_id", "")).strip()
            if not sid:
                raise ValueError(f"label record without study_id: {rec!r}")
            refs, labels = merged.setdefault(sid, ([], {}))
            for ref in rec.get("image_refs", ()):
                if ref not in refs:
                    refs.append(ref)
            for finding, value in rec.get("labels", {}).items():
                label = value if isinstance(value, Label) else Label(value)
                name = canonicalize(finding)
                if name in labels and labels[name] is not label:
                    raise ValueError(f"study {sid}: conflicting labels for {name!r}")
                labels[name] = label
        rows = tuple(StudyLabels(sid, tuple(refs), labels) for sid, (refs, labels) in sorted(merged.items()))
        return cls(rows)

    def to_records(self) -> list[dict[str, Any]]:
        return [
            {
                "study_id": r.study_id,
                "image_refs": list(r.image_refs),
                "labels": {k: v.value for k, v in sorted(r.labels.items())},
            }
            for r in self.rows
        ]


def _chexpert_study_id(path: str) -> str:
    parts = PurePosixPath(path).parts
    if len(parts) < 3:
        raise ValueError(f"cannot derive study id from path {path!r}")
    return f"{parts[-3]}/{parts[-2]}"


def load_label_csv(path: str | Path, vocabulary: Sequence[str] = DEFAULT_VOCABULARY) -> LabelTable:
    """Read a label CSV.

    Either the toolkit layout (``study_id``, ``image_refs`` joined by ``;``,
    one column per finding) or the CheXpert per-view layout with a ``Path``
    column, from which the study id is derived. Columns outside
    ``vocabulary`` are ignored.
    """
    vocab = {canonicalize(v) for v in vocabulary}
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty CSV")
        columns = {name: canonicalize(name) for name in reader.fieldnames}
        native = "study_id" in reader.fieldnames
        if not native and "Path" not in reader.fieldnames:
            raise ValueError(f"{path}: need a study_id or Path column")
        finding_cols = [c for c, name in columns.items() if name in vocab]
        for lineno, row in enumerate(reader, 2):
            try:
                if native:
                    sid = row["study_id"]
                    refs = [r for r in (row.get("image_refs") or "").split(";") if r]
                else:
                    sid = _chexpert_study_id(row["Path"])
                    refs = [row["Path"]]
                labels = {columns[c]: parse_numeric_label(row[c] or "") for c in finding_cols}
            except (ValueError, KeyError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
            records.append({"study_id": sid, "image_refs": refs, "labels": labels})
    return LabelTable.from_records(records)


def load_label_jsonl(path: str | Path) -> LabelTable:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    return LabelTable.from_records(records)


def load_label_table(path: str | Path, vocabulary: Sequence[str] = DEFAULT_VOCABULARY) -> LabelTable:
    if str(path).endswith((".jsonl", ".json")):
        return load_label_jsonl(path)
    return load_label_csv(path, vocabulary)


def write_label_csv(path: str | Path, table: LabelTable, vocabulary: Sequence[str]) -> None:
    inverse = {Label.PRESENT: "1.0", Label.ABSENT: "0.0", Label.UNCERTAIN: "-1.0", Label.UNMENTIONED: ""}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["study_id", "image_refs", *vocabulary])
        for r in table.rows:
            writer.writerow(
                [r.study_id, ";".join(r.image_refs)]
                + [inverse[r.labels.get(f, Label.UNMENTIONED)] for f in vocabulary]
            )


@dataclass(frozen=True)
class BuildConfig:
    finding_vocabulary: tuple[str, ...] = DEFAULT_VOCABULARY
    distractor_rule: str = "FIRST_IN_VOCAB_ORDER"
    layout: tuple[str, ...] = ("target", "negated", "distractor")
    seed: int = 42

    def __post_init__(self) -> None:
        if not self.finding_vocabulary:
            raise ValueError("finding_vocabulary is empty")
        if self.distractor_rule != "FIRST_IN_VOCAB_ORDER":
            raise ValueError(f"unsupported distractor_rule {self.distractor_rule!r}")
        if sorted(self.layout) != ["distractor", "negated", "target"]:
            raise ValueError(f"layout must permute target/negated/distractor, got {self.layout}")
        object.__setattr__(self, "finding_vocabulary", tuple(canonicalize(v) for v in self.finding_vocabulary))

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def _item_id(kind: ProtocolKind, study_id: str, target: str) -> str:
    return f"{_ID_PREFIX[kind]}-{study_id}-{target.replace(' ', '_')}"


@functools.lru_cache(maxsize=1024)
def _pos(concept: str) -> AnswerOption:
    return AnswerOption(render_positive(concept), concept, Polarity.POS)


@functools.lru_cache(maxsize=1024)
def _neg(concept: str) -> AnswerOption:
    return AnswerOption(render_negated(concept, "canonical_no"), concept, Polarity.NEG, "canonical_no")


def _contrastive_item(
    row: StudyLabels, kind: ProtocolKind, question: str, target: str, distractor: str, cfg: BuildConfig
) -> ProtocolItem:
    slots = {"target": _pos(target), "negated": _neg(target), "distractor": _pos(distractor)}
    options = tuple(slots[name] for name in cfg.layout)
    return ProtocolItem(
        item_id=_item_id(kind, row.study_id, target),
        study_id=row.study_id,
        image_refs=row.image_refs,
        question=question,
        options=options,
        gold_index=cfg.layout.index("target"),
        protocol_kind=kind,
        target_finding=target,
        variant_tag="canonical_no",
    )


def _sorted(items: list[ProtocolItem]) -> list[ProtocolItem]:
    return sorted(items, key=lambda it: (it.study_id, it.target_finding))


def build_direct_presence(
    table: LabelTable, cfg: BuildConfig, kind: ProtocolKind = ProtocolKind.DIRECT_PRESENCE
) -> list[ProtocolItem]:
    """One item per cleanly present finding that has a different present distractor."""
    if kind not in _PRESENCE_KINDS:
        raise ValueError(f"{kind} is not a presence kind")
    vocab = cfg.finding_vocabulary
    items = []
    for row in table.rows:
        present = row.with_label(Label.PRESENT, vocab)
        for target in present:
            others = [f for f in present if f != target]
            if others:
                items.append(_contrastive_item(row, kind, PRESENCE_QUESTION, target, others[0], cfg))
    return _sorted(items)


def build_report_absence(
    table: LabelTable, cfg: BuildConfig, kind: ProtocolKind = ProtocolKind.REPORT_ABSENCE
) -> list[ProtocolItem]:
    """One item per cleanly absent finding in a study with some present finding."""
    if kind not in _ABSENCE_KINDS:
        raise ValueError(f"{kind} is not an absence kind")
    vocab = cfg.finding_vocabulary
    items = []
    for row in table.rows:
        present = row.with_label(Label.PRESENT, vocab)
        if not present:
            continue
        for target in row.with_label(Label.ABSENT, vocab):
            items.append(_contrastive_item(row, kind, ABSENCE_QUESTION, target, present[0], cfg))
    return _sorted(items)


def build_positive_control(
    table: LabelTable, direct_items: Sequence[ProtocolItem], cfg: BuildConfig
) -> list[ProtocolItem]:
    """Pair each direct-presence item with a negation-free control.

    The control keeps the question and replaces the negated form and the
    present distractor with the study's first two cleanly absent findings.
    """
    rows = {r.study_id: r for r in table.rows}
    kind = ProtocolKind.POSITIVE_CONTROL
    items = []
    for direct in direct_items:
        row = rows.get(direct.study_id)
        if row is None:
            raise ValueError(f"direct item {direct.item_id} references unknown study {direct.study_id}")
        absent = row.with_label(Label.ABSENT, cfg.finding_vocabulary)
        if len(absent) < 2:
            continue
        slots = {"target": _pos(direct.target_finding), "negated": _pos(absent[0]), "distractor": _pos(absent[1])}
        items.append(
            ProtocolItem(
                item_id=_item_id(kind, row.study_id, direct.target_finding),
                study_id=row.study_id,
                image_refs=row.image_refs,
                question=direct.question,
                options=tuple(slots[name] for name in cfg.layout),
                gold_index=cfg.layout.index("target"),
                protocol_kind=kind,
                target_finding=direct.target_finding,
                variant_tag=f"positive_only+paired={direct.item_id}",
            )
        )
    return _sorted(items)


def build_protocol(table: LabelTable, kind: ProtocolKind, cfg: BuildConfig) -> list[ProtocolItem]:
    if kind in _PRESENCE_KINDS:
        return build_direct_presence(table, cfg, kind)
    if kind in _ABSENCE_KINDS:
        return build_report_absence(table, cfg, kind)
    return build_positive_control(table, build_direct_presence(table, cfg), cfg)


# -- transforms ---------------------------------------------------------------


def _replace_variant(tag: str, variant: str) -> str:
    parts = tag.split("+")
    parts[0] = variant
    return "+".join(parts)


def apply_paraphrase(items: Sequence[ProtocolItem], variant: str) -> list[ProtocolItem]:
    """Re-render each item's negated option through another negation template."""
    if variant not in PARAPHRASE_VARIANTS:
        raise ValueError(f"unknown paraphrase variant {variant!r}; choose from {PARAPHRASE_VARIANTS}")
    out = []
    for item in items:
        negated = item.negated_indices
        if len(negated) != 1:
            raise ValueError(f"item {item.item_id} has {len(negated)} negated options; cannot paraphrase")
        i = negated[0]
        concept = item.options[i].concept
        new = AnswerOption(render_negated(concept, variant, EXTENDED), concept, Polarity.NEG, variant)
        options = item.options[:i] + (new,) + item.options[i + 1 :]
        out.append(item.replace(options=options, variant_tag=_replace_variant(item.variant_tag, variant)))
    return out


def layout_permutation(seed: int, item_id: str, n_options: int) -> list[int]:
    """``perm[new_slot] = old_slot``, keyed on ``(seed, item_id)`` only."""
    digest = hashlib.sha256(f"{seed}:{item_id}".encode()).digest()
    rng = random.Random(int.from_bytes(digest[:8], "big"))
    perm = list(range(n_options))
    rng.shuffle(perm)
    return perm


def shuffle_layout(items: Sequence[ProtocolItem], seed: int) -> list[ProtocolItem]:
    out = []
    for item in items:
        perm = layout_permutation(seed, item.item_id, len(item.options))
        options = tuple(item.options[p] for p in perm)
        tag = f"{item.variant_tag}+shuffled_seed{seed}:{'.'.join(map(str, perm))}"
        out.append(item.replace(options=options, gold_index=perm.index(item.gold_index), variant_tag=tag))
    return out


def slot_permutation(item: ProtocolItem) -> list[int] | None:
    """Recover the most recent shuffle permutation from ``variant_tag``."""
    for part in reversed(item.variant_tag.split("+")):
        if part.startswith("shuffled_seed") and ":" in part:
            return [int(x) for x in part.split(":", 1)[1].split(".")]
    return None


# -- build report -------------------------------------------------------------


@dataclass
class BuildReport:
    kind: str
    n_records: int
    n_studies_in_table: int
    n_constructible_studies: int
    mean_records_per_study: float | None
    records_per_finding: dict[str, int]
    expected_records: int | None = None

    @property
    def count_mismatch(self) -> bool:
        return self.expected_records is not None and self.expected_records != self.n_records

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["count_mismatch"] = self.count_mismatch
        return out


def build_report(
    table: LabelTable, items: Sequence[ProtocolItem], kind: ProtocolKind, expected_records: int | None = None
) -> BuildReport:
    studies = {it.study_id for it in items}
    per_finding = Counter(it.target_finding for it in items)
    return BuildReport(
        kind=kind.value,
        n_records=len(items),
        n_studies_in_table=len(table.rows),
        n_constructible_studies=len(studies),
        mean_records_per_study=round(len(items) / len(studies), 2) if studies else None,
        records_per_finding=dict(per_finding.most_common()),
        expected_records=expected_records,
    )
