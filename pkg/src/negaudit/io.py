"""JSONL/JSON reading and atomic writing."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Iterator

from negaudit.answers import PredictionRecord, ProtocolItem, VerifiedPrediction


def iter_jsonl(path: str | Path) -> Iterator[dict[str, Any]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc


def _atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps_jsonl(records: Iterable[dict[str, Any]]) -> str:
    return "".join(json.dumps(r, ensure_ascii=False, sort_keys=False) + "\n" for r in records)


def write_jsonl(path: str | Path, records: Iterable[dict[str, Any]]) -> None:
    _atomic_write_text(path, dumps_jsonl(records))


def write_json(path: str | Path, obj: Any) -> None:
    _atomic_write_text(path, json.dumps(obj, indent=2, ensure_ascii=False) + "\n")


def write_text(path: str | Path, text: str) -> None:
    _atomic_write_text(path, text)


def load_protocol(path: str | Path, lexicon=None) -> list[ProtocolItem]:
    out = []
    for lineno, rec in enumerate(iter_jsonl(path), 1):
        try:
            out.append(ProtocolItem.from_dict(rec, lexicon=lexicon))
        except (KeyError, ValueError, TypeError) as exc:
            raise ValueError(f"{path}: record {lineno}: {exc}") from exc
    return out


def load_predictions(path: str | Path) -> list[PredictionRecord]:
    """Load base predictions; verified files are accepted and read as their final choice."""
    out = []
    for lineno, rec in enumerate(iter_jsonl(path), 1):
        try:
            if "final_index" in rec and "choice_index" not in rec:
                out.append(VerifiedPrediction.from_dict(rec).as_prediction())
            else:
                out.append(PredictionRecord.from_dict(rec))
        except (KeyError, ValueError, TypeError) as exc:
            raise ValueError(f"{path}: record {lineno}: {exc}") from exc
    return out


def load_verified(path: str | Path) -> list[VerifiedPrediction]:
    out = []
    for lineno, rec in enumerate(iter_jsonl(path), 1):
        try:
            out.append(VerifiedPrediction.from_dict(rec))
        except (KeyError, ValueError, TypeError) as exc:
            raise ValueError(f"{path}: record {lineno}: {exc}") from exc
    return out
