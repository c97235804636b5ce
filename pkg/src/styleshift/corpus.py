"""Corpus records: line-delimited JSON with one example per line.

Schema per line: {"source": str, "target": str?, "reference": str?,
"source_style": str, "target_style": str}. ``target`` and ``reference``
are optional; everything else is required.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path


class CorpusError(ValueError):
    pass


@dataclass
class FewShotPair:
    """A parallel example: source-style sentence and its restyled twin."""

    source: str
    source_style: str
    target_style: str
    target: str | None = None
    reference: str | None = None
    index: int = 0

    @property
    def pair_id(self) -> str:
        return str(self.index)

    def graph_key(self, side: str) -> str:
        """Sentence id used to look the side up in a CoNLL-U graph source."""
        return f"{self.index}:{side}"


def load_corpus(path: str | Path, allow_empty: bool = False) -> list[FewShotPair]:
    """Read records from a JSONL file, validating required fields.

    Raises CorpusError naming the offending line for malformed JSON or
    missing required fields. An empty file is an error unless
    ``allow_empty`` is set (input sets may legitimately be empty).
    """
    records: list[FewShotPair] = []
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{path}: line {line_no}: invalid JSON ({exc.msg})") from exc
        if not isinstance(raw, dict):
            raise CorpusError(f"{path}: line {line_no}: record must be a JSON object")
        for field_name in ("source", "source_style", "target_style"):
            if field_name not in raw or not isinstance(raw[field_name], str) or not raw[field_name]:
                raise CorpusError(
                    f"{path}: line {line_no}: missing or empty required field {field_name!r}"
                )
        records.append(
            FewShotPair(
                source=raw["source"],
                target=raw.get("target"),
                reference=raw.get("reference"),
                source_style=raw["source_style"],
                target_style=raw["target_style"],
                index=len(records),
            )
        )
    if not records and not allow_empty:
        raise CorpusError(f"{path}: corpus file is empty")
    return records


def save_corpus(records: list[FewShotPair], path: str | Path) -> None:
    """Write records back out as JSONL; optional fields omitted when unset."""
    lines = []
    for rec in records:
        raw = {k: v for k, v in asdict(rec).items() if k != "index" and v is not None}
        lines.append(json.dumps(raw, sort_keys=True))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
