"""ASR hypothesis files: one JSON object {"id", "hypothesis"} per line.

Failed transcriptions are kept with an empty hypothesis and ``"error": true``
so that ids stay aligned with the manifest.
"""

from __future__ import annotations

import json
import os
from typing import Iterable, Iterator, NamedTuple


class Hypothesis(NamedTuple):
    id: str
    hypothesis: str
    error: bool = False


def write(path: str | os.PathLike, items: Iterable[Hypothesis]) -> None:
    seen = set()
    with open(path, "w", encoding="utf-8") as fh:
        for h in items:
            if h.id in seen:
                raise ValueError(f"duplicate id {h.id!r}")
            seen.add(h.id)
            record = {"id": h.id, "hypothesis": "" if h.error else h.hypothesis}
            if h.error:
                record["error"] = True
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def read(path: str | os.PathLike) -> Iterator[Hypothesis]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            obj = json.loads(line)
            if "id" not in obj or "hypothesis" not in obj:
                raise ValueError(f"line {lineno}: expected id and hypothesis")
            yield Hypothesis(str(obj["id"]), str(obj["hypothesis"]), bool(obj.get("error", False)))
