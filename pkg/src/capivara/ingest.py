"""Package-history event stream: JSONL reading, ordering, trail rules.

One event per line with fields ts (integer UTC seconds), action
("add" | "update"), path, text (raw recipe content), author. Malformed
lines are counted and skipped, never fatal. Trail membership of a package
is decided by case-insensitive substring regexes over the package name.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

ACTIONS = ("add", "update")


@dataclass(frozen=True)
class PackageEvent:
    ts: int
    action: str
    path: str
    text: str
    author: str

    def to_obj(self) -> dict:
        return {
            "ts": self.ts,
            "action": self.action,
            "path": self.path,
            "text": self.text,
            "author": self.author,
        }


def _event_from_obj(obj: object) -> PackageEvent | None:
    if not isinstance(obj, dict):
        return None
    ts = obj.get("ts")
    action = obj.get("action")
    path = obj.get("path")
    text = obj.get("text")
    author = obj.get("author")
    if not isinstance(ts, int) or ts <= 0 or action not in ACTIONS:
        return None
    if not isinstance(path, str) or not isinstance(text, str) or not isinstance(author, str):
        return None
    return PackageEvent(ts=ts, action=action, path=path, text=text, author=author)


def read_events(path: str) -> tuple[list[PackageEvent], int]:
    """Read events sorted by timestamp (stable on ties); returns the list
    and the number of malformed lines skipped."""
    events: list[PackageEvent] = []
    skipped = 0
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            try:
                parsed = _event_from_obj(json.loads(line))
            except json.JSONDecodeError:
                parsed = None
            if parsed is None:
                skipped += 1
            else:
                events.append(parsed)
    events.sort(key=lambda event: event.ts)
    return events, skipped


def write_events(events: list[PackageEvent], path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for event in events:
            handle.write(json.dumps(event.to_obj(), sort_keys=True) + "\n")


@dataclass(frozen=True)
class TrailRule:
    trail_name: str
    pattern: str

    @property
    def regex(self) -> re.Pattern:
        return re.compile(self.pattern, re.IGNORECASE)


def assign_trails(package_name: str, rules: list[TrailRule]) -> set[str]:
    """All trails whose pattern matches anywhere in the package name."""
    return {rule.trail_name for rule in rules if rule.regex.search(package_name)}


def default_rules(trail_names: list[str]) -> list[TrailRule]:
    """Default rule per trail: the first four characters of its name,
    lowercased (the whole name when shorter)."""
    return [
        TrailRule(trail_name=name, pattern=re.escape(name[:4].lower()))
        for name in trail_names
    ]
