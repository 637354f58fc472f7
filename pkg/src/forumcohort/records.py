"""Archive ingestion: newline-delimited dump parsing, cleaning, timelines.

Dump lines are JSON objects with fields ``id, author, subreddit,
created_utc, title, selftext``. Parsing never aborts on a bad line; each
failure is reported as a :class:`ParseError` with its line number.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Iterator, Union

from .errors import DataError

REMOVED_SENTINELS = frozenset({"[removed]", "[deleted]"})

_REQUIRED_FIELDS = ("id", "author", "subreddit", "created_utc")


@dataclass(frozen=True)
class RawRecord:
    """One dump line before cleaning. ``forum`` is case-normalized."""

    id: str
    author: str
    forum: str
    created_at: int
    title: str
    body: str


@dataclass(frozen=True)
class Post:
    """A cleaned submission; ``text`` is the title/body joined by a newline."""

    id: str
    author: str
    forum: str
    created_at: int
    text: str


@dataclass(frozen=True)
class ParseError:
    line_number: int
    reason: str


@dataclass(frozen=True)
class Rejected:
    reason: str


@dataclass(frozen=True)
class UserTimeline:
    """All posts of one author, strictly sorted by (created_at, id)."""

    author: str
    posts: tuple[Post, ...]


def normalize_forum(name: str) -> str:
    return name.strip().lower()


def _parse_line(obj: dict, seen_ids: set[str]) -> RawRecord:
    for field in _REQUIRED_FIELDS:
        if field not in obj:
            raise ValueError(f"missing field {field}")
    rec_id = str(obj["id"]).strip()
    if not rec_id:
        raise ValueError("empty id")
    if rec_id in seen_ids:
        raise ValueError(f"duplicate id {rec_id}")
    author = str(obj["author"]).strip()
    if not author:
        raise ValueError("empty author")
    created = obj["created_utc"]
    if isinstance(created, bool) or not isinstance(created, int):
        # Archive dumps occasionally carry string timestamps; accept digits.
        if isinstance(created, str) and created.strip().isdigit():
            created = int(created.strip())
        else:
            raise ValueError("non-integer timestamp")
    if created <= 0:
        raise ValueError("non-positive timestamp")
    return RawRecord(
        id=rec_id,
        author=author,
        forum=normalize_forum(str(obj["subreddit"])),
        created_at=created,
        title=str(obj.get("title") or ""),
        body=str(obj.get("selftext") or ""),
    )


def parse_records(
    stream: Union[IO[bytes], Iterable[bytes]],
    seen_ids: set[str] | None = None,
) -> tuple[list[RawRecord], list[ParseError]]:
    """Parse a byte stream of newline-delimited records, order-preserving.

    Well-formed lines become RawRecords; malformed lines become
    ParseErrors with their 1-based line number. ``seen_ids`` lets a
    multi-file ingest enforce corpus-wide id uniqueness.
    """
    if seen_ids is None:
        seen_ids = set()
    records: list[RawRecord] = []
    errors: list[ParseError] = []
    for line_number, raw in enumerate(stream, start=1):
        if not raw.strip():
            continue
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError:
            errors.append(ParseError(line_number, "invalid encoding"))
            continue
        try:
            obj = json.loads(text)
        except json.JSONDecodeError:
            errors.append(ParseError(line_number, "invalid json"))
            continue
        if not isinstance(obj, dict):
            errors.append(ParseError(line_number, "record is not an object"))
            continue
        try:
            record = _parse_line(obj, seen_ids)
        except ValueError as exc:
            errors.append(ParseError(line_number, str(exc)))
            continue
        seen_ids.add(record.id)
        records.append(record)
    return records, errors


def clean(record: RawRecord) -> Union[Post, Rejected]:
    """Sentinel-bodied records are rejected, then empty ones; the rest
    become Posts with the stripped title and body joined by a newline
    (the newline is omitted when either part is empty)."""
    if record.body.strip() in REMOVED_SENTINELS:
        return Rejected("removed")
    parts = [p.strip() for p in (record.title, record.body) if p.strip()]
    if not parts:
        return Rejected("empty")
    return Post(
        id=record.id,
        author=record.author,
        forum=record.forum,
        created_at=record.created_at,
        text="\n".join(parts),
    )


def build_timelines(posts: Iterable[Post]) -> dict[str, UserTimeline]:
    """Group posts by author, each timeline sorted by (created_at, id)."""
    by_author: dict[str, list[Post]] = {}
    for post in posts:
        by_author.setdefault(post.author, []).append(post)
    return {
        author: UserTimeline(
            author=author,
            posts=tuple(sorted(group, key=lambda p: (p.created_at, p.id))),
        )
        for author, group in sorted(by_author.items())
    }


def post_to_dict(post: Post) -> dict:
    return {
        "id": post.id,
        "author": post.author,
        "forum": post.forum,
        "created_at": post.created_at,
        "text": post.text,
    }


def post_from_dict(obj: dict) -> Post:
    return Post(
        id=str(obj["id"]),
        author=str(obj["author"]),
        forum=str(obj["forum"]),
        created_at=int(obj["created_at"]),
        text=str(obj["text"]),
    )


def dump_ndjson_line(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def write_posts(posts: Iterable[Post], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for post in posts:
            fh.write(dump_ndjson_line(post_to_dict(post)))
            fh.write("\n")


def iter_ndjson(path: Path) -> Iterator[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{line_number}: invalid json") from exc
            if not isinstance(obj, dict):
                raise DataError(f"{path}:{line_number}: record is not an object")
            yield obj


def read_posts(path: Path) -> list[Post]:
    try:
        return [post_from_dict(obj) for obj in iter_ndjson(path)]
    except KeyError as exc:
        raise DataError(f"{path}: post record missing field {exc}") from exc
