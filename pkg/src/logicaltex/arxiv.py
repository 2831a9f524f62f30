"""Fetch and cache archive metadata records used as conversion ground truth.

Live requests go through a single rate-limited gate (one request at a
time, minimum spacing between requests); everything else is served from a
plain-file cache that is easy to inspect and to pre-seed for offline
test runs.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
import threading
import time
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path

DEFAULT_BASE_URL = "https://export.arxiv.org/api/query"
MIN_REQUEST_INTERVAL = 3.0  # seconds between live requests (API etiquette)

_NEW_ID = re.compile(r"^\d{4}\.\d{4,5}(v\d+)?$")
_OLD_ID = re.compile(r"^(?:[a-z-]+(?:\.[A-Z]{2})?/)?\d{7}(v\d+)?$")

_ATOM = "{http://www.w3.org/2005/Atom}"
_ARXIV = "{http://arxiv.org/schemas/atom}"


class ArxivError(Exception):
    pass


class InvalidIdError(ArxivError):
    pass


class NotFoundError(ArxivError):
    pass


class TransportError(ArxivError):
    pass


class FeedParseError(ArxivError):
    pass


class CacheError(ArxivError):
    pass


def is_valid_id(identifier: str) -> bool:
    """Both identifier grammars: 7-digit old form (with optional archive
    prefix) and the newer YYMM.NNNNN form."""
    return bool(_NEW_ID.match(identifier) or _OLD_ID.match(identifier))


@dataclass(frozen=True)
class ArxivRecord:
    id: str
    title: str
    authors: tuple[str, ...]
    abstract: str
    affiliations: tuple[str, ...] = ()  # stored when present, never scored
    fetched_at: float = 0.0

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "authors": list(self.authors),
            "abstract": self.abstract,
            "affiliations": list(self.affiliations),
            "fetched_at": self.fetched_at,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArxivRecord":
        return cls(
            id=d["id"],
            title=d["title"],
            authors=tuple(d.get("authors", [])),
            abstract=d.get("abstract", ""),
            affiliations=tuple(d.get("affiliations", [])),
            fetched_at=float(d.get("fetched_at", 0.0)),
        )


def _squash(text: str | None) -> str:
    return re.sub(r"\s+", " ", text or "").strip()


def parse_feed(data: bytes, identifier: str) -> ArxivRecord:
    """Pull title, author names and summary out of an Atom query feed."""
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise FeedParseError(f"malformed feed for {identifier}: {exc}") from exc
    entries = root.findall(f"{_ATOM}entry")
    if not entries:
        raise NotFoundError(f"no entry for {identifier}")
    entry = entries[0]
    title = _squash(entry.findtext(f"{_ATOM}title"))
    if title == "Error" or not title:
        raise NotFoundError(f"identifier {identifier} unknown to the API")
    authors = []
    affiliations = []
    for person in entry.findall(f"{_ATOM}author"):
        name = _squash(person.findtext(f"{_ATOM}name"))
        if name:
            authors.append(name)
        for aff in person.findall(f"{_ARXIV}affiliation"):
            text = _squash(aff.text)
            if text:
                affiliations.append(text)
    abstract = _squash(entry.findtext(f"{_ATOM}summary"))
    if not authors and not abstract:
        raise FeedParseError(f"entry for {identifier} carries no usable fields")
    return ArxivRecord(
        id=identifier,
        title=title,
        authors=tuple(authors),
        abstract=abstract,
        affiliations=tuple(affiliations),
        fetched_at=time.time(),
    )


def _default_transport(url: str) -> bytes:
    import requests

    try:
        resp = requests.get(url, timeout=30)
        resp.raise_for_status()
        return resp.content
    except requests.RequestException as exc:
        raise TransportError(str(exc)) from exc


class _RateGate:
    def __init__(self, interval: float):
        self.interval = interval
        self._lock = threading.Lock()
        self._last = 0.0

    def wait(self):
        with self._lock:
            now = time.monotonic()
            delay = self._last + self.interval - now
            if delay > 0:
                time.sleep(delay)
            self._last = time.monotonic()


class ArxivClient:
    """Metadata lookups with a persistent cache in front of the API.

    ``transport`` may be any callable (url) -> bytes, which keeps tests
    fully offline; ``offline=True`` forbids live requests outright.
    """

    def __init__(self, cache_dir: str | Path, base_url: str | None = None,
                 min_interval: float = MIN_REQUEST_INTERVAL,
                 transport=None, offline: bool = False):
        self.cache_dir = Path(cache_dir)
        self.base_url = base_url or os.environ.get("LOGICALTEX_ARXIV_URL", DEFAULT_BASE_URL)
        self.offline = offline
        self._transport = transport or _default_transport
        self._gate = _RateGate(min_interval)

    # -- cache --------------------------------------------------------------

    def _cache_path(self, identifier: str) -> Path:
        safe = identifier.replace("/", "_")
        return self.cache_dir / f"{safe}.json"

    def cache_get(self, identifier: str) -> ArxivRecord | None:
        path = self._cache_path(identifier)
        if not path.exists():
            return None
        try:
            return ArxivRecord.from_dict(json.loads(path.read_text(encoding="utf-8")))
        except (OSError, ValueError, KeyError) as exc:
            raise CacheError(f"unreadable cache record {path}: {exc}") from exc

    def cache_put(self, record: ArxivRecord) -> None:
        path = self._cache_path(record.id)
        try:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=self.cache_dir, suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(record.to_dict(), fh, ensure_ascii=False, indent=1)
            os.replace(tmp, path)
        except OSError as exc:
            raise CacheError(f"cannot write cache record {path}: {exc}") from exc

    # -- fetch ----------------------------------------------------------------

    def fetch(self, identifier: str) -> ArxivRecord:
        """Return the record for an identifier, from cache when possible;
        live requests are serialized and spaced."""
        if not is_valid_id(identifier):
            raise InvalidIdError(f"not an archive identifier: {identifier!r}")
        cached = self.cache_get(identifier)
        if cached is not None:
            return cached
        if self.offline:
            raise TransportError(
                f"{identifier} not cached and live requests are disabled")
        self._gate.wait()
        url = f"{self.base_url}?id_list={identifier}"
        data = self._transport(url)
        record = parse_feed(data, identifier)
        self.cache_put(record)
        return record
