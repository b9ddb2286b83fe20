"""
Inventory construction: keyword sampling, RSS/Atom enclosure discovery,
and audio probing of collected sources.

Remote access is isolated behind the Fetcher interface; tests and
desk-scale runs use the local-path fetcher. Search-result expansion
lives behind SourceAdapter, shipped only as a prepared-list stub.
"""

from __future__ import annotations

import hashlib
import random
import time
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from urllib.parse import urlparse

from .audio import AudioProbeError, probe_wav
from .model import AudioDocument

AUDIO_EXTENSIONS = (".mp3", ".m4a", ".wav", ".ogg", ".flac", ".aac")

ATOM_NS = "{http://www.w3.org/2005/Atom}"


class FeedParseError(Exception):
    """Malformed XML or non-feed root element."""


@dataclass
class FeedRecord:
    feed_url: str
    language_label: str
    fetched_at: str


@dataclass
class EnclosureRecord:
    feed_url: str
    item_guid: str
    enclosure_url: str
    mime_type: str
    declared_length_bytes: int | None = None


def sample_keywords(titles: list[str], n: int, seed: int) -> list[str]:
    """Draw n distinct keywords uniformly without replacement; seed-deterministic."""
    unique = sorted(set(titles))
    if n > len(unique):
        raise ValueError(f"cannot sample {n} keywords from {len(unique)} unique titles")
    return random.Random(seed).sample(unique, n)


def _is_audio(url: str, mime: str) -> bool:
    if mime.startswith("audio/"):
        return True
    path = urlparse(url).path.lower()
    return path.endswith(AUDIO_EXTENSIONS)


def parse_rss(feed_xml: bytes, feed_url: str = "") -> list[EnclosureRecord]:
    """Extract audio enclosures from an RSS 2.0 or Atom feed.

    Keeps document order, drops non-audio attachments, and dedupes by
    enclosure URL keeping the first occurrence.
    """
    try:
        root = ET.fromstring(feed_xml)
    except ET.ParseError as e:
        raise FeedParseError(f"malformed XML at {e.position}: {e}") from e

    records: list[EnclosureRecord] = []
    tag = root.tag
    if tag == "rss":
        for item in root.iter("item"):
            guid = item.findtext("guid") or item.findtext("link") or ""
            for enc in item.findall("enclosure"):
                url = enc.get("url", "")
                mime = enc.get("type", "")
                if url and _is_audio(url, mime):
                    length = enc.get("length")
                    records.append(EnclosureRecord(
                        feed_url=feed_url,
                        item_guid=guid,
                        enclosure_url=url,
                        mime_type=mime or "audio/unknown",
                        declared_length_bytes=int(length) if length and length.isdigit() else None,
                    ))
    elif tag == f"{ATOM_NS}feed":
        for entry in root.findall(f"{ATOM_NS}entry"):
            guid = entry.findtext(f"{ATOM_NS}id") or ""
            for link in entry.findall(f"{ATOM_NS}link"):
                if link.get("rel") != "enclosure":
                    continue
                url = link.get("href", "")
                mime = link.get("type", "")
                if url and _is_audio(url, mime):
                    length = link.get("length")
                    records.append(EnclosureRecord(
                        feed_url=feed_url,
                        item_guid=guid,
                        enclosure_url=url,
                        mime_type=mime or "audio/unknown",
                        declared_length_bytes=int(length) if length and length.isdigit() else None,
                    ))
    else:
        raise FeedParseError(f"root element {tag!r} is neither RSS nor Atom")

    seen: set[str] = set()
    deduped = []
    for rec in records:
        if rec.enclosure_url not in seen:
            seen.add(rec.enclosure_url)
            deduped.append(rec)
    return deduped


class Fetcher:
    """Resolves a source URI to a local file path."""

    def fetch(self, uri: str) -> Path:
        raise NotImplementedError


class LocalFetcher(Fetcher):
    """Treats URIs as local paths (optionally file:// URLs)."""

    def fetch(self, uri: str) -> Path:
        if uri.startswith("file://"):
            uri = uri[len("file://"):]
        path = Path(uri)
        if not path.exists():
            raise FileNotFoundError(uri)
        return path


class HttpFetcher(Fetcher):
    """Downloads URIs over HTTP with bounded retries and per-host politeness.

    Per-host concurrency is capped (default 2) and failures retry with
    exponential backoff before giving up.
    """

    def __init__(self, cache_dir: str | Path, max_attempts: int = 3,
                 per_host_limit: int = 2, backoff_s: float = 1.0):
        import threading

        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.max_attempts = max_attempts
        self.backoff_s = backoff_s
        self._limits: dict[str, "threading.Semaphore"] = {}
        self._limits_lock = threading.Lock()
        self._per_host_limit = per_host_limit

    def _host_slot(self, host: str):
        import threading

        with self._limits_lock:
            if host not in self._limits:
                self._limits[host] = threading.Semaphore(self._per_host_limit)
            return self._limits[host]

    def fetch(self, uri: str) -> Path:
        import requests

        host = urlparse(uri).netloc
        dest = self.cache_dir / hashlib.sha1(uri.encode()).hexdigest()
        if dest.exists():
            return dest
        last_error: Exception | None = None
        slot = self._host_slot(host)
        for attempt in range(self.max_attempts):
            with slot:
                try:
                    resp = requests.get(uri, timeout=60)
                    resp.raise_for_status()
                    dest.write_bytes(resp.content)
                    return dest
                except Exception as e:
                    last_error = e
            time.sleep(self.backoff_s * (2 ** attempt))
        raise IOError(f"failed to fetch {uri} after {self.max_attempts} attempts: {last_error}")


class SourceAdapter:
    """Expands search keywords to candidate source URIs."""

    def search(self, keyword: str) -> list[str]:
        raise NotImplementedError


class PreparedListAdapter(SourceAdapter):
    """Stub adapter that serves results from a prepared keyword→URIs map."""

    def __init__(self, results: dict[str, list[str]]):
        self.results = results

    def search(self, keyword: str) -> list[str]:
        return list(self.results.get(keyword, []))


def doc_id_for(uri: str) -> str:
    return hashlib.sha1(uri.encode("utf-8")).hexdigest()[:16]


@dataclass
class InventorySource:
    uri: str
    source: str  # youtube | podcast | local


def build_inventory(sources: list[InventorySource],
                    fetcher: Fetcher | None = None) -> list[AudioDocument]:
    """Probe every source into an AudioDocument; failures are recorded, not raised.

    Output order follows input order regardless of fetch completion order,
    and len(output) == len(input) always.
    """
    fetcher = fetcher or LocalFetcher()
    docs = []
    for src in sources:
        doc = AudioDocument(
            doc_id=doc_id_for(src.uri),
            source=src.source,
            uri=src.uri,
            # Placeholders keep failed records schema-valid.
            sample_rate_hz=1,
            channels=1,
        )
        try:
            local = fetcher.fetch(src.uri)
            info = probe_wav(local)
            doc.duration_s = info.duration_s
            doc.sample_rate_hz = info.sample_rate_hz
            doc.channels = info.channels
            doc.stage_status["collect"] = "done"
        except (OSError, AudioProbeError) as e:
            doc.stage_status["collect"] = "failed"
            doc.failure_reason = str(e)
        docs.append(doc)
    return docs
