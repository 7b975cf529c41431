"""Documentation ingestion: load pages, strip markup, filter, classify."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from html import unescape
from html.parser import HTMLParser
from pathlib import Path
from typing import Optional

import requests

from .errors import EmptyDocument, FetchFailed, JudgeUnavailable
from .judges import HeuristicJudge, judge_with_fallback
from .netutil import check_url_allowed, run_pool

logger = logging.getLogger(__name__)

DEFAULT_TEXT_CAP = 512 * 1024  # bytes of cleaned text kept per document

# content inside these elements never carries documentation text
_SKIPPED = {"script", "style", "noscript", "template"}
# elements that end a visual line; a newline keeps endpoint lines parseable
_BLOCK = {
    "p", "div", "section", "article", "header", "footer", "main", "aside",
    "h1", "h2", "h3", "h4", "h5", "h6", "li", "ul", "ol", "table", "tr",
    "br", "hr", "pre", "blockquote", "dt", "dd", "nav", "form", "title",
}


@dataclass
class ApiDocument:
    source_id: str
    origin: str
    raw: str
    text: str
    category: Optional[str] = None
    analysis: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "source_id": self.source_id,
            "origin": self.origin,
            "category": self.category,
            "analysis": self.analysis,
        }


class _TextExtractor(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.parts: list = []
        self._skip_depth = 0
        self._anchor_hrefs: list = []
        self._anchor_texts: list = []

    def handle_starttag(self, tag, attrs):
        if tag in _SKIPPED:
            self._skip_depth += 1
            return
        if tag == "a":
            href = dict(attrs).get("href") or ""
            self._anchor_hrefs.append(href)
            self._anchor_texts.append([])
        if tag in _BLOCK:
            self.parts.append("\n")

    def handle_endtag(self, tag):
        if tag in _SKIPPED:
            self._skip_depth = max(0, self._skip_depth - 1)
            return
        if tag == "a" and self._anchor_hrefs:
            href = self._anchor_hrefs.pop()
            text = "".join(self._anchor_texts.pop())
            # endpoint URLs often live only in the link target
            if href.startswith(("http://", "https://")) and href not in text:
                self.parts.append(f" {href} ")
        if tag in _BLOCK:
            self.parts.append("\n")

    def handle_data(self, data):
        if self._skip_depth:
            return
        if self._anchor_texts:
            self._anchor_texts[-1].append(data)
        self.parts.append(data)


def dehtml(markup: str) -> str:
    """Markup to plain text: tags gone, script/style dropped, hrefs kept,
    horizontal whitespace collapsed, blank lines removed."""
    parser = _TextExtractor()
    parser.feed(markup)
    parser.close()
    text = unescape("".join(parser.parts))
    lines = []
    for line in text.split("\n"):
        line = re.sub(r"[ \t\r\f\v ]+", " ", line).strip()
        if line:
            lines.append(line)
    return "\n".join(lines)


def _looks_like_html(content: str) -> bool:
    head = content[:2048].lower()
    return "<html" in head or "<!doctype" in head or re.search(r"<\w+[^>]*>", head) is not None


def _source_id_from_origin(origin: str) -> str:
    tail = origin.rstrip("/").rsplit("/", 1)[-1]
    tail = tail.split("?", 1)[0] or "doc"
    stem = tail.rsplit(".", 1)[0] if "." in tail else tail
    slug = re.sub(r"[^a-z0-9]+", "_", stem.lower()).strip("_")
    return slug or "doc"


def load_and_clean(
    origin: str,
    source_id: Optional[str] = None,
    timeout: float = 30.0,
    max_text_bytes: int = DEFAULT_TEXT_CAP,
    tls_verify: bool = True,
    offline: bool = False,
) -> ApiDocument:
    """Read a page from a file or URL and clean it to plain text."""
    if origin.startswith(("http://", "https://")):
        try:
            check_url_allowed(origin, offline)
            resp = requests.get(origin, timeout=timeout, verify=tls_verify)
            resp.raise_for_status()
            raw = resp.text
        except Exception as exc:  # noqa: BLE001 - every fetch failure maps the same way
            raise FetchFailed(origin, str(exc)) from exc
    else:
        try:
            raw = Path(origin).read_text(encoding="utf-8", errors="replace")
        except OSError as exc:
            raise FetchFailed(origin, str(exc)) from exc

    text = dehtml(raw) if _looks_like_html(raw) else _plain_clean(raw)
    if not text.strip():
        raise EmptyDocument(origin)
    encoded = text.encode("utf-8")
    if len(encoded) > max_text_bytes:
        text = encoded[:max_text_bytes].decode("utf-8", errors="ignore")
        logger.warning("truncated %s to %d bytes of text", origin, max_text_bytes)
    return ApiDocument(
        source_id=source_id or _source_id_from_origin(origin),
        origin=origin,
        raw=raw,
        text=text,
    )


def _plain_clean(content: str) -> str:
    lines = []
    for line in content.split("\n"):
        line = re.sub(r"[ \t\r\f\v ]+", " ", line).strip()
        if line:
            lines.append(line)
    return "\n".join(lines)


def filter_api_pages(doc: ApiDocument, judge) -> bool:
    """True iff the page documents callable endpoints (not an index page)."""
    return judge.is_api_page(doc.text)


def classify_document(doc: ApiDocument, judge):
    """Label documentation quality; fills doc.category / doc.analysis."""
    category, analysis = judge.classify_doc(doc.text)
    doc.category = category
    doc.analysis = analysis[:300]
    return category, doc.analysis


def load_corpus_manifest(path) -> list:
    """Manifest format: JSON list of {source_id, origin}."""
    entries = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(entries, list):
        raise FetchFailed(str(path), "manifest must be a JSON list")
    out = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict) or "origin" not in entry:
            raise FetchFailed(str(path), f"manifest entry {i} needs an origin")
        out.append(
            {
                "source_id": entry.get("source_id") or _source_id_from_origin(entry["origin"]),
                "origin": entry["origin"],
            }
        )
    return out


def ingest_corpus(
    manifest_entries: list,
    judge,
    fallback: Optional[HeuristicJudge] = None,
    width: int = 4,
    tls_verify: bool = True,
    offline: bool = False,
):
    """Load, clean, filter, and classify a corpus concurrently.

    Returns (documents, decisions, failures): decisions carry the per-doc
    api-page verdict and classification; failures record load errors without
    aborting the run.
    """
    fallback = fallback or HeuristicJudge()

    def work(entry):
        try:
            doc = load_and_clean(
                entry["origin"],
                source_id=entry["source_id"],
                tls_verify=tls_verify,
                offline=offline,
            )
        except (FetchFailed, EmptyDocument) as exc:
            return None, {"source_id": entry["source_id"], "error": str(exc)}
        try:
            is_api, degraded = judge_with_fallback("is_api_page", judge, fallback, doc.text)
            (category, analysis), degraded2 = judge_with_fallback(
                "classify_doc", judge, fallback, doc.text
            )
        except JudgeUnavailable as exc:
            return None, {"source_id": entry["source_id"], "error": f"judge: {exc}"}
        doc.category, doc.analysis = category, analysis[:300]
        decision = {
            "source_id": doc.source_id,
            "is_api_page": bool(is_api),
            "category": category,
            "analysis": doc.analysis,
            "judge_degraded": bool(degraded or degraded2),
        }
        return doc, decision

    results = run_pool(work, manifest_entries, width)
    documents, decisions, failures = [], [], []
    for doc, info in results:
        if doc is None:
            failures.append(info)
        else:
            documents.append(doc)
            decisions.append(info)
    return documents, decisions, failures
