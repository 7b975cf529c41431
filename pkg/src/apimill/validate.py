"""Tool execution harness: build requests, invoke, judge, classify, estimate.

Outcome labels partition every validated tool into exactly one of seven
classes; the cause estimator maps the six failure counts onto conservative/
aggressive ranges over four root-cause categories.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from typing import Optional
from urllib.parse import quote, quote_from_bytes, unquote, unquote_to_bytes, urlsplit

import requests

from .errors import (
    JudgeUnavailable,
    MissingRequiredParameter,
    NegativeCount,
    UnboundPathParam,
)
from .judges import HeuristicJudge
from .model import render_scalar
from .netutil import HostRateLimiter, is_loopback_url, run_pool
from .toolgen import ToolDescriptor


# ---------------------------------------------------------------------------
# percent encoding: reserved characters must survive transport

def encode_component(value: str) -> str:
    return quote(value, safe="")


def decode_component(value: str) -> str:
    return unquote(value)


def encode_bytes(value: bytes) -> str:
    return quote_from_bytes(value, safe="")


def decode_to_bytes(value: str) -> bytes:
    return unquote_to_bytes(value)


# ---------------------------------------------------------------------------
# outcome taxonomy

class ErrorType(enum.Enum):
    PASSED = "Passed Validation"
    MISSING_ENDPOINT_PATH = "Missing Endpoint Path"
    MISSING_BASE_URL = "Missing Base URL"
    FAILED = "Failed Validation"
    ABNORMAL = "Abnormal Response"
    NO_PARAM_VALUE = "No Parameter Value"
    WRONG_PARAM_VALUE = "Wrong Parameter Value"


FAILURE_TYPES = [t for t in ErrorType if t is not ErrorType.PASSED]


@dataclass
class InvocationRecord:
    status_code: Optional[int] = None
    text: str = ""
    json_body: Optional[object] = None
    content: str = ""
    transport_error: Optional[str] = None
    retried_without_params: bool = False
    elapsed: float = 0.0

    def to_dict(self) -> dict:
        return {
            "status_code": self.status_code,
            "text": self.text,
            "json": self.json_body,
            "content": self.content,
            "transport_error": self.transport_error,
            "retried_without_params": self.retried_without_params,
            "elapsed": self.elapsed,
        }


@dataclass
class ConcreteRequest:
    verb: str
    url: str  # path placeholders substituted; query_base retained
    query: dict  # raw (unencoded) values; encoded at full_url()
    body: Optional[dict]
    headers: dict

    def full_url(self) -> str:
        if not self.query:
            return self.url
        encoded = "&".join(
            f"{encode_component(k)}={encode_component(v)}" for k, v in self.query.items()
        )
        sep = "&" if "?" in self.url else "?"
        return f"{self.url}{sep}{encoded}"


def _parse_headers(headers: list) -> dict:
    out = {}
    for line in headers:
        if ":" in line:
            name, value = line.split(":", 1)
            name, value = name.strip(), value.strip()
            if name:
                out[name] = value
        # unparsable header strings stay on the descriptor verbatim but are
        # not sendable
    return out


def build_request(tool: ToolDescriptor, args: dict) -> ConcreteRequest:
    """Bind arguments into a wire-ready request.

    Path values are percent-encoded during substitution; query values stay
    raw here and are encoded when the full URL is composed.
    """
    for arg in tool.args:
        if arg.required and args.get(arg.name) is None:
            raise MissingRequiredParameter(arg.name)

    path_bindings = {}
    for arg in tool.args:
        if arg.location == "path":
            value = args.get(arg.name)
            if value is None:
                raise UnboundPathParam(arg.name)
            path_bindings[arg.name] = render_scalar(value)
    url = tool.template.render(path_bindings, encode=True)

    declared = {a.name for a in tool.args}
    sendable = {
        name: render_scalar(value)
        for name, value in args.items()
        if name in declared and value is not None
        and any(a.name == name and a.location == "query" for a in tool.args)
    }
    if tool.method.upper() == "GET":
        query, body = sendable, None
    else:
        # non-GET: parameters travel as a JSON object body
        query, body = {}, {
            name: args[name]
            for name in sendable
        } or None

    return ConcreteRequest(
        verb=tool.method.upper(),
        url=url,
        query=query,
        body=body,
        headers=_parse_headers(tool.headers),
    )


def invoke_tool(
    tool: ToolDescriptor,
    args: dict,
    tls_verify: bool = True,
    offline: bool = False,
    rate_limiter: Optional[HostRateLimiter] = None,
) -> InvocationRecord:
    """Perform the request; at most two HTTP calls (one param-less retry).

    A non-200 first response triggers one retry without query/body arguments,
    and the retry's response is returned unconditionally.  Transport failures
    are recorded, never raised.
    """
    request = build_request(tool, args)
    started = time.monotonic()

    def perform(url: str, body: Optional[dict]):
        host = urlsplit(url).hostname or ""
        if offline and not is_loopback_url(url):
            raise requests.ConnectionError(f"offline mode forbids host {host!r}")
        if rate_limiter is not None:
            rate_limiter.acquire(host)
        return requests.request(
            request.verb,
            url,
            json=body,
            headers=request.headers or None,
            timeout=tool.timeout_seconds,
            verify=tls_verify,
            allow_redirects=True,
        )

    record = InvocationRecord()
    sent_args = bool(request.query or request.body)
    try:
        response = perform(request.full_url(), request.body)
        if response.status_code != 200 and sent_args:
            # in case the API can't handle redundant params
            response = perform(request.url, None)
            record.retried_without_params = True
    except requests.RequestException as exc:
        record.transport_error = str(exc) or exc.__class__.__name__
        record.elapsed = time.monotonic() - started
        return record

    record.status_code = response.status_code
    record.text = response.text
    try:
        record.json_body = response.json()
    except ValueError:
        record.json_body = None
    record.content = response.content.decode("utf-8", errors="replace")
    record.elapsed = time.monotonic() - started
    return record


def judge_response(tool_description: str, record: InvocationRecord, judge,
                   fallback: Optional[HeuristicJudge] = None):
    """pass/fail verdict on a 200 response; remote failures degrade to the
    heuristic with the degradation noted in the rationale."""
    try:
        passed, rationale = judge.judge_response(
            tool_description, record.text, record.json_body
        )
        return passed, rationale
    except JudgeUnavailable as exc:
        backup = fallback or HeuristicJudge()
        passed, rationale = backup.judge_response(
            tool_description, record.text, record.json_body
        )
        return passed, f"heuristic fallback ({exc}): {rationale}"


@dataclass
class ValidationReport:
    tool_name: str
    attempts: list
    error_type: ErrorType
    judge_verdict: Optional[dict] = None
    passed: bool = False
    source_id: str = ""
    args_used: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "tool_name": self.tool_name,
            "attempts": [a.to_dict() for a in self.attempts],
            "error_type": self.error_type.value,
            "judge_verdict": self.judge_verdict,
            "passed": self.passed,
            "source_id": self.source_id,
            "args_used": self.args_used,
        }


def _preflight(tool: ToolDescriptor, args: dict) -> Optional[ErrorType]:
    """Structural failures that make an HTTP attempt pointless."""
    template = tool.template
    scheme_ok = template.raw.startswith(("http://", "https://"))
    if not scheme_ok:
        return ErrorType.MISSING_BASE_URL

    path = template.erased().split("?", 1)[0]
    after_host = path.split("://", 1)[-1]
    slash = after_host.find("/")
    path_only = after_host[slash:] if slash >= 0 else ""
    if path_only in ("", "/") and tool.args:
        return ErrorType.MISSING_ENDPOINT_PATH
    for arg in tool.args:
        if arg.location == "path" and args.get(arg.name) is None:
            return ErrorType.MISSING_ENDPOINT_PATH  # placeholder stays unresolved
    for arg in tool.args:
        if arg.required and args.get(arg.name) is None:
            return ErrorType.NO_PARAM_VALUE
    return None


def classify_outcome(
    tool: ToolDescriptor,
    args: dict,
    record: Optional[InvocationRecord],
    judge_passed: Optional[bool],
) -> ErrorType:
    """Total decision function over the seven outcome labels."""
    structural = _preflight(tool, args)
    if structural is not None:
        return structural
    if record is None or record.transport_error is not None:
        # required values were all present; the request itself failed
        return ErrorType.WRONG_PARAM_VALUE
    if record.status_code == 200:
        return ErrorType.PASSED if judge_passed else ErrorType.FAILED
    return ErrorType.ABNORMAL


def default_args(tool: ToolDescriptor) -> dict:
    return {a.name: a.preferred_value for a in tool.args if a.has_value}


def validate_tool(
    tool: ToolDescriptor,
    judge,
    args: Optional[dict] = None,
    tls_verify: bool = True,
    offline: bool = False,
    rate_limiter: Optional[HostRateLimiter] = None,
) -> ValidationReport:
    """build → invoke → judge → classify for one tool."""
    bound = default_args(tool) if args is None else dict(args)

    structural = _preflight(tool, bound)
    if structural is not None:
        return ValidationReport(
            tool_name=tool.tool_name,
            attempts=[],
            error_type=structural,
            passed=False,
            source_id=tool.source_id,
            args_used=bound,
        )

    record = invoke_tool(
        tool, bound, tls_verify=tls_verify, offline=offline, rate_limiter=rate_limiter
    )
    verdict = None
    judge_passed = None
    if record.status_code == 200:
        judge_passed, rationale = judge_response(tool.description, record, judge)
        verdict = {"passed": judge_passed, "rationale": rationale}
    outcome = classify_outcome(tool, bound, record, judge_passed)
    return ValidationReport(
        tool_name=tool.tool_name,
        attempts=[record],
        error_type=outcome,
        judge_verdict=verdict,
        passed=outcome is ErrorType.PASSED,
        source_id=tool.source_id,
        args_used=bound,
    )


def run_validation(
    tools: list,
    judge,
    width: int = 4,
    tls_verify: bool = True,
    offline: bool = False,
    rate_limiter: Optional[HostRateLimiter] = None,
) -> list:
    limiter = rate_limiter or HostRateLimiter(rate_per_sec=1.0)
    return run_pool(
        lambda t: validate_tool(
            t, judge, tls_verify=tls_verify, offline=offline, rate_limiter=limiter
        ),
        tools,
        width,
    )


# ---------------------------------------------------------------------------
# cause estimation

CAUSE_CATEGORIES = (
    "Missing API Documentation Details",
    "Incorrectly Extracted URL Path",
    "Incorrect Parameter Values",
    "Server-Side Errors",
)


@dataclass
class CauseEstimate:
    """(conservative, aggressive) integer range per cause category."""

    missing_doc_details: tuple
    incorrect_url_path: tuple
    incorrect_param_values: tuple
    server_side: tuple

    def ranges(self) -> dict:
        return {
            CAUSE_CATEGORIES[0]: self.missing_doc_details,
            CAUSE_CATEGORIES[1]: self.incorrect_url_path,
            CAUSE_CATEGORIES[2]: self.incorrect_param_values,
            CAUSE_CATEGORIES[3]: self.server_side,
        }

    def to_dict(self) -> dict:
        return {name: {"conservative": lo, "aggressive": hi}
                for name, (lo, hi) in self.ranges().items()}


def estimate_causes(counts: dict) -> CauseEstimate:
    """Range arithmetic over the six failure counts.

    The aggressive bound adds each category's additional terms on top of its
    conservative bound.
    """
    by_type = {t: int(counts.get(t, 0)) for t in ErrorType}
    for error_type, count in by_type.items():
        if count < 0:
            raise NegativeCount(f"{error_type.value}: {count}")

    mep = by_type[ErrorType.MISSING_ENDPOINT_PATH]
    mbu = by_type[ErrorType.MISSING_BASE_URL]
    fv = by_type[ErrorType.FAILED]
    ar = by_type[ErrorType.ABNORMAL]
    npv = by_type[ErrorType.NO_PARAM_VALUE]
    wpv = by_type[ErrorType.WRONG_PARAM_VALUE]

    return CauseEstimate(
        missing_doc_details=(0, mbu + npv),
        incorrect_url_path=(mep, mep + mbu),
        incorrect_param_values=(wpv + fv, wpv + fv + npv + ar),
        server_side=(0, fv + ar),
    )


def counts_from_reports(reports: list) -> dict:
    counts = {t: 0 for t in ErrorType}
    for report in reports:
        counts[report.error_type] += 1
    return counts


def render_error_tables(counts: dict, estimate: CauseEstimate) -> str:
    """Two aligned text tables: per-type counts, then cause ranges."""
    type_headers = [t.value for t in FAILURE_TYPES]
    type_values = [str(counts.get(t, 0)) for t in FAILURE_TYPES]
    widths = [max(len(h), len(v)) for h, v in zip(type_headers, type_values)]
    lines = ["Error Type Counts"]
    lines.append("  ".join(h.ljust(w) for h, w in zip(type_headers, widths)))
    lines.append("  ".join(v.ljust(w) for v, w in zip(type_values, widths)))
    lines.append(f"Passed Validation: {counts.get(ErrorType.PASSED, 0)}")
    lines.append("")
    lines.append("Error Cause Estimation (conservative-aggressive)")
    ranges = estimate.ranges()
    cause_values = [f"{lo}-{hi}" for lo, hi in ranges.values()]
    cause_widths = [max(len(h), len(v)) for h, v in zip(CAUSE_CATEGORIES, cause_values)]
    lines.append("  ".join(h.ljust(w) for h, w in zip(CAUSE_CATEGORIES, cause_widths)))
    lines.append("  ".join(v.ljust(w) for v, w in zip(cause_values, cause_widths)))
    return "\n".join(lines)
