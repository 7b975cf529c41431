"""Typed domain model for extracted API descriptions.

The central currency of the pipeline: a validated `ApiSpec` holding
`Endpoint`s and their `Parameter`s, matching the extraction JSON schema
(snake_case field names: required_parameters, optional_parameters).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any, Optional, Union

Scalar = Union[str, int, float, bool]

KNOWN_HTTP_METHODS = {
    "GET", "POST", "PUT", "PATCH", "DELETE", "HEAD", "OPTIONS", "TRACE", "CONNECT",
}

# JSON Schema the extraction backends are asked to satisfy.  Structured-mode
# remote backends receive it verbatim as their response format.
EXTRACTION_JSON_SCHEMA: dict = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "definitions": {
        "Parameters": {
            "type": "object",
            "properties": {
                "name": {
                    "type": "string",
                    "description": "Name of the parameter",
                },
                "type": {
                    "type": "string",
                    "description": "Type of the parameter",
                },
                "description": {
                    "type": "string",
                    "description": (
                        "Description of the parameter. If the parameter is "
                        "categorical, please list all possible values."
                    ),
                },
                "default": {"description": "Default value of the parameter"},
                "example": {"description": "Example value of the parameter"},
            },
            "required": ["name"],
        },
        "Endpoint": {
            "type": "object",
            "properties": {
                "name": {
                    "type": "string",
                    "description": "Name of the endpoint",
                },
                "description": {
                    "type": "string",
                    "description": "Description of the endpoint",
                },
                "method": {
                    "type": "string",
                    "description": "Method of the endpoint",
                },
                "url": {
                    "oneOf": [
                        {"type": "string"},
                        {"type": "array", "items": {"type": "string"}},
                    ],
                    "description": "URL of the endpoint, start with http:// or https://",
                },
                "headers": {
                    "type": "array",
                    "items": {"type": "string"},
                    "description": "Headers of the endpoint",
                    "default": [],
                },
                "required_parameters": {
                    "type": "array",
                    "items": {"$ref": "#/definitions/Parameters"},
                },
                "optional_parameters": {
                    "type": "array",
                    "items": {"$ref": "#/definitions/Parameters"},
                },
            },
            "required": ["name", "method", "url"],
        },
        "API": {
            "type": "object",
            "properties": {
                "title": {
                    "type": "string",
                    "description": "Title of the API",
                },
                "endpoints": {
                    "type": "array",
                    "items": {"$ref": "#/definitions/Endpoint"},
                },
            },
            "required": ["endpoints"],
        },
    },
    "type": "object",
    "properties": {"API": {"$ref": "#/definitions/API"}},
}


@dataclass
class Parameter:
    """One endpoint parameter.

    `default_value`/`example_value` hold JSON scalars; compound values are
    stored as their compact-JSON string form.  None means "absent".
    """

    name: str
    type_hint: Optional[str] = None
    description: Optional[str] = None
    default_value: Optional[Scalar] = None
    example_value: Optional[Scalar] = None

    @property
    def has_value(self) -> bool:
        return self.example_value is not None or self.default_value is not None

    @property
    def preferred_value(self) -> Optional[Scalar]:
        # example beats default when both exist
        if self.example_value is not None:
            return self.example_value
        return self.default_value

    def to_dict(self) -> dict:
        out: dict = {"name": self.name}
        if self.type_hint is not None:
            out["type"] = self.type_hint
        if self.description is not None:
            out["description"] = self.description
        if self.default_value is not None:
            out["default"] = self.default_value
        if self.example_value is not None:
            out["example"] = self.example_value
        return out


@dataclass
class Endpoint:
    name: str
    method: str
    url: Union[str, list]
    description: Optional[str] = None
    headers: list = field(default_factory=list)
    required_parameters: list = field(default_factory=list)
    optional_parameters: list = field(default_factory=list)

    @property
    def method_is_standard(self) -> bool:
        return self.method in KNOWN_HTTP_METHODS

    def all_parameters(self) -> list:
        return list(self.required_parameters) + list(self.optional_parameters)

    def to_dict(self) -> dict:
        out: dict = {"name": self.name}
        if self.description is not None:
            out["description"] = self.description
        out["method"] = self.method
        out["url"] = self.url
        out["headers"] = list(self.headers)
        out["required_parameters"] = [p.to_dict() for p in self.required_parameters]
        out["optional_parameters"] = [p.to_dict() for p in self.optional_parameters]
        return out


@dataclass
class ApiSpec:
    endpoints: list
    title: Optional[str] = None

    def to_dict(self) -> dict:
        out: dict = {}
        if self.title is not None:
            out["title"] = self.title
        out["endpoints"] = [e.to_dict() for e in self.endpoints]
        return out

    def to_json(self, indent: Optional[int] = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, ensure_ascii=False)


@dataclass
class ResolvedUrl:
    primary: str
    alternates: list
    has_scheme: bool
    path_is_empty: bool


@dataclass
class SchemaViolation:
    """One problem found while validating a structured document.

    kind ∈ {missing_required_field, wrong_value_kind, not_an_object};
    path is dotted/indexed and reachable in the input tree.
    """

    kind: str
    path: str
    detail: str = ""

    def __str__(self) -> str:
        msg = f"{self.kind} at {self.path}"
        if self.detail:
            msg += f" ({self.detail})"
        return msg


def _missing(path: str) -> SchemaViolation:
    return SchemaViolation("missing_required_field", path)


def _wrong(path: str, detail: str) -> SchemaViolation:
    return SchemaViolation("wrong_value_kind", path, detail)


def _not_object(path: str) -> SchemaViolation:
    return SchemaViolation("not_an_object", path, "expected an object")


def coerce_scalar(value: Any) -> Optional[Scalar]:
    """Normalize a default/example value to a storable scalar.

    Compound values (objects/arrays) are kept as compact JSON strings so the
    information survives even when the extractor over-structures a field.
    """
    if value is None or isinstance(value, (str, int, float, bool)):
        return value
    return json.dumps(value, separators=(",", ":"), ensure_ascii=False)


def render_scalar(value: Optional[Scalar]) -> str:
    """String form of a stored scalar as it should appear in a request."""
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    return json.dumps(value)


def _text_field(raw: Any, path: str, violations: list) -> Optional[str]:
    # free-text field: strings pass, stray scalars are stringified,
    # containers are a kind error
    if raw is None:
        return None
    if isinstance(raw, str):
        return raw
    if isinstance(raw, (int, float, bool)):
        return json.dumps(raw)
    violations.append(_wrong(path, f"expected text, got {type(raw).__name__}"))
    return None


def _parse_parameter(raw: Any, path: str, violations: list) -> Optional[Parameter]:
    if not isinstance(raw, dict):
        violations.append(_not_object(path))
        return None
    name = raw.get("name")
    if name is None:
        violations.append(_missing(f"{path}.name"))
        return None
    if not isinstance(name, str):
        violations.append(_wrong(f"{path}.name", "parameter name must be a string"))
        return None
    name = name.strip()
    if not name:
        violations.append(_wrong(f"{path}.name", "parameter name is empty"))
        return None
    if re.search(r"\s", name):
        violations.append(_wrong(f"{path}.name", "parameter name contains whitespace"))
        return None
    return Parameter(
        name=name,
        type_hint=_text_field(raw.get("type"), f"{path}.type", violations),
        description=_text_field(raw.get("description"), f"{path}.description", violations),
        default_value=coerce_scalar(raw.get("default")),
        example_value=coerce_scalar(raw.get("example")),
    )


def _parse_param_list(raw: Any, path: str, violations: list) -> list:
    if raw is None:
        return []
    if not isinstance(raw, list):
        violations.append(_wrong(path, "expected an array"))
        return []
    out = []
    for i, item in enumerate(raw):
        p = _parse_parameter(item, f"{path}[{i}]", violations)
        if p is not None:
            out.append(p)
    return out


def _parse_url(raw: Any, path: str, violations: list) -> Optional[Union[str, list]]:
    if isinstance(raw, str):
        return raw.strip()
    if isinstance(raw, list):
        if not raw:
            violations.append(_wrong(path, "url array is empty"))
            return None
        items = []
        for i, item in enumerate(raw):
            if not isinstance(item, str):
                violations.append(_wrong(f"{path}[{i}]", "url must be a string"))
                return None
            items.append(item.strip())
        return items
    violations.append(_wrong(path, "url must be a string or array of strings"))
    return None


def _parse_endpoint(raw: Any, path: str, violations: list) -> Optional[Endpoint]:
    if not isinstance(raw, dict):
        violations.append(_not_object(path))
        return None
    before = len(violations)

    name = raw.get("name")
    if name is None:
        violations.append(_missing(f"{path}.name"))
    elif not isinstance(name, str) or not name.strip():
        violations.append(_wrong(f"{path}.name", "endpoint name must be a non-empty string"))
        name = None
    else:
        name = name.strip()

    method = raw.get("method")
    if method is None:
        violations.append(_missing(f"{path}.method"))
    elif not isinstance(method, str) or not method.strip():
        violations.append(_wrong(f"{path}.method", "method must be a non-empty string"))
        method = None
    else:
        method = method.strip().upper()

    if "url" not in raw:
        violations.append(_missing(f"{path}.url"))
        url = None
    else:
        url = _parse_url(raw["url"], f"{path}.url", violations)

    headers_raw = raw.get("headers")
    headers: list = []
    if headers_raw is not None:
        if not isinstance(headers_raw, list):
            violations.append(_wrong(f"{path}.headers", "expected an array"))
        else:
            for i, h in enumerate(headers_raw):
                if isinstance(h, str):
                    headers.append(h)
                elif isinstance(h, (int, float, bool)):
                    headers.append(json.dumps(h))
                else:
                    violations.append(_wrong(f"{path}.headers[{i}]", "header must be a string"))

    required = _parse_param_list(
        raw.get("required_parameters"), f"{path}.required_parameters", violations
    )
    optional = _parse_param_list(
        raw.get("optional_parameters"), f"{path}.optional_parameters", violations
    )

    # a name may not sit in both lists: required wins; duplicates within a
    # list keep the first occurrence
    seen: set = set()
    required = [p for p in required if not (p.name in seen or seen.add(p.name))]
    optional = [p for p in optional if not (p.name in seen or seen.add(p.name))]

    if len(violations) > before or name is None or method is None or url is None:
        return None
    return Endpoint(
        name=name,
        method=method,
        url=url,
        description=_text_field(raw.get("description"), f"{path}.description", violations),
        headers=headers,
        required_parameters=required,
        optional_parameters=optional,
    )


def validate_spec(document: Any):
    """Check a parsed JSON value against the extraction schema.

    Returns (spec, violations): spec is an ApiSpec when the document is
    clean, otherwise None with every violation found.  Both the wrapped
    form {"API": {...}} and the bare form {"endpoints": [...]} are accepted;
    unknown extra fields are dropped.
    """
    violations: list = []
    if not isinstance(document, dict):
        return None, [_not_object("$")]

    root = document
    prefix = ""
    if "endpoints" not in root and isinstance(root.get("API"), dict):
        root = root["API"]
        prefix = "API."

    title = _text_field(root.get("title"), f"{prefix}title", violations)

    if "endpoints" not in root:
        violations.append(_missing(f"{prefix}endpoints"))
        return None, violations
    raw_endpoints = root["endpoints"]
    if not isinstance(raw_endpoints, list):
        violations.append(_wrong(f"{prefix}endpoints", "expected an array"))
        return None, violations

    endpoints = []
    for i, raw_ep in enumerate(raw_endpoints):
        ep = _parse_endpoint(raw_ep, f"{prefix}endpoints[{i}]", violations)
        if ep is not None:
            endpoints.append(ep)

    if violations:
        return None, violations
    return ApiSpec(endpoints=endpoints, title=title), []


def spec_from_json(text: str):
    """validate_spec over a JSON string."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        return None, [SchemaViolation("not_an_object", "$", f"not JSON: {exc.msg}")]
    return validate_spec(doc)


_MULTI_SLASH = re.compile(r"(?<!:)/{2,}")


def _collapse_slashes(url: str) -> str:
    return _MULTI_SLASH.sub("/", url)


def resolve_url(endpoint: Endpoint) -> ResolvedUrl:
    """Pick the primary URL and derive the base-URL / empty-path signals."""
    if isinstance(endpoint.url, list):
        urls = [_collapse_slashes(u) for u in endpoint.url]
        primary, alternates = urls[0], urls[1:]
    else:
        primary, alternates = _collapse_slashes(endpoint.url), []
    has_scheme = primary.startswith("http://") or primary.startswith("https://")
    if has_scheme:
        rest = primary.split("://", 1)[1]
        slash = rest.find("/")
        path = rest[slash:] if slash >= 0 else ""
    else:
        path = primary
    path = path.split("?", 1)[0]
    return ResolvedUrl(
        primary=primary,
        alternates=alternates,
        has_scheme=has_scheme,
        path_is_empty=path in ("", "/"),
    )
