"""Turn validated endpoints into executable tool descriptors and exports.

A descriptor is the language-neutral runtime artifact; the function-source
and OpenAPI exports are serializations of it, so nothing downstream ever
shells out to an interpreter.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Optional
from urllib.parse import quote

import yaml

from .errors import MalformedUrl, MixedHosts, UnboundPathParam
from .model import Endpoint, Parameter, Scalar, render_scalar, resolve_url

DEFAULT_TIMEOUT_SECONDS = 50


@dataclass(frozen=True)
class Segment:
    kind: str  # "lit" | "param"
    value: str


@dataclass
class UrlTemplate:
    raw: str
    segments: list
    query_base: Optional[str] = None

    def param_names(self) -> list:
        names, seen = [], set()
        for seg in self.segments:
            if seg.kind == "param" and seg.value not in seen:
                seen.add(seg.value)
                names.append(seg.value)
        return names

    def canonical(self) -> str:
        """Single normal form: every placeholder as {name}."""
        body = "".join(
            seg.value if seg.kind == "lit" else "{" + seg.value + "}"
            for seg in self.segments
        )
        if self.query_base is not None:
            body += "?" + self.query_base
        return body

    def erased(self) -> str:
        """Placeholder names dropped — the positional identity of the path."""
        return "".join(
            seg.value if seg.kind == "lit" else "{}" for seg in self.segments
        )

    def render(self, bindings: dict, encode: bool = True) -> str:
        parts = []
        for seg in self.segments:
            if seg.kind == "lit":
                parts.append(seg.value)
            else:
                if seg.value not in bindings or bindings[seg.value] is None:
                    raise UnboundPathParam(seg.value)
                value = str(bindings[seg.value])
                parts.append(quote(value, safe="") if encode else value)
        url = "".join(parts)
        if self.query_base is not None:
            url += "?" + self.query_base
        return url


_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def parse_url_template(url: str) -> UrlTemplate:
    """Recognize the three placeholder spellings: {x}, :x (after a slash), <x>."""
    if not url:
        raise MalformedUrl("empty url")
    base, sep, query = url.partition("?")
    query_base = query if sep else None

    segments: list = []
    lit: list = []

    def flush():
        if lit:
            segments.append(Segment("lit", "".join(lit)))
            lit.clear()

    i = 0
    n = len(base)
    while i < n:
        ch = base[i]
        if ch in "{<":
            closer = "}" if ch == "{" else ">"
            end = base.find(closer, i + 1)
            if end < 0:
                raise MalformedUrl(f"unclosed {ch!r} placeholder")
            name = base[i + 1 : end].strip()
            if not name:
                raise MalformedUrl("empty placeholder name")
            flush()
            segments.append(Segment("param", name))
            i = end + 1
            continue
        if ch == ":" and i > 0 and base[i - 1] == "/":
            m = _IDENT.match(base, i + 1)
            if m:
                flush()
                segments.append(Segment("param", m.group(0)))
                i = m.end()
                continue
        lit.append(ch)
        i += 1
    flush()
    return UrlTemplate(raw=url, segments=segments, query_base=query_base)


@dataclass
class ToolArg:
    name: str
    location: str  # "path" | "query"
    required: bool
    type_hint: Optional[str] = None
    description: Optional[str] = None
    example_value: Optional[Scalar] = None
    default_value: Optional[Scalar] = None

    @property
    def has_value(self) -> bool:
        return self.example_value is not None or self.default_value is not None

    @property
    def preferred_value(self) -> Optional[Scalar]:
        if self.example_value is not None:
            return self.example_value
        return self.default_value

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "location": self.location,
            "required": self.required,
            "type_hint": self.type_hint,
            "description": self.description,
            "example_value": self.example_value,
            "default_value": self.default_value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ToolArg":
        return cls(**d)


@dataclass
class ToolDescriptor:
    tool_name: str
    description: str
    method: str
    template: UrlTemplate
    args: list
    headers: list = field(default_factory=list)
    source_id: str = ""
    timeout_seconds: int = DEFAULT_TIMEOUT_SECONDS
    warnings: list = field(default_factory=list)

    @property
    def missing_value_args(self) -> list:
        return [a for a in self.args if a.required and not a.has_value]

    def to_dict(self) -> dict:
        return {
            "tool_name": self.tool_name,
            "description": self.description,
            "method": self.method,
            "url_template": self.template.raw,
            "args": [a.to_dict() for a in self.args],
            "headers": list(self.headers),
            "source_id": self.source_id,
            "timeout_seconds": self.timeout_seconds,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ToolDescriptor":
        return cls(
            tool_name=d["tool_name"],
            description=d.get("description", ""),
            method=d["method"],
            template=parse_url_template(d["url_template"]),
            args=[ToolArg.from_dict(a) for a in d.get("args", [])],
            headers=list(d.get("headers", [])),
            source_id=d.get("source_id", ""),
            timeout_seconds=int(d.get("timeout_seconds", DEFAULT_TIMEOUT_SECONDS)),
            warnings=list(d.get("warnings", [])),
        )


def sanitize_tool_name(name: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "_", name.lower()).strip("_")
    slug = re.sub(r"_{2,}", "_", slug)
    if not slug:
        return "tool"
    if slug[0].isdigit():
        slug = "f_" + slug
    return slug


def generate_tool(
    endpoint: Endpoint,
    source_id: str,
    used_names: Optional[set] = None,
) -> ToolDescriptor:
    """Descriptor for one scheme-bearing endpoint.

    Path placeholders claim their matching parameters; placeholders with no
    declared parameter get a synthesized required arg and a warning (the
    caller sees the tool rather than losing it).
    """
    resolved = resolve_url(endpoint)
    template = parse_url_template(resolved.primary)
    path_names = set(template.param_names())

    warnings: list = []
    args: list = []

    def add(params: list, required: bool):
        for p in params:
            location = "path" if p.name in path_names else "query"
            args.append(
                ToolArg(
                    name=p.name,
                    location=location,
                    required=required,
                    type_hint=p.type_hint,
                    description=p.description,
                    example_value=p.example_value,
                    default_value=p.default_value,
                )
            )

    declared = {p.name for p in endpoint.all_parameters()}
    add(endpoint.required_parameters, True)
    for name in template.param_names():
        if name not in declared:
            args.append(ToolArg(name=name, location="path", required=True))
            warnings.append(f"synthesized required arg for unbound path placeholder: {name}")
    add(endpoint.optional_parameters, False)

    base = sanitize_tool_name(endpoint.name)
    tool_name = base
    if used_names is not None:
        n = 2
        while tool_name in used_names:
            tool_name = f"{base}_{n}"
            n += 1
        used_names.add(tool_name)

    return ToolDescriptor(
        tool_name=tool_name,
        description=endpoint.description or endpoint.name,
        method=endpoint.method,
        template=template,
        args=args,
        headers=list(endpoint.headers),
        source_id=source_id,
        warnings=warnings,
    )


def generate_tools_for_spec(spec, source_id: str):
    """All buildable tools from one spec, plus the endpoints that lack a
    scheme (those become Missing Base URL outcomes downstream)."""
    used: set = set()
    tools, schemeless = [], []
    for endpoint in spec.endpoints:
        if not resolve_url(endpoint).has_scheme:
            schemeless.append(endpoint)
            continue
        tools.append(generate_tool(endpoint, source_id, used))
    return tools, schemeless


# ---------------------------------------------------------------------------
# function-source export

def _py_identifier(name: str, taken: set) -> str:
    ident = re.sub(r"[^0-9a-zA-Z_]", "_", name)
    if not ident or ident[0].isdigit():
        ident = "p_" + ident
    base = ident
    n = 2
    while ident in taken:
        ident = f"{base}_{n}"
        n += 1
    taken.add(ident)
    return ident


def export_function_source(tool: ToolDescriptor, tls_verify: bool = True) -> str:
    """Emit the tool as a self-contained script-style function text."""
    taken: set = set()
    py_names = {arg.name: _py_identifier(arg.name, taken) for arg in tool.args}

    url_parts = []
    for seg in tool.template.segments:
        if seg.kind == "lit":
            url_parts.append(seg.value.replace("{", "{{").replace("}", "}}"))
        else:
            url_parts.append("{" + py_names[seg.value] + "}")
    url_expr = "".join(url_parts)
    if tool.template.query_base is not None:
        url_expr += "?" + tool.template.query_base

    sendable = [a for a in tool.args if a.location == "query"]
    verb = tool.method.lower() if tool.method.lower() in (
        "get", "post", "put", "patch", "delete", "head", "options"
    ) else "get"
    payload_kw = "params=querystring" if verb == "get" else "json=querystring"

    lines = []
    lines.append("import requests")
    lines.append("")
    lines.append("")
    signature = ", ".join(f"{py_names[a.name]}=None" for a in tool.args)
    lines.append(f"def {tool.tool_name}({signature}):")
    lines.append(f'    api_url = f"{url_expr}"')
    entries = "".join(f"'{a.name}': {py_names[a.name]}, " for a in sendable)
    lines.append(f"    querystring = {{{entries}}}")
    for arg in tool.args:
        if arg.required:
            lines.append(
                f"    assert {py_names[arg.name]} is not None, "
                f"'Missing required parameter: {arg.name}'"
            )
    lines.append("    ")
    lines.append(
        f"    response = requests.{verb}(url=api_url, {payload_kw}, "
        f"timeout={tool.timeout_seconds}, verify={tls_verify})"
    )
    lines.append("    if response.status_code != 200:")
    lines.append(
        f"        response2 = requests.{verb}(url=api_url, timeout={tool.timeout_seconds})"
        " # in case API can't handle redundant params"
    )
    lines.append("        response = response2")
    lines.append("    return response")
    lines.append("    # print(response.json())")
    lines.append("")
    lines.append("if __name__ == '__main__':")
    call_args = ", ".join(
        f"{py_names[a.name]}='''{render_scalar(a.preferred_value)}'''"
        for a in tool.args
        if a.has_value
    )
    lines.append(f"    r = {tool.tool_name}({call_args})")
    lines.append("    r_json = None")
    lines.append("    try:")
    lines.append("        r_json = r.json()")
    lines.append("    except:")
    lines.append("        pass")
    lines.append("    import json")
    lines.append("    result_dict = dict()")
    lines.append("    result_dict['status_code'] = r.status_code")
    lines.append("    result_dict['text'] = r.text")
    lines.append("    result_dict['json'] = r_json")
    lines.append('    result_dict[\'content\'] = r.content.decode("utf-8")')
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# OpenAPI export

_OPENAPI_TYPES = {
    "string": "string",
    "integer": "integer",
    "number": "number",
    "boolean": "boolean",
}


def split_base_and_path(template: UrlTemplate):
    """(scheme://host, /templated/path) for a scheme-bearing template."""
    canonical = template.canonical().split("?", 1)[0]
    m = re.match(r"^(https?://[^/]+)(/.*)?$", canonical)
    if not m:
        raise MixedHosts(f"not a scheme-bearing URL: {template.raw}")
    return m.group(1), m.group(2) or "/"


def export_openapi(tools: list) -> str:
    """One OpenAPI YAML document for tools sharing a single host."""
    if not tools:
        raise MixedHosts("no tools to export")
    bases = {}
    for tool in tools:
        base, _ = split_base_and_path(tool.template)
        bases[base] = True
    if len(bases) != 1:
        raise MixedHosts(f"{len(bases)} distinct hosts in one export: {sorted(bases)}")
    base = next(iter(bases))

    paths: dict = {}
    for tool in tools:
        _, path = split_base_and_path(tool.template)
        parameters = []
        body_props: dict = {}
        body_required: list = []
        is_get_like = tool.method.upper() == "GET"
        for arg in tool.args:
            schema_type = _OPENAPI_TYPES.get(_canonical_openapi_type(arg.type_hint), "string")
            if arg.location == "path":
                entry = {
                    "name": arg.name,
                    "in": "path",
                    "required": True,
                    "schema": {"type": schema_type},
                }
                if arg.description:
                    entry["description"] = arg.description
                if arg.example_value is not None:
                    entry["example"] = arg.example_value
                parameters.append(entry)
            elif is_get_like:
                entry = {
                    "name": arg.name,
                    "in": "query",
                    "required": bool(arg.required),
                    "schema": {"type": schema_type},
                }
                if arg.description:
                    entry["description"] = arg.description
                if arg.example_value is not None:
                    entry["example"] = arg.example_value
                parameters.append(entry)
            else:
                prop: dict = {"type": schema_type}
                if arg.description:
                    prop["description"] = arg.description
                body_props[arg.name] = prop
                if arg.required:
                    body_required.append(arg.name)
        operation: dict = {
            "operationId": tool.tool_name,
            "summary": tool.description,
            "responses": {"200": {"description": "Successful response"}},
        }
        if parameters:
            operation["parameters"] = parameters
        if body_props:
            schema: dict = {"type": "object", "properties": body_props}
            if body_required:
                schema["required"] = body_required
            operation["requestBody"] = {
                "content": {"application/json": {"schema": schema}},
                "required": bool(body_required),
            }
        paths.setdefault(path, {})[tool.method.lower()] = operation

    doc = {
        "openapi": "3.0.3",
        "info": {"title": base, "version": "1.0.0"},
        "servers": [{"url": base}],
        "paths": paths,
    }
    return yaml.safe_dump(doc, sort_keys=False, allow_unicode=True)


def _canonical_openapi_type(type_hint: Optional[str]) -> str:
    if not type_hint:
        return "string"
    t = type_hint.strip().lower()
    if t in ("string", "str"):
        return "string"
    if t in ("integer", "int"):
        return "integer"
    if t in ("number", "float", "double"):
        return "number"
    if t in ("boolean", "bool"):
        return "boolean"
    return "string"


def group_tools_by_host(tools: list) -> dict:
    groups: dict = {}
    for tool in tools:
        base, _ = split_base_and_path(tool.template)
        host = base.split("://", 1)[1]
        groups.setdefault(host, []).append(tool)
    return groups
