"""Pipeline orchestration: project config, staged runs, reports.

Every stage reads its predecessor's persisted artifacts and writes only
under output_dir, so stages are idempotent and individually rerunnable:

  docs/        cleaned pages + classification index
  specs/       extraction results and valid specs
  metrics/     extraction quality scores
  tools/       tool descriptors (+ endpoints that could not be built)
  exports/     function source and OpenAPI documents
  validation/  per-tool reports, counts, cause estimation
  kb/          parameter knowledge base and inference outcomes
  reports/     rolled-up human-readable report
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .embedding import LexicalEmbedding, RemoteEmbedding, RemoteEmbeddingConfig
from .errors import (
    ApimillError,
    ConfigInvalid,
    EmptyCorpus,
    Exhausted,
    MissingStageInput,
    NoCandidates,
)
from .evaluate import compute_metrics
from .extract import (
    ExtractionResult,
    HeuristicBackend,
    RemoteChatBackend,
    RemoteStructuredBackend,
    ReplayBackend,
    run_extraction,
)
from .inference import build_kb, infer_parameters
from .ingest import ApiDocument, ingest_corpus, load_corpus_manifest
from .judges import DEFAULT_ERROR_PHRASES, HeuristicJudge, RemoteJudge
from .model import validate_spec
from .netutil import HostRateLimiter
from .remote import ChatClient, RemoteConfig
from .toolgen import (
    ToolDescriptor,
    export_function_source,
    export_openapi,
    generate_tools_for_spec,
    group_tools_by_host,
    sanitize_tool_name,
)
from .validate import (
    ErrorType,
    counts_from_reports,
    estimate_causes,
    render_error_tables,
    run_validation,
)

ALL_STAGES = ("ingest", "extract", "evaluate", "generate", "validate", "infer", "report")


@dataclass
class ProjectConfig:
    corpus_manifest: Path
    output_dir: Path
    truth_dir: Optional[Path] = None
    tls_verify: bool = True
    offline: bool = False
    rate_limit_per_host: float = 1.0
    concurrency: int = 4
    seed: int = 0
    error_phrases: list = field(default_factory=list)
    backends: dict = field(default_factory=dict)

    def subdir(self, name: str) -> Path:
        path = self.output_dir / name
        path.mkdir(parents=True, exist_ok=True)
        return path


def load_config(path) -> ProjectConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigInvalid(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigInvalid(f"config is not valid YAML/JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigInvalid("config must be a mapping")

    for required in ("corpus_manifest", "output_dir"):
        if required not in raw:
            raise ConfigInvalid(f"config is missing {required!r}")

    base = path.parent

    def respath(value) -> Path:
        p = Path(value)
        return p if p.is_absolute() else (base / p)

    manifest = respath(raw["corpus_manifest"])
    if not manifest.exists():
        raise ConfigInvalid(f"corpus_manifest does not exist: {manifest}")
    truth_dir = respath(raw["truth_dir"]) if raw.get("truth_dir") else None
    if truth_dir is not None and not truth_dir.exists():
        raise ConfigInvalid(f"truth_dir does not exist: {truth_dir}")

    backends = raw.get("backends") or {}
    if not isinstance(backends, dict):
        raise ConfigInvalid("backends must be a mapping")
    for section, allowed in (
        ("extraction", {"heuristic", "replay", "remote_chat", "remote_structured"}),
        ("judge", {"heuristic", "remote"}),
        ("embedding", {"lexical", "remote"}),
    ):
        kind = (backends.get(section) or {}).get("kind", next(iter(sorted(allowed))))
        if section in backends and backends[section].get("kind") not in (None, *allowed):
            raise ConfigInvalid(
                f"backends.{section}.kind must be one of {sorted(allowed)}, got {kind!r}"
            )

    return ProjectConfig(
        corpus_manifest=manifest,
        output_dir=respath(raw["output_dir"]),
        truth_dir=truth_dir,
        tls_verify=bool(raw.get("tls_verify", True)),
        offline=bool(raw.get("offline", False)),
        rate_limit_per_host=float(raw.get("rate_limit_per_host", 1.0)),
        concurrency=int(raw.get("concurrency", 4)),
        seed=int(raw.get("seed", 0)),
        error_phrases=list(raw.get("error_phrases", [])),
        backends=backends,
    )


# ---------------------------------------------------------------------------
# backend factories

def _chat_client(section: dict, config: ProjectConfig) -> ChatClient:
    for key in ("endpoint_url", "model_name"):
        if not section.get(key):
            raise ConfigInvalid(f"remote backend needs {key!r}")
    return ChatClient(
        RemoteConfig(
            endpoint_url=section["endpoint_url"],
            model_name=section["model_name"],
            api_key_env=section.get("api_key_env"),
        ),
        rate_limiter=HostRateLimiter(config.rate_limit_per_host),
        offline=config.offline,
    )


def make_extraction_backend(config: ProjectConfig, override_kind: Optional[str] = None):
    section = dict(config.backends.get("extraction") or {})
    kind = override_kind or section.get("kind") or "heuristic"
    if kind == "heuristic":
        return HeuristicBackend()
    if kind == "replay":
        store = section.get("replay_store")
        if not store:
            raise ConfigInvalid("replay backend needs replay_store")
        store_path = Path(store)
        if not store_path.is_absolute():
            store_path = config.corpus_manifest.parent / store_path
        return ReplayBackend(store_path)
    if kind in ("remote_chat", "remote_structured"):
        client = _chat_client(section, config)
        one_shot = None
        shot = section.get("one_shot")
        if shot:
            one_shot = (
                Path(shot["document"]).read_text(encoding="utf-8"),
                Path(shot["spec"]).read_text(encoding="utf-8"),
            )
        cls = RemoteChatBackend if kind == "remote_chat" else RemoteStructuredBackend
        return cls(client, one_shot_example=one_shot)
    raise ConfigInvalid(f"unknown extraction backend kind {kind!r}")


def make_judge(config: ProjectConfig):
    section = dict(config.backends.get("judge") or {})
    kind = section.get("kind") or "heuristic"
    phrases = tuple(DEFAULT_ERROR_PHRASES) + tuple(config.error_phrases)
    if kind == "heuristic":
        return HeuristicJudge(error_phrases=phrases)
    if kind == "remote":
        return RemoteJudge(_chat_client(section, config))
    raise ConfigInvalid(f"unknown judge kind {kind!r}")


def make_embedding(config: ProjectConfig):
    section = dict(config.backends.get("embedding") or {})
    kind = section.get("kind") or "lexical"
    if kind == "lexical":
        return LexicalEmbedding(dimension=int(section.get("dimension", 256)))
    if kind == "remote":
        for key in ("endpoint_url", "model_name"):
            if not section.get(key):
                raise ConfigInvalid(f"remote embedding needs {key!r}")
        return RemoteEmbedding(
            RemoteEmbeddingConfig(
                endpoint_url=section["endpoint_url"],
                model_name=section["model_name"],
                api_key_env=section.get("api_key_env"),
            ),
            dimension=section.get("dimension"),
            rate_limiter=HostRateLimiter(config.rate_limit_per_host),
        )
    raise ConfigInvalid(f"unknown embedding kind {kind!r}")


# ---------------------------------------------------------------------------
# stages

def _write_jsonl(path: Path, rows: list) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def _read_jsonl(path: Path) -> list:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def stage_ingest(config: ProjectConfig, judge) -> None:
    entries = load_corpus_manifest(config.corpus_manifest)
    manifest_dir = config.corpus_manifest.parent
    for entry in entries:
        origin = entry["origin"]
        if not origin.startswith(("http://", "https://")) and not Path(origin).is_absolute():
            entry["origin"] = str(manifest_dir / origin)

    documents, decisions, failures = ingest_corpus(
        entries,
        judge,
        width=config.concurrency,
        tls_verify=config.tls_verify,
        offline=config.offline,
    )
    docs_dir = config.subdir("docs")
    for doc in documents:
        (docs_dir / f"{doc.source_id}.html").write_text(doc.raw, encoding="utf-8")
        (docs_dir / f"{doc.source_id}.txt").write_text(doc.text, encoding="utf-8")
    (docs_dir / "index.json").write_text(
        json.dumps({"documents": decisions, "failures": failures}, indent=2) + "\n",
        encoding="utf-8",
    )
    print(f"ingest: {len(documents)} documents cleaned, {len(failures)} failed")


def _load_docs_index(config: ProjectConfig) -> dict:
    index_path = config.output_dir / "docs" / "index.json"
    if not index_path.exists():
        raise MissingStageInput("extract", "run ingest first (docs/index.json missing)")
    return json.loads(index_path.read_text(encoding="utf-8"))


def stage_extract(config: ProjectConfig, backend) -> None:
    index = _load_docs_index(config)
    docs_dir = config.output_dir / "docs"
    docs = []
    skipped = 0
    for info in index["documents"]:
        if not info.get("is_api_page", True):
            skipped += 1
            continue
        source_id = info["source_id"]
        text = (docs_dir / f"{source_id}.txt").read_text(encoding="utf-8")
        docs.append(ApiDocument(source_id=source_id, origin="", raw="", text=text))

    results = run_extraction(docs, backend, width=config.concurrency)
    specs_dir = config.subdir("specs")
    _write_jsonl(specs_dir / "results.jsonl", [r.to_dict() for r in results])
    for result in results:
        if result.valid and result.spec is not None:
            (specs_dir / f"{result.source_id}.spec.json").write_text(
                result.spec.to_json() + "\n", encoding="utf-8"
            )
    valid = sum(1 for r in results if r.valid)
    print(
        f"extract: {valid}/{len(results)} valid specs"
        + (f" ({skipped} non-API pages skipped)" if skipped else "")
    )


def _load_extraction_results(config: ProjectConfig, stage: str) -> list:
    results_path = config.output_dir / "specs" / "results.jsonl"
    if not results_path.exists():
        raise MissingStageInput(stage, "run extract first (specs/results.jsonl missing)")
    results = []
    for row in _read_jsonl(results_path):
        spec = None
        if row.get("spec") is not None:
            spec, _ = validate_spec(row["spec"])
        results.append(
            ExtractionResult(
                source_id=row["source_id"],
                raw_output=row.get("raw_output", ""),
                spec=spec,
                valid=bool(row.get("valid")) and spec is not None,
                violations=row.get("violations", []),
                backend_kind=row.get("backend_kind", ""),
                token_or_byte_cost=int(row.get("token_or_byte_cost", 0)),
            )
        )
    return results


def stage_evaluate(config: ProjectConfig, emb) -> None:
    if config.truth_dir is None:
        raise ConfigInvalid("evaluate needs truth_dir in the config")
    results = _load_extraction_results(config, "evaluate")
    truth = {}
    for path in sorted(config.truth_dir.glob("*.json")):
        spec, violations = validate_spec(json.loads(path.read_text(encoding="utf-8")))
        if spec is None:
            raise ConfigInvalid(f"truth spec {path.name} is invalid: {violations[:3]}")
        truth[path.stem] = spec

    try:
        report = compute_metrics(results, truth, emb)
    except EmptyCorpus:
        raise MissingStageInput("evaluate", "no extraction results to score") from None
    metrics_dir = config.subdir("metrics")
    (metrics_dir / "metrics.json").write_text(
        json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8"
    )
    (metrics_dir / "metrics.txt").write_text(report.to_text_table() + "\n", encoding="utf-8")
    print(f"evaluate: matched {report.matched_endpoints} endpoints; "
          f"valid ratio {report.valid_ratio:.2f}")


def stage_generate(config: ProjectConfig) -> None:
    results = _load_extraction_results(config, "generate")
    tools_dir = config.subdir("tools")
    exports_dir = config.subdir("exports")

    all_tools: list = []
    unbuildable: list = []
    for result in results:
        if not result.valid or result.spec is None:
            continue
        tools, schemeless = generate_tools_for_spec(result.spec, result.source_id)
        all_tools.extend(tools)
        for endpoint in schemeless:
            unbuildable.append(
                {
                    "source_id": result.source_id,
                    "endpoint_name": endpoint.name,
                    "tool_name": sanitize_tool_name(endpoint.name),
                    "error_type": ErrorType.MISSING_BASE_URL.value,
                    "url": endpoint.url,
                }
            )

    for tool in all_tools:
        (tools_dir / f"{tool.tool_name}.tool.json").write_text(
            json.dumps(tool.to_dict(), indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
        (exports_dir / f"{tool.tool_name}.py").write_text(
            export_function_source(tool, tls_verify=config.tls_verify), encoding="utf-8"
        )
    _write_jsonl(tools_dir / "unbuildable.jsonl", unbuildable)

    for host, group in sorted(group_tools_by_host(all_tools).items()):
        safe_host = host.replace(":", "_")
        (exports_dir / f"{safe_host}.openapi.yaml").write_text(
            export_openapi(group), encoding="utf-8"
        )
    print(f"generate: {len(all_tools)} tools, {len(unbuildable)} unbuildable endpoints")


def _load_tools(config: ProjectConfig, stage: str) -> list:
    tools_dir = config.output_dir / "tools"
    if not tools_dir.exists():
        raise MissingStageInput(stage, "run generate first (tools/ missing)")
    tools = []
    for path in sorted(tools_dir.glob("*.tool.json")):
        tools.append(ToolDescriptor.from_dict(json.loads(path.read_text(encoding="utf-8"))))
    return tools


def _load_unbuildable(config: ProjectConfig) -> list:
    path = config.output_dir / "tools" / "unbuildable.jsonl"
    return _read_jsonl(path) if path.exists() else []


def stage_validate(config: ProjectConfig, judge) -> None:
    tools = _load_tools(config, "validate")
    limiter = HostRateLimiter(config.rate_limit_per_host)
    reports = run_validation(
        tools,
        judge,
        width=config.concurrency,
        tls_verify=config.tls_verify,
        offline=config.offline,
        rate_limiter=limiter,
    )
    validation_dir = config.subdir("validation")
    _write_jsonl(validation_dir / "reports.jsonl", [r.to_dict() for r in reports])

    counts = counts_from_reports(reports)
    counts[ErrorType.MISSING_BASE_URL] += len(_load_unbuildable(config))
    estimate = estimate_causes(counts)
    summary = {
        "validated_tools": len(reports),
        "unbuildable_endpoints": len(_load_unbuildable(config)),
        "passed": counts[ErrorType.PASSED],
        "counts": {t.value: counts[t] for t in ErrorType},
        "causes": estimate.to_dict(),
    }
    (validation_dir / "summary.json").write_text(
        json.dumps(summary, indent=2) + "\n", encoding="utf-8"
    )
    tables = render_error_tables(counts, estimate)
    (config.subdir("reports") / "error_tables.txt").write_text(tables + "\n", encoding="utf-8")
    print(f"validate: {counts[ErrorType.PASSED]}/{len(reports)} tools passed")


def _reports_from_disk(config: ProjectConfig, stage: str):
    from .validate import InvocationRecord, ValidationReport  # local to avoid clutter

    path = config.output_dir / "validation" / "reports.jsonl"
    if not path.exists():
        raise MissingStageInput(stage, "run validate first (validation/reports.jsonl missing)")
    reports = []
    for row in _read_jsonl(path):
        attempts = [
            InvocationRecord(
                status_code=a.get("status_code"),
                text=a.get("text", ""),
                json_body=a.get("json"),
                content=a.get("content", ""),
                transport_error=a.get("transport_error"),
                retried_without_params=bool(a.get("retried_without_params")),
                elapsed=float(a.get("elapsed", 0.0)),
            )
            for a in row.get("attempts", [])
        ]
        error_type = next(t for t in ErrorType if t.value == row["error_type"])
        reports.append(
            ValidationReport(
                tool_name=row["tool_name"],
                attempts=attempts,
                error_type=error_type,
                judge_verdict=row.get("judge_verdict"),
                passed=bool(row.get("passed")),
                source_id=row.get("source_id", ""),
                args_used=row.get("args_used", {}),
            )
        )
    return reports


def stage_infer(config: ProjectConfig, judge, emb) -> None:
    tools = _load_tools(config, "infer")
    reports = _reports_from_disk(config, "infer")
    by_name = {t.tool_name: t for t in tools}

    kb = build_kb(reports, tools, emb)
    kb_dir = config.subdir("kb")
    kb.save_jsonl(kb_dir / "kb.jsonl")

    limiter = HostRateLimiter(config.rate_limit_per_host)
    outcomes = []
    targets = [
        r for r in reports
        if r.error_type in (ErrorType.NO_PARAM_VALUE, ErrorType.WRONG_PARAM_VALUE)
        and r.tool_name in by_name
    ]
    for report in targets:
        tool = by_name[report.tool_name]
        try:
            outcome = infer_parameters(
                tool,
                kb,
                judge,
                emb,
                tls_verify=config.tls_verify,
                offline=config.offline,
                rate_limiter=limiter,
            )
        except NoCandidates as exc:
            from .inference import InferenceOutcome

            outcome = InferenceOutcome(tool.tool_name, False, note=f"no candidates: {exc}")
        except Exhausted as exc:
            from .inference import InferenceOutcome

            outcome = InferenceOutcome(
                tool.tool_name, False, attempts=getattr(exc, "attempts", 0), note=str(exc)
            )
        outcomes.append(outcome)
        if outcome.success:
            tools_dir = config.output_dir / "tools"
            (tools_dir / f"{tool.tool_name}.tool.json").write_text(
                json.dumps(tool.to_dict(), indent=2, ensure_ascii=False) + "\n",
                encoding="utf-8",
            )

    _write_jsonl(kb_dir / "inference.jsonl", [o.to_dict() for o in outcomes])
    fixed = sum(1 for o in outcomes if o.success)
    print(f"infer: {fixed}/{len(outcomes)} failing tools recovered; kb entries {len(kb)}")


def stage_report(config: ProjectConfig) -> None:
    sections = []
    metrics_txt = config.output_dir / "metrics" / "metrics.txt"
    if metrics_txt.exists():
        sections.append("Extraction Metrics\n" + metrics_txt.read_text(encoding="utf-8"))
    tables_txt = config.output_dir / "reports" / "error_tables.txt"
    if tables_txt.exists():
        sections.append(tables_txt.read_text(encoding="utf-8"))
    inference_path = config.output_dir / "kb" / "inference.jsonl"
    if inference_path.exists():
        rows = _read_jsonl(inference_path)
        fixed = sum(1 for r in rows if r.get("success"))
        sections.append(
            f"Parameter Inference\nrecovered {fixed} of {len(rows)} failing tools"
        )
    if not sections:
        raise MissingStageInput("report", "no metrics or validation artifacts to report")
    text = ("\n\n".join(sections)).strip() + "\n"
    (config.subdir("reports") / "report.txt").write_text(text, encoding="utf-8")
    print(text, end="")


def run_pipeline(stages, config: ProjectConfig, override_backend: Optional[str] = None) -> int:
    random.seed(config.seed)
    judge = make_judge(config)
    emb = make_embedding(config)

    for stage in stages:
        if stage == "ingest":
            stage_ingest(config, judge)
        elif stage == "extract":
            stage_extract(config, make_extraction_backend(config, override_backend))
        elif stage == "evaluate":
            if config.truth_dir is None and len(stages) > 1:
                print("evaluate: skipped (no truth_dir configured)")
                continue
            stage_evaluate(config, emb)
        elif stage == "generate":
            stage_generate(config)
        elif stage == "validate":
            stage_validate(config, judge)
        elif stage == "infer":
            stage_infer(config, judge, emb)
        elif stage == "report":
            stage_report(config)
        else:
            raise ConfigInvalid(f"unknown stage {stage!r}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="apimill",
        description="Turn REST API documentation into validated, invocable tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*ALL_STAGES, "run"):
        p = sub.add_parser(name, help=f"run the {name} stage" if name != "run" else "run all stages")
        p.add_argument("--config", required=True, help="project config (YAML or JSON)")
        p.add_argument("--backend", help="override the extraction backend kind")
        p.add_argument("--seed", type=int, help="seed for any randomized sampling")
        p.add_argument("--offline", action="store_true",
                       help="forbid all non-loopback network traffic")
        if name == "run":
            p.add_argument(
                "--stage-filter",
                help="comma-separated subset of stages to run (in pipeline order)",
            )

    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config.seed = args.seed
        if args.offline:
            config.offline = True
        config.output_dir.mkdir(parents=True, exist_ok=True)

        if args.command == "run":
            stages = list(ALL_STAGES)
            if args.stage_filter:
                wanted = {s.strip() for s in args.stage_filter.split(",") if s.strip()}
                unknown = wanted - set(ALL_STAGES)
                if unknown:
                    raise ConfigInvalid(f"unknown stages in filter: {sorted(unknown)}")
                stages = [s for s in ALL_STAGES if s in wanted]
        else:
            stages = [args.command]
        return run_pipeline(stages, config, override_backend=args.backend)
    except (ConfigInvalid, MissingStageInput) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ApimillError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
