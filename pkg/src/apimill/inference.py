"""Missing-parameter inference over a knowledge base of verified values.

Verified (key, description, value) triples come from passing tools and the
scalar leaves of their JSON responses.  Retrieval runs two embedding
channels (description and key), candidates are ranked, and k-best value
combinations are validated in the loop until one passes.
"""

from __future__ import annotations

import copy
import heapq
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .embedding import cosine_similarity
from .errors import (
    BackendUnreachable,
    Exhausted,
    InsufficientCorpus,
    NoCandidates,
)
from .model import Scalar
from .prompts import PARAMETER_GUESS_PROMPT, PARAMETER_LIST_SCHEMA
from .toolgen import ToolDescriptor
from .validate import ErrorType, validate_tool

TOP_PER_CHANNEL = 5
MAX_CANDIDATES = 10
SIMILARITY_FLOOR = 0.5
MAX_COMBINATIONS = 20
GUESS_ROUNDS = 10

RESPONSE_HARVEST_DEPTH = 3
RESPONSE_HARVEST_KEY_LEN = 40
RESPONSE_HARVEST_CAP = 50


@dataclass
class ParameterKbEntry:
    param_key: str
    value: Scalar
    source_id: str
    description: Optional[str] = None
    key_embedding: Optional[np.ndarray] = None
    description_embedding: Optional[np.ndarray] = None
    provenance: str = "documentation"  # or "response_json"

    def to_dict(self) -> dict:
        return {
            "param_key": self.param_key,
            "value": self.value,
            "source_id": self.source_id,
            "description": self.description,
            "key_embedding": None if self.key_embedding is None else list(map(float, self.key_embedding)),
            "description_embedding": (
                None if self.description_embedding is None
                else list(map(float, self.description_embedding))
            ),
            "provenance": self.provenance,
        }


class KnowledgeBase:
    """Append-only store of verified parameter values, deduplicated on
    (param_key, value, source_id)."""

    def __init__(self):
        self.entries: list = []
        self._seen: set = set()

    def __len__(self) -> int:
        return len(self.entries)

    def add(self, entry: ParameterKbEntry) -> bool:
        key = (entry.param_key, str(entry.value), entry.source_id)
        if key in self._seen:
            return False
        self._seen.add(key)
        self.entries.append(entry)
        return True

    def snapshot(self) -> list:
        return list(self.entries)

    def save_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for entry in self.entries:
                fh.write(json.dumps(entry.to_dict(), ensure_ascii=False) + "\n")


def harvest_response_values(json_body) -> list:
    """Scalar (key, value) leaves from a response object.

    Shallow and capped so payload noise doesn't drown the store: depth <= 3,
    key length <= 40, at most 50 pairs per response.
    """
    found: list = []

    def walk(node, key: Optional[str], depth: int):
        if len(found) >= RESPONSE_HARVEST_CAP or depth > RESPONSE_HARVEST_DEPTH:
            return
        if isinstance(node, dict):
            for k, v in node.items():
                walk(v, str(k), depth + 1)
        elif isinstance(node, list):
            for item in node:
                walk(item, key, depth + 1)
        elif isinstance(node, (str, int, float, bool)) and key:
            if len(key) <= RESPONSE_HARVEST_KEY_LEN and node != "":
                if len(found) < RESPONSE_HARVEST_CAP:
                    found.append((key, node))

    walk(json_body, None, 0)
    return found


def build_kb(reports: list, tools: list, emb) -> KnowledgeBase:
    """Knowledge base from passing tools: documented values plus scalar
    leaves harvested from their passing responses."""
    by_name = {t.tool_name: t for t in tools}
    kb = KnowledgeBase()
    pending: list = []  # entries awaiting embeddings

    for report in reports:
        if report.error_type is not ErrorType.PASSED:
            continue
        tool = by_name.get(report.tool_name)
        if tool is None:
            continue
        for arg in tool.args:
            if arg.has_value:
                pending.append(
                    ParameterKbEntry(
                        param_key=arg.name,
                        value=arg.preferred_value,
                        source_id=tool.source_id,
                        description=arg.description,
                        provenance="documentation",
                    )
                )
        for record in report.attempts:
            if record.json_body is not None:
                for key, value in harvest_response_values(record.json_body):
                    pending.append(
                        ParameterKbEntry(
                            param_key=key,
                            value=value,
                            source_id=tool.source_id,
                            provenance="response_json",
                        )
                    )

    if pending:
        key_vecs = emb.embed([e.param_key for e in pending])
        described = [e for e in pending if e.description]
        desc_vecs = emb.embed([e.description for e in described]) if described else None
        desc_iter = iter(desc_vecs) if desc_vecs is not None else None
        for i, entry in enumerate(pending):
            entry.key_embedding = key_vecs[i]
            if entry.description and desc_iter is not None:
                entry.description_embedding = next(desc_iter)
            kb.add(entry)
    return kb


@dataclass
class Candidate:
    entry: ParameterKbEntry
    similarity: float


def retrieve_candidates(
    param,
    kb: KnowledgeBase,
    emb,
    exclude_source: Optional[str] = None,
) -> list:
    """Top candidates for one parameter: 5 by description similarity union
    5 by key similarity, deduplicated on (key, value), floor 0.5 applied
    after the union, best first, at most 10.

    `param` needs .name and .description attributes (a ToolArg fits).
    """
    pool = [
        (i, e) for i, e in enumerate(kb.snapshot())
        if exclude_source is None or e.source_id != exclude_source
    ]
    if not pool:
        return []

    best: dict = {}  # (key, str(value)) -> (similarity, pool index, entry)

    def consider(channel_sims):
        top = heapq.nlargest(
            TOP_PER_CHANNEL, channel_sims, key=lambda t: (t[0], -t[1])
        )
        for sim, idx, entry in top:
            dedupe_key = (entry.param_key, str(entry.value))
            held = best.get(dedupe_key)
            if held is None or sim > held[0] or (sim == held[0] and idx < held[1]):
                best[dedupe_key] = (sim, idx, entry)

    description = getattr(param, "description", None)
    if description:
        query_vec = emb.embed_one(description)
        described = [
            (cosine_similarity(query_vec, e.description_embedding), i, e)
            for i, e in pool
            if e.description_embedding is not None
        ]
        if described:
            consider(described)

    key_vec = emb.embed_one(param.name)
    keyed = [
        (cosine_similarity(key_vec, e.key_embedding), i, e)
        for i, e in pool
        if e.key_embedding is not None
    ]
    if keyed:
        consider(keyed)

    survivors = [
        Candidate(entry=entry, similarity=sim)
        for sim, idx, entry in sorted(best.values(), key=lambda t: (-t[0], t[1]))
        if sim >= SIMILARITY_FLOOR
    ]
    return survivors[:MAX_CANDIDATES]


def rank_combinations(per_param: dict, limit: int = MAX_COMBINATIONS) -> list:
    """Best-first value assignments ordered by the product of similarities
    (sum of logs), enumerated lazily so large spaces never materialize.

    Returns up to `limit` dicts of {param_name: Candidate}.
    """
    names = list(per_param.keys())
    for name in names:
        if not per_param[name]:
            raise NoCandidates(name)
    # the successor rule (bump one index) only enumerates best-first when
    # every list is descending; stable sort keeps tie order deterministic
    lists = [
        sorted(per_param[name], key=lambda c: -c.similarity) for name in names
    ]

    def score(index_vector) -> float:
        total = 0.0
        for name_i, ci in enumerate(index_vector):
            sim = lists[name_i][ci].similarity
            total += math.log(max(sim, 1e-12))
        return total

    start = tuple(0 for _ in names)
    heap = [(-score(start), start)]
    visited = {start}
    out: list = []
    while heap and len(out) < limit:
        _, idx = heapq.heappop(heap)
        out.append({name: lists[i][j] for i, (name, j) in enumerate(zip(names, idx))})
        for pos in range(len(names)):
            if idx[pos] + 1 < len(lists[pos]):
                nxt = idx[:pos] + (idx[pos] + 1,) + idx[pos + 1 :]
                if nxt not in visited:
                    visited.add(nxt)
                    heapq.heappush(heap, (-score(nxt), nxt))
    return out


@dataclass
class InferenceOutcome:
    tool_name: str
    success: bool
    assignment: Optional[dict] = None
    attempts: int = 0
    candidates_considered: int = 0
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "tool_name": self.tool_name,
            "success": self.success,
            "assignment": self.assignment,
            "attempts": self.attempts,
            "candidates_considered": self.candidates_considered,
            "note": self.note,
        }


def infer_parameters(
    tool: ToolDescriptor,
    kb: KnowledgeBase,
    judge,
    emb,
    exclude_source: Optional[str] = None,
    limit: int = MAX_COMBINATIONS,
    tls_verify: bool = True,
    offline: bool = False,
    rate_limiter=None,
) -> InferenceOutcome:
    """Try ranked KB value combinations until the tool passes validation.

    Targets the value-missing required args when there are any, otherwise
    every required arg (the wrong-value case).  The winning assignment is
    written back onto the descriptor's example values and inserted into the
    knowledge base; failures leave the KB untouched.
    """
    targets = tool.missing_value_args or [a for a in tool.args if a.required]
    if not targets:
        return InferenceOutcome(tool.tool_name, True, assignment={}, note="nothing to infer")

    per_param: dict = {}
    candidates_considered = 0
    for arg in targets:
        candidates = retrieve_candidates(arg, kb, emb, exclude_source=exclude_source)
        for c in candidates:
            assert c.entry.source_id != exclude_source, (
                f"isolation breach: candidate for {arg.name!r} from excluded source"
            )
        if not candidates:
            raise NoCandidates(arg.name)
        per_param[arg.name] = candidates
        candidates_considered += len(candidates)

    base_args = {a.name: a.preferred_value for a in tool.args if a.has_value}
    attempts = 0
    for assignment in rank_combinations(per_param, limit=limit):
        trial_args = dict(base_args)
        trial_args.update({name: c.entry.value for name, c in assignment.items()})
        attempts += 1
        report = validate_tool(
            tool,
            judge,
            args=trial_args,
            tls_verify=tls_verify,
            offline=offline,
            rate_limiter=rate_limiter,
        )
        if report.passed:
            values = {name: c.entry.value for name, c in assignment.items()}
            by_name = {a.name: a for a in tool.args}
            for name, value in values.items():
                by_name[name].example_value = value
                kb.add(
                    ParameterKbEntry(
                        param_key=name,
                        value=value,
                        source_id=tool.source_id,
                        description=by_name[name].description,
                        key_embedding=emb.embed_one(name),
                        description_embedding=(
                            emb.embed_one(by_name[name].description)
                            if by_name[name].description
                            else None
                        ),
                        provenance="documentation",
                    )
                )
            return InferenceOutcome(
                tool.tool_name,
                True,
                assignment=values,
                attempts=attempts,
                candidates_considered=candidates_considered,
            )
    err = Exhausted(
        f"{tool.tool_name}: all {attempts} ranked assignments failed validation"
    )
    err.attempts = attempts
    raise err


def llm_guess_baseline(
    tool: ToolDescriptor,
    judge,
    backend,
    rounds: int = GUESS_ROUNDS,
    tls_verify: bool = True,
    offline: bool = False,
    rate_limiter=None,
) -> InferenceOutcome:
    """Guess values with a model instead of the knowledge base: up to 10
    rounds, feeding failed guesses back through the prompt's history block."""
    targets = tool.missing_value_args or [a for a in tool.args if a.required]
    if not targets:
        return InferenceOutcome(tool.tool_name, True, assignment={}, note="nothing to infer")

    param_description = "\n".join(
        f"{a.name}: {a.description or '(no description)'}" for a in targets
    )
    base_args = {a.name: a.preferred_value for a in tool.args if a.has_value}
    history: list = []
    attempts = 0
    for _ in range(rounds):
        prompt = PARAMETER_GUESS_PROMPT.format(
            history="\n".join(json.dumps(h, ensure_ascii=False) for h in history),
            description=tool.description,
            param_description=param_description,
        )
        content, _tokens = backend.complete(
            [{"role": "user", "content": prompt}],
            response_schema=PARAMETER_LIST_SCHEMA,
            schema_name="ParameterList",
        )
        try:
            parsed = json.loads(content)
            guesses = {
                str(p["parameter_key"]): str(p["parameter_guess"])
                for p in parsed["parameters"]
            }
        except (ValueError, KeyError, TypeError) as exc:
            raise BackendUnreachable(f"malformed guess output: {exc}") from exc

        trial_args = dict(base_args)
        trial_args.update({a.name: guesses[a.name] for a in targets if a.name in guesses})
        attempts += 1
        report = validate_tool(
            tool,
            judge,
            args=trial_args,
            tls_verify=tls_verify,
            offline=offline,
            rate_limiter=rate_limiter,
        )
        if report.passed:
            return InferenceOutcome(
                tool.tool_name, True, assignment=guesses, attempts=attempts
            )
        history.append(guesses)
    return InferenceOutcome(tool.tool_name, False, attempts=attempts)


def leave_one_api_out(
    tools: list,
    reports: list,
    emb,
    judge,
    tls_verify: bool = True,
    offline: bool = False,
    rate_limiter=None,
) -> dict:
    """Re-infer each passing tool's required values with its own source
    hidden from retrieval.  Needs at least two distinct source documents."""
    passing_names = {r.tool_name for r in reports if r.error_type is ErrorType.PASSED}
    passing_tools = sorted(
        (t for t in tools if t.tool_name in passing_names), key=lambda t: t.tool_name
    )
    sources = {t.source_id for t in passing_tools}
    if len(sources) < 2:
        raise InsufficientCorpus(
            f"leave-one-out needs >= 2 source documents, found {len(sources)}"
        )

    kb = build_kb(reports, tools, emb)
    outcomes: list = []
    skipped: list = []
    for tool in passing_tools:
        stripped = copy.deepcopy(tool)
        for arg in stripped.args:
            if arg.required:
                arg.example_value = None
                arg.default_value = None
        if not stripped.missing_value_args:
            skipped.append(tool.tool_name)
            continue
        try:
            outcome = infer_parameters(
                stripped,
                kb,
                judge,
                emb,
                exclude_source=tool.source_id,
                tls_verify=tls_verify,
                offline=offline,
                rate_limiter=rate_limiter,
            )
        except NoCandidates as exc:
            outcome = InferenceOutcome(tool.tool_name, False, note=f"no candidates: {exc}")
        except Exhausted as exc:
            outcome = InferenceOutcome(
                tool.tool_name, False, attempts=getattr(exc, "attempts", 0), note=str(exc)
            )
        outcomes.append(outcome)

    attempted = [o for o in outcomes if o.attempts > 0]
    return {
        "outcomes": outcomes,
        "success_count": sum(1 for o in outcomes if o.success),
        "total": len(outcomes),
        "mean_attempts": (
            sum(o.attempts for o in attempted) / len(attempted) if attempted else 0.0
        ),
        "skipped_no_required_args": skipped,
    }
