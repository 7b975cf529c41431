"""Bundled synthetic corpus: documentation text rendered from known specs.

render_doc and the rule-based extractor are a dual pair — rendering an
ApiSpec and extracting the result reproduces that ApiSpec — which gives
offline runs a ground truth without any model.  The corpus is parameterized by the mock
server's base URL so every endpoint is reachable on loopback.
"""

from __future__ import annotations

import json
from pathlib import Path

from .model import ApiSpec, Endpoint, Parameter, render_scalar


def render_doc(spec: ApiSpec) -> str:
    """The line-oriented documentation shape the rule-based extractor reads."""
    lines: list = []
    if spec.title:
        lines.append(spec.title)
        lines.append("")
    for ep in spec.endpoints:
        lines.append(f"## {ep.name}")
        if ep.description:
            lines.append(ep.description)
        url = ep.url if isinstance(ep.url, str) else ep.url[0]
        lines.append(f"{ep.method} {url}")
        for heading, params in (
            ("Required parameters:", ep.required_parameters),
            ("Optional parameters:", ep.optional_parameters),
        ):
            if not params:
                continue
            lines.append(heading)
            for p in params:
                piece = f"- {p.name}"
                if p.type_hint:
                    piece += f" ({p.type_hint})"
                piece += f": {p.description or ''}".rstrip()
                if p.example_value is not None:
                    piece += f" Example: {render_scalar(p.example_value)}"
                if p.default_value is not None:
                    piece += f" Default: {render_scalar(p.default_value)}"
                lines.append(piece)
        lines.append("")
    return "\n".join(lines).strip() + "\n"


def build_corpus(base_url: str) -> list:
    """(source_id, spec, doc_text) triples for the bundled corpus.

    Coverage by design: a clean pass, a retry-then-pass, a missing required
    value, a 404, an error body, and two cross-source gated endpoints whose
    only passing value exists in each other's knowledge-base entries.
    """
    cardsearch = ApiSpec(
        title="Card Search API Documentation",
        endpoints=[
            Endpoint(
                name="Search Cards",
                description="Perform advanced search queries to find trading cards.",
                method="GET",
                url=f"{base_url}/cards",
                required_parameters=[
                    Parameter(
                        name="q",
                        type_hint="string",
                        description="The search query using Lucene-like syntax.",
                        example_value="name:gardevoir",
                    )
                ],
                optional_parameters=[
                    Parameter(
                        name="page",
                        type_hint="integer",
                        description="Result page to fetch.",
                        default_value=1,
                    )
                ],
            ),
            Endpoint(
                name="Legacy Lookup",
                description="Legacy index of the card archive.",
                method="GET",
                url=f"{base_url}/legacy",
                optional_parameters=[
                    Parameter(
                        name="verbose",
                        type_hint="integer",
                        description="Verbosity flag for the legacy index.",
                        example_value=1,
                    )
                ],
            ),
            Endpoint(
                name="Find Trainer",
                description="Look up a trainer profile.",
                method="GET",
                url=f"{base_url}/trainers",
                required_parameters=[
                    Parameter(
                        name="name",
                        type_hint="string",
                        description="Trainer name to look up.",
                    )
                ],
            ),
        ],
    )

    brokenapi = ApiSpec(
        title="Archive Data API",
        endpoints=[
            Endpoint(
                name="Old Resource",
                description="A resource that the server has retired.",
                method="GET",
                url=f"{base_url}/gone",
            ),
            Endpoint(
                name="Strict Search",
                description="Search the archive with a strict grammar.",
                method="GET",
                url=f"{base_url}/strict",
                required_parameters=[
                    Parameter(
                        name="term",
                        type_hint="string",
                        description="Archive search term.",
                        example_value="draw",
                    )
                ],
            ),
        ],
    )

    glycanhub = ApiSpec(
        title="Glycan Hub API",
        endpoints=[
            Endpoint(
                name="Get Glycan",
                description="Fetch one glycan record by accession.",
                method="GET",
                url=f"{base_url}/glycan",
                required_parameters=[
                    Parameter(
                        name="glytoucan_id",
                        type_hint="string",
                        description="GlyTouCan accession identifier for the glycan.",
                        example_value="G00048MO",
                    )
                ],
            ),
        ],
    )

    structconvert = ApiSpec(
        title="Structure Conversion API",
        endpoints=[
            Endpoint(
                name="Convert Structure",
                description="Convert a glycan structure between representations.",
                method="GET",
                url=f"{base_url}/structure",
                required_parameters=[
                    Parameter(
                        name="glytoucan_id",
                        type_hint="string",
                        description="GlyTouCan accession for the structure to convert.",
                        example_value="G00048MO",
                    )
                ],
            ),
        ],
    )

    corpus = [
        ("cardsearch", cardsearch),
        ("brokenapi", brokenapi),
        ("glycanhub", glycanhub),
        ("structconvert", structconvert),
    ]
    return [(source_id, spec, render_doc(spec)) for source_id, spec in corpus]


def write_corpus(base_url: str, directory) -> Path:
    """Materialize docs, truth specs, and a manifest; returns manifest path."""
    directory = Path(directory)
    docs_dir = directory / "pages"
    truth_dir = directory / "truth"
    docs_dir.mkdir(parents=True, exist_ok=True)
    truth_dir.mkdir(parents=True, exist_ok=True)

    manifest = []
    for source_id, spec, text in build_corpus(base_url):
        page = docs_dir / f"{source_id}.txt"
        page.write_text(text, encoding="utf-8")
        (truth_dir / f"{source_id}.json").write_text(
            spec.to_json() + "\n", encoding="utf-8"
        )
        # manifest-relative origin keeps the corpus directory relocatable
        manifest.append({"source_id": source_id, "origin": f"pages/{page.name}"})

    manifest_path = directory / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest_path
