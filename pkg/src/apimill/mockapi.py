"""Deterministic loopback HTTP server exercising every outcome class.

Routes:
  /cards     200 with data                       -> passes
  /legacy    400 when query args present, 200 bare -> exercises the retry
  /trainers  200 echoing the required name argument
  /gone      404 always                          -> abnormal response
  /strict    200 with an error body              -> fails the judge
  /glycan    gated: 200 data iff glytoucan_id is the known accession
  /structure gated the same way on a second host of values

Binds 127.0.0.1 only.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlsplit

KNOWN_GLYTOUCAN_ID = "G00048MO"


class _Handler(BaseHTTPRequestHandler):
    server_version = "MockApi/1.0"

    def log_message(self, fmt, *args):  # keep test output quiet
        pass

    def _send(self, status: int, payload) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        split = urlsplit(self.path)
        query = {k: v[0] for k, v in parse_qs(split.query).items()}
        path = split.path
        self.server.hits.append((path, dict(query)))

        if path == "/cards":
            self._send(200, {
                "data": [{
                    "id": "xy7-54",
                    "name": "Gardevoir",
                    "supertype": "Pokemon",
                    "hp": "170",
                }],
                "totalCount": 1,
            })
        elif path == "/legacy":
            if query:
                self._send(400, {"error": "unexpected parameters"})
            else:
                self._send(200, {"data": "legacy index"})
        elif path == "/trainers":
            name = query.get("name")
            if name:
                self._send(200, {"data": {"trainer": name, "wins": 12}})
            else:
                self._send(400, {"error": "name required"})
        elif path == "/gone":
            self._send(404, {"error": "resource retired"})
        elif path == "/strict":
            self._send(200, {"error": "invalid query"})
        elif path == "/glycan":
            if query.get("glytoucan_id") == KNOWN_GLYTOUCAN_ID:
                self._send(200, {
                    "data": {
                        "glytoucan_id": KNOWN_GLYTOUCAN_ID,
                        "glycan_name": "Lewis b",
                        "pubchem_cid": 45480569,
                    }
                })
            else:
                self._send(200, {"error": "unknown glycan"})
        elif path == "/structure":
            if query.get("glytoucan_id") == KNOWN_GLYTOUCAN_ID:
                self._send(200, {
                    "data": {
                        "glytoucan_id": KNOWN_GLYTOUCAN_ID,
                        "format": "GLYCAM",
                        "structure": "LFucpa1-2DGalpb1-3[LFucpa1-4]DGlcpNAcb1-OH",
                    }
                })
            else:
                self._send(200, {"error": "unknown structure"})
        else:
            self._send(404, {"error": "no such route"})


class MockApi:
    """Context manager around the loopback server; .base_url has the port."""

    def __init__(self):
        self.server = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
        self.server.hits = []  # (path, query) per request, in arrival order
        self._thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    @property
    def base_url(self) -> str:
        host, port = self.server.server_address[:2]
        return f"http://{host}:{port}"

    @property
    def hits(self) -> list:
        return self.server.hits

    def start(self) -> "MockApi":
        self._thread.start()
        return self

    def stop(self) -> None:
        self.server.shutdown()
        self.server.server_close()

    def __enter__(self) -> "MockApi":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
