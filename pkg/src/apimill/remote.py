"""Chat-completion-style HTTP client used by remote backends.

One wire protocol serves extraction, judging, and value guessing:
POST {model, messages, optional response_format} → choices[0].message.content.
This is the de-facto interface of hosted and locally-served models alike, so
a fine-tuned local model is a config entry, not code.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Optional

import requests

from .errors import BackendUnreachable
from .netutil import check_url_allowed


@dataclass
class RemoteConfig:
    endpoint_url: str
    model_name: str
    api_key_env: Optional[str] = None
    timeout: float = 120.0
    extra_headers: dict = field(default_factory=dict)


class ChatClient:
    def __init__(self, config: RemoteConfig, rate_limiter=None, offline: bool = False):
        self.config = config
        self._rate_limiter = rate_limiter
        self._offline = offline

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        headers.update(self.config.extra_headers)
        if self.config.api_key_env:
            key = os.environ.get(self.config.api_key_env)
            if key:
                headers["Authorization"] = f"Bearer {key}"
        return headers

    def complete(self, messages: list, response_schema: Optional[dict] = None,
                 schema_name: str = "output"):
        """Run one chat completion; returns (content, total_tokens)."""
        check_url_allowed(self.config.endpoint_url, self._offline)
        body: dict = {"model": self.config.model_name, "messages": messages}
        if response_schema is not None:
            body["response_format"] = {
                "type": "json_schema",
                "json_schema": {"name": schema_name, "schema": response_schema},
            }
        if self._rate_limiter is not None:
            self._rate_limiter.acquire_for(self.config.endpoint_url)
        try:
            resp = requests.post(
                self.config.endpoint_url,
                json=body,
                headers=self._headers(),
                timeout=self.config.timeout,
            )
        except requests.RequestException as exc:
            raise BackendUnreachable(f"transport: {exc}") from exc
        if resp.status_code != 200:
            raise BackendUnreachable(f"status {resp.status_code}: {resp.text[:200]}")
        try:
            payload = resp.json()
            content = payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendUnreachable(f"malformed response: {exc}") from exc
        tokens = 0
        usage = payload.get("usage")
        if isinstance(usage, dict):
            tokens = int(usage.get("total_tokens") or 0)
        if not isinstance(content, str):
            content = json.dumps(content)
        return content, tokens
