"""Shared networking plumbing: politeness limits, offline guard, worker pool."""

from __future__ import annotations

import ipaddress
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence
from urllib.parse import urlsplit

from .errors import OfflineViolation


class HostRateLimiter:
    """Token-bucket politeness limiter, one bucket per host.

    acquire() blocks until the host's bucket has a token; thread-safe.
    rate <= 0 disables limiting.
    """

    def __init__(self, rate_per_sec: float = 1.0, burst: int = 1):
        self.rate = rate_per_sec
        self.burst = max(1, burst)
        self._lock = threading.Lock()
        self._buckets: dict = {}  # host -> [tokens, last_refill]

    def acquire(self, host: str) -> None:
        if self.rate <= 0:
            return
        while True:
            with self._lock:
                now = time.monotonic()
                tokens, last = self._buckets.get(host, (float(self.burst), now))
                tokens = min(float(self.burst), tokens + (now - last) * self.rate)
                if tokens >= 1.0:
                    self._buckets[host] = (tokens - 1.0, now)
                    return
                self._buckets[host] = (tokens, now)
                wait = (1.0 - tokens) / self.rate
            time.sleep(min(wait, 0.2))

    def acquire_for(self, url: str) -> None:
        self.acquire(urlsplit(url).hostname or "")


def is_loopback_url(url: str) -> bool:
    host = urlsplit(url).hostname
    if not host:
        return False
    if host == "localhost":
        return True
    try:
        return ipaddress.ip_address(host).is_loopback
    except ValueError:
        return False


def check_url_allowed(url: str, offline: bool) -> None:
    """Raise OfflineViolation for non-loopback targets in offline mode."""
    if offline and not is_loopback_url(url):
        raise OfflineViolation(f"offline mode forbids non-loopback target: {url}")


def run_pool(fn: Callable, items: Sequence, width: int = 4) -> list:
    """Map fn over items on a bounded thread pool, preserving input order."""
    items = list(items)
    if not items:
        return []
    width = max(1, min(width, len(items)))
    if width == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=width) as pool:
        return list(pool.map(fn, items))
