"""JSON-over-HTTP client shared by the remote summarizer and generator."""

from __future__ import annotations

import logging
import time
from typing import Callable

import requests

from .errors import BackendError

log = logging.getLogger(__name__)

ATTEMPTS = 3
BACKOFF_START = 0.5


def post_json(url: str, body: dict, expect: str, *, attempts: int = ATTEMPTS,
              backoff: float = BACKOFF_START, timeout: float = 30.0,
              sleep: Callable[[float], None] = time.sleep,
              session: requests.Session | None = None) -> str:
    """POST ``body`` to ``url`` and return the string field ``expect`` of the reply.

    Network errors and non-200 replies are retried with exponential backoff
    (0.5 s, 1 s, ...). A 200 reply with the wrong shape fails immediately.
    """
    http = session or requests
    last = None
    for attempt in range(1, attempts + 1):
        try:
            resp = http.post(url, json=body, timeout=timeout)
        except requests.RequestException as exc:
            last = f"request failed: {exc}"
        else:
            if resp.status_code == 200:
                try:
                    payload = resp.json()
                except ValueError:
                    raise BackendError(f"{url} returned invalid JSON") from None
                value = payload.get(expect) if isinstance(payload, dict) else None
                if not isinstance(value, str):
                    raise BackendError(f"{url} reply lacks string field {expect!r}")
                return value
            last = f"HTTP {resp.status_code}"
        log.warning("%s attempt %d/%d: %s", url, attempt, attempts, last)
        if attempt < attempts:
            sleep(backoff * 2 ** (attempt - 1))
    raise BackendError(f"{url} failed after {attempts} attempts ({last})")


def join_url(endpoint: str, path: str) -> str:
    return endpoint.rstrip("/") + "/" + path.lstrip("/")
