"""Recommendation sources: live chat-completion endpoint and simulator.

The live path POSTs an OpenAI-style chat request, retries transient
failures with jittered exponential backoff, and extracts a ranked title
list from the response text. The simulator draws items without replacement
with probability proportional to (train_count + 1) ** bias_exponent, fully
determined by (seed, user_id, strategy), which makes end-to-end runs
reproducible and free.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence, TypeVar

import numpy as np
import requests

from poplens.popularity import ItemStats
from poplens.prompts import PromptRequest, Strategy

PROVENANCE_LIVE = "live"
PROVENANCE_SIMULATED = "simulated"


class TransportError(RuntimeError):
    """Network-level failure that survived the retry budget."""


class ProviderError(RuntimeError):
    """Endpoint answered but unusably (HTTP error, bad payload, missing key)."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


@dataclass(frozen=True)
class ProviderConfig:
    """Connection settings for the live path (seed drives the simulator)."""

    endpoint: str = ""
    model: str = "simulator"
    api_key_env: str = "POPLENS_API_KEY"
    max_in_flight: int = 4
    timeout: float = 30.0
    retries: int = 3
    seed: int = 0

    def validate(self) -> None:
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")


@dataclass(frozen=True)
class RawRecommendation:
    """A provider's ranked titles for one (user, strategy), order preserved."""

    user_id: int
    strategy: Strategy
    titles: tuple[str, ...]
    raw_response: str
    provenance: str

    @property
    def empty(self) -> bool:
        return not self.titles


_NUMBERED_RE = re.compile(r"^\s*\d{1,3}[.)]\s*(.+)$")
_BULLET_RE = re.compile(r"^\s*[-*•]\s+(.+)$")
_QUOTES = [('"', '"'), ("'", "'"), ("“", "”"), ("‘", "’")]


def _clean_title(text: str) -> str:
    s = text.strip()
    # markdown emphasis around the whole title
    for marker in ("**", "__", "*", "_"):
        if s.startswith(marker) and s.endswith(marker) and len(s) > 2 * len(marker):
            s = s[len(marker):-len(marker)].strip()
    for opening, closing in _QUOTES:
        if s.startswith(opening) and s.endswith(closing) and len(s) > 1:
            s = s[1:-1].strip()
    return s


def extract_titles(text: str, limit: int) -> list[str]:
    """Pull a ranked title list out of free-form response text.

    Numbered lines win if present, then bulleted lines, then plain lines
    (skipping sentence-like lines that end in terminal punctuation, which
    drops refusals and chatter). Enumeration tokens, markdown emphasis and
    surrounding quotes are stripped; trailing parenthetical years are kept
    for the matcher. Output order follows the response; at most `limit`
    titles are returned.
    """
    lines = text.splitlines()
    numbered = []
    bulleted = []
    for line in lines:
        m = _NUMBERED_RE.match(line)
        if m:
            numbered.append(_clean_title(m.group(1)))
            continue
        m = _BULLET_RE.match(line)
        if m:
            bulleted.append(_clean_title(m.group(1)))
    if numbered:
        titles = numbered
    elif bulleted:
        titles = bulleted
    else:
        titles = []
        for line in lines:
            s = _clean_title(line)
            if not s or s.endswith((".", "!", "?", ":", ";")):
                continue
            titles.append(s)
    titles = [t for t in titles if t]
    return titles[:limit]


def _response_text(payload) -> str:
    """First text segment of a chat-completion response body."""
    try:
        choice = payload["choices"][0]
    except (KeyError, IndexError, TypeError):
        raise ProviderError("response carries no choices") from None
    message = choice.get("message")
    if isinstance(message, dict) and isinstance(message.get("content"), str):
        return message["content"]
    if isinstance(choice.get("text"), str):
        return choice["text"]
    raise ProviderError("response carries no text segment")


def request_recommendations(prompt: str, config: ProviderConfig, *,
                            user_id: int, strategy: Strategy,
                            list_length: int = 10,
                            session: requests.Session | None = None) -> RawRecommendation:
    """Query the live endpoint for one prompt.

    Retries connection errors, timeouts, 429 and 5xx with exponential
    backoff (1s base, doubled, jittered) up to the retry budget. Zero
    extractable titles is a flagged empty result, not an error.
    """
    key = os.environ.get(config.api_key_env)
    if not key:
        raise ProviderError(f"API key environment variable {config.api_key_env!r} is not set")
    body = {
        "model": config.model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": 0,
    }
    headers = {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}
    http = session or requests
    delay = 1.0
    last_exc: Exception | None = None
    last_status: int | None = None
    for attempt in range(config.retries + 1):
        if attempt:
            time.sleep(delay * (0.5 + random.random()))
            delay *= 2
        try:
            resp = http.post(config.endpoint, json=body, headers=headers,
                             timeout=config.timeout)
        except requests.RequestException as exc:
            last_exc = exc
            continue
        if resp.status_code == 429 or resp.status_code >= 500:
            last_status = resp.status_code
            continue
        if resp.status_code >= 400:
            raise ProviderError(f"provider returned HTTP {resp.status_code}: "
                                f"{resp.text[:200]}", status=resp.status_code)
        try:
            text = _response_text(resp.json())
        except ValueError:
            raise ProviderError("provider returned non-JSON body") from None
        return RawRecommendation(
            user_id=user_id, strategy=strategy,
            titles=tuple(extract_titles(text, list_length)),
            raw_response=text, provenance=PROVENANCE_LIVE)
    if last_status is not None:
        raise ProviderError(f"provider kept failing with HTTP {last_status} "
                            f"after {config.retries + 1} attempts", status=last_status)
    raise TransportError(f"request failed after {config.retries + 1} attempts: {last_exc}")


T = TypeVar("T")
R = TypeVar("R")


def fetch_all(tasks: Sequence[T], worker: Callable[[T], R],
              max_in_flight: int) -> list[R]:
    """Run `worker` over `tasks` with bounded concurrency.

    Results come back in task order regardless of completion order, so
    callers get deterministic output by passing tasks in a deterministic
    order.
    """
    if max_in_flight < 1:
        raise ValueError("max_in_flight must be >= 1")
    if max_in_flight == 1 or len(tasks) <= 1:
        return [worker(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        futures = [pool.submit(worker, t) for t in tasks]
        return [f.result() for f in futures]


def simulate_recommendations(request: PromptRequest, stats: ItemStats,
                             titles: Mapping[int, str], bias_exponent: float = 1.0,
                             seed: int = 0) -> RawRecommendation:
    """Deterministic stand-in for a live recommender.

    Draws `list_length` distinct items with probability proportional to
    (train_count + 1) ** bias_exponent; exponent 0 is uniform, larger
    exponents concentrate on popular items. The random stream depends only
    on (seed, user_id, strategy).
    """
    if bias_exponent < 0:
        raise ValueError("bias_exponent must be >= 0")
    catalog = sorted(stats.counts)
    if not catalog:
        raise ValueError("catalog is empty")
    if request.list_length > len(catalog):
        raise ValueError(f"cannot draw {request.list_length} distinct items "
                         f"from a {len(catalog)}-item catalog")
    counts = np.asarray([stats.counts[i] for i in catalog], dtype=np.float64)
    weights = np.power(counts + 1.0, bias_exponent)
    probs = weights / weights.sum()
    rng = np.random.default_rng([seed, request.user_id, request.strategy.code])
    picks = rng.choice(len(catalog), size=request.list_length, replace=False, p=probs)
    chosen = [titles[catalog[i]] for i in picks]
    raw = "\n".join(f"{rank}. {title}" for rank, title in enumerate(chosen, start=1))
    return RawRecommendation(user_id=request.user_id, strategy=request.strategy,
                             titles=tuple(chosen), raw_response=raw,
                             provenance=PROVENANCE_SIMULATED)


class ResponseCache:
    """Append-only (prompt, model) -> raw response store, JSONL on disk.

    Lets a live run be re-scored without re-querying; the newest record for
    a key wins. Writes flush immediately so a crashed run never loses
    already-paid responses.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._memory: dict[str, str] = {}
        self._fh = None
        if self.path.exists():
            with open(self.path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    record = json.loads(line)
                    self._memory[record["key"]] = record["response"]

    @staticmethod
    def key(model: str, prompt: str) -> str:
        return hashlib.sha256(f"{model}\x00{prompt}".encode("utf-8")).hexdigest()

    def get(self, model: str, prompt: str) -> str | None:
        return self._memory.get(self.key(model, prompt))

    def put(self, model: str, prompt: str, response: str) -> None:
        key = self.key(model, prompt)
        if self._fh is None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self.path, "a", encoding="utf-8")
        self._fh.write(json.dumps({"key": key, "model": model, "prompt": prompt,
                                   "response": response}, sort_keys=True) + "\n")
        self._fh.flush()
        self._memory[key] = response

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __len__(self) -> int:
        return len(self._memory)
