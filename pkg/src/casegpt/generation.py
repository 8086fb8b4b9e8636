"""Text-generation backends behind one contract.

Backends produce insight prose from a constructed prompt. Three are provided:

* :class:`ExtractiveBackend` — deterministic offline default: answers by
  quoting the lead sentence of each case section in the prompt, carrying the
  section's citation marker. Always grounded by construction.
* :class:`ScriptedBackend` — test double replaying configured outputs in
  call order (optionally loaded from a fixture file).
* :class:`RemoteGenerator` — client for an HTTP generation service speaking
  ``POST {model, prompt, max_tokens, temperature} -> {text}``.
"""

from __future__ import annotations

import json
import logging
import re
import time
from typing import Protocol

from .errors import BackendUnavailable

logger = logging.getLogger(__name__)

CITATION_PATTERN = re.compile(r"\[CASE:([^\]\s]+)\]")
_SECTION_RE = re.compile(r"^\[CASE:([^\]\s]+)\]", re.MULTILINE)


class GenerationBackend(Protocol):
    """Contract every generation backend satisfies."""

    name: str
    deterministic: bool

    def generate(self, prompt: str, max_tokens: int, temperature: float) -> str: ...


class ExtractiveBackend:
    """Quote-the-evidence generator: emits each case section's first sentence
    with that case's citation marker inside the sentence's closing
    punctuation, within the token allowance. The marker must sit before the
    terminator so a multi-claim report still splits at sentence boundaries —
    a trailing "]" would otherwise hide the boundary and fuse every claim
    into one unverifiable blob."""

    def __init__(self) -> None:
        self.name = "extractive"
        self.deterministic = True

    def generate(self, prompt: str, max_tokens: int, temperature: float) -> str:
        del temperature  # deterministic by design
        pieces: list[str] = []
        spent = 0
        for match in _SECTION_RE.finditer(prompt):
            case_id = match.group(1)
            # The section body runs from the end of the header line to the
            # next blank line.
            start = prompt.index("\n", match.start()) + 1
            section = prompt[start:].split("\n\n", 1)[0]
            first_line = next((ln for ln in section.splitlines() if ln.strip()), "")
            if not first_line:
                continue
            sentence = first_line.strip()
            if sentence[-1] in ".?!":
                claim = f"{sentence[:-1].rstrip()} [CASE:{case_id}]{sentence[-1]}"
            else:
                claim = f"{sentence} [CASE:{case_id}]."
            cost = len(claim.split())
            if pieces and spent + cost > max_tokens:
                break
            pieces.append(claim)
            spent += cost
        return " ".join(pieces)


class ScriptedBackend:
    """Replays configured outputs by call ordinal; exhaustion raises
    :class:`BackendUnavailable` (so scripts must cover every expected call)."""

    def __init__(self, outputs: list[str], name: str = "scripted"):
        self.name = name
        self.deterministic = True
        self._outputs = list(outputs)
        self.calls = 0

    @classmethod
    def from_file(cls, path: str) -> "ScriptedBackend":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        if isinstance(raw, dict):
            outputs = [raw[key] for key in sorted(raw, key=int)]
        else:
            outputs = list(raw)
        return cls(outputs)

    def generate(self, prompt: str, max_tokens: int, temperature: float) -> str:
        del prompt, max_tokens, temperature
        if self.calls >= len(self._outputs):
            raise BackendUnavailable(
                f"scripted backend exhausted after {len(self._outputs)} calls"
            )
        text = self._outputs[self.calls]
        self.calls += 1
        return text


class RemoteGenerator:
    """Client for a remote text-generation service."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        auth_token: str | None = None,
        timeout: float = 60.0,
        max_retries: int = 2,
        backoff: float = 0.5,
        transport=None,
    ):
        import httpx

        self.name = "remote"
        self.deterministic = False
        self.endpoint = endpoint
        self.model = model
        self._max_retries = max_retries
        self._backoff = backoff
        headers = {}
        if auth_token:
            headers["Authorization"] = f"Bearer {auth_token}"
        self._client = httpx.Client(timeout=timeout, headers=headers, transport=transport)

    def close(self) -> None:
        self._client.close()

    def generate(self, prompt: str, max_tokens: int, temperature: float) -> str:
        import httpx

        payload = {
            "model": self.model,
            "prompt": prompt,
            "max_tokens": max_tokens,
            "temperature": temperature,
        }
        last_error: Exception | None = None
        for attempt in range(self._max_retries + 1):
            if attempt:
                time.sleep(self._backoff * (2 ** (attempt - 1)))
            try:
                response = self._client.post(self.endpoint, json=payload)
            except httpx.HTTPError as exc:
                last_error = exc
                logger.warning("generation request failed (attempt %d): %s", attempt + 1, exc)
                continue
            if response.status_code >= 500:
                last_error = BackendUnavailable(
                    f"generation service returned {response.status_code}"
                )
                continue
            if response.status_code != 200:
                raise BackendUnavailable(
                    f"generation service rejected request: {response.status_code} "
                    f"{response.text[:200]}"
                )
            body = response.json()
            if not isinstance(body, dict) or "text" not in body:
                raise BackendUnavailable("malformed generation response: no text field")
            return str(body["text"])
        raise BackendUnavailable(f"generation service unreachable: {last_error}")
