"""HTTP-backed providers for text generation, logits, and classification.

Wire formats (all JSON over POST unless noted):

  text generation   {model_id, prompt, temperature, max_tokens} -> {text}
  logits            {model_id, context_tokens} -> {logits: [...], vocab_hash}
  vocabulary (GET)  -> {vocab: [...], vocab_hash}
  classifier        {text} -> {label, score}

The vocabulary hash is sha256 over the newline-joined token list; a logits
response carrying a different hash than the fetched vocabulary is a hard
error. Bearer tokens come from the STYLESHIFT_API_TOKEN environment
variable (override the variable name per endpoint in configuration).
"""

from __future__ import annotations

import hashlib
import os
import time
from typing import Sequence

import numpy as np
import requests

from .decoding import ContractViolation, ProviderError, UnknownTokenError
from .prompts import TextGenClient, TransportError

DEFAULT_TOKEN_ENV = "STYLESHIFT_API_TOKEN"
DEFAULT_TIMEOUT = 30.0
RETRY_ATTEMPTS = 3
RETRY_BACKOFF = 0.2


def vocab_hash(tokens: Sequence[str]) -> str:
    return hashlib.sha256("\n".join(tokens).encode("utf-8")).hexdigest()


def _auth_headers(token_env: str) -> dict[str, str]:
    token = os.environ.get(token_env, "")
    return {"Authorization": f"Bearer {token}"} if token else {}


def _post_json(
    url: str,
    payload: dict,
    token_env: str,
    timeout: float,
    attempts: int = RETRY_ATTEMPTS,
) -> dict:
    last: Exception | None = None
    for attempt in range(attempts):
        try:
            response = requests.post(
                url, json=payload, headers=_auth_headers(token_env), timeout=timeout
            )
            response.raise_for_status()
            return response.json()
        except (requests.ConnectionError, requests.Timeout, requests.HTTPError) as exc:
            last = exc
            if attempt + 1 < attempts:
                time.sleep(RETRY_BACKOFF * (attempt + 1))
    raise ProviderError(f"POST {url} failed after {attempts} attempts: {last}")


class HttpTextGen(TextGenClient):
    """Text-completion client speaking the {prompt} -> {text} contract."""

    def __init__(
        self,
        base_url: str,
        model_id: str,
        path: str = "/generate",
        token_env: str = DEFAULT_TOKEN_ENV,
        timeout: float = DEFAULT_TIMEOUT,
    ):
        self.url = base_url.rstrip("/") + path
        self.model_id = model_id
        self.token_env = token_env
        self.timeout = timeout

    def complete(self, prompt: str, temperature: float = 0.0, max_tokens: int = 512) -> str:
        payload = {
            "model_id": self.model_id,
            "prompt": prompt,
            "temperature": temperature,
            "max_tokens": max_tokens,
        }
        try:
            body = _post_json(self.url, payload, self.token_env, self.timeout, attempts=1)
        except ProviderError as exc:
            raise TransportError(str(exc)) from exc
        if "text" not in body or not isinstance(body["text"], str):
            raise TransportError(f"malformed generation response from {self.url}")
        return body["text"]


class HttpLogitProvider:
    """Next-token logits over HTTP with vocabulary pinning.

    The vocabulary is fetched once; every logits response must echo the
    same vocab_hash. Text encoding is whitespace matching against the
    fetched vocabulary (tokenization is the serving side's concern; this
    client only needs a consistent token list).
    """

    def __init__(
        self,
        base_url: str,
        model_id: str,
        logits_path: str = "/logits",
        vocab_path: str = "/vocab",
        token_env: str = DEFAULT_TOKEN_ENV,
        timeout: float = DEFAULT_TIMEOUT,
        eos_token: str | None = None,
    ):
        self.base = base_url.rstrip("/")
        self.logits_url = self.base + logits_path
        self.model_id = model_id
        self.token_env = token_env
        self.timeout = timeout
        self.eos_token = eos_token
        self._vocab, self._hash = self._fetch_vocab(self.base + vocab_path)
        self._index = {tok: i for i, tok in enumerate(self._vocab)}

    def _fetch_vocab(self, url: str) -> tuple[list[str], str]:
        last: Exception | None = None
        for attempt in range(RETRY_ATTEMPTS):
            try:
                response = requests.get(
                    url, headers=_auth_headers(self.token_env), timeout=self.timeout
                )
                response.raise_for_status()
                body = response.json()
                break
            except (requests.ConnectionError, requests.Timeout, requests.HTTPError) as exc:
                last = exc
                if attempt + 1 < RETRY_ATTEMPTS:
                    time.sleep(RETRY_BACKOFF * (attempt + 1))
        else:
            raise ProviderError(f"GET {url} failed after {RETRY_ATTEMPTS} attempts: {last}")
        tokens = body.get("vocab")
        declared = body.get("vocab_hash")
        if not isinstance(tokens, list) or not tokens:
            raise ContractViolation(f"vocab endpoint {url} returned no tokens")
        computed = vocab_hash(tokens)
        if declared != computed:
            raise ContractViolation(
                f"vocab hash mismatch: endpoint declared {declared}, computed {computed}"
            )
        return list(tokens), computed

    def vocab(self) -> list[str]:
        return list(self._vocab)

    def logits(self, context: Sequence[str]) -> np.ndarray:
        payload = {"model_id": self.model_id, "context_tokens": list(context)}
        body = _post_json(self.logits_url, payload, self.token_env, self.timeout)
        if body.get("vocab_hash") != self._hash:
            raise ContractViolation(
                "logits response vocab_hash does not match the pinned vocabulary"
            )
        values = body.get("logits")
        if not isinstance(values, list) or len(values) != len(self._vocab):
            raise ContractViolation(
                f"expected {len(self._vocab)} logits, got "
                f"{len(values) if isinstance(values, list) else type(values).__name__}"
            )
        return np.asarray(values, dtype=np.float64)

    def encode(self, text: str, strict: bool = False) -> list[str]:
        tokens = []
        for raw in text.split():
            if raw in self._index:
                tokens.append(raw)
            elif strict:
                raise UnknownTokenError(raw)
        return tokens

    def decode(self, tokens: Sequence[str]) -> str:
        return " ".join(tokens)


class HttpClassifier:
    """Style classifier speaking the {text} -> {label, score} contract."""

    def __init__(
        self,
        base_url: str,
        path: str = "/classify",
        token_env: str = DEFAULT_TOKEN_ENV,
        timeout: float = DEFAULT_TIMEOUT,
        labels: tuple[str, ...] = (),
    ):
        self.url = base_url.rstrip("/") + path
        self.token_env = token_env
        self.timeout = timeout
        self.labels = labels

    def classify(self, text: str) -> tuple[str, float]:
        body = _post_json(self.url, {"text": text}, self.token_env, self.timeout)
        if "label" not in body or "score" not in body:
            raise ContractViolation(f"malformed classifier response from {self.url}")
        score = float(body["score"])
        if not 0.0 <= score <= 1.0:
            raise ContractViolation(f"classifier score {score} out of [0, 1]")
        return str(body["label"]), score
