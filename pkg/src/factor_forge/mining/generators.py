"""Candidate generators: a seeded offline sampler and a chat-completion HTTP client.

Generator output is untrusted text. Nothing here parses formulas beyond
splitting the response into lines; validation happens downstream.
"""

from __future__ import annotations

import abc
import hashlib
import json
import logging
import os
import random
import re
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Any, Callable, Mapping, Sequence

from factor_forge.dsl import THEMES, Family, OperatorRegistry, default_registry, render
from factor_forge.dsl.nodes import BinOp, Call, Neg, Node, Num, Var
from factor_forge.mining.prompts import PromptBundle

log = logging.getLogger(__name__)

API_KEY_ENV = "FACTOR_FORGE_API_KEY"
RETRY_ATTEMPTS = 3
RETRY_BASE_DELAY = 1.0


class GeneratorError(RuntimeError):
    pass


class TransportError(GeneratorError):
    """Retryable failure talking to the generator."""


class GeneratorExhausted(GeneratorError):
    """Retries used up; the round is aborted."""


@dataclass(frozen=True)
class RawCandidate:
    text: str
    family: str | None = None


class GeneratorInterface(abc.ABC):
    """``generate`` returns at most ``bundle.batch_size`` raw candidates and never executes them."""

    model_id: str = ""

    def __init__(self) -> None:
        self.last_exchange: dict[str, Any] | None = None

    @abc.abstractmethod
    def generate(self, bundle: PromptBundle) -> list[RawCandidate]: ...


def generate_with_retry(
    generator: GeneratorInterface,
    bundle: PromptBundle,
    attempts: int = RETRY_ATTEMPTS,
    base_delay: float = RETRY_BASE_DELAY,
    sleep: Callable[[float], None] = time.sleep,
) -> list[RawCandidate]:
    """Call the generator, retrying transport failures with exponential backoff."""
    for attempt in range(attempts):
        try:
            return list(generator.generate(bundle))[: bundle.batch_size]
        except TransportError as exc:
            if attempt + 1 == attempts:
                raise GeneratorExhausted(f"generator failed after {attempts} attempts: {exc}") from exc
            delay = base_delay * 2**attempt
            log.warning("generator attempt %d failed (%s); retrying in %.1fs", attempt + 1, exc, delay)
            sleep(delay)
    raise GeneratorExhausted("no generator attempts configured")


# -- offline sampler -------------------------------------------------------------

PRICES = ("CLOSE", "OPEN", "VWAP")
WINDOWS = (3, 5, 10, 15, 20, 30, 40, 60)
SHORT_LAGS = (1, 2, 3, 5)
LAGS = (1, 2, 3, 5, 10, 20)

MALFORMED = (
    "TS_SMA(CLOSE, ",
    "CLOSE +",
    "((HIGH - LOW) / CLOSE",
    "TS_STD(TS_LOGRET(CLOSE, 1) 20)",
    "CS_RANK(VOLUME))",
    "CLOSE ** 2",
    "__import__('os').system('ls')",
    "TS_SMA(CLOSE, 20) ;",
    "lambda x: x",
    "CLOSE @ OPEN",
    "",
    "IF(CLOSE > , 1, 0)",
)


def _pick(rng: random.Random, options: Sequence[Any]) -> Any:
    return options[rng.randrange(len(options))]


def _two_windows(rng: random.Random) -> tuple[int, int]:
    a, b = rng.sample(WINDOWS, 2)
    return min(a, b), max(a, b)


def _range(rng: random.Random) -> str:
    p, w = _pick(rng, PRICES), _pick(rng, WINDOWS)
    return _pick(
        rng,
        (
            f"(HIGH - LOW) / {p}",
            f"TS_SMA((HIGH - LOW) / {p}, {w})",
            f"CS_RANK(TS_SMA(HIGH - LOW, {w}) / {p})",
            f"CS_ZSCORE((HIGH - LOW) / TS_SMA({p}, {w}))",
            f"-TS_SMA((HIGH - LOW) / {p}, {w})",
            f"(HIGH - {p}) / (HIGH - LOW + 0.0001 * {p})",
        ),
    )


def _volatility(rng: random.Random) -> str:
    p, lag = _pick(rng, PRICES), _pick(rng, (1, 1, 2, 5))
    w1, w2 = _two_windows(rng)
    return _pick(
        rng,
        (
            f"TS_STD(TS_LOGRET({p}, {lag}), {w2})",
            f"-TS_STD(TS_LOGRET({p}, {lag}), {w2})",
            f"CS_RANK(TS_VAR(TS_LOGRET({p}, {lag}), {w2}))",
            f"TS_STD(TS_LOGRET({p}, {lag}), {w1}) / TS_STD(TS_LOGRET({p}, {lag}), {w2})",
            f"CS_ZSCORE(-TS_VAR(TS_LOGRET({p}, {lag}), {w1}))",
        ),
    )


def _price_trend(rng: random.Random) -> str:
    p = _pick(rng, PRICES)
    w1, w2 = _two_windows(rng)
    return _pick(
        rng,
        (
            f"TS_SMA({p}, {w2}) / {p} - 1",
            f"{p} / TS_SMA({p}, {w2}) - 1",
            f"IF({p} > TS_SMA({p}, {w2}), 1, 0)",
            f"CS_RANK({p} - TS_SMA({p}, {w1}))",
            f"CS_ZSCORE({p} / TS_SMA({p}, {w2}))",
        ),
    )


def _mean_reversion(rng: random.Random) -> str:
    p, lag, w = _pick(rng, PRICES), _pick(rng, SHORT_LAGS), _pick(rng, WINDOWS)
    return _pick(
        rng,
        (
            f"-TS_LOGRET({p}, {lag})",
            f"CS_RANK(-TS_LOGRET({p}, {lag}))",
            f"CS_ZSCORE(-TS_LOGRET({p}, {lag}))",
            f"-TS_LOGRET({p}, {lag}) * CS_RANK(TS_SMA({p}, {w}))",
            f"-CS_ZSCORE(TS_LOGRET({p}, {lag}))",
        ),
    )


def _liquidity(rng: random.Random) -> str:
    lag = _pick(rng, LAGS)
    w1, w2 = _two_windows(rng)
    return _pick(
        rng,
        (
            f"VOLUME / TS_SMA(VOLUME, {w2})",
            f"CS_RANK(TS_STD(VOLUME, {w2}) / TS_SMA(VOLUME, {w2}))",
            f"TS_LOGRET(VOLUME, {lag})",
            f"-CS_ZSCORE(TS_SMA(VOLUME, {w1}) / TS_SMA(VOLUME, {w2}))",
            f"-CS_RANK(TS_SMA(VOLUME, {w2}))",
        ),
    )


def _price_volume(rng: random.Random) -> str:
    p, lag = _pick(rng, PRICES), _pick(rng, LAGS)
    w1, w2 = _two_windows(rng)
    return _pick(
        rng,
        (
            f"CS_RANK(TS_LOGRET({p}, {lag})) * CS_RANK(VOLUME / TS_SMA(VOLUME, {w2}))",
            f"TS_SMA({p} * VOLUME, {w1}) / TS_SMA(VOLUME, {w1}) / {p} - 1",
            f"IF(TS_LOGRET({p}, {lag}) > 0, 1, -1) * VOLUME / TS_SMA(VOLUME, {w2})",
            f"-CS_RANK(TS_LOGRET({p}, {lag})) * CS_RANK(TS_LOGRET(VOLUME, {lag}))",
        ),
    )


FAMILY_SAMPLERS: dict[Family, Callable[[random.Random], str]] = {
    Family.PRICE_TREND: _price_trend,
    Family.MEAN_REVERSION: _mean_reversion,
    Family.VOLATILITY: _volatility,
    Family.RANGE: _range,
    Family.LIQUIDITY_VOLUME: _liquidity,
    Family.PRICE_VOLUME: _price_volume,
}


def random_tree(rng: random.Random, registry: OperatorRegistry, max_depth: int = 4) -> Node:
    """Grammar-based random expression over the registered operators and fields."""
    fields = sorted(registry.fields)
    ops = sorted(registry, key=lambda s: s.name)

    def leaf() -> Node:
        if rng.random() < 0.85:
            return Var(_pick(rng, fields))
        return Num(float(rng.randint(1, 5)), True)

    def grow(depth: int) -> Node:
        if depth <= 1 or rng.random() < 0.25:
            return leaf()
        roll = rng.random()
        if roll < 0.55:
            spec = _pick(rng, ops)
            args: list[Node] = []
            for i in range(spec.arity):
                if i in spec.window_positions:
                    args.append(Num(float(max(spec.min_window, _pick(rng, WINDOWS))), True))
                else:
                    args.append(grow(depth - 1))
            return Call(spec.name, tuple(args))
        if roll < 0.92:
            return BinOp(_pick(rng, ("+", "-", "*", "/")), grow(depth - 1), grow(depth - 1))
        return Neg(grow(depth - 1))

    return grow(max_depth)


def _malformed(rng: random.Random) -> str:
    return _pick(rng, MALFORMED)


class MockGenerator(GeneratorInterface):
    """Deterministic offline sampler.

    Draws are a function of (seed, bundle) only. Each slot is, in order of
    precedence: a malformed string (``malformed_rate``), a repeat of a formula
    already in the prompt or earlier in the batch (``duplicate_rate``), a
    random grammar tree (``random_rate``), or a family template. Families named
    as under-explored in the bundle get ``under_weight`` times the base weight.
    """

    model_id = "mock"

    def __init__(
        self,
        seed: int = 0,
        malformed_rate: float = 0.05,
        duplicate_rate: float = 0.1,
        random_rate: float = 0.1,
        under_weight: float = 3.0,
        registry: OperatorRegistry | None = None,
        size: int | None = None,
    ) -> None:
        super().__init__()
        for name, rate in (("malformed_rate", malformed_rate), ("duplicate_rate", duplicate_rate), ("random_rate", random_rate)):
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        self.seed = seed
        self.malformed_rate = malformed_rate
        self.duplicate_rate = duplicate_rate
        self.random_rate = random_rate
        self.under_weight = under_weight
        self.registry = registry or default_registry()
        self.size = size

    def _rng(self, bundle: PromptBundle) -> random.Random:
        h = hashlib.sha256(f"{self.seed}\0{bundle.fingerprint()}".encode()).digest()
        return random.Random(int.from_bytes(h[:8], "big"))

    def family_weights(self, under_explored: Sequence[Family]) -> dict[Family, float]:
        under = set(under_explored)
        return {f: (self.under_weight if f in under else 1.0) for f in THEMES}

    def sample_family(self, rng: random.Random, under_explored: Sequence[Family]) -> Family:
        weights = self.family_weights(under_explored)
        return rng.choices(list(weights), weights=list(weights.values()))[0]

    def generate(self, bundle: PromptBundle) -> list[RawCandidate]:
        rng = self._rng(bundle)
        n = bundle.batch_size if self.size is None else min(self.size, bundle.batch_size)
        out: list[RawCandidate] = []
        for _ in range(n):
            u = rng.random()
            pool = list(bundle.examples) + [c.text for c in out if c.family is not None]
            if u < self.malformed_rate:
                out.append(RawCandidate(_malformed(rng)))
            elif u < self.malformed_rate + self.duplicate_rate and pool:
                out.append(RawCandidate(_pick(rng, pool)))
            elif rng.random() < self.random_rate:
                out.append(RawCandidate(render(random_tree(rng, self.registry))))
            else:
                fam = self.sample_family(rng, bundle.under_explored)
                out.append(RawCandidate(FAMILY_SAMPLERS[fam](rng), fam.value))
        self.last_exchange = {"model": self.model_id, "seed": self.seed, "candidates": [c.__dict__ for c in out]}
        return out


# -- HTTP chat-completion client -------------------------------------------------

FENCE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)
ANNOTATION = re.compile(r"^(?P<formula>.*?)\s*(?:#|//|,|;)?\s*family\s*[:=]\s*(?P<family>[A-Za-z _-]+?)\s*$", re.IGNORECASE)
NUMBERING = re.compile(r"^\d+[.)]\s+")

Transport = Callable[[str, bytes, Mapping[str, str], float], bytes]


def extract_candidates(content: str, limit: int | None = None) -> list[RawCandidate]:
    """Formula lines from every fenced block; an optional trailing ``family: <name>`` annotates a line."""
    out: list[RawCandidate] = []
    for block in FENCE.findall(content or ""):
        for line in block.splitlines():
            line = NUMBERING.sub("", line.strip())
            if not line or line.startswith("#"):
                continue
            m = ANNOTATION.match(line)
            if m and m.group("formula"):
                out.append(RawCandidate(m.group("formula").strip(), m.group("family").strip()))
            else:
                out.append(RawCandidate(line))
    return out[:limit] if limit is not None else out


def urllib_transport(url: str, body: bytes, headers: Mapping[str, str], timeout: float) -> bytes:
    req = urllib.request.Request(url, data=body, headers=dict(headers), method="POST")
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.read()
    except urllib.error.HTTPError as exc:
        raise TransportError(f"HTTP {exc.code} from generator endpoint") from exc
    except (urllib.error.URLError, TimeoutError, OSError) as exc:
        raise TransportError(f"cannot reach generator endpoint: {exc}") from exc


class HttpGenerator(GeneratorInterface):
    """Chat-completion style endpoint: system message = static prefix, user message = dynamic suffix."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str | None = None,
        timeout: float = 60.0,
        temperature: float = 0.7,
        transport: Transport | None = None,
    ) -> None:
        super().__init__()
        if not endpoint:
            raise GeneratorError("endpoint URL is required")
        key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        if not key:
            raise GeneratorError(f"set {API_KEY_ENV} to use the HTTP generator")
        self.endpoint = endpoint
        self.model_id = model
        self._api_key = key
        self.timeout = timeout
        self.temperature = temperature
        self.transport = transport or urllib_transport

    def request_payload(self, bundle: PromptBundle) -> dict[str, Any]:
        return {
            "model": self.model_id,
            "temperature": self.temperature,
            "messages": [
                {"role": "system", "content": bundle.static_prefix},
                {"role": "user", "content": bundle.dynamic_suffix},
            ],
        }

    def generate(self, bundle: PromptBundle) -> list[RawCandidate]:
        payload = self.request_payload(bundle)
        headers = {"Content-Type": "application/json", "Authorization": f"Bearer {self._api_key}"}
        started = time.time()
        raw = self.transport(self.endpoint, json.dumps(payload).encode("utf-8"), headers, self.timeout)
        text = raw.decode("utf-8", errors="replace")
        snapshot: dict[str, Any] = {
            "model": self.model_id,
            "endpoint": self.endpoint,
            "request": payload,
            "response": text,
            "started": started,
            "finished": time.time(),
        }
        self.last_exchange = snapshot
        try:
            body = json.loads(text)
            content = body["choices"][0]["message"]["content"]
            snapshot["usage"] = body.get("usage") or {}
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            log.warning("generator response has no usable content (%s); empty batch", exc)
            snapshot["error"] = f"unusable response structure: {exc}"
            return []
        if not isinstance(content, str):
            snapshot["error"] = "message content is not text"
            return []
        found = extract_candidates(content, bundle.batch_size)
        if not found:
            log.warning("generator response contains no fenced formula block; empty batch")
            snapshot["error"] = "no fenced block"
        return found


def llm_generate(bundle: PromptBundle, endpoint: str, model: str, **kwargs: Any) -> list[RawCandidate]:
    return HttpGenerator(endpoint, model, **kwargs).generate(bundle)


def mock_generate(bundle: PromptBundle, seed: int = 0, **kwargs: Any) -> list[RawCandidate]:
    return MockGenerator(seed=seed, **kwargs).generate(bundle)


__all__ = [
    "API_KEY_ENV",
    "FAMILY_SAMPLERS",
    "GeneratorError",
    "GeneratorExhausted",
    "GeneratorInterface",
    "HttpGenerator",
    "MockGenerator",
    "RawCandidate",
    "TransportError",
    "extract_candidates",
    "generate_with_retry",
    "llm_generate",
    "mock_generate",
    "random_tree",
]
