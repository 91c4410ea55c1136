"""Shared builders for tests."""

from __future__ import annotations

import textwrap

import numpy as np

from factor_forge.panel import AlignedPair, FactorMatrix, LabelMatrix


def random_pair(rng: np.random.Generator, dates: int = 30, assets: int = 20, missing: float = 0.1, ties: bool = False):
    """Random aligned pair with scattered missing cells and optional tied factor values."""
    f = rng.normal(size=(dates, assets))
    if ties:
        f = np.round(f * 2) / 2
    y = 0.3 * f + rng.normal(size=(dates, assets))
    f[rng.random((dates, assets)) < missing] = np.nan
    y[rng.random((dates, assets)) < missing] = np.nan
    both = ~np.isnan(f) & ~np.isnan(y)
    f = np.where(both, f, np.nan)
    y = np.where(both, y, np.nan)
    cal = [f"2024-{1 + d // 28:02d}-{1 + d % 28:02d}" for d in range(dates)]
    ids = [f"A{j:03d}" for j in range(assets)]
    return AlignedPair(
        factor=FactorMatrix(values=f, calendar=cal, assets=ids),
        labels=LabelMatrix(values=y, calendar=cal, assets=ids),
    )


class NetworkDenied(RuntimeError):
    pass


def deny_network(monkeypatch) -> list:
    """Make every outbound connection attempt fail loudly; returns the list of attempts."""
    import socket

    attempts = []

    def refuse(*args, **kwargs):
        attempts.append(args)
        raise NetworkDenied("network access attempted")

    monkeypatch.setattr(socket.socket, "connect", refuse)
    monkeypatch.setattr(socket.socket, "connect_ex", refuse)
    monkeypatch.setattr(socket, "create_connection", refuse)
    monkeypatch.setattr(socket, "getaddrinfo", refuse)
    return attempts


def positive_series(rng: np.random.Generator, t: int = 40, n: int = 4, missing: float = 0.05) -> np.ndarray:
    x = np.exp(rng.normal(0, 0.5, size=(t, n)))
    x[rng.random((t, n)) < missing] = np.nan
    return x


def perturbation_pairs(count: int, seed: int):
    """Yield (x, y, cut, window): y equals x up to row ``cut`` and is scrambled after it."""
    rng = np.random.default_rng(seed)
    for _ in range(count):
        t = int(rng.integers(5, 60))
        n = int(rng.integers(1, 6))
        x = positive_series(rng, t, n, missing=float(rng.choice([0.0, 0.1])))
        cut = int(rng.integers(0, t - 1))
        y = x.copy()
        noise = np.exp(rng.normal(0, 2.0, size=(t - cut - 1, n)))
        noise[rng.random(noise.shape) < 0.1] = np.nan
        y[cut + 1 :] = noise
        w = int(rng.integers(1, 30))
        yield x, y, cut, w


def same_prefix(a: np.ndarray, b: np.ndarray, cut: int) -> bool:
    return np.array_equal(a[: cut + 1], b[: cut + 1], equal_nan=True)


# Runs a 3-round mock mining session (seed 11, 40x150 synthetic panel) and hard-exits
# either after round 2 is checkpointed ("between") or inside round 2 ("mid").
KILL_SCRIPT = textwrap.dedent(
    """
    import os, sys
    from factor_forge.config import RunConfig
    from factor_forge.mining import MockGenerator, run_mining
    from factor_forge.synth import synth_panel

    mode, root = sys.argv[1], sys.argv[2]
    config = RunConfig(rounds=3, batch_size=20, top_k=5, family_cap=2, seed=11,
                       duplicate_rate=0.15, output_root=root)

    class Dying(MockGenerator):
        def generate(self, bundle):
            if mode == "mid" and bundle.round_index == 2 and bundle.batch == "feedback":
                os._exit(9)
            return super().generate(bundle)

    def on_round(result):
        if mode == "between" and result.round_index == 2:
            os._exit(9)

    gen = Dying(seed=11, malformed_rate=config.malformed_rate, duplicate_rate=config.duplicate_rate)
    run_mining(config, panel=synth_panel(40, 150, seed=3), generator=gen, on_round=on_round)
    """
)
