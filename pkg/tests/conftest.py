from __future__ import annotations

import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from factor_forge.config import RunConfig
from factor_forge.corpus import load_corpus, negative_templates
from factor_forge.dsl import SandboxPolicy, default_registry
from factor_forge.mining import RunState
from factor_forge.panel import forward_returns
from factor_forge.scoring import ScoreConfig
from factor_forge.synth import synth_panel

SMALL_ASSETS = 40
SMALL_DATES = 150


@pytest.fixture(scope="session")
def registry():
    return default_registry()


@pytest.fixture(scope="session")
def corpus():
    return load_corpus()


@pytest.fixture(scope="session")
def small_panel():
    return synth_panel(SMALL_ASSETS, SMALL_DATES, seed=3)


@pytest.fixture
def make_state(registry, corpus, small_panel):
    def factory(panel=None, min_assets=30, **kw):
        panel = panel or small_panel
        return RunState(
            panel=panel,
            labels=forward_returns(panel, 1),
            registry=registry,
            score_config=ScoreConfig(),
            negatives=negative_templates(corpus, registry),
            policy=SandboxPolicy(),
            min_assets=min_assets,
            **kw,
        )

    return factory


@pytest.fixture
def mine_config(tmp_path):
    return RunConfig(
        rounds=3,
        batch_size=20,
        top_k=5,
        family_cap=2,
        seed=11,
        duplicate_rate=0.15,
        output_root=str(tmp_path / "runs"),
    )


settings.register_profile("repro", derandomize=True, deadline=None)
settings.load_profile("repro")
