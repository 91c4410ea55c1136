"""Generation rounds: prompt assembly, candidate generators and the mining loop."""

from factor_forge.mining.generators import (
    API_KEY_ENV,
    GeneratorError,
    GeneratorExhausted,
    GeneratorInterface,
    HttpGenerator,
    MockGenerator,
    RawCandidate,
    TransportError,
    extract_candidates,
    generate_with_retry,
    llm_generate,
    mock_generate,
)
from factor_forge.mining.loop import (
    CandidateOutcome,
    Outcome,
    RoundResult,
    RunState,
    RunSummary,
    make_generator,
    process_candidate,
    resume_run,
    run_mining,
    run_round,
)
from factor_forge.mining.prompts import (
    DIVERSITY_REQUIREMENT,
    PromptBundle,
    RoundFeedback,
    build_prompt,
    compile_feedback,
)

__all__ = [
    "API_KEY_ENV",
    "DIVERSITY_REQUIREMENT",
    "CandidateOutcome",
    "GeneratorError",
    "GeneratorExhausted",
    "GeneratorInterface",
    "HttpGenerator",
    "MockGenerator",
    "Outcome",
    "PromptBundle",
    "RawCandidate",
    "RoundFeedback",
    "RoundResult",
    "RunState",
    "RunSummary",
    "TransportError",
    "build_prompt",
    "compile_feedback",
    "extract_candidates",
    "generate_with_retry",
    "llm_generate",
    "make_generator",
    "mock_generate",
    "process_candidate",
    "resume_run",
    "run_mining",
    "run_round",
]
