"""Monitorable chain-of-image generation: plan, execute, intervene, measure."""

from .backends import BackendConfig, BackendProfile, mock_profile
from .bench import ECPrompt, ECScore, ECVocab, generate_ec_prompts, score_ec
from .census import CensusEntry, CensusReport
from .executor import Executor, render_prompt
from .metrics import PerturbationSpec, build_probes, eval_causal, eval_readability, make_perturbation
from .planner import ChainPlan, PlanStep, decompose, parse_planner_output, validate_plan
from .runs import ChainRun, Intervention, StepRecord
from .scene import ImageArtifact, SceneDocument, SceneEntity
from .store import RunStore

__all__ = [
    "BackendConfig", "BackendProfile", "mock_profile",
    "ECPrompt", "ECScore", "ECVocab", "generate_ec_prompts", "score_ec",
    "CensusEntry", "CensusReport",
    "Executor", "render_prompt",
    "PerturbationSpec", "build_probes", "eval_causal", "eval_readability", "make_perturbation",
    "ChainPlan", "PlanStep", "decompose", "parse_planner_output", "validate_plan",
    "ChainRun", "Intervention", "StepRecord",
    "ImageArtifact", "SceneDocument", "SceneEntity",
    "RunStore",
]

__version__ = "0.1.0"
