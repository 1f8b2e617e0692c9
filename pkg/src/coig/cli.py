"""Operator command line: plan, run, intervene, evaluate and benchmark
without the service or UI. Data goes to stdout (JSON under --json),
diagnostics to stderr. Exit codes: 0 success, 1 operation failure, 2 usage."""

from __future__ import annotations

import json
import os
import sys

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import click

from .backends import BackendConfig, BackendProfile, mock_profile
from .bench import (
    ECVocab,
    generate_ec_prompts,
    prompts_from_jsonl,
    prompts_to_jsonl,
    run_ec_benchmark,
    run_qa_benchmark,
)
from .errors import CoigError, ConfigError
from .executor import Executor
from .metrics import PerturbationSpec, build_probes, eval_causal, eval_readability, make_perturbation
from .planner import PlanStep, decompose, load_plan_file, serialize_plan
from .runs import Intervention
from .store import RunStore

CONFIG_ENV = "COIG_CONFIG"
STORE_ENV = "COIG_STORE"


@dataclass
class CliConfig:
    store_root: Path
    profiles: dict[str, BackendProfile]
    default_profile: str = "mock"
    seed: int = 0

    def __post_init__(self):
        if self.default_profile not in self.profiles:
            raise ConfigError(f"default profile {self.default_profile!r} not configured")

    def profile(self, name: Optional[str]) -> BackendProfile:
        name = name or self.default_profile
        if name not in self.profiles:
            raise ConfigError(f"no backend profile {name!r}")
        return self.profiles[name]

    def store(self) -> RunStore:
        return RunStore(self.store_root)


def _profile_from_toml(name: str, raw: dict) -> BackendProfile:
    def cfg(role: str) -> BackendConfig:
        if role not in raw:
            raise ConfigError(f"profile {name!r} is missing the {role!r} backend")
        return BackendConfig.from_dict(raw[role])

    return BackendProfile(name=name, llm=cfg("llm"), t2i=cfg("t2i"), mllm=cfg("mllm"))


def load_config(explicit_path: Optional[str]) -> CliConfig:
    """Discovery order: --config > $COIG_CONFIG > ./coig.toml > defaults."""
    candidates = [p for p in (explicit_path, os.environ.get(CONFIG_ENV)) if p]
    path: Optional[Path] = None
    if candidates:
        path = Path(candidates[0])
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
    elif Path("coig.toml").exists():
        path = Path("coig.toml")

    raw: dict = {}
    if path is not None:
        try:
            raw = tomllib.loads(path.read_text())
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"unreadable config {path}: {exc}") from exc

    profiles = {"mock": mock_profile()}
    for name, body in raw.get("profiles", {}).items():
        if name == "mock":
            continue
        profiles[name] = _profile_from_toml(name, body)

    store_root = raw.get("store_root") or os.environ.get(STORE_ENV) or "coig-store"
    return CliConfig(
        store_root=Path(store_root),
        profiles=profiles,
        default_profile=raw.get("default_profile", "mock"),
        seed=int(raw.get("seed", 0)),
    )


def _emit(ctx, doc: dict, human: str) -> None:
    if ctx.obj["json"]:
        click.echo(json.dumps(doc, sort_keys=True))
    else:
        click.echo(human)


@click.group()
@click.option("--config", "config_path", default=None, help="Path to the TOML config file.")
@click.option("--json", "as_json", is_flag=True, help="Emit one JSON document per command.")
@click.pass_context
def cli(ctx, config_path, as_json):
    ctx.ensure_object(dict)
    ctx.obj["config"] = load_config(config_path)
    ctx.obj["json"] = as_json


@cli.command("plan")
@click.argument("prompt")
@click.option("--profile", default=None)
@click.option("--out", type=click.Path(), default=None, help="Write the plan file here.")
@click.pass_context
def plan_cmd(ctx, prompt, profile, out):
    """Decompose PROMPT into a step plan."""
    cfg: CliConfig = ctx.obj["config"]
    plan = decompose(prompt, cfg.profile(profile).llm)
    text = serialize_plan(plan)
    if out:
        Path(out).write_text(text)
    _emit(ctx, plan.to_dict(), text)


@cli.command("run")
@click.argument("target")
@click.option("--profile", default=None)
@click.option("--step", "step_mode", is_flag=True, help="Pause after every step.")
@click.pass_context
def run_cmd(ctx, target, profile, step_mode):
    """Execute a plan file or decompose-and-run a raw prompt."""
    cfg: CliConfig = ctx.obj["config"]
    prof = cfg.profile(profile)
    if Path(target).exists():
        plan = load_plan_file(target)
    else:
        plan = decompose(target, prof.llm)
    executor = Executor(store=cfg.store(), profile=prof)
    run = executor.start_run(plan, step_mode=step_mode)
    if not step_mode:
        run = executor.run_to_completion(run)
    _emit(ctx, {"run_id": run.run_id, "status": run.status}, f"{run.run_id} {run.status}")


@cli.command("resume")
@click.argument("run_id")
@click.pass_context
def resume_cmd(ctx, run_id):
    """Resume a paused run."""
    cfg: CliConfig = ctx.obj["config"]
    store = cfg.store()
    run = store.load_run(run_id)
    executor = Executor(store=store, profile=cfg.profile(run.backend_profile))
    run = executor.resume(run)
    _emit(ctx, {"run_id": run.run_id, "status": run.status}, f"{run.run_id} {run.status}")


@cli.command("intervene")
@click.argument("run_id")
@click.option("--kind", required=True,
              type=click.Choice(["edit_step", "insert_step", "delete_step", "rerun_from"]))
@click.option("--at", "at_index", required=True, type=int)
@click.option("--action", default=None, help="Step action text for edit/insert.")
@click.option("--step-kind", default="correction", help="Kind of the edited/inserted step.")
@click.option("--target", default=None, help="Target entity of the edited/inserted step.")
@click.pass_context
def intervene_cmd(ctx, run_id, kind, at_index, action, step_kind, target):
    """Apply one intervention to a paused run."""
    cfg: CliConfig = ctx.obj["config"]
    store = cfg.store()
    run = store.load_run(run_id)
    payload = None
    if kind in ("edit_step", "insert_step"):
        if not action:
            raise click.UsageError("--action is required for edit/insert interventions")
        payload = PlanStep(
            index=at_index, kind=step_kind, final_goal=run.plan.original_prompt,
            step_action=action, target_entity=target,
        )
    executor = Executor(store=store, profile=cfg.profile(run.backend_profile))
    run = executor.apply_intervention(run, Intervention(kind=kind, at_index=at_index, payload=payload))
    _emit(ctx, {"run_id": run.run_id, "status": run.status, "steps": len(run.plan.steps)},
          f"{run.run_id} {run.status} ({len(run.plan.steps)} plan steps)")


@cli.group("eval")
def eval_group():
    """Monitorability metrics over stored runs."""


@eval_group.command("readability")
@click.argument("run_id")
@click.pass_context
def eval_readability_cmd(ctx, run_id):
    cfg: CliConfig = ctx.obj["config"]
    store = cfg.store()
    run = store.load_run(run_id)
    profile = cfg.profile(run.backend_profile)
    report = eval_readability(store, run, build_probes(run.plan), profile.mllm)
    store.save_report(run_id, "readability", report.to_dict(), report.to_csv())
    lines = [
        f"{kind}: before {agg['before'] * 100:.2f}% after {agg['after'] * 100:.2f}%"
        for kind, agg in report.aggregate().items()
    ]
    _emit(ctx, report.to_dict(), "\n".join(lines) or "no probes")


@eval_group.command("causal")
@click.argument("run_id")
@click.option("--step", "step_index", required=True, type=int)
@click.option("--to", "perturbed_value", required=True)
@click.option("--from", "original_value", default=None,
              help="Original value; inferred from the step action when omitted.")
@click.pass_context
def eval_causal_cmd(ctx, run_id, step_index, perturbed_value, original_value):
    cfg: CliConfig = ctx.obj["config"]
    store = cfg.store()
    run = store.load_run(run_id)
    profile = cfg.profile(run.backend_profile)
    if original_value is None:
        original_value = _infer_color(run, step_index)
    spec = PerturbationSpec(
        step_index=step_index, original_value=original_value, perturbed_value=perturbed_value,
    )
    pert_plan = make_perturbation(run.plan, spec)
    executor = Executor(store=store, profile=profile)
    pert_run = executor.run_to_completion(executor.start_run(pert_plan))
    report = eval_causal(store, run, pert_run, spec, profile.mllm)
    doc = report.to_dict()
    doc["perturbed_run_id"] = pert_run.run_id
    store.save_report(run_id, "causal", doc, report.to_csv())
    _emit(ctx, doc,
          f"unperturbed final {report.score_unperturbed_final * 100:.2f}% | "
          f"at step {report.score_at_step * 100:.2f}% | "
          f"perturbed final {report.score_perturbed_final * 100:.2f}%")


def _infer_color(run, step_index: int) -> str:
    import re

    if 1 <= step_index <= len(run.plan.steps):
        m = re.search(r"color=([\w-]+)", run.plan.steps[step_index - 1].step_action)
        if m:
            return m.group(1)
    raise CoigError(f"step {step_index} carries no color attribute")


@cli.group("bench")
def bench_group():
    """Benchmark generation and batch scoring."""


@bench_group.command("ec-gen")
@click.option("--count", default=300, type=int, show_default=True)
@click.option("--seed", default=None, type=int, help="Defaults to the configured seed.")
@click.option("--out", type=click.Path(), default="ec_prompts.jsonl", show_default=True)
@click.pass_context
def ec_gen_cmd(ctx, count, seed, out):
    """Procedurally generate the entity-collapse prompt file."""
    cfg: CliConfig = ctx.obj["config"]
    seed = cfg.seed if seed is None else seed
    prompts = generate_ec_prompts(ECVocab.default(), count, seed)
    Path(out).write_text(prompts_to_jsonl(prompts))
    _emit(ctx, {"count": len(prompts), "seed": seed, "out": out},
          f"wrote {len(prompts)} prompts to {out}")


@bench_group.command("run")
@click.option("--suite", required=True, type=click.Choice(["ec", "qa"]))
@click.option("--pipeline", required=True, type=click.Choice(["coig", "single_pass"]))
@click.option("--prompts", "prompts_path", required=True, type=click.Path(exists=True))
@click.option("--benchmark", default="compbench_style",
              type=click.Choice(["geneval_style", "compbench_style", "conceptmix_style"]),
              help="QA record style (qa suite only).")
@click.option("--profile", default=None)
@click.option("--out", type=click.Path(), default=None, help="Write the scorecard JSON here.")
@click.pass_context
def bench_run_cmd(ctx, suite, pipeline, prompts_path, benchmark, profile, out):
    """Score a prompt file end-to-end through the chosen pipeline."""
    cfg: CliConfig = ctx.obj["config"]
    prof = cfg.profile(profile)
    store = cfg.store()
    text = Path(prompts_path).read_text()
    if suite == "ec":
        card = run_ec_benchmark(prompts_from_jsonl(text), pipeline, prof, store)
        human = "\n".join(
            f"{row[0]} (out of {row[1]}): {row[2]:.3f}"
            for row in [
                ("entity_count", 1, card.mean("entity_count")),
                ("attribute_binding", 4, card.mean("attribute_binding")),
                ("interaction", 2, card.mean("interaction")),
                ("total", 7, card.mean("total")),
            ]
        )
    else:
        records = [json.loads(line) for line in text.splitlines() if line.strip()]
        card = run_qa_benchmark(records, benchmark, pipeline, prof, store)
        human = "\n".join(
            [f"{g}: {v * 100:.2f}%" for g, v in card.by_group().items()]
            + [f"overall: {card.overall() * 100:.2f}%"]
        )
    doc = card.to_dict()
    if out:
        Path(out).write_text(json.dumps(doc, sort_keys=True, indent=2))
    _emit(ctx, doc, human)


@cli.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8400, type=int, show_default=True)
@click.pass_context
def serve_cmd(ctx, host, port):
    """Start the HTTP service."""
    import uvicorn

    from .service import create_app

    cfg: CliConfig = ctx.obj["config"]
    app = create_app(cfg.store(), cfg.profiles, cfg.default_profile)
    uvicorn.run(app, host=host, port=port, log_level="warning")


def main(argv: Optional[list[str]] = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False, obj={})
        return 0
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 2
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.exceptions.Abort:
        return 1
    except CoigError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
