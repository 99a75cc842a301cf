"""Command-line entry points for the trace-generation and evaluation pipelines.

Exit codes: 0 success, 2 configuration error, 3 input parse error, 4 backend
failure, 5 partial failure above the tolerated threshold.
"""

from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path
from typing import Optional

import click

from . import __version__
from .baselines import (
    build_kp_dataset,
    perturbed_answer,
    pick_aux_pair,
    sc_decide,
    write_kp_dataset,
)
from .builder import BuilderConfig, ModelRole, build_corpus
from .core import trace_from_record
from .dataset_io import RunConfig, load_config, load_questions
from .errors import (
    ConfigError,
    DuplicateId,
    GatewayError,
    ParseError,
    VerifyForgeError,
)
from .gateway import Backend, HTTPBackend, ResponseCache
from .masking import MaskRegime, export_sft
from .metrics import OutcomeLabel, classify_response, eval_report, pareto_points
from .mockllm import MockBackend
from .prompts import template_manifest

EXIT_CONFIG = 2
EXIT_INPUT = 3
EXIT_BACKEND = 4
EXIT_PARTIAL = 5

PARTIAL_FAILURE_THRESHOLD = 0.05


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_personas(path: Optional[str]) -> Optional[dict]:
    if path is None:
        return None
    return json.loads(Path(path).read_text(encoding="utf-8"))


class Runtime:
    """Shared state resolved from the global options and the run config."""

    def __init__(self, config_path: str, seed, parallelism, mock, personas, dry_run):
        self.config = load_config(config_path)
        self.config_path = Path(config_path)
        if seed is not None:
            self.config.seed = seed
        if parallelism is not None:
            self.config.parallelism = parallelism
        self.mock = mock
        self.dry_run = dry_run
        self._backends: dict[str, Backend] = {}
        self._personas = _load_personas(personas)
        self.cache = (
            ResponseCache(self.config.cache_dir) if self.config.cache_dir else None
        )

    def backend(self, name: str) -> Backend:
        if name not in self._backends:
            if self.mock or name == "mock":
                self._backends[name] = MockBackend(
                    seed=self.config.seed, personas=self._personas
                )
            else:
                spec = self.config.backends[name]
                self._backends[name] = HTTPBackend(
                    name=name,
                    endpoint=str(spec["endpoint"]),
                    key_env=self.config.key_env(name),
                )
        return self._backends[name]

    def role(self, name: str) -> ModelRole:
        binding = self.config.roles[name]
        return ModelRole(backend=self.backend(binding.backend), model_id=binding.model)

    def write_manifest(
        self, manifest_path: Path, inputs: dict[str, Path], outputs: dict[str, Path]
    ) -> None:
        manifest_path.parent.mkdir(parents=True, exist_ok=True)
        manifest = {
            "tool_version": __version__,
            "seed": self.config.seed,
            "parallelism": self.config.parallelism,
            "mock": self.mock,
            "config_snapshot": self.config_path.read_text(encoding="utf-8"),
            "template_checksums": {
                tid: entry["sha256"]
                for tid, entry in template_manifest()["templates"].items()
            },
            "input_checksums": {
                name: hashlib.sha256(path.read_bytes()).hexdigest()
                for name, path in inputs.items()
            },
            "output_checksums": {
                name: hashlib.sha256(path.read_bytes()).hexdigest()
                for name, path in outputs.items()
                if path.exists()
            },
        }
        manifest_path.write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


def _runtime(ctx: click.Context, config: str) -> Runtime:
    opts = ctx.obj
    try:
        return Runtime(
            config,
            opts["seed"],
            opts["parallelism"],
            opts["mock"],
            opts["personas"],
            opts["dry_run"],
        )
    except ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))
        raise AssertionError  # unreachable


def _questions(path: str, fmt: str = "auto"):
    try:
        return load_questions(path, fmt)
    except (ParseError, DuplicateId) as exc:
        _fail(EXIT_INPUT, f"{path}: {exc}")
        raise AssertionError  # unreachable


@click.group()
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--parallelism", type=int, default=None, help="Max requests in flight.")
@click.option("--dry-run", is_flag=True, help="Validate inputs and print the plan; no model calls.")
@click.option("--mock", is_flag=True, help="Route every role to the deterministic mock backend.")
@click.option(
    "--personas",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="JSON persona table for the mock backend.",
)
@click.version_option(version=__version__)
@click.pass_context
def main(ctx, seed, parallelism, dry_run, mock, personas):
    """Build verification traces, loss masks, and abstention baselines."""
    ctx.obj = {
        "seed": seed,
        "parallelism": parallelism,
        "dry_run": dry_run,
        "mock": mock,
        "personas": personas,
    }


@main.command("generate-traces")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--questions", "questions_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", default="auto", type=click.Choice(["auto", "native", "triviaqa"]))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.pass_context
def generate_traces(ctx, config_path, questions_path, fmt, out_dir):
    """Run the full trace pipeline over a question set."""
    rt = _runtime(ctx, config_path)
    questions = _questions(questions_path, fmt)
    out = Path(out_dir)

    if rt.dry_run:
        click.echo(
            f"dry run: {len(questions)} questions, ~{7 * len(questions)} model calls, "
            f"seed={rt.config.seed}, parallelism={rt.config.parallelism}"
        )
        return

    cfg = BuilderConfig(
        self_role=rt.role("self"),
        teacher_role=rt.role("teacher"),
        judge_roles=(rt.role("judge_1"), rt.role("judge_2")),
        strategy_policy=rt.config.strategy_policy,
        parallelism=rt.config.parallelism,
        run_seed=rt.config.seed,
        cache=rt.cache,
        allow_self_teacher=rt.mock,
    )
    try:
        stats = build_corpus(questions, cfg, out)
    except GatewayError as exc:
        _fail(EXIT_BACKEND, str(exc))
        raise AssertionError
    rt.write_manifest(
        out / "run_manifest.json",
        {"questions": Path(questions_path)},
        {
            "traces.jsonl": out / "traces.jsonl",
            "stats.json": out / "stats.json",
            "journal.jsonl": out / "journal.jsonl",
            "failures.jsonl": out / "failures.jsonl",
        },
    )
    click.echo(json.dumps(stats.to_dict(), indent=2))
    if stats.failed / stats.total > PARTIAL_FAILURE_THRESHOLD:
        _fail(EXIT_PARTIAL, f"{stats.failed}/{stats.total} questions failed")


@main.command("mask")
@click.option("--traces", "traces_path", required=True, type=click.Path(exists=True))
@click.option(
    "--regimes",
    default="NM,MM,SM",
    help="Comma-separated subset of NM,MM,SM.",
)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def mask_cmd(traces_path, regimes, out_dir):
    """Annotate a trace corpus with loss masks and export training files."""
    try:
        regime_list = [MaskRegime(r.strip()) for r in regimes.split(",") if r.strip()]
    except ValueError as exc:
        _fail(EXIT_CONFIG, f"bad regime: {exc}")
        raise AssertionError
    traces = []
    for line_no, line in enumerate(
        Path(traces_path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        try:
            traces.append(trace_from_record(json.loads(line)))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            _fail(EXIT_INPUT, f"{traces_path}:{line_no}: {exc}")
    manifest = export_sft(traces, regime_list, Path(out_dir))
    click.echo(json.dumps(manifest, indent=2, sort_keys=True))


@main.command("build-kp")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--questions", "questions_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.pass_context
def build_kp(ctx, config_path, questions_path, out_path):
    """Build a knowledge-probing dataset (answers for known facts, refusals
    otherwise)."""
    rt = _runtime(ctx, config_path)
    questions = _questions(questions_path)
    if rt.dry_run:
        click.echo(f"dry run: {len(questions)} questions, ~{2 * len(questions)} model calls")
        return
    self_role, judge_role = rt.role("self"), rt.role("judge_1")
    try:
        records = build_kp_dataset(
            questions,
            self_role.backend,
            self_role.model_id,
            judge_role.backend,
            judge_role.model_id,
            seed=rt.config.seed,
            cache=rt.cache,
        )
    except GatewayError as exc:
        _fail(EXIT_BACKEND, str(exc))
        raise AssertionError
    write_kp_dataset(records, Path(out_path))
    rt.write_manifest(
        Path(out_path).with_suffix(".manifest.json"),
        {"questions": Path(questions_path)},
        {Path(out_path).name: Path(out_path)},
    )
    kept = sum(1 for r in records if r.probed_label.value == "Correct")
    click.echo(f"wrote {len(records)} records ({kept} answered) to {out_path}")


@main.command("sc-infer")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--questions", "questions_path", required=True, type=click.Path(exists=True))
@click.option("--k", default=4, type=int, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.pass_context
def sc_infer(ctx, config_path, questions_path, k, out_path):
    """Answer with self-consistency voting over k extra samples."""
    rt = _runtime(ctx, config_path)
    questions = _questions(questions_path)
    if rt.dry_run:
        click.echo(
            f"dry run: {len(questions)} questions, ~{(2 * k + 1) * len(questions)} model calls"
        )
        return
    self_role, judge_role = rt.role("self"), rt.role("judge_1")
    with Path(out_path).open("w", encoding="utf-8") as fh:
        for question in questions:
            try:
                result = sc_decide(
                    question,
                    self_role.backend,
                    self_role.model_id,
                    judge_role.backend,
                    judge_role.model_id,
                    k=k,
                    seed=rt.config.seed,
                    cache=rt.cache,
                )
            except GatewayError as exc:
                _fail(EXIT_BACKEND, str(exc))
                raise AssertionError
            fh.write(
                json.dumps(
                    {
                        "question_id": result.question_id,
                        "greedy_answer": result.greedy_answer,
                        "sample_labels": result.sample_labels,
                        "decision": result.decision.value,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    rt.write_manifest(
        Path(out_path).with_suffix(".manifest.json"),
        {"questions": Path(questions_path)},
        {Path(out_path).name: Path(out_path)},
    )
    click.echo(f"wrote {len(questions)} decisions to {out_path}")


VARIANT_TO_MODE = {"pert": "perturb_only", "draft-pert": "draft_plus_perturb"}


@main.command("perturb-infer")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--questions", "questions_path", required=True, type=click.Path(exists=True))
@click.option(
    "--variant",
    default="pert",
    type=click.Choice(sorted(VARIANT_TO_MODE)),
    show_default=True,
)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.pass_context
def perturb_infer(ctx, config_path, questions_path, variant, out_path):
    """Answer each question under a planted distractor Q/A pair."""
    mode = VARIANT_TO_MODE[variant]
    rt = _runtime(ctx, config_path)
    questions = _questions(questions_path)
    if rt.dry_run:
        per = 2 if mode == "draft_plus_perturb" else 1
        click.echo(f"dry run: {len(questions)} questions, ~{per * len(questions)} model calls")
        return
    self_role = rt.role("self")
    with Path(out_path).open("w", encoding="utf-8") as fh:
        for question in questions:
            aux = pick_aux_pair(question, questions, rt.config.seed)
            try:
                draft = None
                if mode == "draft_plus_perturb":
                    from .prompts import render_prompt
                    from .gateway import ChatMessage, GenerationRequest, complete

                    draft = complete(
                        GenerationRequest(
                            model_id=self_role.model_id,
                            messages=(
                                ChatMessage(
                                    "user",
                                    render_prompt("self_answer", {"q": question.question}),
                                ),
                            ),
                            seed=rt.config.seed,
                            role_tag="perturb_draft",
                            item_id=question.id,
                        ),
                        self_role.backend,
                        rt.cache,
                    ).text
                answer = perturbed_answer(
                    question,
                    aux,
                    self_role.backend,
                    self_role.model_id,
                    mode=mode,
                    draft=draft,
                    seed=rt.config.seed,
                    cache=rt.cache,
                )
            except GatewayError as exc:
                _fail(EXIT_BACKEND, str(exc))
                raise AssertionError
            fh.write(
                json.dumps(
                    {
                        "question_id": question.id,
                        "aux_question_id": aux.id,
                        "mode": mode,
                        "response": answer,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    rt.write_manifest(
        Path(out_path).with_suffix(".manifest.json"),
        {"questions": Path(questions_path)},
        {Path(out_path).name: Path(out_path)},
    )
    click.echo(f"wrote {len(questions)} responses to {out_path}")


def _load_responses(path: str) -> dict[str, str]:
    out = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        try:
            data = json.loads(line)
            out[str(data["question_id"])] = str(data["response"])
        except (json.JSONDecodeError, KeyError) as exc:
            _fail(EXIT_INPUT, f"{path}:{line_no}: {exc}")
    return out


@main.command("eval")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--questions", "questions_path", required=True, type=click.Path(exists=True))
@click.option("--base", "base_path", required=True, type=click.Path(exists=True))
@click.option("--treated", "treated_path", required=True, type=click.Path(exists=True))
@click.option("--name", default="treated", show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.pass_context
def eval_cmd(ctx, config_path, questions_path, base_path, treated_path, name, out_path):
    """Judge paired response files and report precision/recall/F1/coverage."""
    rt = _runtime(ctx, config_path)
    questions = {q.id: q for q in _questions(questions_path)}
    base_responses = _load_responses(base_path)
    treated_responses = _load_responses(treated_path)
    if rt.dry_run:
        click.echo(
            f"dry run: judging {len(base_responses)} + {len(treated_responses)} responses"
        )
        return
    judge = rt.role("eval_judge")

    def classify(responses: dict[str, str]) -> dict[str, OutcomeLabel]:
        labeled = {}
        for qid, response in responses.items():
            if qid not in questions:
                _fail(EXIT_INPUT, f"response for unknown question id: {qid}")
            try:
                labeled[qid] = classify_response(
                    questions[qid],
                    response,
                    judge.backend,
                    judge.model_id,
                    cache=rt.cache,
                    seed=rt.config.seed,
                )
            except GatewayError as exc:
                _fail(EXIT_BACKEND, str(exc))
                raise AssertionError
        return labeled

    try:
        report = eval_report(classify(base_responses), classify(treated_responses), name=name)
    except VerifyForgeError as exc:
        _fail(EXIT_INPUT, str(exc))
        raise AssertionError
    Path(out_path).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    rt.write_manifest(
        Path(out_path).with_suffix(".manifest.json"),
        {
            "questions": Path(questions_path),
            "base": Path(base_path),
            "treated": Path(treated_path),
        },
        {Path(out_path).name: Path(out_path)},
    )
    click.echo(
        f"{name}: P={report['precision']:.1f} R={report['recall']:.1f} "
        f"F1={report['f1']:.1f} Cov={report['coverage']:.1f}"
    )


@main.command("report")
@click.argument("reports", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False))
def report_cmd(reports, out_path):
    """Combine eval reports into a coverage/precision frontier table."""
    loaded = []
    for path in reports:
        try:
            loaded.append(json.loads(Path(path).read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            _fail(EXIT_INPUT, f"{path}: {exc}")
    points = pareto_points(loaded)
    if out_path:
        Path(out_path).write_text(json.dumps(points, indent=2) + "\n", encoding="utf-8")
    header = f"{'name':<24} {'Cov':>6} {'P':>6} {'F1':>6}  frontier"
    click.echo(header)
    click.echo("-" * len(header))
    for p in points:
        click.echo(
            f"{p['name']:<24} {p['coverage']:>6.1f} {p['precision']:>6.1f} "
            f"{p['f1']:>6.1f}  {'*' if p['on_frontier'] else ''}"
        )


if __name__ == "__main__":
    main()
