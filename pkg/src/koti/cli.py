"""Command-line surface for scripted experiments.

Subcommands: ``build`` (show one constructed prompt), ``eval`` (run an
evaluation plan), ``tune`` (hyper-parameter random search), ``stats``
(corpus token statistics), ``generate`` (synthetic corpus).  Every command
is deterministic given ``--seed``; reports contain no timestamps, so the
same invocation writes byte-identical output.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .datasets import compute_stats, generate_synthetic, load_dataset, write_dataset
from .errors import KotiError
from .evaluation import SamplingPlan, evaluate, random_search
from .prompts import METHODS, build_prompt
from .scoring import HyperParams, ToyScorer
from .tasks import resolve_task
from .worker_client import WorkerScorer


def _add_common(p: argparse.ArgumentParser, *, data: bool = True) -> None:
    p.add_argument("--task", required=True, help="built-in task name or config file path")
    p.add_argument("--as-printed", action="store_true",
                   help="use the as-distributed keyword variant of the task, if one exists")
    if data:
        p.add_argument("--data", required=True, help="dataset file (.jsonl or .csv)")
    p.add_argument("--scorer", default="toy", help="'toy' or 'worker:<command line>'")
    p.add_argument("--limit", type=int, default=512,
                   help="model input capacity in tokens (toy scorer; also the stats limit)")
    p.add_argument("--seed", type=int, default=0)


def _make_scorer(args, task):
    if args.scorer == "toy":
        return ToyScorer(task, max_input_tokens=args.limit)
    if args.scorer.startswith("worker:"):
        return WorkerScorer(args.scorer[len("worker:"):], task=task)
    raise ValueError(f"unknown scorer {args.scorer!r}; use 'toy' or 'worker:<command>'")


def _render_prompt(prompt, template_len_before: int, template_len_after: int) -> str:
    t0 = prompt.mask_index - template_len_before
    t1 = prompt.mask_index + 1 + template_len_after
    parts = []
    if t0 > 0:
        parts.append(" ".join(prompt.tokens[:t0]))
    parts.append("«" + " ".join(prompt.tokens[t0:t1]) + "»")
    if t1 < len(prompt.tokens):
        parts.append(" ".join(prompt.tokens[t1:]))
    return " ".join(parts)


def cmd_build(args) -> int:
    task = resolve_task(args.task, as_printed=args.as_printed)
    scorer = _make_scorer(args, task)
    dataset = load_dataset(args.data)
    matches = [n for n in dataset if n.id == args.id]
    if not matches:
        raise ValueError(f"unknown note id {args.id!r} in {args.data}")
    prompt = build_prompt(args.method, matches[0], task, scorer)
    before = len(scorer.tokenize(task.template.text_before_mask))
    after = len(scorer.tokenize(task.template.text_after_mask))
    print(f"method: {prompt.method}    fallback: {'yes' if prompt.fallback_used else 'no'}")
    print(f"mask index: {prompt.mask_index}    tokens: {len(prompt.tokens)}")
    rec = prompt.truncation
    print(f"budget: {rec.budget}    removed head(a): {rec.removed_head_a}    "
          f"removed tail(b): {rec.removed_tail_b}")
    print("prompt (template in «»):")
    print(_render_prompt(prompt, before, after))
    return 0


def cmd_eval(args) -> int:
    task = resolve_task(args.task, as_printed=args.as_printed)
    scorer = _make_scorer(args, task)
    dataset = load_dataset(args.data)
    plan = SamplingPlan.parse(args.plan, runs=args.runs, seed=args.seed)
    hp = None
    if args.lr is not None or args.batch_size is not None or args.epochs is not None:
        hp = HyperParams(
            learning_rate=args.lr if args.lr is not None else 2e-5,
            batch_size=args.batch_size if args.batch_size is not None else 1,
            epochs=args.epochs if args.epochs is not None else 5,
        )
    report = evaluate(task, dataset, args.method, scorer, plan, hp,
                      binary_macro=args.binary_macro)
    payload = report.to_json()
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
        mean = "n/a" if report.mean_primary is None else f"{report.mean_primary:.4f}"
        err = "n/a" if report.stderr_primary is None else f"{report.stderr_primary:.4f}"
        print(f"task={task.name} method={args.method} plan={args.plan} "
              f"runs={plan.runs} {report.primary_metric_name}={mean}±{err} "
              f"fallback={report.fallback_rate:.3f} partial={report.partial}")
        print(f"report written to {args.out}")
    else:
        sys.stdout.write(payload)
    return 0


def cmd_tune(args) -> int:
    task = resolve_task(args.task, as_printed=args.as_printed)
    scorer = _make_scorer(args, task)
    dataset = load_dataset(args.data)
    plan = SamplingPlan.parse(args.plan, runs=args.runs, seed=args.seed)
    result = random_search(task, dataset, args.method, scorer, plan,
                           trials=args.trials, seed=args.seed,
                           binary_macro=args.binary_macro)
    for tr in result.trials:
        hpd = tr.hyperparams
        mean = "n/a" if tr.mean_primary is None else f"{tr.mean_primary:.4f}"
        print(f"trial {tr.trial_index}: lr={hpd.learning_rate:.3e} "
              f"batch={hpd.batch_size} epochs={hpd.epochs} mean={mean}"
              f"{' (partial)' if tr.partial else ''}")
    best = result.best
    print(f"best: lr={best.learning_rate:.3e} batch={best.batch_size} epochs={best.epochs}")
    if args.out:
        payload = {
            "best": vars(best),
            "trials": [tr.to_dict() for tr in result.trials],
        }
        Path(args.out).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return 0


def cmd_stats(args) -> int:
    task = resolve_task(args.task, as_printed=args.as_printed)
    scorer = _make_scorer(args, task)
    dataset = load_dataset(args.data)
    stats = compute_stats(dataset, task, scorer, limit=args.limit)
    print(f"notes: {len(dataset)}")
    print(f"mean tokens: {stats.mean_tokens:.2f}")
    print(f"sd tokens (population): {stats.sd_tokens:.2f}")
    print(f"proportion over {args.limit}: {stats.proportion_over_limit:.3f}")
    print(f"mean chunk runs: {stats.mean_chunk_runs:.2f}")
    print(f"keyword hit rate: {stats.keyword_hit_rate:.3f}")
    if args.out:
        payload = {"notes": len(dataset), "limit": args.limit, **vars(stats)}
        Path(args.out).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return 0


def _parse_counts(text: str) -> dict[str, int]:
    counts = {}
    for part in text.split(","):
        name, sep, value = part.partition("=")
        if not sep or not value.strip().lstrip("-").isdigit():
            raise ValueError(f"bad counts syntax {text!r}; expected Class=N,Class=N,...")
        counts[name.strip()] = int(value)
    return counts


def _default_counts(task) -> dict[str, int]:
    # mirrors a three-way screening distribution (34/52/64) when the task
    # has recognizably named classes; otherwise counts must be explicit
    wanted = {"yes": 34, "no": 52, "unknown": 64}
    counts = {}
    for cls in task.classes:
        if cls.lower() in wanted:
            counts[cls] = wanted[cls.lower()]
    if len(counts) != len(wanted):
        raise ValueError(
            f"task {task.name!r} has no default counts; pass --counts Class=N,..."
        )
    return counts


def cmd_generate(args) -> int:
    task = resolve_task(args.task, as_printed=args.as_printed)
    counts = _parse_counts(args.counts) if args.counts else _default_counts(task)
    notes = generate_synthetic(
        task,
        counts,
        note_tokens=args.length,
        salient_depth=args.depth,
        seed=args.seed,
        contrary_rate=args.contrary_rate,
        contrary_depth=args.contrary_depth,
    )
    write_dataset(notes, args.out)
    print(f"wrote {len(notes)} notes to {args.out}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="koti",
        description="Keyword-optimized template insertion toolkit for masked-LM "
                    "classification of long clinical notes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build and print one prompt")
    _add_common(p)
    p.add_argument("--id", required=True, help="note id to build")
    p.add_argument("--method", required=True, choices=METHODS)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("eval", help="run an evaluation plan")
    _add_common(p)
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--plan", required=True, help="balanced:<k> or random:<n>")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--out", help="report path (default: JSON to stdout)")
    p.add_argument("--lr", type=float, help="training learning rate")
    p.add_argument("--batch-size", type=int, help="training batch size")
    p.add_argument("--epochs", type=int, help="training epochs")
    p.add_argument("--binary-macro", action="store_true",
                   help="report macro-F1 for 2-class tasks instead of first-class F1")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("tune", help="random search over training hyper-parameters")
    _add_common(p)
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--plan", required=True, help="balanced:<k> or random:<n> (size > 0)")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--out", help="write best + trial table as JSON")
    p.add_argument("--binary-macro", action="store_true")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("stats", help="corpus token statistics")
    _add_common(p)
    p.add_argument("--out", help="write stats as JSON")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("generate", help="generate a synthetic corpus")
    _add_common(p, data=False)
    p.add_argument("--out", required=True, help="output dataset path (.jsonl or .csv)")
    p.add_argument("--counts", help="per-class counts, e.g. Yes=34,No=52,Unknown=64")
    p.add_argument("--length", type=int, default=1000, help="tokens per note")
    p.add_argument("--depth", type=int, default=600,
                   help="token position of the evidence sentence")
    p.add_argument("--contrary-rate", type=float, default=0.0,
                   help="fraction of evidence notes that get an opposite-polarity mention")
    p.add_argument("--contrary-depth", type=int,
                   help="token position of the opposite-polarity mention")
    p.set_defaults(func=cmd_generate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (KotiError, ValueError, OSError) as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
