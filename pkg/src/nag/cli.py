"""Command-line interface: synth, extract, train, generate, check,
eval-next-token, fidelity, smoke.

Exit codes: 0 success, 1 usage error, 2 data error, 3 generation aborted.
All randomness is controlled by --seed (default from NAG_SEED).  An optional
line-oriented configuration file (`key = value`) supplies defaults that
explicit flags override; unknown keys are rejected.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .astio import ParseError, load_ast, pretty_print, save_ast, serialize_ast
from .checks import (
    aggregate_reports,
    failed_parse_report,
    format_aggregate,
    format_report,
    run_checks,
)
from .corpus import (
    SynthSpec,
    drop_evidence,
    extract_examples,
    format_examples_tsv,
    load_context,
    load_corpus,
    save_corpus,
    split_corpus,
    synth_corpus,
    vocabulary_for,
)
from .evidence import parse_evidence
from .fidelity import aggregate_fidelity, fidelity_report, format_fidelity
from .generator import GenConfig, GenerationAborted, beam_search, generate
from .grammar import java_subset_grammar
from .models import (
    LatentHyper,
    load_count_model,
    load_latent_model,
    next_token_eval,
    save_count_model,
    save_latent_model,
    train_count,
    train_latent,
)
from .semantics import annotate, dump_annotations

_CONFIG_KEYS = {
    "seed", "beam", "mask", "top", "format", "registry", "corpus", "model",
    "output", "kind", "alpha", "attribute_blind", "evidence_drop", "dim",
    "lr", "steps", "mc_samples", "jobs", "temperature", "z_mode",
    "max_depth", "max_seq_stmts", "classes",
}


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


def _load_config(path: str) -> dict:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected `key = value`")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown configuration key {key!r}")
        out[key] = value.strip()
    return out


def _default_seed() -> int:
    return int(os.environ.get("NAG_SEED", "0"))


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="nag",
        description="attribute-grammar guided method-body generation")
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument("--jobs", type=int, default=1,
                        help="worker threads for per-item stages")
    sub = parser.add_subparsers(dest="command", required=True)
    subparsers = {}

    p = subparsers["synth"] = sub.add_parser(
        "synth", help="materialize a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--classes", type=int, default=600)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--templates", default="ctor_return,ctor_invoke_return")
    p.add_argument("--invoke-fraction", type=float, default=0.1)

    p = subparsers["check"] = sub.add_parser("check", help="score the static checks for one body")
    p.add_argument("body")
    p.add_argument("--context", required=True)
    p.add_argument("--format", choices=("text", "tsv"), default="tsv")
    p.add_argument("--dump-attrs", action="store_true")

    p = subparsers["extract"] = sub.add_parser("extract", help="dump training examples as TSV")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", help="output file (default stdout)")

    p = subparsers["train"] = sub.add_parser("train", help="train an expansion model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--kind", choices=("count", "latent"), default="count")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--attribute-blind", action="store_true",
                   help="zero all attribute-derived features (ablation)")
    p.add_argument("--evidence-drop", type=float, default=0.0,
                   help="drop each evidence item with this probability")
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--mc-samples", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)

    p = subparsers["generate"] = sub.add_parser("generate", help="generate method bodies")
    p.add_argument("--evidence", required=True)
    p.add_argument("--context", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--beam", type=int, default=10)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--mask", action="store_true")
    p.add_argument("--top", type=int, default=None,
                   help="emit this many candidates (default: beam width)")
    p.add_argument("--sample", action="store_true",
                   help="sample one body instead of beam search")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--z-mode", choices=("sampled", "posteriorMean"),
                   default=None)
    p.add_argument("--max-depth", type=int, default=32)
    p.add_argument("--out", help="write candidates into this directory")

    p = subparsers["eval-next-token"] = sub.add_parser("eval-next-token", help="next-expansion accuracy")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--split", choices=("held", "train", "all"), default="held")
    p.add_argument("--format", choices=("text", "tsv"), default="text")

    p = subparsers["fidelity"] = sub.add_parser("fidelity", help="compare candidates to a reference")
    p.add_argument("--reference", required=True)
    p.add_argument("--candidates", required=True,
                   help="directory of candidate .ast files")
    p.add_argument("--format", choices=("text", "tsv"), default="text")

    p = subparsers["smoke"] = sub.add_parser("smoke", help="end-to-end pipeline over a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--beam", type=int, default=10)
    p.add_argument("--mask", action="store_true")
    p.add_argument("--limit", type=int, default=None,
                   help="held-out contexts to generate for")
    return parser, subparsers


def _load_model(path: str):
    head = Path(path).open("rb").read(32)
    if head.startswith(b"# nag-count-model"):
        return load_count_model(path)
    return load_latent_model(path)


def cmd_synth(args) -> int:
    spec = SynthSpec(
        n_classes=args.classes,
        seed=args.seed if args.seed is not None else _default_seed(),
        templates=tuple(t for t in args.templates.split(",") if t),
        invoke_fraction=args.invoke_fraction,
    )
    records = synth_corpus(spec)
    save_corpus(records, args.out)
    print(f"wrote {len(records)} classes under {args.out}")
    return 0


def cmd_check(args) -> int:
    ctx = load_context(args.context)
    try:
        ast = load_ast(args.body, namespaces=ctx.namespaces)
    except ParseError as exc:
        print(f"parse failed: {exc}", file=sys.stderr)
        print(format_report(failed_parse_report(), tsv=args.format == "tsv"))
        return 0
    report = run_checks(ast, ctx)
    print(format_report(report, tsv=args.format == "tsv"))
    if args.dump_attrs:
        print(dump_annotations(annotate(ast, ctx)))
    return 0


def cmd_extract(args) -> int:
    records = load_corpus(args.corpus)
    text = format_examples_tsv(records)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return 0


def cmd_train(args) -> int:
    records = load_corpus(args.corpus)
    if not records:
        raise DataError(f"no classes under {args.corpus}")
    seed = args.seed if args.seed is not None else _default_seed()
    if args.evidence_drop > 0.0:
        records = [
            type(r)(r.class_id, r.ctx, drop_evidence(r.evidence, 1.0 - args.evidence_drop,
                                                     seed + i), r.bodies)
            for i, r in enumerate(records)
        ]
    vocab = vocabulary_for(records[0].ctx)
    train, _ = split_corpus(records)
    examples = [e for r in train for m in range(len(r.bodies))
                for e in extract_examples(r, m, vocab)]
    if args.kind == "count":
        model = train_count(examples, vocab, alpha=args.alpha,
                            attribute_blind=args.attribute_blind)
        save_count_model(model, args.model)
    else:
        hyper = LatentHyper(dim=args.dim, lr=args.lr, steps=args.steps,
                            mc_samples=args.mc_samples, seed=seed)
        model, _, trace = train_latent(examples, hyper, vocab,
                                       attribute_blind=args.attribute_blind)
        save_latent_model(model, args.model)
        print(f"final objective {trace[-1]:.4f}")
    print(f"trained {args.kind} model on {len(examples)} examples -> {args.model}")
    return 0


def cmd_generate(args) -> int:
    ctx = load_context(args.context)
    ev = parse_evidence(Path(args.evidence).read_text(encoding="utf-8"))
    model = _load_model(args.model)
    seed = args.seed if args.seed is not None else _default_seed()
    cfg = GenConfig(
        seed=seed,
        max_depth=args.max_depth,
        beam_width=args.beam,
        temperature=args.temperature,
        mask_mode="hard" if args.mask else "off",
        z_mode=args.z_mode or ("sampled" if args.sample else "posteriorMean"),
    )
    g = java_subset_grammar()
    if args.sample:
        results = [(generate(g, model, ctx, ev, cfg), float("nan"))]
    else:
        results = beam_search(g, model, ctx, ev, cfg)
    top = args.top if args.top is not None else len(results)
    out_dir = Path(args.out) if args.out else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    for i, (annotated, log_prob) in enumerate(results[:top]):
        ast = annotated.strip()
        body = pretty_print(ast, registry=ctx.registry)
        if out_dir:
            save_ast(ast, out_dir / f"candidate_{i}.ast")
            (out_dir / f"candidate_{i}.java").write_text(body + "\n", encoding="utf-8")
        print(f"; candidate {i} logProb {log_prob:.4f}")
        print(serialize_ast(ast))
        print(body)
    return 0


def cmd_eval_next_token(args) -> int:
    records = load_corpus(args.corpus)
    if not records:
        raise DataError(f"no classes under {args.corpus}")
    model = _load_model(args.model)
    train, held = split_corpus(records)
    chosen = {"held": held, "train": train, "all": records}[args.split]
    vocab = model.vocab
    sites = [e for r in chosen for m in range(len(r.bodies))
             for e in extract_examples(r, m, vocab)]
    results = next_token_eval(model, sites)
    for category, row in results.items():
        acc = "n/a" if row["accuracy"] is None else f"{100.0 * row['accuracy']:.2f}%"
        if args.format == "tsv":
            print(f"{category}\t{row['correct']}\t{row['total']}\t{acc}")
        else:
            print(f"{category:<16} {row['correct']:>6}/{row['total']:<6} {acc:>8}")
    return 0


def cmd_fidelity(args) -> int:
    reference = load_ast(args.reference)
    cdir = Path(args.candidates)
    candidates = [load_ast(p) for p in sorted(cdir.glob("*.ast"))]
    if not candidates:
        raise DataError(f"no .ast candidates under {args.candidates}")
    report = fidelity_report(candidates, reference)
    print(format_fidelity(report, tsv=args.format == "tsv"))
    return 0


def pipeline_smoke(corpus_dir, seed: int = 0, beam: int = 10,
                   mask: bool = False, limit=None, jobs: int = 1) -> str:
    """Extract, train the count model, generate for held-out contexts, then
    score checks and fidelity; returns the summary text (deterministic per
    seed)."""
    records = load_corpus(corpus_dir)
    if not records:
        raise DataError(f"no classes under {corpus_dir}")
    vocab = vocabulary_for(records[0].ctx)
    train, held = split_corpus(records)
    if limit is not None:
        held = held[:limit]
    examples = [e for r in train for m in range(len(r.bodies))
                for e in extract_examples(r, m, vocab)]
    model = train_count(examples, vocab)
    g = java_subset_grammar()
    cfg = GenConfig(seed=seed, beam_width=beam,
                    mask_mode="hard" if mask else "off",
                    z_mode="posteriorMean")

    def one(record):
        results = beam_search(g, model, record.ctx, record.evidence, cfg)
        top = results[0][0].strip()
        report = run_checks(top, record.ctx)
        fid = fidelity_report([r.strip() for r, _ in results], record.bodies[0])
        return report, fid

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            scored = list(pool.map(one, held))
    else:
        scored = [one(r) for r in held]
    checks_agg = aggregate_reports([c for c, _ in scored])
    fid_agg = aggregate_fidelity([f for _, f in scored])
    lines = [
        f"pipeline: {len(examples)} training examples, "
        f"{len(held)} held-out contexts, beam {beam}, seed {seed}, "
        f"mask {'hard' if mask else 'off'}",
        "",
        "== static checks (top candidate) ==",
        format_aggregate(checks_agg),
        "",
        f"== fidelity (best of {beam}) ==",
        format_fidelity(fid_agg),
    ]
    return "\n".join(lines)


def cmd_smoke(args, jobs: int) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    print(pipeline_smoke(args.corpus, seed=seed, beam=args.beam,
                         mask=args.mask, limit=args.limit, jobs=jobs))
    return 0


def main(argv=None) -> int:
    parser, subparsers = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        if args.config:
            config = _load_config(args.config)
            command_parser = subparsers.get(args.command, parser)
            for key, value in config.items():
                # a config value applies only where the flag was left at its
                # declared default, so explicit flags always win
                attr = key.replace("-", "_")
                if not hasattr(args, attr):
                    continue
                default = command_parser.get_default(attr)
                if default is None:
                    default = parser.get_default(attr)
                if getattr(args, attr) != default:
                    continue
                current = default
                cast = type(current) if current is not None else str
                if cast is bool:
                    setattr(args, attr, value.lower() in ("1", "true", "yes", "on"))
                else:
                    setattr(args, attr, cast(value))
        if args.command == "synth":
            return cmd_synth(args)
        if args.command == "check":
            return cmd_check(args)
        if args.command == "extract":
            return cmd_extract(args)
        if args.command == "train":
            return cmd_train(args)
        if args.command == "generate":
            return cmd_generate(args)
        if args.command == "eval-next-token":
            return cmd_eval_next_token(args)
        if args.command == "fidelity":
            return cmd_fidelity(args)
        if args.command == "smoke":
            return cmd_smoke(args, args.jobs)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except GenerationAborted as exc:
        print(f"generation aborted: {exc}", file=sys.stderr)
        return 3
    except (DataError, OSError, ValueError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
