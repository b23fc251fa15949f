"""Command-line pipeline: estimate, corrupt, attack, and report.

Every subcommand is pure given its inputs and seed, emits its resolved
configuration next to its outputs, and uses the shared exit codes:
0 success, 2 input validation, 3 oracle transport, 4 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import traceback
from pathlib import Path

import numpy as np

from . import analysis, attack, confusion, morphology, oracle, perturb, textmodel
from .errors import OracleError, ValidationError

log = logging.getLogger("gramattack")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_ORACLE = 3
EXIT_INTERNAL = 4


def _default_seed() -> int:
    return int(os.environ.get("GRAMATTACK_SEED", "0"))


def _write_config(args: argparse.Namespace, out_path: str) -> None:
    resolved = {
        k: v for k, v in sorted(vars(args).items()) if k != "func" and v is not None
    }
    Path(str(out_path) + ".config.json").write_text(
        json.dumps(resolved, sort_keys=True, default=str) + "\n"
    )


def _load_confusions(path: str | None):
    if path is None:
        return confusion.default_sets(), confusion.ErrorDistribution.uniform()
    return confusion.load_confusions(path)


def _make_oracle(spec: str):
    kind, _, arg = spec.partition(":")
    if kind == "builtin":
        return oracle.ToyClassifier.from_file(arg)
    if kind == "remote":
        remote = oracle.RemoteOracle(arg)
        try:
            remote.health()
        except Exception as exc:
            raise OracleError(f"oracle endpoint unreachable: {exc}", retriable=True)
        return remote
    raise ValidationError(f"unknown oracle spec: {spec}")


def _make_mlm(spec: str):
    kind, _, arg = spec.partition(":")
    if kind == "bigram":
        path = Path(arg)
        if not path.exists():
            raise ValidationError(f"no such file: {path}")
        corpus = [
            line.split() for line in path.read_text().splitlines() if line.strip()
        ]
        return oracle.BigramMaskFiller(corpus)
    if kind == "remote":
        return oracle.RemoteOracle(arg)
    raise ValidationError(f"unknown mask-fill oracle spec: {spec}")


def _error_type(name: str) -> confusion.ErrorType:
    if name not in confusion.ERROR_TYPE_NAMES:
        raise ValidationError(
            f"unknown error type {name!r}; expected one of "
            + ", ".join(confusion.ERROR_TYPE_NAMES)
        )
    return confusion.ERROR_TYPE_NAMES[name]


def _attack_config(args: argparse.Namespace) -> attack.AttackConfig:
    return attack.AttackConfig(
        algorithm=getattr(args, "algorithm", "greedy"),
        budget_fraction=args.budget,
        beam_size=args.beam_size,
        population=args.population,
        generation_fraction=args.generations_frac,
        seed=args.seed,
        beam_allow_skip=args.beam_allow_skip,
        jobs=getattr(args, "jobs", 1),
    )


def cmd_estimate(args) -> int:
    pairs = textmodel.load_minimal_pairs(args.pairs, warn=log.warning)
    sets, dist = confusion.estimate(pairs)
    confusion.save_confusions(sets, dist, args.out)
    _write_config(args, args.out)
    print(f"estimated {len(pairs)} pairs -> {args.out}")
    return EXIT_OK


def cmd_perturb(args) -> int:
    sets, dist = _load_confusions(args.confusions)
    instances = textmodel.load_dataset(args.data)
    lex = morphology.default_lexicon()
    out = []
    for idx, inst in enumerate(instances):
        rng = np.random.default_rng([args.seed, idx])
        try:
            corrupted, _ = perturb.probabilistic_transform(
                inst.mutable(), dist, sets, lex, args.n_errors, rng
            )
            out.append(inst.with_mutable(corrupted))
        except ValidationError as exc:
            log.warning("instance %s left unchanged: %s", inst.id, exc)
            out.append(inst)
    textmodel.save_dataset(out, args.out)
    _write_config(args, args.out)
    print(f"perturbed {len(out)} instances -> {args.out}")
    return EXIT_OK


def cmd_probe_data(args) -> int:
    sets, _ = _load_confusions(args.confusions)
    instances = textmodel.load_dataset(args.data)
    lex = morphology.default_lexicon()
    rng = np.random.default_rng([args.seed])
    rows = perturb.build_probe_dataset(
        [inst.mutable() for inst in instances],
        None,
        sets,
        lex,
        _error_type(args.target_type),
        rng,
    )
    lines = []
    for i, (sent, label, positions) in enumerate(rows):
        rec = {
            "id": f"probe-{i}",
            "text": sent.text(),
            "label": label,
            "pos": [t.pos for t in sent.tokens],
            "error_positions": positions,
        }
        lines.append(json.dumps(rec, sort_keys=True))
    Path(args.out).write_text("".join(line + "\n" for line in lines))
    _write_config(args, args.out)
    corrupted = sum(1 for _, label, _ in rows if label == "unacceptable")
    print(f"probe data: {corrupted}/{len(rows)} corrupted -> {args.out}")
    return EXIT_OK


def cmd_attack(args) -> int:
    sets, _ = _load_confusions(args.confusions)
    instances = textmodel.load_dataset(args.data)
    victim = _make_oracle(args.oracle)
    cfg = _attack_config(args)
    results, summary = attack.run_campaign(
        instances, victim, sets, morphology.default_lexicon(), cfg
    )
    attack.write_campaign(results, summary, args.out)
    _write_config(args, args.out)
    rate = "n/a" if summary.success_rate is None else f"{summary.success_rate:.4f}"
    print(
        f"{cfg.algorithm}: attacked {summary.attacked}, "
        f"success rate {rate} -> {args.out}"
    )
    return EXIT_OK


def cmd_sweep(args) -> int:
    sets, _ = _load_confusions(args.confusions)
    instances = textmodel.load_dataset(args.data)
    victim = _make_oracle(args.oracle)
    fractions = [float(f) for f in args.fractions.split(",") if f]
    cfg = _attack_config(args)
    sweep = analysis.budget_sweep(
        instances, victim, sets, morphology.default_lexicon(), fractions, cfg
    )
    csv_lines = ["fraction,success_rate"]
    for fraction, summary, results in sweep:
        out_path = f"{args.out}-{fraction:g}.jsonl"
        attack.write_campaign(results, summary, out_path)
        rate = "" if summary.success_rate is None else f"{summary.success_rate:.6f}"
        csv_lines.append(f"{fraction:g},{rate}")
    Path(args.out + ".csv").write_text("".join(l + "\n" for l in csv_lines))
    _write_config(args, args.out)
    print(f"swept {len(sweep)} fractions -> {args.out}.csv")
    return EXIT_OK


def cmd_cloze(args) -> int:
    pairs = textmodel.load_minimal_pairs(args.pairs, warn=log.warning)
    mlm = _make_mlm(args.mlm)
    matrix = analysis.cloze_drop(pairs, mlm)
    matrix.write_table(args.out)
    _write_config(args, args.out)
    print(f"cloze matrix over {len(pairs)} pairs -> {args.out}")
    return EXIT_OK


def cmd_augment(args) -> int:
    sets, _ = _load_confusions(args.confusions)
    instances = textmodel.load_dataset(args.data)
    victim = _make_oracle(args.oracle)
    cfg = _attack_config(args)
    augmented = analysis.augment(
        instances, victim, sets, morphology.default_lexicon(), args.proportion, cfg
    )
    textmodel.save_dataset(augmented, args.out)
    _write_config(args, args.out)
    print(f"augmented {len(instances)} -> {len(augmented)} records at {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    records = []
    sweep_rows = []
    for path in args.campaigns:
        recs, summary = attack.read_campaign(path)
        records.extend(recs)
        if summary and summary.get("success_rate") is not None:
            sweep_rows.append(
                (summary["budget_fraction"], summary["success_rate"])
            )
    successes = [r for r in records if r["success"]]
    harm = {t.value: 0 for t in confusion.ErrorType}
    for rec in successes:
        for op in rec["ops"]:
            harm[op["error_type"]] += 1
    merged = {
        "attacked": len(records),
        "successes": len(successes),
        "success_rate": (len(successes) / len(records)) if records else None,
        "mean_modified_fraction": (
            sum(r["modified_fraction"] for r in successes) / len(successes)
            if successes
            else None
        ),
        "total_queries": sum(r["queries"] for r in records),
        "harm_counts": harm,
    }
    Path(args.out + ".summary.json").write_text(
        json.dumps(merged, indent=2, sort_keys=True) + "\n"
    )
    harm_lines = ["error_type,count"] + [
        f"{t.value},{harm[t.value]}" for t in confusion.ErrorType
    ]
    Path(args.out + ".harm.csv").write_text("".join(l + "\n" for l in harm_lines))
    sweep_lines = ["fraction,success_rate"] + [
        f"{f:g},{r:.6f}" for f, r in sorted(sweep_rows)
    ]
    Path(args.out + ".sweep.csv").write_text("".join(l + "\n" for l in sweep_lines))
    _write_config(args, args.out)
    rate = "n/a" if merged["success_rate"] is None else f"{merged['success_rate']:.4f}"
    print(f"merged {len(args.campaigns)} campaigns: success rate {rate}")
    for etype in confusion.ErrorType:
        print(f"  {etype.value:>8}: {harm[etype.value]}")
    return EXIT_OK


def _add_attack_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--budget", type=float, default=0.15)
    sub.add_argument("--beam-size", type=int, default=5)
    sub.add_argument("--population", type=int, default=60)
    sub.add_argument("--generations-frac", type=float, default=0.23)
    sub.add_argument(
        "--beam-allow-skip",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="let beam streams pass a token without editing it",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gramattack",
        description="Grammatical-error perturbation and adversarial attack engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate confusion weights from pairs")
    p.add_argument("--pairs", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("perturb", help="inject sampled errors into a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--confusions")
    p.add_argument("--n-errors", type=int, default=1)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("probe-data", help="build a half-corrupted probing dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--confusions")
    p.add_argument("--target-type", required=True)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_probe_data)

    p = sub.add_parser("attack", help="run a worst-case transformation campaign")
    p.add_argument("--data", required=True)
    p.add_argument("--confusions")
    p.add_argument("--oracle", required=True, help="builtin:path | remote:url")
    p.add_argument("--algorithm", choices=attack.ALGORITHMS, default="greedy")
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    _add_attack_flags(p)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("sweep", help="greedy success rate across budgets")
    p.add_argument("--data", required=True)
    p.add_argument("--confusions")
    p.add_argument("--oracle", required=True)
    p.add_argument("--fractions", default="0.15,0.25,0.35,0.45")
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--out", required=True, help="output prefix")
    _add_attack_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("cloze", help="masked-context likelihood drop matrix")
    p.add_argument("--pairs", required=True)
    p.add_argument("--mlm", required=True, help="bigram:corpus | remote:url")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cloze)

    p = sub.add_parser("augment", help="emit adversarial training copies")
    p.add_argument("--data", required=True)
    p.add_argument("--confusions")
    p.add_argument("--oracle", required=True)
    p.add_argument("--proportion", type=float, required=True)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--out", required=True)
    _add_attack_flags(p)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("report", help="merge campaign files into summary tables")
    p.add_argument("campaigns", nargs="+")
    p.add_argument("--out", required=True, help="output prefix")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OracleError as exc:
        print(f"oracle error: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
