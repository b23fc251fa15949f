"""Server-side command line: train, serve, probe, and synonym-bank build."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import uvicorn

from .encoder import VictimModel, evaluate_accuracy, train_classifier
from .probe import train_probe
from .service import create_app
from .synbank import build_synonym_bank


def cmd_train(args) -> int:
    from gramattack.textmodel import load_dataset

    instances = load_dataset(args.data)
    model = train_classifier(instances, epochs=args.epochs, seed=args.seed)
    accuracy = evaluate_accuracy(model, instances)
    model.save(args.out)
    print(f"trained on {len(instances)} instances, "
          f"train accuracy {accuracy:.3f} -> {args.out}")
    return 0


def cmd_serve(args) -> int:
    model = VictimModel.load(args.ckpt)
    app = create_app(model, max_batch=args.max_batch)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def load_probe_rows(path: str | Path):
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        rows.append(
            (rec["text"].split(), rec["label"], rec.get("error_positions", []))
        )
    return rows


def cmd_probe(args) -> int:
    model = VictimModel.load(args.ckpt)
    rows = load_probe_rows(args.data)
    report = train_probe(rows, model, args.layer, seed=args.seed)
    doc = report.__dict__
    if args.out:
        Path(args.out).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(json.dumps(doc, sort_keys=True))
    return 0


def cmd_synbank(args) -> int:
    count = build_synonym_bank(args.wordnet_dir, args.out)
    print(f"wrote {count} lemma rows -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gramattack-server")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit the tiny victim encoder on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--epochs", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("serve", help="serve /predict, /mask_fill, /health")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--max-batch", type=int, default=32)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("probe", help="train the acceptability probe on a layer")
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--layer", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("synbank", help="extract synonyms.tsv from WordNet files")
    p.add_argument("--wordnet-dir", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synbank)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
