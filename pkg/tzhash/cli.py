"""
Command-line entry point.

    tzhash synth  --spec <file> --out <dir>
    tzhash train  --config <file> --data <dir> --out <dir> [--resume <checkpoint>]
    tzhash encode --checkpoint <file> --features <file> --out <codes>
    tzhash eval   --queries <codes> --db <codes> [--radius 2] --out <jsonl>
    tzhash sweep  --config <file> --data <dir> --out <dir> [--bits 16,32,64,96,128]
    tzhash vary   --config <file> --factor n_seen|n_unlabeled --out <dir> [--spec <file>] [--levels 2,4,6,8]
    tzhash serve  --checkpoint <file> --db <codes> [--host H] [--port P]

Exit codes: 0 success, 1 usage/configuration, 2 data error, 3 numeric failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import get_settings, load_synth_spec, load_train_config
from .exceptions import NumericFailure, TZSHError
from .models.batch import load_features
from .models.code_index import load_codes, write_codes
from .models.params import ParamStore
from .schemas.config import SynthSpec
from .services import experiments, retrieval, synthdata
from .services.trainer import DIAGNOSTIC_FILE, Trainer, encode_index

logger = logging.getLogger("tzhash")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tzhash", description="Transductive zero-shot hashing")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic zero-shot benchmark")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train the joint model")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--resume", default=None, help="checkpoint to continue from")

    p = sub.add_parser("encode", help="binary codes for a feature file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="MAP and precision within a Hamming radius")
    p.add_argument("--queries", required=True)
    p.add_argument("--db", required=True)
    p.add_argument("--radius", type=int, default=2)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", help="train and evaluate at several code lengths")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bits", type=_int_list, default=list(experiments.DEFAULT_BITS))

    p = sub.add_parser("vary", help="regenerate the synthetic benchmark across seen-class counts or unlabeled sizes")
    p.add_argument("--config", required=True)
    p.add_argument("--factor", required=True, choices=sorted(experiments.BENCHMARK_FACTORS))
    p.add_argument("--spec", default=None, help="benchmark spec to vary (defaults if omitted)")
    p.add_argument("--out", required=True)
    p.add_argument("--levels", type=_int_list, default=None)

    p = sub.add_parser("serve", help="run the search API")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--db", required=True)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    return parser


def cmd_synth(args) -> None:
    spec = load_synth_spec(args.spec)
    out = synthdata.write_dataset(synthdata.generate(spec), args.out)
    logger.info(f"wrote synthetic dataset to {out}")


def cmd_train(args) -> None:
    cfg = load_train_config(args.config)
    data = synthdata.load_training_data(args.data)
    evaluation = synthdata.load_evaluation_data(args.data, data.vocab)
    out = Path(args.out)
    try:
        Trainer(cfg, data, evaluation).fit(out, resume=args.resume)
    except NumericFailure as e:
        out.mkdir(parents=True, exist_ok=True)
        (out / DIAGNOSTIC_FILE).write_text(json.dumps(e.diagnostics, indent=2), encoding="utf-8")
        logger.error(f"diagnostic dump written to {out / DIAGNOSTIC_FILE}")
        raise


def cmd_encode(args) -> None:
    params = ParamStore.load(args.checkpoint)
    batch = load_features(args.features)
    index = encode_index(params, batch)
    write_codes(args.out, index)
    logger.info(f"wrote {len(index)} codes of {index.n_bits} bits to {args.out}")


def cmd_eval(args) -> None:
    queries = load_codes(args.queries)
    db = load_codes(args.db)
    lines = retrieval.evaluate(queries, db, args.radius)
    Path(args.out).write_text("".join(line.to_line() + "\n" for line in lines), encoding="utf-8")
    for line in lines:
        logger.info(f"{line.metric} @ {line.bits} bits: {line.value:.4f}")


def cmd_sweep(args) -> None:
    cfg = load_train_config(args.config)
    data = synthdata.load_training_data(args.data)
    evaluation = synthdata.load_evaluation_data(args.data, data.vocab)
    experiments.sweep(cfg, data, evaluation, args.out, args.bits)


def cmd_vary(args) -> None:
    cfg = load_train_config(args.config)
    spec = load_synth_spec(args.spec) if args.spec else SynthSpec()
    experiments.benchmark_sweep(cfg, spec, args.factor, args.out, args.levels)


def cmd_serve(args) -> None:
    import uvicorn

    from .main import app
    from .services.search_service import search_service

    settings = get_settings()
    search_service.load(args.checkpoint, args.db, settings.max_code_bits)
    uvicorn.run(app, host=args.host or settings.host, port=args.port or settings.port)


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "encode": cmd_encode,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "vary": cmd_vary,
    "serve": cmd_serve,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    settings = get_settings()
    logging.basicConfig(
        level=settings.log_level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except TZSHError as e:
        logger.error(str(e))
        return e.exit_code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
