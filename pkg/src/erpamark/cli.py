"""Command-line interface.

Exit status: 0 on success (and on a verified image), 1 when verification
fails, 2 on usage or input errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from erpamark import __version__
from erpamark.bench import EXPERIMENTS, ExperimentConfig, run_experiment
from erpamark.channel import ChannelModel, PatchChannel, load_channel_config
from erpamark.codec import PaintingScheme
from erpamark.dcss import CANONICAL_DISTANCES, search_dcss, search_maximal_dcss
from erpamark.decoder import TrainConfig, TrainingDiverged, load_model, save_model, train
from erpamark.framework import PatchAssignment, PatchGrid, embed_signature, extract_and_verify
from erpamark.images import read_png, write_png
from erpamark.kernels import BACKEND
from erpamark.signature import PublicKey, SecretKey, load_key, public_of, save_key, keygen

log = logging.getLogger("erpamark")

EXIT_OK, EXIT_UNVERIFIED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _emit(args, text: str, data: dict) -> None:
    if args.format == "structured":
        print(json.dumps(data, indent=1))
    else:
        print(text, end="" if text.endswith("\n") else "\n")


def _channel(path: str | None) -> ChannelModel:
    return load_channel_config(path) if path else ChannelModel()


def _state_path(image: str) -> Path:
    return Path(image).with_suffix(".channel.json")


def cmd_keygen(args) -> int:
    pair = keygen(seed=args.seed, bits=args.bits)
    out = Path(args.out)
    pub = Path(args.pub_out) if args.pub_out else out.with_name(out.stem + ".pub.json")
    save_key(pair.secret, out)
    save_key(pair.public, pub)
    _emit(
        args,
        f"secret key: {out}\npublic key: {pub}\nmodulus bits: {pair.public.n.bit_length()}",
        {"secret_key": str(out), "public_key": str(pub), "modulus_bits": pair.public.n.bit_length()},
    )
    return EXIT_OK


def cmd_train(args) -> int:
    scheme = PaintingScheme.from_spec(args.scheme, args.length)
    cfg = TrainConfig(
        p=args.p,
        learning_rate=args.lr,
        batch_size=args.batch,
        steps=args.steps,
        seed=args.seed,
        scheme=scheme,
        noise_p=args.noise_p,
    )
    try:
        model = train(cfg)
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    save_model(model, args.out)
    loss = model.meta.get("final_loss")
    _emit(
        args,
        f"decoder written to {args.out}\nscheme: {scheme.name} {list(scheme.offsets)}\nfinal loss: {loss:.6f}",
        {"out": args.out, "scheme": scheme.to_dict(), "final_loss": loss, "train": cfg.to_dict()},
    )
    return EXIT_OK


def _grid(args) -> tuple[PatchGrid, PatchAssignment]:
    grid = PatchGrid.square(args.grid)
    return grid, PatchAssignment.named(args.assignment, grid)


def cmd_embed(args) -> int:
    key = load_key(args.key)
    if not isinstance(key, SecretKey):
        raise UsageError(f"--key {args.key} is not a secret key")
    image = read_png(args.image)
    scheme = load_model(args.decoder).scheme if args.decoder else PaintingScheme.dcss()
    grid, assignment = _grid(args)
    session = _channel(args.channel_config).open(args.seed)
    info = embed_signature(image, key, session, scheme, grid, assignment, erpa=not args.no_erpa)
    write_png(args.out, info.image)
    state = None
    if session.model.kind != "lsb":
        # the simulated channel keeps payloads out of band
        state = Path(args.state_out) if args.state_out else _state_path(args.out)
        session.save_state(state)
    data = {
        "out": args.out,
        "phash": info.phash.to_hex(),
        "phash_stable": info.phash_stable,
        "signature": info.signature.to_hex(),
        "channel_state": None if state is None else str(state),
        "embed_error_bits": sum(e.popcount() for e in info.embed_errors),
    }
    text = [f"watermarked image: {args.out}", f"phash: {data['phash']}", f"phash stable: {str(info.phash_stable).lower()}"]
    if state is not None:
        text.append(f"channel state: {state}")
    _emit(args, "\n".join(text), data)
    return EXIT_OK


def cmd_verify(args) -> int:
    pk = public_of(load_key(args.pubkey))
    if not isinstance(pk, PublicKey):
        raise UsageError(f"--pubkey {args.pubkey} is not a key file")
    image = read_png(args.image)
    model = _channel(args.channel_config)
    if model.kind == "lsb":
        session = model.open(args.seed)
    else:
        state = Path(args.channel_state) if args.channel_state else _state_path(args.image)
        if not state.exists():
            raise UsageError(f"--channel-state: {state} not found (the simulated channel needs its side records)")
        session = PatchChannel.load_state(state)
    decoder = load_model(args.decoder) if args.decoder else None
    grid, assignment = _grid(args)
    if decoder is None and not args.no_erpa:
        raise UsageError("--decoder is required unless --no-erpa is given")
    report = extract_and_verify(
        image, pk, session, decoder, grid, assignment,
        erpa=not args.no_erpa, hamming_fallback=args.hamming_fallback,
    )
    _emit(args, report.to_text(), report.to_dict())
    return EXIT_OK if report.verified else EXIT_UNVERIFIED


def cmd_dcss_search(args) -> int:
    n = args.n
    best = search_maximal_dcss(n, max_results=1, time_budget=args.time_budget)
    if best.maximal:
        verdict = f"maximum size: {best.size} (complete search; size {best.size + 1} does not exist)"
    else:
        verdict = f"maximum size: at least {best.size} (inconclusive: time budget exhausted)"
    sizes = [args.size] if args.size else sorted({max(best.size - 1, 1), best.size})
    sections, data_sizes = [], []
    for k in sizes:
        res = search_dcss(n, k, max_results=None, time_budget=args.time_budget)
        status = "complete" if res.complete else "inconclusive"
        count = len(res.sequences) if res.complete else f">= {len(res.sequences)}"
        has_canon = n == 64 and k == len(CANONICAL_DISTANCES) and any(s.distances == CANONICAL_DISTANCES for s in res.sequences)
        lines = [f"size {k}: {count} sequences up to rotation ({status})"]
        shown = res.sequences[: args.limit] if args.limit else res.sequences
        lines += [s.to_line() for s in shown]
        if has_canon:
            lines.append(f"canonical sequence found: {n}: {','.join(map(str, CANONICAL_DISTANCES))}")
        sections.append("\n".join(lines))
        data_sizes.append({
            "size": k,
            "count": len(res.sequences),
            "complete": res.complete,
            "truncated": res.truncated,
            "sequences": [list(s.distances) for s in shown],
            "contains_canonical": has_canon,
        })
    text = f"n: {n}\n{verdict}\n" + "\n".join(sections)
    data = {"n": n, "max_size": best.size, "maximal_proven": best.maximal, "complete": best.complete, "sizes": data_sizes}
    _emit(args, text, data)
    return EXIT_OK


def _bench_config(args, experiment: str) -> ExperimentConfig:
    overrides = {
        "experiment": experiment,
        "seed": args.seed,
        "output": args.output,
        "trials": args.trials,
        "images": args.images,
        "steps": args.steps,
        "model_dir": args.model_dir,
    }
    if args.config:
        return ExperimentConfig.from_file(args.config, **overrides)
    return ExperimentConfig.from_dict({k: v for k, v in overrides.items() if v is not None})


def cmd_bench(args) -> int:
    result = run_experiment(_bench_config(args, args.experiment), threads=args.threads)
    _emit(args, result.to_text(), result.to_dict())
    return EXIT_OK


def cmd_simulate_zbir(args) -> int:
    result = run_experiment(_bench_config(args, "simulate-zbir"), threads=args.threads)
    _emit(args, result.to_text(), result.to_dict())
    return EXIT_OK


def _probability(text: str) -> float:
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"must be in (0, 1), got {text}")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return v


def _add_common(parser: argparse.ArgumentParser, default) -> None:
    def d(value):
        return value if default is None else default

    parser.add_argument("--seed", type=int, default=d(0), help="seed for every random choice (default 0)")
    parser.add_argument("--threads", type=_positive, default=d(1), help="worker threads; results do not depend on it")
    parser.add_argument("--format", choices=("text", "structured"), default=d("text"), help="output style")
    parser.add_argument("-v", "--verbose", action="count", default=d(0))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="erpamark", description="Signature watermarking with learned error painting.")
    _add_common(p, None)
    # the same flags after the subcommand; SUPPRESS keeps them from overwriting earlier values
    common = argparse.ArgumentParser(add_help=False)
    _add_common(common, argparse.SUPPRESS)

    p.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND} kernels)")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    s = sub.add_parser("keygen", parents=[common], help="generate an RSA-2048 key pair")
    s.add_argument("--out", required=True, help="secret key file; the public key goes next to it")
    s.add_argument("--pub-out", help="public key file (default: <out stem>.pub.json)")
    s.add_argument("--bits", type=int, default=2048, help=argparse.SUPPRESS)
    s.set_defaults(func=cmd_keygen)

    s = sub.add_parser("train-decoder", parents=[common], help="train the linear painting decoder")
    s.add_argument("--p", type=_probability, required=True, help="Bernoulli error rate")
    s.add_argument("--noise-p", type=float, help="corruption rate of the painted word (default: same as --p)")
    s.add_argument("--lr", type=float, default=1e-2)
    s.add_argument("--batch", type=_positive, default=64)
    s.add_argument("--steps", type=int, default=50_000)
    s.add_argument("--scheme", choices=("dcss", "nearby"), default="dcss")
    s.add_argument("--length", type=int, default=7, help="painted positions per error bit")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    for name, func, helptext in (("embed", cmd_embed, "sign an image and embed the signature"),
                                 ("verify", cmd_verify, "extract, correct and verify a signature")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("--image", required=True, help="PNG image")
        s.add_argument("--decoder", help="decoder model file")
        s.add_argument("--grid", type=int, choices=(4, 8), default=8, help="patch grid side")
        s.add_argument("--assignment", choices=("contiguous", "checkerboard"), default="contiguous")
        s.add_argument("--channel-config", help="channel config file (default: exact LSB channel)")
        s.add_argument("--no-erpa", action="store_true", help="disable error painting")
        s.set_defaults(func=func)
        if name == "embed":
            s.add_argument("--key", required=True, help="secret key file")
            s.add_argument("--out", required=True, help="output PNG")
            s.add_argument("--state-out", help="simulated channel side records (default: <out>.channel.json)")
        else:
            s.add_argument("--pubkey", required=True, help="public key file")
            s.add_argument("--channel-state", help="simulated channel side records (default: <image>.channel.json)")
            s.add_argument("--hamming-fallback", action="store_true",
                           help="also try hashes within Hamming distance 2 of the computed pHash")

    s = sub.add_parser("dcss-search", parents=[common], help="search distinct circular subsum sequences")
    s.add_argument("--n", type=_positive, default=64, help="modulus")
    s.add_argument("--size", type=_positive, help="list sequences of this size only")
    s.add_argument("--limit", type=int, default=10, help="sequences to print per size (0 = all)")
    s.add_argument("--time-budget", type=float, default=60.0, help="seconds before the search reports inconclusive")
    s.set_defaults(func=cmd_dcss_search)

    for name, helptext in (("bench", "run an experiment table"), ("simulate-zbir", "sweep distortion strength")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        if name == "bench":
            s.add_argument("experiment", choices=[e for e in EXPERIMENTS if e != "simulate-zbir"])
        s.add_argument("--config", help="experiment config file")
        s.add_argument("--output", help="write the structured result here")
        s.add_argument("--trials", type=_positive)
        s.add_argument("--images", type=_positive)
        s.add_argument("--steps", type=int)
        s.add_argument("--model-dir", help="cache trained decoders in this directory")
        s.set_defaults(func=cmd_bench if name == "bench" else cmd_simulate_zbir)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"erpamark: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"erpamark: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
