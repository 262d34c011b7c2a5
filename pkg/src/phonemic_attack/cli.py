"""Command-line entry point: synth, train, stats, sample, attack, eval, ablate, spectrogram.

Relative input paths are resolved against ``--out``; every run records its
arguments under its subcommand's key in ``<out>/config.json``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from . import attack as atk
from .audio import Waveform, load_wav, mix
from .corpus import CorpusError, ingest, manifest_rows, synth_corpus, write_manifest
from .evaluation import DEFAULT_SUCCESS_THRESHOLD, emit_report, evaluate, format_table, transfer_eval
from .features import export_spectrogram
from .g2p import default_vocab, load_dictionary
from .model import TrainConfig, load_checkpoint, save_checkpoint, train
from .noise import ALIGNED, clip_samples, inject, load_noise, save_noise
from .sampling import SamplingConfig, select

log = logging.getLogger("phonemic_attack")


def _resolve(out: Path, p: str | None) -> Path | None:
    if p is None:
        return None
    path = Path(p)
    return path if path.is_absolute() else out / path


def _record_config(out: Path, args: argparse.Namespace) -> None:
    path = out / "config.json"
    doc = json.loads(path.read_text()) if path.exists() else {}
    snap = {k: v for k, v in vars(args).items() if k != "func"}
    doc[args.command] = snap
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")


def _dictionary(args):
    return load_dictionary(_resolve(args.out, args.lexicon) if args.lexicon else None)


def _entries(args, manifest: str):
    entries, stats = ingest(_resolve(args.out, manifest), _dictionary(args))
    return entries, stats


def _attack_config(args) -> atk.AttackConfig:
    names = {f.name for f in fields(atk.AttackConfig)}
    kw = {k: v for k, v in vars(args).items() if k in names}
    return atk.AttackConfig(**kw)


# -- subcommands --------------------------------------------------------------

def cmd_synth(args) -> int:
    dictionary = _dictionary(args)
    vocab = default_vocab() if args.vocab is None else \
        _resolve(args.out, args.vocab).read_text().split()
    lo, hi = args.words
    synth_corpus(vocab, args.n_train, (lo, hi), args.seed, args.out, dictionary, "train")
    synth_corpus(vocab, args.n_test, (lo, hi), args.seed + 1, args.out, dictionary, "test")
    print(f"wrote {args.n_train} train / {args.n_test} test utterances to {args.out}")
    return 0


def cmd_train(args) -> int:
    entries, _ = _entries(args, args.manifest)
    cfg = TrainConfig(epochs=args.epochs, lr=args.lr, momentum=args.momentum, batch_size=args.batch_size,
                      seed=args.seed, arch=args.arch, noise_aug=args.noise_aug, aug_prob=args.aug_prob,
                      clip_norm=args.clip_norm, cosine=not args.constant_lr, warmup=args.warmup)
    model, history = train([e.load() for e in entries], [e.transcript for e in entries], cfg)
    path = _resolve(args.out, args.model)
    save_checkpoint(model, path)
    print(f"model {model.model_id} ({cfg.arch}) final loss {history[-1]:.4f} -> {path}")
    return 0


def cmd_stats(args) -> int:
    entries, stats = _entries(args, args.manifest)
    doc = stats.as_dict()
    doc["densities"] = {e.utt_id: e.density for e in entries}
    (args.out / "stats.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(json.dumps(stats.as_dict(), indent=2))
    return 0


def cmd_sample(args) -> int:
    entries, stats = _entries(args, args.manifest)
    chosen = select(entries, stats, SamplingConfig(args.alpha, args.k))
    path = _resolve(args.out, args.selected)
    write_manifest(path, manifest_rows(chosen, path.parent))
    for e in chosen:
        print(f"{e.utt_id}\t{e.density:.3f}\t{e.duration:.2f}s\t{e.peak_amplitude:.3f}")
    return 0


def cmd_attack(args) -> int:
    model = load_checkpoint(_resolve(args.out, args.model))
    entries, stats = _entries(args, args.manifest)
    cfg = _attack_config(args)
    clip, report = atk.generate(model, entries, cfg, stats)
    save_noise(clip, _resolve(args.out, args.noise))
    report.label = "PAT"
    report.extra.pop("losses", None)
    emit_report(report, _resolve(args.out, args.report))
    print(format_table([report]), end="")
    return 0


def cmd_eval(args) -> int:
    model = load_checkpoint(_resolve(args.out, args.model))
    entries, _ = _entries(args, args.manifest)
    reports = [evaluate(model, None, entries, args.threshold, label="Raw", jobs=args.jobs)]
    if args.noise:
        clip = load_noise(_resolve(args.out, args.noise))
        rep = (transfer_eval(clip, model, entries, args.threshold, label="PAT", jobs=args.jobs)
               if args.transfer else evaluate(model, clip, entries, args.threshold, label="PAT", jobs=args.jobs))
        reports.append(rep)
        length, eps = len(clip), clip.epsilon
    else:
        length, eps = clip_samples(args.l_delta_p), args.epsilon
    if args.gaussian:
        g = atk.baseline_gaussian(eps, length, args.seed)
        reports.append(evaluate(model, g, entries, args.threshold, label="Noise", jobs=args.jobs))
    emit_report(reports, _resolve(args.out, args.report))
    print(format_table(reports), end="")
    return 0


def cmd_ablate(args) -> int:
    model = load_checkpoint(_resolve(args.out, args.model))
    train_entries, _ = _entries(args, args.manifest)
    test_entries, _ = _entries(args, args.test_manifest)
    seeds = list(range(args.seed, args.seed + args.n_seeds))
    rows = atk.ablation_grid(model, train_entries, test_entries, _attack_config(args), seeds, args.threshold)
    emit_report(rows, _resolve(args.out, args.report))
    print(format_table(rows), end="")
    return 0


def cmd_spectrogram(args) -> int:
    wav = load_wav(_resolve(args.out, args.audio))
    if args.noise:
        clip = load_noise(_resolve(args.out, args.noise))
        wav = mix(wav, Waveform(inject(wav, clip, ALIGNED), wav.sample_rate))
    width, height = export_spectrogram(wav, _resolve(args.out, args.image))
    print(f"{width}x{height} -> {args.image}")
    return 0


# -- parser -------------------------------------------------------------------

def _names(field: str) -> tuple[str, ...]:
    """``--field-name`` plus the exact field spelling ``--field_name``."""
    dashed = "--" + field.replace("_", "-")
    return (dashed, "--" + field) if "_" in field else (dashed,)


def _add_attack_flags(p: argparse.ArgumentParser) -> None:
    d = atk.AttackConfig()
    p.add_argument(*_names("epsilon"), type=float, default=d.epsilon, help="l-inf bound (default ~ -33 dB re 0.9)")
    p.add_argument(*_names("l_delta_p"), type=float, default=d.l_delta_p, help="clip length, s")
    p.add_argument(*_names("alpha"), type=float, default=d.alpha, help="density tolerance, phonemes/s")
    p.add_argument(*_names("beta"), type=float, default=d.beta, help="sliding step, s")
    p.add_argument(*_names("k_instances"), type=int, default=d.k_instances)
    p.add_argument(*_names("epochs"), type=int, default=d.epochs)
    p.add_argument(*_names("iters"), type=int, default=d.iters)
    p.add_argument(*_names("step_size"), type=float, default=None, help="default epsilon/10")
    p.add_argument("--no-rir", dest="rir_enabled", action="store_false")
    p.add_argument(*_names("rir_prob"), type=float, default=d.rir_prob)
    p.add_argument(*_names("rt60_min"), type=float, default=d.rt60_min)
    p.add_argument(*_names("rt60_max"), type=float, default=d.rt60_max)
    p.add_argument(*_names("crop_seconds"), type=float, default=d.crop_seconds)
    p.add_argument("--no-pdbs", dest="use_pdbs", action="store_false")
    p.add_argument(*_names("check_constraint"), action="store_true")


def _common(seed: int = 0) -> argparse.ArgumentParser:
    # a fresh parent per subcommand: parents share action objects, so defaults would leak
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, default=Path("."), help="working directory for all paths")
    common.add_argument("--seed", type=int, default=seed)
    common.add_argument("--jobs", type=int, default=1, help="parallel workers for evaluation")
    common.add_argument("--lexicon", default=None, help="WORD<TAB>PHONES file (default: bundled)")
    common.add_argument("-v", "--verbose", action="store_true")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phonemic-attack", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[_common(seed=17)], help="synthesize the train/test corpus")
    p.add_argument("--n-train", type=int, default=120)
    p.add_argument("--n-test", type=int, default=40)
    p.add_argument("--words", type=int, nargs=2, default=(3, 8), metavar=("MIN", "MAX"))
    p.add_argument("--vocab", default=None, help="whitespace-separated word list")
    p.set_defaults(func=cmd_synth)

    d = TrainConfig()
    p = sub.add_parser("train", parents=[_common()], help="train a recognizer")
    p.add_argument("--manifest", default="train.jsonl")
    p.add_argument("--model", default="model.json")
    p.add_argument("--arch", choices=("base", "variant"), default=d.arch)
    p.add_argument("--epochs", type=int, default=d.epochs)
    p.add_argument("--lr", type=float, default=d.lr)
    p.add_argument("--momentum", type=float, default=d.momentum)
    p.add_argument("--batch-size", type=int, default=d.batch_size)
    p.add_argument("--noise-aug", type=float, default=d.noise_aug)
    p.add_argument("--aug-prob", type=float, default=d.aug_prob)
    p.add_argument("--clip-norm", type=float, default=d.clip_norm)
    p.add_argument("--warmup", type=int, default=d.warmup, help="epochs of linear learning-rate warmup")
    p.add_argument("--constant-lr", action="store_true", help="disable cosine annealing")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("stats", parents=[_common()], help="pooled phoneme density of a manifest")
    p.add_argument("--manifest", default="train.jsonl")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("sample", parents=[_common()], help="density-balanced selection")
    p.add_argument("--manifest", default="train.jsonl")
    p.add_argument("--alpha", type=float, default=atk.AttackConfig.alpha)
    p.add_argument("--k", type=int, default=atk.AttackConfig.k_instances)
    p.add_argument("--selected", default="selected.jsonl")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("attack", parents=[_common()], help="optimize a universal noise clip")
    p.add_argument("--model", default="model.json")
    p.add_argument("--manifest", default="train.jsonl")
    p.add_argument("--noise", default="noise.wav")
    p.add_argument("--report", default="attack_report.json")
    _add_attack_flags(p)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("eval", parents=[_common()], help="score noise on held-out utterances")
    p.add_argument("--model", default="model.json")
    p.add_argument("--manifest", default="test.jsonl")
    p.add_argument("--noise", default=None)
    p.add_argument("--gaussian", action="store_true", help="add a Gaussian baseline row")
    p.add_argument("--transfer", action="store_true", help="noise was optimized on another model")
    p.add_argument("--threshold", type=float, default=DEFAULT_SUCCESS_THRESHOLD)
    p.add_argument("--epsilon", type=float, default=atk.AttackConfig.epsilon)
    p.add_argument("--l-delta-p", dest="l_delta_p", type=float, default=atk.AttackConfig.l_delta_p)
    p.add_argument("--report", default="eval_report.json")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", parents=[_common()], help="2x2 PDBS x SPNI grid")
    p.add_argument("--model", default="model.json")
    p.add_argument("--manifest", default="train.jsonl")
    p.add_argument("--test-manifest", default="test.jsonl")
    p.add_argument("--n-seeds", type=int, default=3)
    p.add_argument("--threshold", type=float, default=DEFAULT_SUCCESS_THRESHOLD)
    p.add_argument("--report", default="ablation.json")
    _add_attack_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("spectrogram", parents=[_common()], help="export a PGM spectrogram")
    p.add_argument("--audio", required=True)
    p.add_argument("--noise", default=None, help="mix this clip in (aligned) before export")
    p.add_argument("--image", default="spectrogram.pgm")
    p.set_defaults(func=cmd_spectrogram)
    return parser


def replay_argv(command: str, snapshot: dict, out=None) -> list[str]:
    """Rebuild the argv of a recorded run from its ``config.json`` entry."""
    sub = next(a for a in build_parser()._actions if isinstance(a, argparse._SubParsersAction))
    argv = [command]
    for action in sub.choices[command]._actions:
        if action.dest in ("help", "command") or action.dest not in snapshot:
            continue
        value = snapshot[action.dest]
        if action.dest == "out" and out is not None:
            value = out
        flag = action.option_strings[0]
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            if value != action.default:
                argv.append(flag)
        elif value is None:
            continue
        elif isinstance(value, (list, tuple)):
            argv += [flag, *map(str, value)]
        else:
            argv += [flag, repr(value) if isinstance(value, float) else str(value)]
    return argv


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        _record_config(args.out, args)
        return args.func(args)
    except (CorpusError, ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
