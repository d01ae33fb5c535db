"""Command-line interface.

Subcommands: augment, mask-dump, gop, text-aug, gop-aug, validate.
Machine outputs are JSONL/CSV on stdout or files; human summaries go to
stderr. Exit codes: 0 success, 1 runtime/data error, 2 usage/config error.
Seed precedence: flag > config file > BLENDAUG_SEED env var > 0.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python 3.10
    import tomli as tomllib

from . import align, closedict, gopfeat, mask, pipeline
from .blender import FRAME_WEIGHTED, LABEL_MODES
from .closedict import CONFUSION_WEIGHTED, DONOR_WEIGHTINGS

ENV_SEED = "BLENDAUG_SEED"

CLI_TEMPLATES = {
    "smooth-overlay": mask.SMOOTH_OVERLAY,
    "cutmix": mask.CUTMIX,
    "smooth-concat": mask.SMOOTH_CONCATENATION,
    "gaussian": mask.SMOOTH_GAUSSIAN_OVERLAY,
    "cutpaste": mask.CUTPASTE,
}


class UsageError(Exception):
    """Configuration problem; maps to exit code 2."""


def _load_toml(path) -> dict:
    try:
        with open(path, "rb") as handle:
            return tomllib.load(handle)
    except FileNotFoundError:
        raise UsageError(f"config file does not exist: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"config file {path}: {exc}") from None


def _resolve_seed(flag_value, file_value) -> int:
    if flag_value is not None:
        return flag_value
    if file_value is not None:
        return int(file_value)
    env_value = os.environ.get(ENV_SEED)
    if env_value is not None:
        try:
            return int(env_value)
        except ValueError:
            raise UsageError(f"{ENV_SEED} must be an integer, got {env_value!r}") from None
    return 0


def _require_path(value, field: str) -> Path:
    if value is None:
        raise UsageError(f"missing {field} path (set [paths].{field} in the config or --{field})")
    path = Path(value)
    if not path.exists():
        raise UsageError(f"{field} path does not exist: {path}")
    return path


def _config_sections(args) -> tuple[dict, dict]:
    """([paths], [augment]) tables of the --config file, if one was given."""
    if getattr(args, "config", None):
        config_file = _load_toml(args.config)
        return config_file.get("paths", {}), config_file.get("augment", {})
    return {}, {}


def _first_set(*values):
    """First value that is not None; 0 and empty strings count as set."""
    for value in values:
        if value is not None:
            return value
    return None


def _load_close_dict(dict_path, inventory_path):
    if inventory_path is not None:
        inventory = closedict.load_inventory(_require_path(inventory_path, "inventory"))
    else:
        inventory = closedict.default_inventory()
    return closedict.load_dict(_require_path(dict_path, "dict"), inventory)


def _template_params(template: str, args) -> dict:
    """Only the parameters the user actually set; defaults stay in mask."""
    params = {}
    if template == mask.SMOOTH_OVERLAY and args.lam is not None:
        params["lam0"] = args.lam
    if template == mask.SMOOTH_GAUSSIAN_OVERLAY:
        if args.depth is not None:
            params["depth"] = args.depth
        if args.sigma_frac is not None:
            params["sigma_frac"] = args.sigma_frac
    if template == mask.SMOOTH_CONCATENATION and args.crossfade_frac is not None:
        params["crossfade_frac"] = args.crossfade_frac
    return params


def _add_mask_param_flags(parser) -> None:
    parser.add_argument("--lambda", dest="lam", type=float, default=None,
                        help="constant mixing factor for smooth-overlay")
    parser.add_argument("--a", "--depth", dest="depth", type=float, default=None,
                        help="gaussian dip depth")
    parser.add_argument("--sigma-frac", type=float, default=None,
                        help="gaussian width divisor: sigma = window / sigma_frac")
    parser.add_argument("--crossfade-frac", type=float, default=None,
                        help="crossfade fraction for smooth-concat")


def cmd_augment(args) -> int:
    paths, options = _config_sections(args)

    dict_path = args.dict_path or paths.get("dict")
    manifest_path = args.manifest or paths.get("manifest")
    ctm_path = args.ctm or paths.get("ctm")
    output_dir = args.output_dir or paths.get("output_dir")
    if output_dir is None:
        raise UsageError("missing output_dir (set [paths].output_dir in the config or --output-dir)")

    close = _load_close_dict(dict_path, args.inventory or paths.get("inventory"))
    corpus = pipeline.load_corpus(
        _require_path(manifest_path, "manifest"), _require_path(ctm_path, "ctm")
    )

    mask_name = args.mask or options.get("mask", "pool")
    if mask_name == "pool":
        pool = tuple(
            pipeline.MaskChoice(template, _template_params(template, args))
            for template in mask.RANDOM_POOL
        )
    elif mask_name in CLI_TEMPLATES:
        template = CLI_TEMPLATES[mask_name]
        pool = (pipeline.MaskChoice(template, _template_params(template, args)),)
    else:
        raise UsageError(f"unknown mask {mask_name!r} (choose pool or one of {sorted(CLI_TEMPLATES)})")
    for choice in pool:
        try:  # surface bad template parameters before touching the corpus
            mask.get_property(choice.template, 1000, 1000, choice.params)
        except ValueError as exc:
            raise UsageError(f"mask {choice.template}: {exc}") from None

    try:
        config = pipeline.AugConfig(
            seed=_resolve_seed(args.seed, options.get("seed")),
            output_dir=Path(output_dir),
            close=close,
            candidates_per_utterance=_first_set(
                args.candidates_per_utterance, options.get("candidates_per_utterance"), 1
            ),
            mask_pool=pool,
            label_mode=args.label_mode or options.get("label_mode", FRAME_WEIGHTED),
            donor_weighting=args.donor_weighting
            or options.get("donor_weighting", CONFUSION_WEIGHTED),
            min_segment_frames=_first_set(
                args.min_segment_frames, options.get("min_segment_frames"), 8
            ),
            workers=_first_set(args.workers, options.get("workers"), 1),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(
        f"augment: seed={config.seed} masks={[c.template for c in config.mask_pool]} "
        f"label_mode={config.label_mode} donor_weighting={config.donor_weighting} "
        f"candidates={config.candidates_per_utterance} workers={config.workers} "
        f"output={config.output_dir}",
        file=sys.stderr,
    )

    summary = pipeline.run(config, corpus)
    by_mask = ", ".join(f"{t}: {n}" for t, n in sorted(summary.produced_by_template.items()))
    by_reason = ", ".join(f"{r}: {n}" for r, n in sorted(summary.skipped_by_reason.items()))
    print(f"utterances processed: {summary.n_utterances}", file=sys.stderr)
    print(
        f"samples produced:     {summary.n_produced} "
        f"(label 0: {summary.produced_by_label[0]}, label 1: {summary.produced_by_label[1]})",
        file=sys.stderr,
    )
    print(f"  by mask:            {by_mask or '-'}", file=sys.stderr)
    print(f"candidates skipped:   {sum(summary.skipped_by_reason.values())} "
          f"({by_reason or '-'})", file=sys.stderr)
    print(f"manifest: {summary.manifest_path}", file=sys.stderr)
    return 0


def cmd_mask_dump(args) -> int:
    template = CLI_TEMPLATES[args.template]
    try:
        prop = mask.get_property(template, args.t, args.l, _template_params(template, args))
    except (mask.SegmentTooShortError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    text = mask.dump_mask(prop)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _iter_ctm_by_utterance(ctm_path):
    with open(ctm_path, "r", encoding="utf-8") as handle:
        intervals = align.parse_ctm(handle)
    by_utt: dict[str, list] = {}
    for interval in intervals:
        by_utt.setdefault(interval.utt_id, []).append(interval)
    return by_utt


def _posteriors_for(posterior_path: Path, utt_id: str, n_utts: int):
    if posterior_path.is_dir():
        candidate = posterior_path / f"{utt_id}.csv"
        if not candidate.is_file():
            raise ValueError(f"no posterior file for utterance {utt_id!r}: {candidate}")
        return gopfeat.read_posteriors(candidate)
    if n_utts > 1:
        raise UsageError(
            "posteriors must be a directory of <utt_id>.csv files when the CTM has several utterances"
        )
    return gopfeat.read_posteriors(posterior_path)


def cmd_gop(args) -> int:
    paths, _ = _config_sections(args)
    posterior_path = _require_path(args.posteriors or paths.get("posteriors"), "posteriors")
    by_utt = _iter_ctm_by_utterance(_require_path(args.ctm or paths.get("ctm"), "ctm"))
    sink = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for utt_id in sorted(by_utt):
            matrix = _posteriors_for(posterior_path, utt_id, len(by_utt))
            for phone_index, interval in enumerate(by_utt[utt_id]):
                span = align.to_span(interval, args.frame_rate)
                if span.end > matrix.frames:
                    raise ValueError(
                        f"{utt_id}/{interval.phone}: alignment exceeds posterior frames "
                        f"({span.end} > {matrix.frames})"
                    )
                vector = gopfeat.gop_vector(matrix, interval.phone, (span.start, span.end))
                sink.write(json.dumps({
                    "utt": utt_id,
                    "phone_index": phone_index,
                    "canonical": interval.phone,
                    "layout": gopfeat.GOP_LAYOUT,
                    "values": [float(v) for v in vector.values],
                }) + "\n")
    finally:
        if sink is not sys.stdout:
            sink.close()
    return 0


def cmd_text_aug(args) -> int:
    paths, options = _config_sections(args)
    close = _load_close_dict(
        args.dict_path or paths.get("dict"), args.inventory or paths.get("inventory")
    )
    corpus = pipeline.load_corpus(
        _require_path(args.manifest or paths.get("manifest"), "manifest"),
        _require_path(args.ctm or paths.get("ctm"), "ctm"),
    )
    seed = _resolve_seed(args.seed, options.get("seed"))
    sink = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    skipped = 0
    try:
        for utt_id in sorted(corpus.utterances):
            record = corpus.utterances[utt_id]
            rng = np.random.Generator(np.random.PCG64(pipeline.derive_seed(seed, utt_id)))
            phones = [iv.phone for iv in record.phones]
            labels = [iv.score for iv in record.phones]
            try:
                result = gopfeat.text_augment(phones, labels, close, rng, args.close_ratio)
            except ValueError as exc:
                print(f"warning: {utt_id}: {exc}", file=sys.stderr)
                skipped += 1
                continue
            sink.write(json.dumps({
                "utt_id": utt_id,
                "position": result.position,
                "original": result.original,
                "donor": result.donor,
                "label": result.swap_label,
                "phones": list(result.phones),
                "labels": list(result.labels),
            }) + "\n")
    finally:
        if sink is not sys.stdout:
            sink.close()
    if skipped:
        print(f"skipped {skipped} utterance(s) with no augmentation candidate", file=sys.stderr)
    return 0


def _read_gop_jsonl(path) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: line {line_no}: invalid JSON: {exc}") from None
            for key in ("canonical", "values"):
                if key not in obj:
                    raise ValueError(f"{path}: line {line_no}: missing key {key!r}")
            records.append(obj)
    return records


def cmd_gop_aug(args) -> int:
    paths, options = _config_sections(args)
    close = _load_close_dict(
        args.dict_path or paths.get("dict"), args.inventory or paths.get("inventory")
    )
    bank = gopfeat.GopBank()
    for obj in _read_gop_jsonl(_require_path(args.bank, "bank")):
        bank.add(gopfeat.GopVector(np.array(obj["values"], dtype=np.float64), obj["canonical"]))
    candidates = _read_gop_jsonl(_require_path(args.gop, "gop"))
    rng = np.random.Generator(np.random.PCG64(_resolve_seed(args.seed, options.get("seed"))))
    sink = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    skipped = 0
    try:
        for obj in candidates:
            vector = gopfeat.GopVector(np.array(obj["values"], dtype=np.float64), obj["canonical"])
            try:
                donor_vector, label = gopfeat.gop_augment_with_retries(
                    bank, vector, vector.canonical, close, rng,
                    args.close_ratio, retries=args.retries,
                )
            except (gopfeat.EmptyBankError, ValueError) as exc:
                print(f"warning: {obj.get('utt', '?')}: {exc}", file=sys.stderr)
                skipped += 1
                continue
            sink.write(json.dumps({
                "utt": obj.get("utt"),
                "phone_index": obj.get("phone_index"),
                "canonical": vector.canonical,
                "donor": donor_vector.canonical,
                "label": label,
                "layout": gopfeat.GOP_LAYOUT,
                "values": [float(v) for v in donor_vector.values],
            }) + "\n")
    finally:
        if sink is not sys.stdout:
            sink.close()
    if skipped:
        print(f"skipped {skipped} candidate(s) with exhausted donor banks", file=sys.stderr)
    return 0


def cmd_validate(args) -> int:
    checks = []
    if args.ctm:
        def check_ctm(path=Path(args.ctm)):
            with open(path, "r", encoding="utf-8") as handle:
                return len(align.parse_ctm(handle))
        checks.append(("ctm", args.ctm, check_ctm))
    if args.dict_path:
        def check_dict(path=Path(args.dict_path)):
            inventory = (
                closedict.load_inventory(args.inventory)
                if args.inventory
                else closedict.default_inventory()
            )
            loaded = closedict.load_dict(path, inventory)
            return sum(len(v) for v in loaded.entries.values())
        checks.append(("dict", args.dict_path, check_dict))
    if args.posteriors:
        def check_posteriors(path=Path(args.posteriors)):
            return gopfeat.read_posteriors(path).frames
        checks.append(("posteriors", args.posteriors, check_posteriors))
    if args.manifest and args.ctm:
        def check_corpus():
            corpus = pipeline.load_corpus(Path(args.manifest), Path(args.ctm))
            return len(corpus.utterances)
        checks.append(("manifest", args.manifest, check_corpus))
    elif args.manifest:
        def check_manifest(path=Path(args.manifest)):
            count = 0
            with open(path, "r", encoding="utf-8") as handle:
                for line_no, line in enumerate(handle, start=1):
                    text = line.strip()
                    if not text:
                        continue
                    obj = json.loads(text)
                    for key in ("utt_id", "wav", "scores"):
                        if key not in obj:
                            raise pipeline.ManifestFormatError(line_no, f"missing key {key!r}")
                    count += 1
            return count
        checks.append(("manifest", args.manifest, check_manifest))
    if args.aug_manifest:
        def check_aug(path=Path(args.aug_manifest)):
            count = 0
            with open(path, "r", encoding="utf-8") as handle:
                for line_no, line in enumerate(handle, start=1):
                    text = line.strip()
                    if not text:
                        continue
                    pipeline.validate_sample_dict(json.loads(text), line_no)
                    count += 1
            return count
        checks.append(("aug-manifest", args.aug_manifest, check_aug))

    if not checks:
        raise UsageError(
            "nothing to validate: pass --ctm, --manifest, --dict, --posteriors, or --aug-manifest"
        )
    failed = False
    for kind, path, check in checks:
        try:
            count = check()
        except (ValueError, OSError) as exc:
            print(f"{kind} {path}: INVALID: {exc}", file=sys.stderr)
            failed = True
        else:
            print(f"{kind} {path}: OK ({count} records)", file=sys.stderr)
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blendaug",
        description="Phoneme-level mispronunciation data augmentation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_aug = sub.add_parser("augment", help="run the blending pipeline over a corpus")
    p_aug.add_argument("--config", help="TOML config file; flags override its values")
    p_aug.add_argument("--seed", type=int, default=None)
    p_aug.add_argument("--dict", dest="dict_path", default=None, help="close-pair TSV")
    p_aug.add_argument("--inventory", default=None, help="phone inventory file")
    p_aug.add_argument("--manifest", default=None, help="corpus manifest JSONL")
    p_aug.add_argument("--ctm", default=None, help="phoneme alignment CTM")
    p_aug.add_argument("--output-dir", default=None)
    p_aug.add_argument("--mask", default=None,
                       help="'pool' (default) or one of %s" % ", ".join(sorted(CLI_TEMPLATES)))
    p_aug.add_argument("--label-mode", choices=LABEL_MODES, default=None)
    p_aug.add_argument("--donor-weighting", choices=DONOR_WEIGHTINGS, default=None)
    p_aug.add_argument("--candidates-per-utterance", type=int, default=None)
    p_aug.add_argument("--min-segment-frames", type=int, default=None)
    p_aug.add_argument("--workers", type=int, default=None)
    _add_mask_param_flags(p_aug)
    p_aug.set_defaults(func=cmd_augment)

    p_dump = sub.add_parser("mask-dump", help="emit a mask curve as CSV")
    p_dump.add_argument("template", choices=sorted(CLI_TEMPLATES))
    p_dump.add_argument("--t", type=int, required=True, help="candidate frame count")
    p_dump.add_argument("--l", type=int, required=True, help="donor frame count")
    p_dump.add_argument("--out", default=None, help="output file (default stdout)")
    _add_mask_param_flags(p_dump)
    p_dump.set_defaults(func=cmd_mask_dump)

    p_gop = sub.add_parser("gop", help="compute 84-dim GOP vectors from posterior CSVs")
    p_gop.add_argument("--config", help="TOML config supplying [paths] values")
    p_gop.add_argument("--posteriors", default=None,
                       help="posterior CSV file, or directory of <utt_id>.csv")
    p_gop.add_argument("--ctm", default=None)
    p_gop.add_argument("--frame-rate", type=int, default=100,
                       help="posterior frames per second (default 100)")
    p_gop.add_argument("--out", default=None, help="output JSONL (default stdout)")
    p_gop.set_defaults(func=cmd_gop)

    p_text = sub.add_parser("text-aug", help="swap one phone per utterance at text level")
    p_text.add_argument("--config", help="TOML config supplying [paths] values")
    p_text.add_argument("--manifest", default=None)
    p_text.add_argument("--ctm", default=None)
    p_text.add_argument("--dict", dest="dict_path", default=None)
    p_text.add_argument("--inventory", default=None)
    p_text.add_argument("--close-ratio", type=float, default=0.5)
    p_text.add_argument("--seed", type=int, default=None)
    p_text.add_argument("--out", default=None)
    p_text.set_defaults(func=cmd_text_aug)

    p_gaug = sub.add_parser("gop-aug", help="replace GOP vectors from a donor bank")
    p_gaug.add_argument("--config", help="TOML config supplying [paths] values")
    p_gaug.add_argument("--bank", required=True, help="bank JSONL (output of 'gop' on good data)")
    p_gaug.add_argument("--gop", required=True, help="candidate vectors JSONL")
    p_gaug.add_argument("--dict", dest="dict_path", default=None)
    p_gaug.add_argument("--inventory", default=None)
    p_gaug.add_argument("--close-ratio", type=float, default=0.5)
    p_gaug.add_argument("--retries", type=int, default=5)
    p_gaug.add_argument("--seed", type=int, default=None)
    p_gaug.add_argument("--out", default=None)
    p_gaug.set_defaults(func=cmd_gop_aug)

    p_val = sub.add_parser("validate", help="schema-check corpus and feature files")
    p_val.add_argument("--ctm", default=None)
    p_val.add_argument("--manifest", default=None)
    p_val.add_argument("--dict", dest="dict_path", default=None)
    p_val.add_argument("--inventory", default=None)
    p_val.add_argument("--posteriors", default=None)
    p_val.add_argument("--aug-manifest", default=None,
                       help="output manifest produced by 'augment'")
    p_val.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, LookupError, OSError, pipeline.RunError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
