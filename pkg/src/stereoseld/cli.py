"""Batch command-line front end.

Subcommands::

    stereoseld extract         features + targets for every audio/metadata pair
    stereoseld acs-expand      write channel-swapped copies of every clip
    stereoseld fit-normalizer  fit distance statistics over the metadata
    stereoseld score PRED REF  score prediction CSVs against reference CSVs

Configuration comes from defaults, then a ``key=value`` file (``--config``),
then ``STEREOSELD_<KEY>`` environment variables, then command-line flags.
Exit codes: 0 success, 1 partial failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import hashlib
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import augment as aug
from .dsp_core import StftParams
from .labels import DistanceNormalizer, encode_targets, fit_normalizer, label_frame_count
from .metrics import accumulate, frames_from_events, summarize
from .stereo_features import FEATURE_SETS, FeatureParams, assemble_stack
from .wave_io import (
    _fmt,
    read_metadata_csv,
    read_metadata_rows,
    read_wav,
    resample_if_needed,
    wrap_azimuth,
    write_tensor,
    write_wav,
)

ENV_PREFIX = "STEREOSELD_"
AUGMENT_MODES = ("none", "ITFM", "FAFS", "ACS-offline")
ACS_SUFFIX = "_acs"

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    dataset_root: str = "."
    output_root: str = "out"
    feature_set: str = "MSIC"
    augment_mode: str = "none"
    realizations: int = 1
    seed: int = 0
    workers: int = os.cpu_count() or 1
    # dsp
    sample_rate: int = 24000
    fft_size: int = 1024
    hop: int = 300
    n_mels: int = 96
    f_min: float = 0.0
    f_max: float = 0.0  # 0 means Nyquist
    mel_scale: str = "slaney"
    log_floor: float = 1e-10
    coherence_lambda: float = 0.8
    eps: float = 1e-8
    coherence_eps: float = 1e-10
    # labels
    distance_unit: str = "auto"
    n_classes: int = 13
    n_tracks: int = 3
    label_frames: int = 0  # 0 derives the count from the clip length
    divide_by: str = "max"
    normalizer: str = ""
    # metrics
    average: str = "macro"
    doa_threshold: float = 20.0
    dist_threshold: float = 1.0
    # augmentation
    filteraug_min_bands: int = 3
    filteraug_max_bands: int = 6
    filteraug_min_gain_db: float = -6.0
    filteraug_max_gain_db: float = 6.0
    freqshift_max_bins: int = 10
    itfm_max_time_masks: int = 2
    itfm_max_time_width: int = 40
    itfm_max_freq_masks: int = 2
    itfm_max_freq_width: int = 16
    itfm_rectangles: bool = False

    def validate(self):
        if self.feature_set not in FEATURE_SETS:
            raise UsageError(f"feature_set must be one of {FEATURE_SETS}, got {self.feature_set!r}")
        if self.augment_mode not in AUGMENT_MODES:
            raise UsageError(f"augment_mode must be one of {AUGMENT_MODES}, got {self.augment_mode!r}")
        if self.workers < 1:
            raise UsageError("workers must be >= 1")
        if self.realizations < 1:
            raise UsageError("realizations must be >= 1")
        if self.mel_scale not in ("slaney", "htk"):
            raise UsageError(f"mel_scale must be slaney or htk, got {self.mel_scale!r}")
        if self.distance_unit not in ("m", "cm", "auto"):
            raise UsageError(f"distance_unit must be m, cm or auto, got {self.distance_unit!r}")
        if self.divide_by not in ("max", "absmax"):
            raise UsageError(f"divide_by must be max or absmax, got {self.divide_by!r}")
        if self.average not in ("macro", "micro"):
            raise UsageError(f"average must be macro or micro, got {self.average!r}")
        try:
            self.feature_params()
            self.augment_config()
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        return self

    def feature_params(self) -> FeatureParams:
        return FeatureParams(
            sample_rate=self.sample_rate,
            stft=StftParams(fft_size=self.fft_size, hop=self.hop, win_length=self.fft_size),
            n_mels=self.n_mels,
            f_min=self.f_min,
            f_max=self.f_max or None,
            htk=self.mel_scale == "htk",
            log_floor=self.log_floor,
            coherence_lambda=self.coherence_lambda,
            eps=self.eps,
            coherence_eps=self.coherence_eps,
        )

    def augment_config(self) -> aug.AugmentConfig:
        return aug.AugmentConfig.from_mapping(asdict(self))

    def normalizer_path(self) -> Path:
        return Path(self.normalizer) if self.normalizer else Path(self.output_root) / "normalizer.txt"

    def dump(self) -> str:
        return "\n".join(f"{k}={v}" for k, v in asdict(self).items())


_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _coerce(key: str, value: str):
    typ = _TYPES[key]
    try:
        if typ == "int":
            return int(value)
        if typ == "float":
            return float(value)
        if typ == "bool":
            v = value.strip().lower()
            if v not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise ValueError(value)
            return v in ("1", "true", "yes", "on")
    except ValueError:
        raise UsageError(f"invalid value for {key}: {value!r}") from None
    return value


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep:
            raise UsageError(f"config line {lineno}: expected key=value, got {line!r}")
        if key not in _TYPES:
            raise UsageError(f"config line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, val.strip())
    return values


def load_config(config_file=None, overrides=None, environ=None) -> PipelineConfig:
    """Layer defaults, config file, environment and explicit overrides."""
    environ = os.environ if environ is None else environ
    values = {}
    if config_file:
        try:
            values.update(parse_config_text(Path(config_file).read_text()))
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}") from None
    for key in _TYPES:
        env = environ.get(ENV_PREFIX + key.upper())
        if env is not None:
            values[key] = _coerce(key, env)
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        key = key.replace("-", "_")
        if key not in _TYPES:
            raise UsageError(f"unknown config key {key!r}")
        values[key] = _coerce(key, val) if isinstance(val, str) else val
    return PipelineConfig(**values).validate()


# ---------------------------------------------------------------------------
# Dataset scanning
# ---------------------------------------------------------------------------

def _stems(directory: Path, suffix: str) -> dict:
    if not directory.is_dir():
        return {}
    return {p.relative_to(directory).with_suffix("").as_posix(): p
            for p in sorted(directory.rglob(f"*{suffix}"))}


def scan_dataset(root) -> tuple[list, list]:
    """Paired ``(stem, wav, csv)`` triples and stems missing a partner."""
    root = Path(root)
    wavs = _stems(root / "audio", ".wav")
    csvs = _stems(root / "metadata", ".csv")
    pairs = [(s, wavs[s], csvs[s]) for s in sorted(wavs.keys() & csvs.keys())]
    missing = sorted(wavs.keys() ^ csvs.keys())
    return pairs, missing


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _shape(arr) -> str:
    return "x".join(str(n) for n in arr.shape)


# ---------------------------------------------------------------------------
# extract
# ---------------------------------------------------------------------------

def _write_pair(out_root: Path, name: str, feats, targets) -> tuple:
    fpath = out_root / "features" / f"{name}.npy"
    tpath = out_root / "targets" / f"{name}.npy"
    fpath.parent.mkdir(parents=True, exist_ok=True)
    tpath.parent.mkdir(parents=True, exist_ok=True)
    write_tensor(fpath, feats)
    write_tensor(tpath, targets)
    return (name, _shape(feats), _shape(targets), _sha256(fpath), _sha256(tpath))


def extract_clip(job):
    """Process one clip; returns ``(stem, manifest_rows, error)``."""
    cfg, dn, stem, wav_path, csv_path = job
    try:
        params = cfg.feature_params()
        clip = resample_if_needed(read_wav(wav_path), cfg.sample_rate)
        events = read_metadata_csv(csv_path, cfg.distance_unit)
        n_frames = cfg.label_frames or label_frame_count(clip.n_samples, clip.sample_rate_hz)
        out_root = Path(cfg.output_root)

        variants = [(stem, clip, events)]
        if cfg.augment_mode == "ACS-offline" and not stem.endswith(ACS_SUFFIX):
            swapped, mirrored = aug.acs(clip, events)
            variants.append((stem + ACS_SUFFIX, swapped, mirrored))

        rows = []
        pipeline = None
        if cfg.augment_mode in aug.AUGMENT_MODES:
            pipeline = aug.compose_pipeline(cfg.augment_mode, cfg.augment_config())
        for name, c, ev in variants:
            feats = assemble_stack(c, cfg.feature_set, params)
            targets = encode_targets(ev, dn, n_frames, cfg.n_tracks, cfg.n_classes)
            rows.append(_write_pair(out_root, name, feats, targets))
            if pipeline is not None:
                for r in range(cfg.realizations):
                    augmented = pipeline(feats, name, r)
                    rows.append(_write_pair(out_root, f"{name}__{cfg.augment_mode.lower()}{r}",
                                            augmented, targets))
        return stem, rows, None
    except Exception as exc:  # reported per stem, the batch continues
        return stem, [], f"{type(exc).__name__}: {exc}"


def _collect_distances(cfg: PipelineConfig, csv_paths) -> np.ndarray:
    dists = [e.distance_m for p in csv_paths for e in read_metadata_csv(p, cfg.distance_unit)]
    return np.asarray(dists, dtype=np.float64)


def cmd_extract(cfg: PipelineConfig, out=sys.stdout, err=sys.stderr) -> int:
    pairs, missing = scan_dataset(cfg.dataset_root)
    out_root = Path(cfg.output_root)
    out_root.mkdir(parents=True, exist_ok=True)
    for stem in missing:
        print(f"MISSING PAIR {stem}", file=err)

    dn = None
    if pairs:
        npath = cfg.normalizer_path()
        if npath.exists():
            dn = DistanceNormalizer.load(npath)
            dn = replace(dn, divide_by=cfg.divide_by)
        else:
            good = []
            for _, _, c in pairs:
                try:
                    read_metadata_csv(c, cfg.distance_unit)
                    good.append(c)
                except ValueError as exc:
                    print(f"BAD METADATA {c}: {exc}", file=err)
            try:
                dn = fit_normalizer(_collect_distances(cfg, good), cfg.divide_by)
            except ValueError as exc:
                print(f"error: cannot fit distance normalizer: {exc}", file=err)
                return EXIT_PARTIAL
            npath.parent.mkdir(parents=True, exist_ok=True)
            dn.save(npath)

    jobs = [(cfg, dn, s, w, c) for s, w, c in pairs]
    if cfg.workers == 1 or len(jobs) <= 1:
        results = [extract_clip(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(extract_clip, jobs))

    rows, failed = [], []
    for stem, r, error in results:
        if error:
            failed.append(stem)
            print(f"FAILED {stem}: {error}", file=err)
        rows.extend(r)
    rows.sort()
    with open(out_root / "manifest.tsv", "w", newline="\n") as f:
        f.write("stem\tfeature_shape\ttarget_shape\tfeature_sha256\ttarget_sha256\n")
        for row in rows:
            f.write("\t".join(row) + "\n")

    n_fail = len(failed) + len(missing)
    print(f"{len(pairs) - len(failed)} clips extracted, {n_fail} failed", file=out)
    return EXIT_OK if n_fail == 0 else EXIT_PARTIAL


# ---------------------------------------------------------------------------
# acs-expand
# ---------------------------------------------------------------------------

def mirror_metadata_rows(rows):
    """Negate the azimuth column of raw CSV rows, leaving other fields verbatim."""
    out = []
    for row in rows:
        row = list(row)
        az = wrap_azimuth(float(row[3]))
        row[3] = _fmt(aug.negate_azimuth(az))
        out.append(row)
    return out


def cmd_acs_expand(cfg: PipelineConfig, out=sys.stdout, err=sys.stderr) -> int:
    root = Path(cfg.dataset_root)
    pairs, missing = scan_dataset(root)
    for stem in missing:
        print(f"MISSING PAIR {stem}", file=err)
    stems = {s for s, _, _ in pairs}
    written = skipped = 0
    failed = []
    for stem, wav_path, csv_path in pairs:
        if stem.endswith(ACS_SUFFIX):
            continue
        if stem + ACS_SUFFIX in stems:
            skipped += 1
            continue
        try:
            read_metadata_csv(csv_path, cfg.distance_unit)  # validate before writing
            clip = read_wav(wav_path)
            rows = mirror_metadata_rows(read_metadata_rows(csv_path))
            swapped, _ = aug.acs(clip, [])
            write_wav(wav_path.with_name(wav_path.stem + ACS_SUFFIX + ".wav"), swapped)
            with open(csv_path.with_name(csv_path.stem + ACS_SUFFIX + ".csv"), "w") as f:
                f.writelines(",".join(r) + "\n" for r in rows)
            written += 1
        except Exception as exc:
            failed.append(stem)
            print(f"FAILED {stem}: {type(exc).__name__}: {exc}", file=err)
    print(f"{written} clips mirrored, {skipped} already present, {len(failed)} failed", file=out)
    return EXIT_OK if not failed and not missing else EXIT_PARTIAL


# ---------------------------------------------------------------------------
# fit-normalizer
# ---------------------------------------------------------------------------

def cmd_fit_normalizer(cfg: PipelineConfig, out=sys.stdout, err=sys.stderr) -> int:
    csvs = sorted(_stems(Path(cfg.dataset_root) / "metadata", ".csv").values())
    try:
        d = _collect_distances(cfg, csvs)
        dn = fit_normalizer(d, cfg.divide_by)
    except ValueError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_PARTIAL
    path = cfg.normalizer_path()
    path.parent.mkdir(parents=True, exist_ok=True)
    dn.save(path)
    print(f"mean={dn.mean_m:.6f} std={dn.std_m:.6f} max_z={dn.max_z:.6f} "
          f"min_distance={d.min():.4f} max_distance={d.max():.4f} n={d.size}", file=out)
    print(f"wrote {path}", file=out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# score
# ---------------------------------------------------------------------------

def score_dirs(pred_dir, ref_dir, cfg: PipelineConfig, err=sys.stderr):
    refs = _stems(Path(ref_dir), ".csv")
    preds = _stems(Path(pred_dir), ".csv")
    for stem in sorted(preds.keys() - refs.keys()):
        print(f"warning: prediction {stem} has no reference; ignored", file=err)

    def frames():
        for stem in sorted(refs):
            ref_events = read_metadata_csv(refs[stem], cfg.distance_unit)
            if stem in preds:
                pred_events = read_metadata_csv(preds[stem], cfg.distance_unit)
            else:
                print(f"warning: no prediction for {stem}; scored as empty", file=err)
                pred_events = []
            yield from frames_from_events(pred_events, ref_events, stem)

    counts = accumulate(frames(), cfg.doa_threshold, cfg.dist_threshold)
    return summarize(counts, cfg.average)


def cmd_score(pred_dir, ref_dir, cfg: PipelineConfig, output=None,
              out=sys.stdout, err=sys.stderr) -> int:
    try:
        report = score_dirs(pred_dir, ref_dir, cfg, err)
    except ValueError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_PARTIAL
    text = report.to_text() + "\n\n[metrics]\n" + report.to_keyvalue() + "\n"
    out.write(text)
    if output:
        Path(output).write_text(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value configuration file")
    common.add_argument("--print-config", action="store_true",
                        help="print the effective configuration and exit")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any configuration key")
    for flag in ("dataset-root", "output-root", "feature-set", "augment-mode",
                 "realizations", "seed", "workers", "normalizer", "distance-unit",
                 "divide-by", "average"):
        common.add_argument(f"--{flag}", dest=flag.replace("-", "_"))

    parser = argparse.ArgumentParser(prog="stereoseld", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("extract", parents=[common], help="extract features and targets")
    sub.add_parser("acs-expand", parents=[common], help="mirror the corpus by channel swapping")
    sub.add_parser("fit-normalizer", parents=[common], help="fit the distance normaliser")
    p = sub.add_parser("score", parents=[common], help="score predictions against references")
    p.add_argument("pred_dir")
    p.add_argument("ref_dir")
    p.add_argument("--output", help="also write the report to this file")
    return parser


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK

    overrides = {k: getattr(args, k) for k in _TYPES if getattr(args, k, None) is not None}
    try:
        for item in args.set:
            key, sep, val = item.partition("=")
            if not sep:
                raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
            overrides[key.strip().replace("-", "_")] = val.strip()
        cfg = load_config(args.config, overrides)
    except UsageError as exc:
        print(f"usage error: {exc}", file=err)
        return EXIT_USAGE

    if args.print_config:
        print(cfg.dump(), file=out)
        return EXIT_OK
    if args.command == "extract":
        return cmd_extract(cfg, out, err)
    if args.command == "acs-expand":
        return cmd_acs_expand(cfg, out, err)
    if args.command == "fit-normalizer":
        return cmd_fit_normalizer(cfg, out, err)
    return cmd_score(args.pred_dir, args.ref_dir, cfg, args.output, out, err)


if __name__ == "__main__":
    sys.exit(main())
