"""Command-line entry point.

Every subcommand is non-interactive, reads frames as numbered image files
(frame_0000.ppm, ...), writes results next to a manifest.json recording
the resolved configuration, input and output checksums, seed and wall
time, and exits with a documented code:

    0  success
    1  a checked property failed
    2  usage error (bad flags, bad config, missing or empty inputs)
    3  numeric failure (non-finite values)

Options resolve in the order: command-line flag, FQT_SEED environment
variable (seed only), config file, built-in default. The config file is
plain ``key = value`` text; `#` starts a comment.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import frameio, selftest
from . import weights as weight_bank
from .attention import SCHEMES
from .compressor import PRESETS, DegradeConfig, degrade_sequence
from .dct import frame_to_spectral, pad_edge, spectral_to_frame, unpad
from .errors import FreqVSRError, NumericError, ParameterError
from .metrics import amplitude_spectrum, psnr, rgb_to_luma, ssim
from .numerics import load_tensor, save_tensor
from .pipeline import PipelineConfig, run_sequence
from .tokenizer import detokenize, tokenize

EXIT_OK = 0
EXIT_PROPERTY = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3

SEED_ENV = "FQT_SEED"

# config file key -> canonical option name
_ALIASES = {
    "alpha": "scale",
    "b": "block_size",
    "k": "token_size",
    "block": "block_size",
    "token": "token_size",
}
_CONFIG_KEYS = {
    "scale",
    "block_size",
    "token_size",
    "scheme",
    "seed",
    "tiles",
    "threads",
    "bidirectional",
    "residual_normalize",
    "history",
    "q",
}


def load_config_file(path) -> dict[str, str]:
    """Parse a key=value config file into canonical option names."""
    raw = Path(path).read_text(encoding="utf-8")
    options: dict[str, str] = {}
    for lineno, line in enumerate(raw.splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ParameterError(f"{path}:{lineno}: expected key=value, got {line.strip()!r}")
        key, value = (part.strip() for part in text.split("=", 1))
        key = _ALIASES.get(key.lower(), key.lower())
        if key not in _CONFIG_KEYS:
            raise ParameterError(f"{path}:{lineno}: unknown config key {key!r}")
        options[key] = value
    return options


def _parse_int(value, name: str) -> int:
    try:
        return int(str(value))
    except ValueError:
        raise ParameterError(f"{name} must be an integer, got {value!r}") from None


def _parse_bool(value, name: str) -> bool:
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ParameterError(f"{name} must be a boolean, got {value!r}")


class _Resolver:
    """Flag > FQT_SEED (seed only) > config file > default."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config = load_config_file(args.config) if getattr(args, "config", None) else {}

    def get(self, name: str, default, *, parse=None):
        value = getattr(self.args, name, None)
        if value is None and name == "seed" and os.environ.get(SEED_ENV):
            value = os.environ[SEED_ENV]
        if value is None:
            value = self.config.get(name)
        if value is None:
            return default
        return parse(value, name) if parse else value


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(out_dir, command: str, config: dict, seed, inputs, outputs, wall: float) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "inputs": {Path(p).name: _sha256(p) for p in inputs},
        "outputs": {Path(p).name: _sha256(p) for p in outputs},
        "wall_time_s": round(wall, 6),
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _input_files(args, frame_paths) -> list[Path]:
    files = list(frame_paths)
    if getattr(args, "config", None):
        files.append(Path(args.config))
    if getattr(args, "weights", None):
        files.append(Path(args.weights))
    return files


# ------------------------------------------------------------- commands


def cmd_degrade(args: argparse.Namespace) -> int:
    start = time.perf_counter()
    resolve = _Resolver(args)
    scale = resolve.get("scale", 4, parse=_parse_int)
    block = resolve.get("block_size", 8, parse=_parse_int)
    q_raw = resolve.get("q", "crf25-like")
    if str(q_raw) in PRESETS:
        q = PRESETS[str(q_raw)]
    else:
        try:
            q = float(q_raw)
        except ValueError:
            raise ParameterError(
                f"q must be a number or one of {sorted(PRESETS)}, got {q_raw!r}"
            ) from None
    seed = resolve.get("seed", 0, parse=_parse_int)

    frame_paths = frameio.list_frames(args.in_dir)
    if not frame_paths:
        raise ParameterError(f"{args.in_dir}: contains no frame images")
    frames = [frameio.read_frame(p) for p in frame_paths]
    config = DegradeConfig(scale=scale, q=q, block_size=block)
    degraded = degrade_sequence(frames, config)
    written = frameio.write_sequence(args.out_dir, degraded, also_png=frameio.have_png())

    echo = {"scale": scale, "block_size": block, "q": q, "q_label": str(q_raw)}
    _write_manifest(
        args.out_dir, "degrade", echo, seed, _input_files(args, frame_paths), written,
        time.perf_counter() - start,
    )
    print(f"degraded {len(frames)} frames -> {args.out_dir}")
    return EXIT_OK


def _forward_config(resolve: _Resolver) -> tuple[PipelineConfig, dict]:
    scale = resolve.get("scale", 4, parse=_parse_int)
    block = resolve.get("block_size", 8, parse=_parse_int)
    token = resolve.get("token_size", 8, parse=_parse_int)
    scheme = resolve.get("scheme", "ST")
    residual = resolve.get("residual_normalize", True, parse=_parse_bool)
    history = resolve.get("history", 1, parse=_parse_int)
    config = PipelineConfig(
        scale=scale,
        block_size=block,
        token_size=token,
        scheme=scheme,
        residual_normalize=residual,
        history=history,
    )
    seed = resolve.get("seed", 0, parse=_parse_int)
    tiles = resolve.get("tiles", 1, parse=_parse_int)
    threads = resolve.get("threads", 1, parse=_parse_int)
    bidirectional = resolve.get("bidirectional", False, parse=_parse_bool)
    echo = {
        "scale": scale,
        "block_size": block,
        "token_size": token,
        "scheme": scheme,
        "residual_normalize": residual,
        "history": history,
        "seed": seed,
        "tiles": tiles,
        "threads": threads,
        "bidirectional": bidirectional,
    }
    return config, echo


def _load_flows(flow_dir, count: int) -> tuple[list[np.ndarray], list[Path]]:
    paths = sorted(Path(flow_dir).glob("*.fqt"))
    if len(paths) != count:
        raise ParameterError(
            f"{flow_dir}: found {len(paths)} flow dumps for {count} frames"
        )
    return [load_tensor(path) for path in paths], paths


def cmd_forward(args: argparse.Namespace) -> int:
    start = time.perf_counter()
    resolve = _Resolver(args)
    config, echo = _forward_config(resolve)

    frame_paths = frameio.list_frames(args.in_dir)
    if not frame_paths:
        raise ParameterError(f"{args.in_dir}: contains no frame images")
    frames = [frameio.read_frame(p) for p in frame_paths]

    inputs = _input_files(args, frame_paths)
    flows = None
    if args.flows:
        flows, flow_paths = _load_flows(args.flows, len(frames))
        inputs.extend(flow_paths)

    if args.weights:
        weights = weight_bank.load_weights(args.weights)
    else:
        weights = weight_bank.seeded(
            frames[0].shape[0], config.block_size, config.token_size, seed=echo["seed"]
        )

    sr = run_sequence(
        frames,
        weights,
        config,
        flows,
        bidirectional=echo["bidirectional"],
        tiles=echo["tiles"],
        threads=echo["threads"],
    )
    written = frameio.write_sequence(args.out_dir, sr, also_png=frameio.have_png())
    _write_manifest(
        args.out_dir, "forward", echo, echo["seed"], inputs, written, time.perf_counter() - start
    )
    print(f"upscaled {len(frames)} frames x{config.scale} -> {args.out_dir}")
    return EXIT_OK


def cmd_tokenize(args: argparse.Namespace) -> int:
    start = time.perf_counter()
    resolve = _Resolver(args)
    block = resolve.get("block_size", 8, parse=_parse_int)
    token = resolve.get("token_size", 8, parse=_parse_int)
    seed = resolve.get("seed", 0, parse=_parse_int)

    frame_paths = frameio.list_frames(args.in_dir)
    if not frame_paths:
        raise ParameterError(f"{args.in_dir}: contains no frame images")
    frames = [frameio.read_frame(p) for p in frame_paths]

    maps = []
    pad = None
    for frame in frames:
        padded, pad = pad_edge(frame, block * token)
        maps.append(frame_to_spectral(padded, block))
    tokens = tokenize(maps, token_size=token)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tensor_path = out_dir / "tokens.fqt"
    save_tensor(tensor_path, tokens.data)
    meta_path = out_dir / "tokens.meta"
    meta_path.write_text(
        "\n".join(
            [
                f"rows={tokens.grid[0]}",
                f"cols={tokens.grid[1]}",
                f"block_size={tokens.block_size}",
                f"height={pad.height}",
                f"width={pad.width}",
                "",
            ]
        ),
        encoding="utf-8",
    )

    echo = {"block_size": block, "token_size": token}
    _write_manifest(
        args.out_dir, "tokenize", echo, seed, _input_files(args, frame_paths),
        [tensor_path, meta_path], time.perf_counter() - start,
    )
    t, n, f = tokens.data.shape[:3]
    print(f"tokenized {t} frames into {t * n * f} tokens (N={n}, F={f}) -> {tensor_path}")
    return EXIT_OK


def cmd_roundtrip(args: argparse.Namespace) -> int:
    start = time.perf_counter()
    resolve = _Resolver(args)
    block = resolve.get("block_size", 8, parse=_parse_int)
    token = resolve.get("token_size", 8, parse=_parse_int)
    seed = resolve.get("seed", 0, parse=_parse_int)

    frame_paths = frameio.list_frames(args.in_dir)
    if not frame_paths:
        raise ParameterError(f"{args.in_dir}: contains no frame images")
    frames = [frameio.read_frame(p) for p in frame_paths]

    lines = []
    failed = None
    maps = []
    for i, frame in enumerate(frames):
        padded, pad = pad_edge(frame, block * token)
        smap = frame_to_spectral(padded, block)
        maps.append(smap)

        back = unpad(spectral_to_frame(smap), pad)
        err = float(np.max(np.abs(back - frame)))
        ok = err < 1e-5
        lines.append(f"frame {i} spectral-roundtrip max err {err:.3e} {'ok' if ok else 'FAILED'}")
        if not ok and failed is None:
            failed = f"spectral-roundtrip on frame {i}: max err {err:.3e}"

        energy = float(np.sum(padded.astype(np.float64) ** 2))
        spectral_energy = float(np.sum(smap.data.astype(np.float64) ** 2))
        rel = abs(energy - spectral_energy) / max(energy, 1e-12)
        ok = rel < 1e-5
        lines.append(f"frame {i} parseval rel err {rel:.3e} {'ok' if ok else 'FAILED'}")
        if not ok and failed is None:
            failed = f"parseval on frame {i}: rel err {rel:.3e}"

    tokens = tokenize(maps, token_size=token)
    back_maps = detokenize(tokens)
    exact = all(np.array_equal(a.data, b.data) for a, b in zip(back_maps, maps))
    lines.append(f"token-roundtrip bit-identical: {'ok' if exact else 'FAILED'}")
    if not exact and failed is None:
        failed = "token-roundtrip: detokenize(tokenize(maps)) is not bit-identical"

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = out_dir / "report.txt"
    report.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))

    echo = {"block_size": block, "token_size": token}
    _write_manifest(
        args.out_dir, "roundtrip", echo, seed, _input_files(args, frame_paths), [report],
        time.perf_counter() - start,
    )
    if failed:
        print(f"FAILED: {failed}", file=sys.stderr)
        return EXIT_PROPERTY
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    start = time.perf_counter()
    result = selftest.run_all(precision=args.precision, names=["gradchecks"])[0]
    line = f"{'PASS' if result.passed else 'FAIL'} {result.name} - {result.detail}"
    print(line)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = out_dir / "report.txt"
    report.write_text(line + "\n", encoding="utf-8")
    _write_manifest(
        args.out_dir, "gradcheck", {"precision": args.precision}, 0, [], [report],
        time.perf_counter() - start,
    )
    if not result.passed:
        print(f"FAILED: {result.detail}", file=sys.stderr)
        return EXIT_PROPERTY
    return EXIT_OK


def cmd_metrics(args: argparse.Namespace) -> int:
    start = time.perf_counter()
    ref_paths = frameio.list_frames(args.ref_dir)
    test_paths = frameio.list_frames(args.test_dir)
    if not ref_paths or not test_paths:
        raise ParameterError("metrics needs non-empty reference and test directories")
    if len(ref_paths) != len(test_paths):
        raise ParameterError(
            f"frame counts differ: {len(ref_paths)} reference vs {len(test_paths)} test"
        )
    refs = [frameio.read_frame(p) for p in ref_paths]
    tests = [frameio.read_frame(p) for p in test_paths]

    rows = ["frame\tpsnr_db\tssim"]
    psnrs = []
    ssims = []
    for i, (ref, test) in enumerate(zip(refs, tests)):
        p = psnr(ref, test)
        s = ssim(rgb_to_luma(ref), rgb_to_luma(test))
        psnrs.append(p)
        ssims.append(s)
        rows.append(f"{i}\t{p:.4f}\t{s:.6f}")
    rows.append(f"mean\t{float(np.mean(psnrs)):.4f}\t{float(np.mean(ssims)):.6f}")
    table = "\n".join(rows)
    print(table)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tsv = out_dir / "metrics.tsv"
    tsv.write_text(table + "\n", encoding="utf-8")
    _write_manifest(
        args.out_dir, "metrics", {}, 0, list(ref_paths) + list(test_paths), [tsv],
        time.perf_counter() - start,
    )
    return EXIT_OK


def cmd_spectrum(args: argparse.Namespace) -> int:
    start = time.perf_counter()
    resolve = _Resolver(args)
    block = resolve.get("block_size", 8, parse=_parse_int)

    frame_paths = frameio.list_frames(args.in_dir)
    if not frame_paths:
        raise ParameterError(f"{args.in_dir}: contains no frame images")
    frames = [frameio.read_frame(p) for p in frame_paths]

    band_range = None
    if args.band_lo is not None or args.band_hi is not None:
        if args.band_lo is None or args.band_hi is None:
            raise ParameterError("--band-lo and --band-hi must be given together")
        band_range = (args.band_lo, args.band_hi)

    totals = None
    bands = None
    for frame in frames:
        bands, values = amplitude_spectrum(frame, block, band_range=band_range, power=args.power)
        totals = values if totals is None else totals + values
    mean_values = totals / len(frames)

    rows = ["band,amplitude"] + [f"{b},{v:.9e}" for b, v in zip(bands, mean_values)]
    table = "\n".join(rows)
    print(table)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv = out_dir / "spectrum.csv"
    csv.write_text(table + "\n", encoding="utf-8")
    echo = {"block_size": block, "power": bool(args.power)}
    if band_range:
        echo["band_range"] = list(band_range)
    _write_manifest(
        args.out_dir, "spectrum", echo, 0, _input_files(args, frame_paths), [csv],
        time.perf_counter() - start,
    )
    return EXIT_OK


def cmd_selftest(args: argparse.Namespace) -> int:
    start = time.perf_counter()
    names = [n.strip() for n in args.checks.split(",")] if args.checks else None
    results = selftest.run_all(
        precision=args.precision, names=names, dct_fault=args.inject_dct_fault
    )
    lines = []
    for r in results:
        lines.append(f"{'PASS' if r.passed else 'FAIL'} {r.name} [{r.seconds:.2f}s] - {r.detail}")
    print("\n".join(lines))

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = out_dir / "selftest_report.txt"
    report.write_text("\n".join(lines) + "\n", encoding="utf-8")
    echo = {"precision": args.precision}
    if names:
        echo["checks"] = names
    _write_manifest(args.out_dir, "selftest", echo, 0, [], [report], time.perf_counter() - start)

    bad = [r for r in results if not r.passed]
    if bad:
        print(f"FAILED: {bad[0].detail}", file=sys.stderr)
        return EXIT_PROPERTY
    return EXIT_OK


# ------------------------------------------------------------- wiring


def _add_config_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value config file; flags win over file values")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="freqvsr",
        description="Frequency-domain video super-resolution toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("degrade", help="downscale and quantize a frame sequence")
    p.add_argument("in_dir")
    p.add_argument("out_dir")
    p.add_argument("--scale", type=int)
    p.add_argument("--block-size", dest="block_size", type=int)
    p.add_argument("--q", help=f"quantization strength or preset {sorted(PRESETS)}")
    p.add_argument("--seed", type=int)
    _add_config_flag(p)
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("forward", help="upscale a frame sequence")
    p.add_argument("in_dir")
    p.add_argument("out_dir")
    p.add_argument("--scale", type=int)
    p.add_argument("--block-size", dest="block_size", type=int)
    p.add_argument("--token-size", dest="token_size", type=int)
    p.add_argument("--scheme", choices=SCHEMES)
    p.add_argument("--seed", type=int)
    p.add_argument("--tiles", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--bidirectional", action="store_const", const="true")
    p.add_argument("--weights", help="weight bundle file; seeded weights when absent")
    p.add_argument("--flows", help="directory of per-frame flow dumps (.fqt, 2 x H x W)")
    _add_config_flag(p)
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("tokenize", help="dump the frequency tokens of a sequence")
    p.add_argument("in_dir")
    p.add_argument("out_dir")
    p.add_argument("--block-size", dest="block_size", type=int)
    p.add_argument("--token-size", dest="token_size", type=int)
    _add_config_flag(p)
    p.set_defaults(func=cmd_tokenize)

    p = sub.add_parser("roundtrip", help="check spectral and token roundtrips on real frames")
    p.add_argument("in_dir")
    p.add_argument("out_dir")
    p.add_argument("--block-size", dest="block_size", type=int)
    p.add_argument("--token-size", dest="token_size", type=int)
    _add_config_flag(p)
    p.set_defaults(func=cmd_roundtrip)

    p = sub.add_parser("gradcheck", help="finite-difference checks of the analytic gradients")
    p.add_argument("out_dir")
    p.add_argument("--precision", choices=sorted(selftest.GRAD_MODES), default="f64")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("metrics", help="PSNR and luma SSIM between two sequences")
    p.add_argument("ref_dir")
    p.add_argument("test_dir")
    p.add_argument("out_dir")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("spectrum", help="mean per-band amplitude spectrum of a sequence")
    p.add_argument("in_dir")
    p.add_argument("out_dir")
    p.add_argument("--block-size", dest="block_size", type=int)
    p.add_argument("--power", action="store_true", help="average squared coefficients instead")
    p.add_argument("--band-lo", type=int)
    p.add_argument("--band-hi", type=int)
    _add_config_flag(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("selftest", help="run the built-in property suites")
    p.add_argument("--out", dest="out_dir", default=".", help="where to write report and manifest")
    p.add_argument("--precision", choices=sorted(selftest.GRAD_MODES), default="f64")
    p.add_argument("--checks", help="comma-separated subset of check names")
    p.add_argument("--inject-dct-fault", type=float, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_selftest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FreqVSRError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
