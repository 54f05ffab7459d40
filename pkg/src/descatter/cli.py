"""Command line: ``descatter restore`` and ``descatter bench``.

Exit codes: 0 success, 2 invalid configuration, 3 I/O failure,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import shlex
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .bench import METHODS, FogParams, load_scene_dir, make_synthetic_scenes, rows_to_csv, run_benchmark
from .image import GammaSpec, read_image, to_display, write_image
from .latent import LatentParams
from .pipeline import (
    AirlightSpec,
    NumericError,
    PipelineConfig,
    RestorationError,
    StructureParams,
    restore,
)
from .transmission import TransmissionParams

log = logging.getLogger("descatter")

EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _solver_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver")
    g.add_argument("--airlight", default="auto", help="auto[:q] | scribble:<mask.png> | fixed:r,g,b")
    g.add_argument("--gamma", type=float, default=2.2)
    g.add_argument("--lambda", dest="lam", type=float, default=TransmissionParams.lam)
    g.add_argument("--lambda-l", dest="lam_l", type=float, default=LatentParams.lam_l)
    g.add_argument("--window", type=int, default=TransmissionParams.window_radius,
                   help="window radius for both solvers")
    g.add_argument("--patch", type=int, default=LatentParams.patch_radius, help="patch radius")
    g.add_argument("--iters-d", type=int, default=TransmissionParams.iterations)
    g.add_argument("--iters-l", type=int, default=LatentParams.iterations)
    g.add_argument("--eps", type=float, default=TransmissionParams.eps)
    g.add_argument("--sigma-s", type=float, default=TransmissionParams.sigma_s)
    g.add_argument("--sigma-t", type=float, default=LatentParams.sigma_t)
    g.add_argument("--sigma-p", type=float, default=LatentParams.sigma_p)
    g.add_argument("--structure-sigma", type=float, default=StructureParams.spatial_sigma)
    g.add_argument("--structure-range", type=float, default=StructureParams.range_sigma)
    g.add_argument("--structure-iters", type=int, default=StructureParams.iterations)
    g.add_argument("--no-structure", action="store_true", help="use the input itself as structure map")
    g.add_argument("--transmission-source", choices=("structure", "input"), default="structure",
                   help="image observed by the transmission stage")
    g.add_argument("--underwater", action="store_true", help="restore the intensity channel only")
    g.add_argument("--luma", action="store_true", help="luma-weighted intensity in underwater mode")
    g.add_argument("--alternate", action="store_true",
                   help="refresh the transmission once from a first latent estimate")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--config", help="key=value file of option defaults")


def build_config(args) -> PipelineConfig:
    try:
        return PipelineConfig(
            gamma=GammaSpec(args.gamma),
            airlight=AirlightSpec.parse(args.airlight),
            structure=None if args.no_structure else StructureParams(
                args.structure_sigma, args.structure_range, args.structure_iters),
            transmission=TransmissionParams(
                lam=args.lam, window_radius=args.window, sigma_s=args.sigma_s,
                eps=args.eps, iterations=args.iters_d),
            latent=LatentParams(
                lam_l=args.lam_l, window_radius=args.window, patch_radius=args.patch,
                sigma_t=args.sigma_t, sigma_p=args.sigma_p, iterations=args.iters_l,
                t_floor=args.eps),
            underwater=args.underwater,
            luma_intensity=args.luma,
            alternate=args.alternate,
            linear_out=getattr(args, "linear_out", False),
            transmission_source=args.transmission_source,
            seed=args.seed,
        )
    except ValueError as exc:
        raise CliError(f"invalid configuration: {exc}", EXIT_CONFIG) from exc


def read_config_file(path) -> list[str]:
    """Turn ``key = value`` lines into argv tokens; ``#`` starts a comment."""
    tokens = []
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc}", EXIT_IO) from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise CliError(f"{path}:{lineno}: expected key=value", EXIT_CONFIG)
        key = "--" + key.strip().replace("_", "-")
        value = value.strip()
        if value.lower() in ("true", "yes", "on"):
            tokens.append(key)
        elif value.lower() in ("false", "no", "off"):
            continue
        else:
            tokens += [key, *shlex.split(value)]
    return tokens


def _depth_visual(D: np.ndarray) -> np.ndarray:
    depth = -D
    span = depth.max() - depth.min()
    return (depth - depth.min()) / span if span > 0 else np.zeros_like(depth)


def _restore_one(src: Path, dst: Path, args, cfg: PipelineConfig) -> None:
    try:
        img = read_image(src)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read {src}: {exc}", EXIT_IO) from exc
    if img.shape[2] == 1 and not cfg.underwater:
        img = np.repeat(img, 3, axis=2)
    try:
        res = restore(img, cfg)
    except NumericError as exc:
        raise CliError(str(exc), EXIT_NUMERIC) from exc
    except RestorationError as exc:
        code = EXIT_IO if isinstance(exc.__cause__, OSError) else EXIT_CONFIG
        raise CliError(str(exc), code) from exc
    # everything computed; only now touch the filesystem
    outputs = [(dst, res.latent)]
    if args.dump_t:
        outputs.append((Path(args.dump_t), res.transmission))
    if args.dump_depth:
        p = Path(args.dump_depth)
        outputs.append((p, res.depth_log if p.suffix.lower() == ".pfm" else _depth_visual(res.depth_log)))
    if args.dump_structure:
        p = Path(args.dump_structure)
        outputs.append((p, res.structure if p.suffix.lower() == ".pfm" else to_display(res.structure, cfg.gamma)))
    try:
        for path, data in outputs:
            write_image(path, data)
    except OSError as exc:
        raise CliError(f"cannot write output: {exc}", EXIT_IO) from exc
    log.info("%s -> %s (B=%s, %s)", src, dst, np.round(res.airlight, 4).tolist(),
             ", ".join(f"{k} {v:.2f}s" for k, v in res.timings.items()))


def cmd_restore(args) -> int:
    cfg = build_config(args)
    inputs = [Path(p) for p in args.inputs]
    if len(inputs) == 1:
        _restore_one(inputs[0], Path(args.output), args, cfg)
        return 0
    if args.dump_t or args.dump_depth or args.dump_structure:
        raise CliError("dumps need a single input", EXIT_CONFIG)
    out_dir = Path(args.output)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create {out_dir}: {exc}", EXIT_IO) from exc
    jobs = [(src, out_dir / f"{src.stem}.png") for src in inputs]
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(_restore_one, s, d, args, cfg) for s, d in jobs]
            for f in futures:
                f.result()
    else:
        for s, d in jobs:
            _restore_one(s, d, args, cfg)
    return 0


def cmd_bench(args) -> int:
    cfg = build_config(args)
    try:
        etas = [float(e) for e in args.etas.split(",") if e]
        methods = [m.strip() for m in args.methods.split(",") if m.strip()]
        unknown = set(methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}")
        fp = FogParams(noise_sigma=args.noise, seed=args.seed, noise_domain=args.noise_domain,
                       gamma=args.gamma)
    except ValueError as exc:
        raise CliError(f"invalid configuration: {exc}", EXIT_CONFIG) from exc
    if args.scenes.startswith("synthetic:"):
        try:
            count = int(args.scenes.split(":", 1)[1])
            scenes = make_synthetic_scenes(count, args.size, args.seed)
        except ValueError as exc:
            raise CliError(f"invalid scene spec: {exc}", EXIT_CONFIG) from exc
    else:
        try:
            scenes = load_scene_dir(args.scenes)
        except (OSError, ValueError) as exc:
            raise CliError(f"cannot load scenes: {exc}", EXIT_IO) from exc
    rows = run_benchmark(scenes, etas, fp, methods, cfg, psnr_domain=args.psnr_domain)
    text = rows_to_csv(rows, timings=args.timings)
    try:
        Path(args.output).write_text(text)
    except OSError as exc:
        raise CliError(f"cannot write {args.output}: {exc}", EXIT_IO) from exc
    for m in methods:
        means = [np.mean([r.psnr_db for r in rows if r.method == m and r.eta == e]) for e in etas]
        log.info("%-16s %s", m, "  ".join(f"eta={e:g}: {v:.2f} dB" for e, v in zip(etas, means)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="descatter", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    r = sub.add_parser("restore", help="remove the scattering layer from images")
    r.add_argument("inputs", nargs="+")
    r.add_argument("-o", "--output", required=True, help="output file (directory for several inputs)")
    r.add_argument("--dump-t", help="write the transmission map (PNG or PFM)")
    r.add_argument("--dump-depth", help="write -D as a normalized PNG, or raw D as PFM")
    r.add_argument("--dump-structure", help="write the structure map")
    r.add_argument("--linear-out", action="store_true", help="skip the display gamma on output")
    r.add_argument("--jobs", type=int, default=1, help="process several inputs concurrently")
    _solver_options(r)
    r.set_defaults(func=cmd_restore)

    b = sub.add_parser("bench", help="synthetic fog PSNR benchmark")
    b.add_argument("--scenes", default="synthetic:5", help="directory or synthetic:N")
    b.add_argument("--size", type=int, default=256, help="synthetic scene size")
    b.add_argument("--etas", default="0.5,1.0,1.5")
    b.add_argument("--noise", type=float, default=10.0, help="noise sigma on the 0-255 scale")
    b.add_argument("--noise-domain", choices=("display", "linear"), default="display")
    b.add_argument("--psnr-domain", choices=("display", "linear"), default="display")
    b.add_argument("--methods", default="ours,naive-inversion", help=f"comma list of {', '.join(METHODS)}")
    b.add_argument("--timings", action="store_true", help="fill the runtime_s column")
    b.add_argument("-o", "--output", required=True)
    _solver_options(b)
    b.set_defaults(func=cmd_bench)
    return parser


def _expand_config(argv: list[str]) -> list[str]:
    """Splice --config file contents in right after the subcommand so that
    explicit flags still win."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        return argv
    path = argv[i + 1]
    rest = argv[:i] + argv[i + 2:]
    cmd_pos = next((k for k, a in enumerate(rest) if a in ("restore", "bench")), None)
    if cmd_pos is None:
        return argv
    return rest[: cmd_pos + 1] + read_config_file(path) + rest[cmd_pos + 1:]


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _expand_config(argv)
    except CliError as exc:
        print(f"descatter: {exc}", file=sys.stderr)
        return exc.code
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"descatter: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
