"""Command-line entry point: ``l0ne {compress,decompress,eval,benchmark}``.

Exit codes: 0 success, 2 usage error, 3 constrained run ended infeasible,
4 I/O or decode failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import codec
from .codec import CodecError
from .imageio import load_image, psnr, save_image
from .siren import SirenConfig, parse_arch
from .trainer import METHODS, PAPER_PRESETS, TrainConfig, train

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_IO = 0, 2, 3, 4

SUMMARY_HEADER = ["image", "method", "target_bpp", "best_feasible_psnr", "final_bpp", "wall_s"]


class UsageError(Exception):
    pass


class _IOFailure(Exception):
    pass


def _preset(target: float):
    for key, preset in PAPER_PRESETS.items():
        if abs(key - target) < 1e-9:
            return preset
    raise UsageError(f"no paper preset for target {target}; choose from {sorted(PAPER_PRESETS)}")


def resolve_config(method, *, arch=None, target_bpp=None, paper_target=None, steps=50_000,
                   seed=0, lr=None, lr_gates=None, lr_dual=None, eval_every=100,
                   restarts=True, omega0=30.0) -> TrainConfig:
    """Turn command-line style options into a TrainConfig, applying the --paper-target presets."""
    if method not in METHODS:
        raise UsageError(f"unknown method {method!r}")
    if method == "coin" and target_bpp is not None:
        raise UsageError("--target-bpp does not apply to the dense 'coin' method")
    if target_bpp is not None and paper_target is not None:
        raise UsageError("give either --target-bpp or --paper-target, not both")
    kwargs = {}
    if paper_target is not None:
        preset = _preset(paper_target)
        layers, width = preset.coin_arch if method == "coin" else preset.initial_arch
        arch_cfg = SirenConfig(layers, width, omega0)
        if method != "coin":
            target_bpp = paper_target
            kwargs["lr_dual"] = preset.dual_lr
    elif arch is None:
        raise UsageError("need --arch or --paper-target")
    if arch is not None:
        try:
            arch_cfg = parse_arch(arch, omega0)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if method != "coin" and target_bpp is None:
        raise UsageError(f"method {method!r} needs --target-bpp or --paper-target")
    for key, value in (("lr", lr), ("lr_gates", lr_gates), ("lr_dual", lr_dual)):
        if value is not None:
            kwargs[key] = value
    try:
        return TrainConfig(method, arch_cfg, steps=steps, seed=seed, target_bpp=target_bpp,
                           eval_every=eval_every, restarts=restarts, **kwargs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load(path):
    try:
        return load_image(path)
    except (OSError, ValueError) as exc:
        raise _IOFailure(str(exc)) from None


def _check_target(config, dataset):
    try:
        config.check_feasible_target(dataset.pixel_count)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def run_one(dataset, image_path, config: TrainConfig, model_path, metrics_path, extra_header=None):
    """Train, write the model and metrics CSV; returns (model bytes, log, wall seconds)."""
    t0 = time.perf_counter()
    model, mlog = train(config, dataset)
    wall = time.perf_counter() - t0
    data = codec.encode(model, dataset.height, dataset.width)
    Path(model_path).write_bytes(data)
    header = {"image": str(image_path), **config.to_dict(), **(extra_header or {})}
    mlog.write_csv(metrics_path, header)
    return data, mlog, wall


def cmd_compress(args) -> int:
    if not args.image or not args.method or not args.out:
        raise UsageError("compress needs --image, --method and --out")
    config = resolve_config(
        args.method, arch=args.arch, target_bpp=args.target_bpp, paper_target=args.paper_target,
        steps=args.steps, seed=args.seed, lr=args.lr, lr_gates=args.lr_gates, lr_dual=args.lr_dual,
        eval_every=args.eval_every, restarts=not args.no_restarts, omega0=args.omega0)
    metrics = args.metrics or str(Path(args.out).with_suffix(".csv"))
    dataset = _load(args.image)
    _check_target(config, dataset)
    try:
        _, mlog, wall = run_one(dataset, args.image, config, args.out, metrics)
    except OSError as exc:
        raise _IOFailure(str(exc)) from None
    final = mlog.final
    print(f"method={config.method} arch={config.arch} steps={config.steps} "
          f"psnr_db={final.psnr_f16:.4f} bpp={final.bpp:.5f} "
          f"best_feasible_psnr={mlog.best_feasible_psnr:.4f} wall_s={wall:.1f}")
    if config.method == "loonie" and not final.feasible:
        print(f"infeasible: final BPP {final.bpp:.5f} > target {config.target_bpp}", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def _read_model(path):
    return codec.decode(Path(path).read_bytes())


def cmd_decompress(args) -> int:
    if not args.model or not args.out:
        raise UsageError("decompress needs --model and --out")
    try:
        model, (h, w) = _read_model(args.model)
        h = args.height or h
        w = args.width or w
        pixels = codec.decompress_to_image(model, h, w)
        save_image(pixels / 255.0, h, w, args.out)
    except (OSError, CodecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def cmd_eval(args) -> int:
    if not args.model or not args.image:
        raise UsageError("eval needs --model and --image")
    try:
        data = Path(args.model).read_bytes()
        model, (h, w) = codec.decode(data)
        dataset = load_image(args.image)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    if (dataset.height, dataset.width) != (h, w):
        print(f"error: model was trained on {h}x{w} pixels but the image is "
              f"{dataset.height}x{dataset.width}", file=sys.stderr)
        return EXIT_USAGE
    report = codec.size_report(data)
    decoded = codec.decompress_to_image(model, h, w)
    value = psnr(dataset.targets, decoded.reshape(-1, 3) / 255.0)
    print(f"psnr_db={value:.6f} bpp={report['bpp']:.6f} file_bpp={report['file_bpp']:.6f} "
          f"active_params={report['active_params']}")
    return EXIT_OK


def _split(text, cast=str):
    return [cast(t) for t in str(text).split(",") if t.strip()]


def _benchmark_job(job):
    image, method, target, config, out_dir = job
    stem = f"{Path(image).stem}_{method}_{target:g}"
    _, mlog, wall = run_one(load_image(image), image, config, out_dir / f"{stem}.l0ne", out_dir / f"{stem}.csv",
                            {"target_bpp_grid": target})
    return [Path(image).name, method, target, mlog.best_feasible_psnr, mlog.final.bpp, round(wall, 3)]


def cmd_benchmark(args) -> int:
    if not args.dir or not args.out_dir:
        raise UsageError("benchmark needs --dir and --out-dir")
    folder = Path(args.dir)
    if not folder.is_dir():
        print(f"error: {folder} is not a directory", file=sys.stderr)
        return EXIT_IO
    images = sorted(p for p in folder.iterdir() if p.suffix.lower() in (".png", ".ppm"))
    if not images:
        raise UsageError(f"no .png or .ppm images in {folder}")
    methods = _split(args.methods)
    targets = _split(args.targets, float)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    jobs = []
    datasets = {image: _load(image) for image in images}
    for image in images:
        for target in targets:
            for method in methods:
                if method == "coin":
                    arch = args.coin_arch
                    opts = {"paper_target": None if arch else target}
                else:
                    arch = args.arch
                    opts = {"target_bpp": target} if arch else {"paper_target": target}
                config = resolve_config(
                    method, arch=arch, steps=args.steps, seed=args.seed, lr_dual=args.lr_dual,
                    eval_every=args.eval_every, omega0=args.omega0, **opts)
                _check_target(config, datasets[image])
                jobs.append((image, method, target, config, out_dir))

    try:
        if args.jobs > 1:
            with ProcessPoolExecutor(args.jobs) as pool:
                rows = list(pool.map(_benchmark_job, jobs))
        else:
            rows = [_benchmark_job(job) for job in jobs]
    except OSError as exc:
        raise _IOFailure(str(exc)) from None

    if args.extra_csv:
        with open(args.extra_csv, newline="") as fh:
            for row in csv.DictReader(fh):
                rows.append([row[k] for k in SUMMARY_HEADER])
    with open(out_dir / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_HEADER)
        w.writerows(rows)
    infeasible = [r for r in rows if r[1] == "loonie" and float(r[4]) > float(r[2])]
    return EXIT_INFEASIBLE if infeasible else EXIT_OK


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(prog="l0ne", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    def add(name, func, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", help="JSON file of option defaults; command-line flags win")
        p.set_defaults(func=func)
        subs[name] = p
        return p

    def training_flags(p):
        p.add_argument("--steps", type=int, default=50_000)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--eval-every", type=int, default=100)
        p.add_argument("--lr-dual", type=float, help="dual step size (default 1e-3 or the --paper-target preset)")
        p.add_argument("--omega0", type=float, default=30.0)

    p = add("compress", cmd_compress, "fit a model to an image and write a .l0ne file")
    p.add_argument("--image")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--target-bpp", type=float)
    p.add_argument("--paper-target", type=float, choices=sorted(PAPER_PRESETS))
    p.add_argument("--arch", help="hidden layers x width, e.g. 5x20")
    p.add_argument("--out")
    p.add_argument("--metrics", help="metrics CSV (default: next to --out)")
    p.add_argument("--lr", type=float, help="step size for the weights")
    p.add_argument("--lr-gates", type=float)
    p.add_argument("--no-restarts", action="store_true", help="disable dual restarts")
    training_flags(p)

    p = add("decompress", cmd_decompress, "render a .l0ne file to PNG")
    p.add_argument("--model")
    p.add_argument("--out")
    p.add_argument("--height", type=int)
    p.add_argument("--width", type=int)

    p = add("eval", cmd_eval, "report PSNR and rate of a .l0ne file against an image")
    p.add_argument("--model")
    p.add_argument("--image")

    p = add("benchmark", cmd_benchmark, "run every method x target x image and summarise")
    p.add_argument("--dir")
    p.add_argument("--methods", default="coin,loonie,mp")
    p.add_argument("--targets", default="0.07,0.15,0.3,0.6")
    p.add_argument("--arch", help="initial arch for loonie/mp (default: --paper-target preset)")
    p.add_argument("--coin-arch", help="arch for coin (default: --paper-target preset)")
    p.add_argument("--out-dir")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--extra-csv", help="externally produced summary rows to merge (e.g. JPEG)")
    training_flags(p)
    return parser, subs


def _load_json_defaults(path) -> dict:
    with open(path) as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise UsageError("--config must contain a JSON object")
    return {k.replace("-", "_"): v for k, v in raw.items()}


def main(argv=None) -> int:
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config:
            try:
                defaults = _load_json_defaults(args.config)
            except (OSError, json.JSONDecodeError) as exc:
                raise _IOFailure(str(exc)) from None
            subs[args.command].set_defaults(**defaults)
            args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _IOFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
