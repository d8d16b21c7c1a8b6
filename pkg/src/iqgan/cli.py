"""Command-line entry point: ``iqgan <command> [options]``.

Settings resolve as built-in defaults < ``--config`` YAML file < flags.  Every
command validates its resolved settings (and input files) before computing
anything, and writes its output directory only after the computation finished.

Exit codes: 0 success, 2 configuration/usage error, 3 data or artifact error,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from iqgan import export, plotting
from iqgan.circuits import (
    Ansatz,
    EncoderMode,
    build_generator,
    decode_generated,
    gan_circuit_cost,
    hardware_cost,
    parse_scheme,
)
from iqgan.data import PcaModel, fit_pca, load_idx_arrays, project, select_classes, to_image
from iqgan.errors import ConfigError, DataError, NumericError, ValidationError
from iqgan.noise import NoiseSpec
from iqgan.qsim import run_circuit
from iqgan.training import (
    PretrainConfig,
    TrainConfig,
    ablation_run,
    noise_sweep,
    pretrain_encoder,
    train_gan,
)

log = logging.getLogger("iqgan")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
DATA_COMMANDS = ("pretrain", "train", "ablate", "noise-sweep")


@dataclass
class RunConfig:
    command: str = ""
    seed: int = 0
    out: str | None = None
    images: str | None = None
    labels: str | None = None
    classes: list = field(default_factory=list)
    per_class: int | None = None
    n: int = 2
    blocks: int = 1
    ansatz: str = "no_entangler"
    encoder: str = "trainable"
    freeze_encoder: bool = True
    theta_s: str | None = None
    lr: float = 0.001
    batch_size: int = 32
    epochs: int = 30
    t_max: int = 30
    init_scale: float = 0.1
    shots: int | None = None
    p_bit: float | None = None
    p_phase: float | None = None
    trajectories: int = 1000
    eval_samples: int = 16
    pretrain_steps: int = 100
    pretrain_lr: float = 0.05
    ansatze: list = field(default_factory=lambda: ["no_entangler", "cnot"])
    seeds: list = field(default_factory=lambda: [0, 1, 2])
    sizes: list = field(default_factory=lambda: [2, 4, 6, 8])
    run: str | None = None
    count: int = 10
    sample_shots: int | None = 1024
    png: bool = False
    figures: bool = True
    record_wall_time: bool = False

    def train_config(self, **overrides) -> TrainConfig:
        kw = dict(
            lr=self.lr, batch_size=self.batch_size, epochs=self.epochs, t_max=self.t_max,
            seed=self.seed, n=self.n, b=self.blocks, ansatz=self.ansatz,
            encoder_mode=self.encoder, freeze_encoder=self.freeze_encoder, shots=self.shots,
            noise=self.noise(), trajectories=self.trajectories,
            eval_samples=self.eval_samples, init_scale=self.init_scale,
        )
        kw.update(overrides)
        return TrainConfig(**kw)

    def noise(self) -> NoiseSpec:
        return NoiseSpec(float(self.p_bit or 0.0), float(self.p_phase or 0.0))


CONFIG_KEYS = {f.name for f in fields(RunConfig)} - {"command"}


def load_config_file(path) -> dict:
    try:
        doc = yaml.safe_load(Path(path).read_text()) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path} is not valid YAML") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {path} must hold a key-value mapping")
    doc = {str(k).replace("-", "_"): v for k, v in doc.items()}
    unknown = sorted(set(doc) - CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    return doc


def resolve(args: argparse.Namespace) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(load_config_file(args.config))
    for key in CONFIG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    try:
        return RunConfig(command=args.command, **values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _writable(path: Path) -> bool:
    p = path.resolve()
    while not p.exists():
        p = p.parent
    return p.is_dir() and os.access(p, os.W_OK)


def validate(cfg: RunConfig):
    """Raise ConfigError for anything that would fail later; no side effects."""
    try:
        cfg.ansatz = Ansatz.parse(cfg.ansatz).value
        cfg.encoder = EncoderMode.parse(cfg.encoder).value
        cfg.noise()
        cfg.train_config()
        cfg.ansatze = [Ansatz.parse(a).value for a in cfg.ansatze]
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.command != "cost":
        if not cfg.out:
            raise ConfigError("--out is required")
        if not _writable(Path(cfg.out)):
            raise ConfigError(f"output directory {cfg.out} is not writable")
    if cfg.command in DATA_COMMANDS:
        for name in ("images", "labels"):
            path = getattr(cfg, name)
            if not path:
                raise ConfigError(f"--{name} is required for {cfg.command}")
            if not Path(path).is_file():
                raise ConfigError(f"{name} file {path} does not exist")
        if not cfg.classes:
            raise ConfigError("--classes is required")
        cfg.classes = [int(c) for c in cfg.classes]
    if cfg.command == "pretrain":
        if len(set(cfg.classes)) < 2:
            raise ConfigError("pretraining needs at least two distinct classes")
        if cfg.n > 4:
            raise ConfigError("pretraining uses density matrices and supports n <= 4")
        if cfg.pretrain_steps < 1 or cfg.pretrain_lr <= 0:
            raise ConfigError("pretrain_steps and pretrain_lr must be positive")
    if cfg.command in ("train", "ablate") and cfg.theta_s and not Path(cfg.theta_s).is_file():
        raise ConfigError(f"theta_s file {cfg.theta_s} does not exist")
    if cfg.command == "ablate":
        if len(cfg.ansatze) < 2:
            raise ConfigError("ablation needs at least two ansatz kinds")
        if len(cfg.seeds) < 3:
            raise ConfigError("ablation needs at least three seeds")
    if cfg.command == "noise-sweep":
        if cfg.p_bit is None or cfg.p_phase is None:
            raise ConfigError("noise sweep needs both --p-bit and --p-phase")
        if cfg.trajectories < 100:
            raise ConfigError("noise sweep needs at least 100 trajectories")
        sizes = [int(s) for s in cfg.sizes]
        if not sizes or any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ConfigError(f"sizes must be strictly ascending, got {sizes}")
        cfg.sizes = sizes
    if cfg.command == "generate":
        if not cfg.run or not (Path(cfg.run) / "manifest.yaml").is_file():
            raise ConfigError("--run must point at a train output directory with manifest.yaml")
        if cfg.count < 1:
            raise ConfigError("--count must be positive")
    if cfg.sample_shots is not None and cfg.sample_shots < 0:
        raise ConfigError("sample_shots must be non-negative")


def _load_subset(cfg: RunConfig, classes=None):
    pixels, labels = load_idx_arrays(cfg.images, cfg.labels)
    pixels, labels = select_classes(pixels, labels, classes or cfg.classes, cfg.per_class)
    if len(pixels) == 0:
        raise DataError(f"no samples with labels {classes or cfg.classes}")
    return pixels, labels


def _encoder_for_training(cfg: RunConfig):
    """(encoder params or None, allow_unpretrained, provenance label)."""
    if EncoderMode.parse(cfg.encoder) is EncoderMode.FIXED:
        return None, False, "fixed"
    if cfg.theta_s:
        enc = export.load_encoder(cfg.theta_s)
        if enc.theta_s.size != cfg.n:
            raise ConfigError(f"{cfg.theta_s} holds {enc.theta_s.size} scales but n={cfg.n}")
        return enc, False, str(cfg.theta_s)
    log.warning("no pretrained encoder scales given; using all-ones theta_s")
    return None, True, "default-ones"


def _image_shape(dim: int):
    side = math.isqrt(dim)
    return (side, side) if side * side == dim else (1, dim)


def _generate_images(pca, encoder, generator, n, b, mode, count, shots, seed):
    state = run_circuit(build_generator(generator, n, b))
    rng = np.random.default_rng([seed, 0x6E4])
    shots = shots or None
    return [to_image(decode_generated(state, encoder, pca, mode, shots, rng)) for _ in range(count)]


def _write_images(out: Path, images, dim, png, stem="generated"):
    grid = export.image_grid(images, _image_shape(dim))
    export.write_pgm(out / f"{stem}.pgm", grid)
    paths = {"images": f"{stem}.pgm"}
    if png:
        plotting.save_image_png(grid, out / f"{stem}.png")
        paths["images_png"] = f"{stem}.png"
    return paths


def _config_echo(cfg: RunConfig) -> dict:
    return {k: v for k, v in asdict(cfg).items()}


def cmd_pretrain(cfg: RunConfig) -> int:
    pixels, labels = _load_subset(cfg)
    pca = fit_pca(pixels, cfg.n)
    X = project(pca, pixels)
    classes = [X[labels == c] for c in sorted(set(cfg.classes))]
    result = pretrain_encoder(classes, np.ones(cfg.n),
                              PretrainConfig(cfg.pretrain_lr, cfg.pretrain_steps, seed=cfg.seed))

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    export.save_encoder(out / "theta_s.json", result.encoder)
    pca.save(out / "pca.json")
    export.write_csv(out / "pretrain_trace.csv", ["step", "objective"],
                     enumerate(result.objective_trace))
    artifacts = {"theta_s": "theta_s.json", "pca": "pca.json", "trace": "pretrain_trace.csv"}
    if cfg.figures:
        plotting.plot_objective_trace(result.objective_trace, out / "pretrain_trace.png")
        artifacts["figure"] = "pretrain_trace.png"
    export.write_manifest(out / "manifest.yaml", {
        "command": "pretrain", "seed": cfg.seed, "config": _config_echo(cfg),
        "artifacts": artifacts,
        "objective": {"initial": result.initial, "final": result.best},
        "theta_s": result.encoder.theta_s.tolist(),
    })
    print(f"separation {result.initial:.6f} -> {result.best:.6f}; wrote {out / 'theta_s.json'}")
    return EXIT_OK


def cmd_train(cfg: RunConfig) -> int:
    encoder, allow, source = _encoder_for_training(cfg)
    pixels, _ = _load_subset(cfg)
    pca = fit_pca(pixels, cfg.n)
    X = project(pca, pixels)
    tcfg = cfg.train_config()
    result = train_gan(X, encoder, tcfg, allow_unpretrained=allow)
    images = _generate_images(pca, result.encoder, result.generator, cfg.n, cfg.blocks,
                              tcfg.encoder_mode, cfg.count, cfg.sample_shots, cfg.seed)

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    export.save_generator(out / "theta_g.json", result.generator, cfg.n, cfg.blocks)
    artifacts = {"theta_g": "theta_g.json"}
    if result.encoder is not None:
        export.save_encoder(out / "theta_s.json", result.encoder)
        artifacts["theta_s"] = "theta_s.json"
    pca.save(out / "pca.json")
    artifacts["pca"] = "pca.json"
    export.write_metrics(out / "metrics.csv", result.records, cfg.record_wall_time)
    artifacts["metrics"] = "metrics.csv"
    artifacts.update(_write_images(out, images, pca.input_dim, cfg.png))
    if cfg.figures:
        plotting.plot_convergence({tcfg.encoder_mode.value.lower(): result.records},
                                  out / "convergence.png")
        artifacts["figure"] = "convergence.png"

    built = gan_circuit_cost(cfg.n, cfg.blocks, tcfg.ansatz)
    reference = hardware_cost("IQGAN", cfg.n, cfg.blocks)
    manifest = {
        "command": "train", "seed": cfg.seed, "config": _config_echo(cfg),
        "encoder_source": source, "artifacts": artifacts,
        "circuit": {"ansatz": tcfg.ansatz.value, "qubits": built.qubits,
                    "one_qubit_gates": built.one_qubit_gates,
                    "two_qubit_gates": built.two_qubit_gates, "parameters": built.parameters},
        "hardware_cost_iqgan": dict(zip(("qubits", "one_qubit_gates", "two_qubit_gates",
                                         "parameters"), reference.as_row())),
        "final": {"loss": result.records[-1].loss, "fidelity": result.final_fidelity},
    }
    if result.noisy is not None:
        manifest["noisy"] = {"fidelity": result.noisy.fidelity, "stderr": result.noisy.stderr,
                             "trajectories": result.noisy.trajectories}
    export.write_manifest(out / "manifest.yaml", manifest)
    print(f"final fidelity {result.final_fidelity:.6f} after {cfg.epochs} epochs; wrote {out}")
    return EXIT_OK


def cmd_generate(cfg: RunConfig) -> int:
    run = Path(cfg.run)
    manifest = export.read_manifest(run / "manifest.yaml")
    try:
        arts = manifest["artifacts"]
        mode = EncoderMode.parse(manifest["config"]["encoder"])
    except (KeyError, TypeError, ValidationError) as exc:
        raise DataError(f"{run / 'manifest.yaml'}: incomplete train manifest") from exc
    generator, n, b = export.load_generator(run / arts.get("theta_g", "theta_g.json"))
    encoder = None
    if mode is EncoderMode.TRAINABLE:
        encoder = export.load_encoder(run / arts.get("theta_s", "theta_s.json"))
    pca = PcaModel.load(run / arts.get("pca", "pca.json"))
    if pca.k != n:
        raise DataError(f"PCA model has k={pca.k} but the generator has n={n}")
    images = _generate_images(pca, encoder, generator, n, b, mode, cfg.count, cfg.sample_shots,
                              cfg.seed)

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = _write_images(out, images, pca.input_dim, cfg.png)
    print(f"wrote {cfg.count} generated image(s) to {out / paths['images']}")
    return EXIT_OK


def cmd_cost(scheme: str, n: int, b: int, as_csv: bool) -> int:
    report = hardware_cost(scheme, n, b)
    if as_csv:
        print("qubits,1qg,2qg,params")
        print(",".join(str(v) for v in report.as_row()))
    else:
        header = ("scheme", "qubits", "1QG#", "2QG#", "params")
        row = (report.scheme, *map(str, report.as_row()))
        widths = [max(len(h), len(r)) for h, r in zip(header, row)]
        print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
        print("  ".join(r.ljust(w) for r, w in zip(row, widths)))
    return EXIT_OK


def cmd_ablate(cfg: RunConfig) -> int:
    encoder, allow, source = _encoder_for_training(cfg)
    pixels, _ = _load_subset(cfg)
    X = project(fit_pca(pixels, cfg.n), pixels)
    rows = ablation_run(X, encoder, cfg.train_config(), cfg.ansatze, cfg.seeds,
                        allow_unpretrained=allow)

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    export.write_csv(out / "ablation.csv", export.ABLATION_HEADER, [
        (r.ansatz.value, r.mean_fidelity, r.stddev, r.one_qubit_gates, r.two_qubit_gates,
         r.parameters) for r in rows
    ])
    artifacts = {"report": "ablation.csv"}
    if cfg.figures:
        plotting.plot_ablation(rows, out / "ablation.png")
        artifacts["figure"] = "ablation.png"
    export.write_manifest(out / "manifest.yaml", {
        "command": "ablate", "seed": cfg.seed, "config": _config_echo(cfg),
        "encoder_source": source, "artifacts": artifacts,
        "finals": {r.ansatz.value: r.finals for r in rows},
    })
    for r in rows:
        print(f"{r.ansatz.value:<13} {r.mean_fidelity:.4f} +- {r.stddev:.4f}")
    return EXIT_OK


def cmd_noise_sweep(cfg: RunConfig) -> int:
    pixels, _ = _load_subset(cfg)
    noise = cfg.noise()
    rows = noise_sweep(pixels, cfg.sizes, noise, cfg.train_config(noise=NoiseSpec()),
                       cfg.trajectories)

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    export.write_csv(out / "sweep.csv", export.SWEEP_HEADER,
                     [(r.n, r.fidelity, r.stderr) for r in rows])
    artifacts = {"report": "sweep.csv"}
    if cfg.figures:
        plotting.plot_noise_sweep(rows, out / "noise_sweep.png", noise)
        artifacts["figure"] = "noise_sweep.png"
    export.write_manifest(out / "manifest.yaml", {
        "command": "noise-sweep", "seed": cfg.seed, "config": _config_echo(cfg),
        "artifacts": artifacts,
        "noiseless": {r.n: r.noiseless for r in rows},
    })
    for r in rows:
        print(f"n={r.n}  fidelity {r.fidelity:.4f} +- {r.stderr:.4f}  (noiseless {r.noiseless:.4f})")
    return EXIT_OK


def _csv_list(kind):
    def parse(text):
        try:
            return [kind(t) for t in text.replace(",", " ").split()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"cannot parse {text!r} as a list") from None
    return parse


def _add_common(p: argparse.ArgumentParser):
    g = p.add_argument_group("common")
    g.add_argument("--config", help="YAML file of settings; flags override it")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", help="output directory")
    g.add_argument("--n", type=int, help="input size / generator qubits")
    g.add_argument("--blocks", type=int, help="generator blocks b")
    g.add_argument("--ansatz", help="no_entangler, cnot, iswap, crx or crot")
    g.add_argument("--encoder", choices=["trainable", "fixed"])
    g.add_argument("--freeze-encoder", action=argparse.BooleanOptionalAction, default=None)
    g.add_argument("--shots", type=int, help="finite-shot loss estimation (default: exact)")
    g.add_argument("--p-bit", type=float)
    g.add_argument("--p-phase", type=float)
    g.add_argument("--trajectories", type=int)
    g.add_argument("--figures", action=argparse.BooleanOptionalAction, default=None,
                   help="render PNG figures next to the CSV reports")


def _add_data(p: argparse.ArgumentParser):
    g = p.add_argument_group("data")
    g.add_argument("--images", help="IDX image file (optionally gzipped)")
    g.add_argument("--labels", help="IDX label file (optionally gzipped)")
    g.add_argument("--classes", type=_csv_list(int), help="digit labels, e.g. 3 or 3,7")
    g.add_argument("--per-class", type=int, help="cap on samples per class")


def _add_training(p: argparse.ArgumentParser):
    g = p.add_argument_group("training")
    g.add_argument("--theta-s", help="pretrained encoder scales (theta_s.json)")
    g.add_argument("--lr", type=float)
    g.add_argument("--batch-size", type=int)
    g.add_argument("--epochs", type=int)
    g.add_argument("--t-max", type=int)
    g.add_argument("--init-scale", type=float, help="generator angles start in U(-s, s)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iqgan", description="Quantum GAN toolkit")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain", help="pretrain encoder scales by ensemble separation")
    _add_common(p)
    _add_data(p)
    p.add_argument("--pretrain-steps", type=int)
    p.add_argument("--pretrain-lr", type=float)

    p = sub.add_parser("train", help="train a generator on one class subset")
    _add_common(p)
    _add_data(p)
    _add_training(p)
    p.add_argument("--count", type=int, help="generated images in the grid")
    p.add_argument("--sample-shots", type=int, help="shots per generated image (0: exact)")
    p.add_argument("--png", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--record-wall-time", action=argparse.BooleanOptionalAction, default=None,
                   help="fill the wall_ms metrics column (breaks byte-identical reruns)")
    p.add_argument("--eval-samples", type=int)

    p = sub.add_parser("generate", help="decode images from a trained run")
    _add_common(p)
    p.add_argument("--run", help="train output directory")
    p.add_argument("--count", type=int)
    p.add_argument("--sample-shots", type=int)
    p.add_argument("--png", action=argparse.BooleanOptionalAction, default=None)

    p = sub.add_parser("cost", help="hardware cost of a GAN scheme")
    p.add_argument("scheme", help="iqgan, qugan21 or eqgan")
    p.add_argument("n", type=int)
    p.add_argument("b", type=int)
    p.add_argument("--csv", action="store_true")

    p = sub.add_parser("ablate", help="compare generator ansatz kinds")
    _add_common(p)
    _add_data(p)
    _add_training(p)
    p.add_argument("--ansatze", type=_csv_list(str))
    p.add_argument("--seeds", type=_csv_list(int))

    p = sub.add_parser("noise-sweep", help="noisy fidelity against input size")
    _add_common(p)
    _add_data(p)
    _add_training(p)
    p.add_argument("--sizes", type=_csv_list(int))
    p.add_argument("--eval-samples", type=int)
    return parser


COMMANDS = {
    "pretrain": cmd_pretrain, "train": cmd_train, "generate": cmd_generate,
    "ablate": cmd_ablate, "noise-sweep": cmd_noise_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "cost":
            try:
                parse_scheme(args.scheme)
                if args.n < 1 or args.b < 1:
                    raise ValidationError("n and b must be at least 1")
            except ValidationError as exc:
                parser.error(str(exc))
            return cmd_cost(args.scheme, args.n, args.b, args.csv)
        cfg = resolve(args)
        validate(cfg)
        return COMMANDS[args.command](cfg)
    except ValidationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
