"""Two-step training (encoder pretraining, then GAN training) and the
experiment drivers built on it: ansatz ablation and the noise sweep."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from iqgan.autodiff import (
    AdamState,
    LossContext,
    Which,
    adam_step,
    cosine_anneal_lr,
    gan_loss,
    param_shift_grad,
)
from iqgan.circuits import (
    Ansatz,
    EncoderMode,
    EncoderParams,
    GeneratorParams,
    assemble_gan_circuit,
    build_encoder,
    build_generator,
    encode_states,
    gan_circuit_cost,
    quiet_clamp_warnings,
    generator_param_count,
)
from iqgan.data import fit_pca, project
from iqgan.errors import DegenerateDataError, ValidationError
from iqgan.noise import (
    MAX_DENSITY_QUBITS,
    DensityMatrix,
    NoiseSpec,
    _layer_plan,
    run_noisy_trajectory,
    trajectory_rngs,
)
from iqgan.qsim import qubit_zero_probability

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    lr: float = 0.001
    batch_size: int = 32
    epochs: int = 30
    t_max: int = 30
    seed: int = 0
    n: int = 2
    b: int = 1
    ansatz: Ansatz = Ansatz.NO_ENTANGLER
    encoder_mode: EncoderMode = EncoderMode.TRAINABLE
    freeze_encoder: bool = True
    shots: int | None = None
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    trajectories: int = 1000
    eval_samples: int = 16
    init_scale: float = 0.1

    def __post_init__(self):
        self.ansatz = Ansatz.parse(self.ansatz)
        self.encoder_mode = EncoderMode.parse(self.encoder_mode)
        if self.lr <= 0 or self.batch_size < 1 or self.epochs < 1 or self.t_max < 1:
            raise ValidationError("lr, batch_size, epochs and t_max must be positive")
        if self.n < 1 or self.b < 1:
            raise ValidationError("n and b must be at least 1")
        if self.shots is not None and self.shots < 1:
            raise ValidationError("shots must be positive")
        if self.trajectories < 1 or self.eval_samples < 1:
            raise ValidationError("trajectories and eval_samples must be positive")
        if self.init_scale < 0:
            raise ValidationError("init_scale must be non-negative")


@dataclass
class TrainRecord:
    epoch: int
    loss: float
    fidelity: float
    lr: float
    wall_ms: float


@dataclass
class TrainResult:
    generator: GeneratorParams
    encoder: EncoderParams | None
    records: list[TrainRecord]
    noisy: "NoisyGanEstimate | None" = None

    @property
    def final_fidelity(self) -> float:
        return self.records[-1].fidelity


# -- encoder pretraining ---------------------------------------------------


def build_ensemble(samples, theta_s, mode=EncoderMode.TRAINABLE) -> DensityMatrix:
    """Uniform mixture of the encoded pure states of one class."""
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    if X.size == 0:
        raise ValidationError("cannot build an ensemble from an empty class")
    n = X.shape[1]
    if n > MAX_DENSITY_QUBITS:
        raise ValidationError(f"ensembles are limited to {MAX_DENSITY_QUBITS} qubits, got {n}")
    states = encode_states(X, theta_s, mode)
    return DensityMatrix(states.T @ states.conj() / X.shape[0], n)


def hs_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Squared Hilbert-Schmidt distance Tr[(rho - sigma)^2]."""
    if rho.entries.shape != sigma.entries.shape:
        raise ValidationError("density matrices have different dimensions")
    d = rho.entries - sigma.entries
    return float(np.real(np.trace(d @ d)))


def separation_objective(classes, theta_s) -> float:
    ensembles = [build_ensemble(X, theta_s) for X in classes]
    total = 0.0
    for i in range(len(ensembles)):
        for j in range(i + 1, len(ensembles)):
            total += hs_distance(ensembles[i], ensembles[j])
    return total


@dataclass
class PretrainConfig:
    lr: float = 0.05
    steps: int = 100
    h: float = 1e-5
    samples_per_class: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0 or self.steps < 1 or self.h <= 0:
            raise ValidationError("pretraining lr, steps and h must be positive")


@dataclass
class PretrainResult:
    encoder: EncoderParams
    objective_trace: list[float]

    @property
    def initial(self) -> float:
        return self.objective_trace[0]

    @property
    def best(self) -> float:
        return max(self.objective_trace)


def pretrain_encoder(classes, theta0, config: PretrainConfig | None = None) -> PretrainResult:
    """Gradient ascent of the pairwise ensemble separation over the encoder scales.

    ``classes`` is a sequence of per-class feature arrays.  Gradients are central
    finite differences of the density-matrix objective.  The best scales seen
    are returned, so the final objective is never below the initial one.
    """
    config = config or PretrainConfig()
    classes = [np.atleast_2d(np.asarray(X, dtype=float)) for X in classes]
    if len(classes) < 2:
        raise ValidationError("pretraining needs at least two classes")
    if any(X.size == 0 for X in classes):
        raise ValidationError("pretraining class is empty")
    stacked = np.concatenate(classes)
    if np.all(stacked == stacked[0]):
        raise DegenerateDataError("all pretraining samples are identical")
    if config.samples_per_class is not None:
        rng = np.random.default_rng(config.seed)
        classes = [
            X[np.sort(rng.choice(len(X), min(config.samples_per_class, len(X)), replace=False))]
            for X in classes
        ]

    with quiet_clamp_warnings():
        return _pretrain_loop(classes, np.asarray(theta0, dtype=float).copy(), config)


def _pretrain_loop(classes, theta, config) -> PretrainResult:
    adam = AdamState.for_params(theta, lr=config.lr)
    objective = separation_objective(classes, theta)
    trace = [objective]
    best_theta, best = theta.copy(), objective
    for _ in range(config.steps):
        grad = np.empty_like(theta)
        for k in range(theta.size):
            plus, minus = theta.copy(), theta.copy()
            plus[k] += config.h
            minus[k] -= config.h
            grad[k] = (separation_objective(classes, plus)
                       - separation_objective(classes, minus)) / (2 * config.h)
        theta, adam = adam_step(adam, theta, -grad)
        objective = separation_objective(classes, theta)
        trace.append(objective)
        if objective > best:
            best_theta, best = theta.copy(), objective
    clamped = sum(int((np.abs(X * best_theta) > 1.0).sum()) for X in classes)
    if clamped:
        log.warning("pretrained scales clamp %d encoded feature(s) at |x*theta_s| = 1", clamped)
    return PretrainResult(EncoderParams(best_theta, pretrained=True), trace)


# -- GAN training ----------------------------------------------------------


def _dataset_loss(X, theta_s, theta_g, config) -> float:
    ctx = LossContext(X, theta_s, theta_g, config.ansatz, config.n, config.b, config.encoder_mode)
    return gan_loss(ctx)


def train_gan(X, encoder: EncoderParams | None, config: TrainConfig, *,
              allow_unpretrained: bool = False) -> TrainResult:
    """Minimise the batch-mean fidelity loss with ADAM and a cosine-annealed rate.

    One generator is trained per call on the rows of ``X`` (already PCA-scaled).
    Per-epoch metrics are exact full-dataset values at the end of the epoch.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 0 or X.size == 0:
        raise ValidationError("training set is empty")
    if X.shape[1] != config.n:
        raise ValidationError(f"training data has {X.shape[1]} features, config says n={config.n}")
    trainable = config.encoder_mode is EncoderMode.TRAINABLE
    if trainable:
        if encoder is None:
            if not allow_unpretrained:
                raise ValidationError("trainable encoder requested without encoder scales")
            encoder = EncoderParams.ones(config.n)
        if not encoder.pretrained and not allow_unpretrained:
            raise ValidationError(
                "trainable encoder must be pretrained first (pass allow_unpretrained=True to override)"
            )
        if encoder.theta_s.size != config.n:
            raise ValidationError("encoder scale count does not match n")
    theta_s = encoder.theta_s.copy() if trainable else None

    rng = np.random.default_rng(config.seed)
    theta_g = rng.uniform(-config.init_scale, config.init_scale,
                          generator_param_count(config.n, config.b, config.ansatz))
    adam_g = AdamState.for_params(theta_g, lr=config.lr)
    adam_s = AdamState.for_params(theta_s, lr=config.lr) if trainable else None
    update_encoder = trainable and not config.freeze_encoder

    records = []
    m = X.shape[0]
    for epoch in range(config.epochs):
        start = time.perf_counter()
        lr = cosine_anneal_lr(min(epoch, config.t_max), config.lr, config.t_max)
        order = rng.permutation(m)
        for lo in range(0, m, config.batch_size):
            batch = X[order[lo:lo + config.batch_size]]
            seed = int(rng.integers(2**63)) if config.shots is not None else None
            ctx = LossContext(batch, theta_s, theta_g, config.ansatz, config.n, config.b,
                              config.encoder_mode, not update_encoder, config.shots, seed)
            grad_g = param_shift_grad(ctx, Which.GENERATOR)
            if update_encoder:
                grad_s = param_shift_grad(ctx, Which.ENCODER)
                theta_s, adam_s = adam_step(adam_s, theta_s, grad_s, lr)
            theta_g, adam_g = adam_step(adam_g, theta_g, grad_g, lr)
        loss = _dataset_loss(X, theta_s, theta_g, config)
        wall_ms = (time.perf_counter() - start) * 1e3
        records.append(TrainRecord(epoch, loss, 1.0 - loss, lr, wall_ms))
        log.debug("epoch %d loss %.6f lr %.3g", epoch, loss, lr)

    generator = GeneratorParams(theta_g, config.ansatz)
    final_encoder = EncoderParams(theta_s, pretrained=encoder.pretrained) if trainable else None
    result = TrainResult(generator, final_encoder, records)
    if not config.noise.is_noiseless:
        result.noisy = evaluate_noisy_gan(X, final_encoder, generator, config)
    return result


# -- noisy evaluation ------------------------------------------------------


@dataclass
class NoisyGanEstimate:
    fidelity: float
    stderr: float
    noiseless: float
    trajectories: int
    samples: int


def evaluate_noisy_gan(X, encoder: EncoderParams | None, generator: GeneratorParams,
                       config: TrainConfig, noise: NoiseSpec | None = None,
                       trajectories: int | None = None) -> NoisyGanEstimate:
    """Fidelity read from the noisy ``2n + 1``-qubit SWAP-test circuit.

    Each trajectory estimates ``2 * P0 - 1`` from the exact ancilla probability
    of its pure state.  Trajectories are spread round-robin over a fixed,
    seeded subset of samples, and the result is the stratified mean, so with no
    noise it equals the exact mean fidelity over that subset.
    """
    noise = config.noise if noise is None else noise
    trajectories = config.trajectories if trajectories is None else trajectories
    if trajectories < 1:
        raise ValidationError("trajectories must be at least 1")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n, b = config.n, config.b
    count = max(1, min(config.eval_samples, X.shape[0], trajectories // 2 or 1))
    pick = np.sort(np.random.default_rng(config.seed).choice(X.shape[0], count, replace=False))
    subset = X[pick]

    generator_circuit = build_generator(generator, n, b)
    plans = []
    for x in subset:
        circuit = assemble_gan_circuit(build_encoder(x, encoder, config.encoder_mode),
                                       generator_circuit, n)
        plans.append((circuit, _layer_plan(circuit)))

    values = [[] for _ in range(count)]
    for t, rng in enumerate(trajectory_rngs([config.seed, 0x5EED], trajectories)):
        i = t % count
        circuit, plan = plans[i]
        state = run_noisy_trajectory(circuit, noise, rng, plan=plan)
        values[i].append(2.0 * qubit_zero_probability(state, 0) - 1.0)

    means = np.array([np.mean(v) for v in values])
    # stratified standard error; strata with a single trajectory contribute no variance estimate
    var = np.array([np.var(v, ddof=1) / len(v) if len(v) > 1 else 0.0 for v in values])
    stderr = float(np.sqrt(var.sum()) / count)

    theta_s = None if encoder is None else encoder.theta_s
    exact = LossContext(subset, theta_s, generator.theta_g, generator.ansatz, n, b,
                        config.encoder_mode)
    noiseless = 1.0 - gan_loss(exact)
    return NoisyGanEstimate(float(means.mean()), stderr, noiseless, trajectories, count)


# -- experiment drivers ----------------------------------------------------


@dataclass
class AblationRow:
    ansatz: Ansatz
    mean_fidelity: float
    stddev: float
    one_qubit_gates: int
    two_qubit_gates: int
    parameters: int
    finals: list[float]


def ablation_run(X, encoder: EncoderParams | None, config: TrainConfig, ansatze, seeds, *,
                 allow_unpretrained: bool = False) -> list[AblationRow]:
    """Train every ansatz on the same data and seeds; one row per ansatz."""
    ansatze = [Ansatz.parse(a) for a in ansatze]
    seeds = list(seeds)
    if len(ansatze) < 2:
        raise ValidationError("ablation needs at least two ansatz kinds")
    if len(seeds) < 3:
        raise ValidationError("ablation needs at least three seeds")
    rows = []
    for ansatz in ansatze:
        finals = []
        for seed in seeds:
            cfg = replace(config, ansatz=ansatz, seed=seed)
            result = train_gan(X, encoder, cfg, allow_unpretrained=allow_unpretrained)
            finals.append(result.final_fidelity)
        cost = gan_circuit_cost(config.n, config.b, ansatz)
        rows.append(AblationRow(ansatz, float(np.mean(finals)), float(np.std(finals, ddof=1)),
                                cost.one_qubit_gates, cost.two_qubit_gates, cost.parameters,
                                finals))
    return rows


@dataclass
class SweepRow:
    n: int
    fidelity: float
    stderr: float
    noiseless: float


def noise_sweep(pixels, sizes, noise: NoiseSpec, config: TrainConfig,
                trajectories: int | None = None, encoder_for=None) -> list[SweepRow]:
    """Fit PCA(k=n), train, and evaluate under noise for each input size ``n``.

    ``pixels`` are raw image rows of one class subset.  ``encoder_for(n)`` may
    supply encoder scales per size; by default the all-ones scales are used.
    """
    sizes = [int(s) for s in sizes]
    trajectories = config.trajectories if trajectories is None else trajectories
    if not sizes or any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValidationError(f"sizes must be strictly ascending, got {sizes}")
    if trajectories < 100:
        raise ValidationError("noise sweep needs at least 100 trajectories")
    rows = []
    for n in sizes:
        pca = fit_pca(pixels, n)
        X = project(pca, pixels)
        cfg = replace(config, n=n, noise=NoiseSpec())
        encoder = encoder_for(n) if encoder_for is not None else None
        result = train_gan(X, encoder, cfg, allow_unpretrained=encoder is None)
        est = evaluate_noisy_gan(X, result.encoder, result.generator, cfg, noise, trajectories)
        log.info("n=%d noisy fidelity %.4f +- %.4f (noiseless %.4f)", n, est.fidelity,
                 est.stderr, est.noiseless)
        rows.append(SweepRow(n, est.fidelity, est.stderr, est.noiseless))
    return rows
