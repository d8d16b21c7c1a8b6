"""Fidelity loss, its gradients, and the optimizer pieces used in training."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from iqgan.circuits import (
    Ansatz,
    EncoderMode,
    GeneratorParams,
    build_generator,
    controlled_param_mask,
    encode_states,
    encoder_angles,
    product_states,
)
from iqgan.errors import ValidationError
from iqgan.qsim import run_circuit

log = logging.getLogger(__name__)

CHAIN_FACTOR_LIMIT = 1e6
SINGULAR_MARGIN = 1e-9

# four-term shift coefficients for controlled rotations (generator spectrum {0, +-1/2})
_C1 = (math.sqrt(2) + 1) / (4 * math.sqrt(2))
_C2 = (math.sqrt(2) - 1) / (4 * math.sqrt(2))


class Which(str, Enum):
    GENERATOR = "GENERATOR"
    ENCODER = "ENCODER"


@dataclass
class LossContext:
    batch: np.ndarray
    theta_s: np.ndarray | None
    theta_g: np.ndarray
    ansatz: Ansatz
    n: int
    b: int
    encoder_mode: EncoderMode = EncoderMode.TRAINABLE
    encoder_frozen: bool = True
    shots: int | None = None
    seed: int | None = None

    def __post_init__(self):
        self.batch = np.atleast_2d(np.asarray(self.batch, dtype=float))
        self.theta_g = np.asarray(self.theta_g, dtype=float)
        self.ansatz = Ansatz.parse(self.ansatz)
        self.encoder_mode = EncoderMode.parse(self.encoder_mode)
        if self.batch.size == 0:
            raise ValidationError("loss batch is empty")
        if self.batch.shape[1] != self.n:
            raise ValidationError(f"batch has {self.batch.shape[1]} features, expected n={self.n}")
        if self.encoder_mode is EncoderMode.TRAINABLE:
            if self.theta_s is None:
                raise ValidationError("trainable encoder needs theta_s")
            self.theta_s = np.asarray(self.theta_s, dtype=float)
            if self.theta_s.size != self.n:
                raise ValidationError(f"theta_s has {self.theta_s.size} entries, expected {self.n}")
        GeneratorParams(self.theta_g, self.ansatz).check(self.n, self.b)
        if self.shots is not None and self.shots < 1:
            raise ValidationError("shots must be positive")


def generator_state(theta_g, ansatz, n: int, b: int) -> np.ndarray:
    return run_circuit(build_generator(GeneratorParams(theta_g, ansatz), n, b)).amplitudes


def _fidelities(targets: np.ndarray, gen: np.ndarray) -> np.ndarray:
    return np.abs(targets.conj() @ gen) ** 2


def _estimate(fids: np.ndarray, shots, rng) -> np.ndarray:
    # finite-shot SWAP test: ancilla reads 0 with probability (1 + F) / 2
    if shots is None:
        return fids
    p0 = np.clip((1.0 + fids) / 2.0, 0.0, 1.0)
    return 2.0 * rng.binomial(shots, p0) / shots - 1.0


def _loss_from(targets, gen, ctx, rng=None) -> float:
    fids = _fidelities(targets, gen)
    if ctx.shots is not None:
        fids = _estimate(fids, ctx.shots, rng if rng is not None else np.random.default_rng(ctx.seed))
    return float(np.clip(np.mean(1.0 - fids), 0.0, 1.0))


def gan_loss(ctx: LossContext) -> float:
    """Batch mean of ``1 - |<encoded x|generated>|^2``."""
    targets = encode_states(ctx.batch, ctx.theta_s, ctx.encoder_mode)
    gen = generator_state(ctx.theta_g, ctx.ansatz, ctx.n, ctx.b)
    return _loss_from(targets, gen, ctx)


def per_sample_fidelity(ctx: LossContext) -> np.ndarray:
    targets = encode_states(ctx.batch, ctx.theta_s, ctx.encoder_mode)
    return _fidelities(targets, generator_state(ctx.theta_g, ctx.ansatz, ctx.n, ctx.b))


def _generator_grad(ctx: LossContext, rng) -> np.ndarray:
    targets = encode_states(ctx.batch, ctx.theta_s, ctx.encoder_mode)
    controlled = controlled_param_mask(ctx.n, ctx.b, ctx.ansatz)

    def loss_at(k, shift):
        theta = ctx.theta_g.copy()
        theta[k] += shift
        return _loss_from(targets, generator_state(theta, ctx.ansatz, ctx.n, ctx.b), ctx, rng)

    grad = np.empty(ctx.theta_g.size)
    half = np.pi / 2
    for k in range(ctx.theta_g.size):
        g = (loss_at(k, half) - loss_at(k, -half)) / 2.0
        if controlled[k]:
            g = _C1 * 2.0 * g - _C2 * (loss_at(k, 3 * half) - loss_at(k, -3 * half))
        grad[k] = g
    return grad


def _chain_factors(x, theta_s):
    """d arcsin(clip(x*theta_s)) / d theta_s, with singular entries clamped."""
    u = x * theta_s
    with np.errstate(divide="ignore", invalid="ignore"):
        chain = x / np.sqrt(1.0 - u**2)
    chain = np.where(np.abs(u) > 1.0, 0.0, chain)
    singular = (np.abs(u) >= 1.0 - SINGULAR_MARGIN) & (np.abs(u) <= 1.0)
    chain = np.where(singular, np.sign(x) * CHAIN_FACTOR_LIMIT, chain)
    big = np.abs(chain) > CHAIN_FACTOR_LIMIT
    chain = np.clip(chain, -CHAIN_FACTOR_LIMIT, CHAIN_FACTOR_LIMIT)
    return chain, singular | big


def _encoder_grad(ctx: LossContext, rng) -> np.ndarray:
    if ctx.encoder_mode is EncoderMode.FIXED:
        return np.zeros(ctx.n)
    gen = generator_state(ctx.theta_g, ctx.ansatz, ctx.n, ctx.b)
    alpha = encoder_angles(ctx.batch, ctx.theta_s, ctx.encoder_mode)
    chain, flagged = _chain_factors(ctx.batch, ctx.theta_s)
    if flagged.any():
        cols = sorted(set(np.nonzero(flagged)[1].tolist()))
        log.warning("encoder chain factor clamped at %g for feature(s) %s", CHAIN_FACTOR_LIMIT, cols)
    m = ctx.batch.shape[0]
    grad = np.empty(ctx.n)
    for i in range(ctx.n):
        per_sample = np.zeros(m)
        for sign in (1.0, -1.0):
            shifted = alpha.copy()
            shifted[:, i] += sign * np.pi / 2
            states = product_states(np.cos(shifted / 2), np.sin(shifted / 2))
            fids = _estimate(_fidelities(states, gen), ctx.shots, rng)
            per_sample += sign * (1.0 - fids) / 2.0
        grad[i] = np.mean(per_sample * chain[:, i])
    return grad


def param_shift_grad(ctx: LossContext, which=Which.GENERATOR) -> np.ndarray:
    """Analytic gradient from shifted loss evaluations.

    Plain rotation angles use the two-term +-pi/2 rule.  Angles inside
    controlled rotations (CRX, CROT) need the four-term rule, because the
    controlled generator has eigenvalues {0, +-1/2}.  Encoder scales are
    differentiated by shifting the encoding angle and applying the arcsin chain
    factor ``x / sqrt(1 - (x*theta_s)**2)``.
    """
    which = Which(which)
    rng = np.random.default_rng(ctx.seed) if ctx.shots is not None else None
    if which is Which.GENERATOR:
        return _generator_grad(ctx, rng)
    return _encoder_grad(ctx, rng)


def finite_diff_grad(ctx: LossContext, which=Which.GENERATOR, h: float = 1e-5) -> np.ndarray:
    which = Which(which)
    if h <= 0:
        raise ValidationError("finite-difference step must be positive")
    base = ctx.theta_g if which is Which.GENERATOR else ctx.theta_s
    field_name = "theta_g" if which is Which.GENERATOR else "theta_s"
    grad = np.empty(base.size)
    for k in range(base.size):
        plus, minus = base.copy(), base.copy()
        plus[k] += h
        minus[k] -= h
        grad[k] = (gan_loss(replace(ctx, **{field_name: plus}))
                   - gan_loss(replace(ctx, **{field_name: minus}))) / (2 * h)
    return grad


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: np.ndarray | None = field(default=None, repr=False)
    v: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def for_params(cls, params, lr: float = 1e-3, **kw) -> "AdamState":
        size = np.asarray(params).size
        return cls(lr=lr, m=np.zeros(size), v=np.zeros(size), **kw)


def adam_step(state: AdamState, params, grads, lr: float | None = None):
    """One bias-corrected ADAM update; returns ``(new_params, new_state)``."""
    params = np.asarray(params, dtype=float)
    grads = np.asarray(grads, dtype=float)
    if params.shape != grads.shape:
        raise ValidationError(f"params {params.shape} and grads {grads.shape} differ in shape")
    m = state.m if state.m is not None else np.zeros_like(params)
    v = state.v if state.v is not None else np.zeros_like(params)
    if m.shape != params.shape:
        raise ValidationError("optimizer moments do not match the parameter vector")
    lr = state.lr if lr is None else lr
    t = state.step + 1
    m = state.beta1 * m + (1 - state.beta1) * grads
    v = state.beta2 * v + (1 - state.beta2) * grads**2
    m_hat = m / (1 - state.beta1**t)
    v_hat = v / (1 - state.beta2**t)
    new = params - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new, replace(state, step=t, m=m, v=v)


def cosine_anneal_lr(epoch: int, lr0: float, t_max: int) -> float:
    if t_max <= 0:
        raise ValidationError("t_max must be positive")
    if not 0 <= epoch <= t_max:
        raise ValidationError(f"epoch {epoch} outside [0, {t_max}]")
    return lr0 * (1 + math.cos(math.pi * epoch / t_max)) / 2
