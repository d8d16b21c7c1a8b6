"""Circuit builders for the encoder, generator ansatz family and SWAP-test
discriminator, plus the hardware-cost model and the generated-data decoder.

Register layout of the assembled GAN circuit (``2n + 1`` qubits)::

    qubit 0            ancilla
    qubits 1 .. n      encoder (real data)
    qubits n+1 .. 2n   generator (fake data)
"""

from __future__ import annotations

import logging
from contextlib import contextmanager
from dataclasses import dataclass
from enum import Enum

import numpy as np

from iqgan.errors import NumericError, ValidationError
from iqgan.qsim import (
    Circuit,
    Gate,
    StateVector,
    qubit_expectation_x,
    qubit_zero_probability,
    run_circuit,
)

log = logging.getLogger(__name__)


class Ansatz(str, Enum):
    NO_ENTANGLER = "NO_ENTANGLER"
    CNOT = "CNOT"
    ISWAP = "ISWAP"
    CRX = "CRX"
    CROT = "CROT"

    @classmethod
    def parse(cls, value) -> "Ansatz":
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper().replace("-", "_")
        aliases = {"NONE": "NO_ENTANGLER", "NO_2Q": "NO_ENTANGLER", "W/O_2QGATE": "NO_ENTANGLER"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValidationError(
                f"unknown ansatz {value!r}; choose from {', '.join(a.value.lower() for a in cls)}"
            ) from None


class EncoderMode(str, Enum):
    TRAINABLE = "TRAINABLE"
    FIXED = "FIXED"

    @classmethod
    def parse(cls, value) -> "EncoderMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise ValidationError(f"unknown encoder mode {value!r}") from None


ENTANGLER_PARAMS = {
    Ansatz.NO_ENTANGLER: 0, Ansatz.CNOT: 0, Ansatz.ISWAP: 0, Ansatz.CRX: 1, Ansatz.CROT: 3,
}


@dataclass
class EncoderParams:
    theta_s: np.ndarray
    pretrained: bool = False

    def __post_init__(self):
        self.theta_s = np.asarray(self.theta_s, dtype=float).reshape(-1)
        if not np.all(np.isfinite(self.theta_s)):
            raise ValidationError("encoder scales must be finite")

    @classmethod
    def ones(cls, n: int) -> "EncoderParams":
        return cls(np.ones(n))


def generator_param_count(n: int, b: int, ansatz) -> int:
    ansatz = Ansatz.parse(ansatz)
    return 2 * n * b + b * (n - 1) * ENTANGLER_PARAMS[ansatz]


def controlled_param_mask(n: int, b: int, ansatz) -> np.ndarray:
    """True for generator angles that sit inside a controlled rotation."""
    ansatz = Ansatz.parse(ansatz)
    mask = np.zeros(generator_param_count(n, b, ansatz), dtype=bool)
    mask[2 * n * b:] = True
    return mask


@dataclass
class GeneratorParams:
    """Generator angles.

    Layout: ``2*n*b`` single-qubit angles first, block-major, with qubit ``i`` of
    block ``k`` using ``[2*n*k + 2*i]`` for RY and ``[2*n*k + 2*i + 1]`` for RZ.
    Entangler angles follow, block-major then pair-major (CRX: 1 per pair;
    CROT: phi, theta, omega per pair).
    """

    theta_g: np.ndarray
    ansatz: Ansatz = Ansatz.NO_ENTANGLER

    def __post_init__(self):
        self.theta_g = np.asarray(self.theta_g, dtype=float).reshape(-1)
        self.ansatz = Ansatz.parse(self.ansatz)
        if not np.all(np.isfinite(self.theta_g)):
            raise ValidationError("generator angles must be finite")

    def check(self, n: int, b: int):
        expected = generator_param_count(n, b, self.ansatz)
        if self.theta_g.size != expected:
            raise ValidationError(
                f"{self.ansatz.value} generator with n={n}, b={b} needs {expected} angles, "
                f"got {self.theta_g.size}"
            )


_last_clamp_warning = None
_clamp_quiet = 0


@contextmanager
def quiet_clamp_warnings():
    """Suppress the per-call arcsin clamp warning (e.g. while scales are being searched)."""
    global _clamp_quiet
    _clamp_quiet += 1
    try:
        yield
    finally:
        _clamp_quiet -= 1


def encoder_angles(x, theta_s=None, mode=EncoderMode.TRAINABLE) -> np.ndarray:
    """RY angles for inputs ``x`` (shape ``(n,)`` or ``(m, n)``).

    Trainable mode: ``arcsin(clip(x * theta_s, -1, 1))``.
    Fixed mode: ``pi * (x + 1) / 2``, mapping [-1, 1] onto [0, pi].
    """
    global _last_clamp_warning
    x = np.asarray(x, dtype=float)
    mode = EncoderMode.parse(mode)
    if mode is EncoderMode.FIXED:
        return np.pi * (np.clip(x, -1.0, 1.0) + 1.0) / 2.0
    theta_s = np.asarray(theta_s, dtype=float)
    if theta_s.shape[-1] != x.shape[-1]:
        raise ValidationError(
            f"input has {x.shape[-1]} features but theta_s has {theta_s.shape[-1]} entries"
        )
    u = x * theta_s
    over = np.abs(u) > 1.0
    if over.any() and not _clamp_quiet:
        key = tuple(np.round(theta_s, 2))
        if key != _last_clamp_warning:
            log.warning("clamped %d arcsin argument(s) with |x*theta_s| > 1", int(over.sum()))
            _last_clamp_warning = key
    return np.arcsin(np.clip(u, -1.0, 1.0))


def build_encoder(x, params: EncoderParams | None = None, mode=EncoderMode.TRAINABLE) -> Circuit:
    x = np.asarray(x, dtype=float).reshape(-1)
    if params is None and EncoderMode.parse(mode) is EncoderMode.TRAINABLE:
        raise ValidationError("trainable encoder needs EncoderParams")
    angles = encoder_angles(x, None if params is None else params.theta_s, mode)
    return Circuit(x.size, [Gate("RY", (i,), (a,)) for i, a in enumerate(angles)])


def encode_states(X, theta_s=None, mode=EncoderMode.TRAINABLE) -> np.ndarray:
    """Encoded product states for a batch, shape ``(m, 2**n)``, real amplitudes.

    Row ``j`` equals ``run_circuit(build_encoder(X[j], ...))`` amplitudes.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    half = encoder_angles(X, theta_s, mode) / 2.0
    return product_states(np.cos(half), np.sin(half))


def product_states(c, s) -> np.ndarray:
    """Kronecker product over qubits of (c_i, s_i) factors; inputs shape (m, n)."""
    m, n = c.shape
    out = np.ones((m, 1))
    for i in range(n):
        out = np.stack([out * c[:, i:i + 1], out * s[:, i:i + 1]], axis=2).reshape(m, -1)
    return out


_ENTANGLER_GATE = {
    Ansatz.CNOT: "CNOT", Ansatz.ISWAP: "ISWAP", Ansatz.CRX: "CRX", Ansatz.CROT: "CROT",
}


def build_generator(params: GeneratorParams, n: int, b: int) -> Circuit:
    if n < 1 or b < 1:
        raise ValidationError("generator needs n >= 1 and b >= 1")
    params.check(n, b)
    theta = params.theta_g
    k = ENTANGLER_PARAMS[params.ansatz]
    ent = 2 * n * b
    gates = []
    for block in range(b):
        base = 2 * n * block
        for q in range(n):
            gates.append(Gate("RY", (q,), (theta[base + 2 * q],)))
            gates.append(Gate("RZ", (q,), (theta[base + 2 * q + 1],)))
        if params.ansatz is Ansatz.NO_ENTANGLER:
            continue
        for q in range(n - 1):
            angles = tuple(theta[ent:ent + k])
            ent += k
            gates.append(Gate(_ENTANGLER_GATE[params.ansatz], (q, q + 1), angles))
    return Circuit(n, gates)


def build_swap_test(n: int) -> Circuit:
    if n < 1:
        raise ValidationError("SWAP test needs at least one data qubit")
    gates = [Gate("H", (0,))]
    gates += [Gate("CSWAP", (0, 1 + i, 1 + n + i)) for i in range(n)]
    gates.append(Gate("H", (0,)))
    return Circuit(2 * n + 1, gates)


def assemble_gan_circuit(encoder: Circuit, generator: Circuit, n: int) -> Circuit:
    if encoder.num_qubits != n or generator.num_qubits != n:
        raise ValidationError(
            f"register sizes {encoder.num_qubits}/{generator.num_qubits} do not match n={n}"
        )
    width = 2 * n + 1
    return encoder.embed(width, 1) + generator.embed(width, 1 + n) + build_swap_test(n)


def swap_test_p0(encoder: Circuit, generator: Circuit, n: int) -> float:
    """Ancilla zero-probability of the assembled SWAP-test circuit."""
    state = run_circuit(assemble_gan_circuit(encoder, generator, n))
    return qubit_zero_probability(state, 0)


@dataclass(frozen=True)
class CostReport:
    scheme: str
    qubits: int
    one_qubit_gates: int
    two_qubit_gates: int
    parameters: int

    def as_row(self) -> tuple[int, int, int, int]:
        return (self.qubits, self.one_qubit_gates, self.two_qubit_gates, self.parameters)


SCHEMES = ("IQGAN", "QUGAN21", "EQGAN")


def parse_scheme(scheme) -> str:
    key = str(scheme).strip().upper().replace("-", "").replace("_", "")
    if key not in SCHEMES:
        raise ValidationError(f"unknown scheme {scheme!r}; choose from iqgan, qugan21, eqgan")
    return key


def hardware_cost(scheme, n: int, b: int) -> CostReport:
    scheme = parse_scheme(scheme)
    if n < 1 or b < 1:
        raise ValidationError("hardware_cost needs n >= 1 and b >= 1")
    if scheme == "IQGAN":
        row = (2 * n + 1, 2 * n * b + n + 2, n, 2 * n * b)
    elif scheme == "QUGAN21":
        row = (2 * n + 1, n * b + 1, 4 * n * b, 5 * n * b)
    else:
        row = (2 * n + 1, 2 * n * b + n + 2, (b + 1) * n, 2 * n * b)
    return CostReport(scheme, *row)


def gan_circuit_cost(n: int, b: int, ansatz) -> CostReport:
    """Counts read off an actually-built GAN circuit for the given ansatz.

    Multi-qubit gates (including the 3-qubit CSWAP) fill the two-qubit column.
    """
    ansatz = Ansatz.parse(ansatz)
    params = GeneratorParams(np.zeros(generator_param_count(n, b, ansatz)), ansatz)
    circuit = assemble_gan_circuit(build_encoder(np.zeros(n), EncoderParams.ones(n)),
                                   build_generator(params, n, b), n)
    one, multi = circuit.count_gates()
    return CostReport(f"IQGAN[{ansatz.value}]", circuit.num_qubits, one, multi, params.theta_g.size)


def decode_features(state: StateVector, params: EncoderParams | None = None,
                    mode=EncoderMode.TRAINABLE, shots: int | None = None, rng=None) -> np.ndarray:
    """Invert the encoding map qubit by qubit from measurement statistics.

    The Z-basis zero-probability fixes |angle|; the sign comes from <X>, since
    the zero-probability alone cannot tell RY(a) from RY(-a).
    """
    mode = EncoderMode.parse(mode)
    n = state.num_qubits
    if mode is EncoderMode.TRAINABLE:
        if params is None or params.theta_s.size != n:
            raise ValidationError("decode needs one encoder scale per generator qubit")
        if np.any(params.theta_s == 0):
            raise NumericError("encoder scale of zero is not invertible")
    probs = state.probabilities().reshape((2,) * n)
    p0 = np.array([probs.take(0, axis=q).sum() for q in range(n)])
    # p1 summed directly (not 1 - p0) keeps small angles accurate
    p1 = np.array([probs.take(1, axis=q).sum() for q in range(n)])
    ex = np.array([qubit_expectation_x(state, q) for q in range(n)])
    if shots is not None:
        if rng is None:
            raise ValidationError("finite-shot decoding needs an rng")
        p0 = rng.binomial(shots, np.clip(p0, 0, 1)) / shots
        p1 = 1.0 - p0
        ex = 2.0 * rng.binomial(shots, np.clip((1 + ex) / 2, 0, 1)) / shots - 1.0
    p0, p1 = np.clip(p0, 0.0, 1.0), np.clip(p1, 0.0, 1.0)
    half = np.arctan2(np.sqrt(p1), np.sqrt(p0))
    if mode is EncoderMode.FIXED:
        return np.clip(4.0 * half / np.pi - 1.0, -1.0, 1.0)
    sign = np.where(ex < 0, -1.0, 1.0)
    return np.clip(sign * 2.0 * np.sqrt(p0 * p1) / params.theta_s, -1.0, 1.0)


def decode_generated(state: StateVector, params: EncoderParams | None, pca,
                     mode=EncoderMode.TRAINABLE, shots: int | None = None, rng=None) -> np.ndarray:
    """Generated image vector: decoded features pushed through inverse PCA."""
    from iqgan.data import reconstruct

    return reconstruct(pca, decode_features(state, params, mode, shots, rng))
