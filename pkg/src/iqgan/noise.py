"""Bit-flip / phase-flip noise by Monte Carlo trajectories, with an exact
density-matrix oracle for circuits of at most four qubits.

Errors are inserted after every layer of :meth:`Circuit.layers`, on each qubit
touched by that layer: X with probability ``p_bit``, then Z with probability
``p_phase``, independently per qubit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from iqgan.errors import ValidationError
from iqgan.qsim import Circuit, StateVector, _apply_matrix, _check_targets, gate_matrix, run_circuit

MAX_DENSITY_QUBITS = 4

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class NoiseSpec:
    p_bit: float = 0.0
    p_phase: float = 0.0

    def __post_init__(self):
        for name in ("p_bit", "p_phase"):
            p = getattr(self, name)
            if not (0.0 <= p <= 1.0):
                raise ValidationError(f"{name} must lie in [0, 1], got {p}")

    @property
    def is_noiseless(self) -> bool:
        return self.p_bit == 0.0 and self.p_phase == 0.0


@dataclass(frozen=True)
class NoisyEstimate:
    mean: float
    stderr: float
    trajectories: int


def _flip_tensor(tensor, spec, qubits, rng):
    # one uniform draw per (qubit, channel) keeps the stream layout fixed
    for q in qubits:
        u_bit, u_phase = rng.random(2)
        if u_bit < spec.p_bit:
            tensor = np.flip(tensor, axis=q)
        if u_phase < spec.p_phase:
            idx = [slice(None)] * tensor.ndim
            idx[q] = 1
            tensor = tensor.copy()
            tensor[tuple(idx)] *= -1
    return tensor


def apply_flip_trajectory(state: StateVector, spec: NoiseSpec, layer_qubits, rng) -> StateVector:
    """Sample one Pauli-error realisation on ``layer_qubits``."""
    layer_qubits = list(layer_qubits)
    _check_targets(layer_qubits, state.num_qubits)
    tensor = state.amplitudes.reshape((2,) * state.num_qubits)
    out = _flip_tensor(tensor, spec, layer_qubits, rng)
    return StateVector(np.ascontiguousarray(out).reshape(-1), state.num_qubits)


def _layer_plan(circuit: Circuit):
    plan = []
    for layer in circuit.layers():
        touched = sorted({t for g in layer for t in g.targets})
        plan.append(([(gate_matrix(g), g.targets) for g in layer], touched))
    return plan


def run_noisy_trajectory(circuit: Circuit, spec: NoiseSpec, rng, initial: StateVector | None = None,
                         plan=None) -> StateVector:
    n = circuit.num_qubits
    if initial is None:
        initial = StateVector.zero(n)
    if spec.is_noiseless:
        # program order, so the result is bit-identical to run_circuit
        return run_circuit(circuit, initial)
    tensor = initial.amplitudes.reshape((2,) * n)
    for ops, touched in plan if plan is not None else _layer_plan(circuit):
        for u, targets in ops:
            tensor = _apply_matrix(tensor, u, targets)
        tensor = _flip_tensor(tensor, spec, touched, rng)
    return StateVector(np.ascontiguousarray(tensor).reshape(-1), n)


def trajectory_rngs(seed, trajectories: int):
    """Independent per-trajectory generators spawned from one master seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(trajectories)]


def estimate_mean(values) -> NoisyEstimate:
    values = np.asarray(values, dtype=float)
    t = values.size
    stderr = float(values.std(ddof=1) / np.sqrt(t)) if t > 1 else float("nan")
    return NoisyEstimate(float(values.mean()), stderr, t)


def noisy_fidelity(circuit: Circuit, reference: StateVector, spec: NoiseSpec,
                   trajectories: int, seed) -> NoisyEstimate:
    """Trajectory average of |<reference|noisy output>|^2."""
    if trajectories < 1:
        raise ValidationError("trajectories must be at least 1")
    if reference.num_qubits != circuit.num_qubits:
        raise ValidationError("reference and circuit widths differ")
    plan = _layer_plan(circuit)
    ref = reference.amplitudes
    values = np.empty(trajectories)
    for i, rng in enumerate(trajectory_rngs(seed, trajectories)):
        out = run_noisy_trajectory(circuit, spec, rng, plan=plan)
        values[i] = abs(np.vdot(ref, out.amplitudes)) ** 2
    return estimate_mean(values)


class DensityMatrix:
    """Mixed state of a few qubits, stored densely."""

    def __init__(self, entries, num_qubits: int | None = None):
        rho = np.asarray(entries, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValidationError("density matrix must be square")
        if num_qubits is None:
            num_qubits = int(round(np.log2(rho.shape[0])))
        if rho.shape[0] != 2**num_qubits:
            raise ValidationError(f"{rho.shape} is not a {num_qubits}-qubit density matrix")
        self.num_qubits = num_qubits
        self.entries = rho

    @classmethod
    def from_state(cls, state: StateVector) -> "DensityMatrix":
        a = state.amplitudes
        return cls(np.outer(a, a.conj()), state.num_qubits)

    def trace(self) -> float:
        return float(np.real(np.trace(self.entries)))

    def purity(self) -> float:
        return float(np.real(np.trace(self.entries @ self.entries)))

    def expectation_state(self, state: StateVector) -> float:
        """<psi|rho|psi>, the fidelity of rho against a pure reference."""
        a = state.amplitudes
        return float(np.real(np.vdot(a, self.entries @ a)))

    def is_valid(self, atol: float = 1e-10) -> bool:
        rho = self.entries
        return (
            np.allclose(rho, rho.conj().T, atol=atol)
            and abs(self.trace() - 1.0) < atol
            and np.linalg.eigvalsh(rho).min() >= -1e-9
        )


def _apply_to_density(rho_t, u, targets, n):
    # rho as a 2n-leg tensor: row legs 0..n-1, column legs n..2n-1
    rho_t = _apply_matrix(rho_t, u, targets)
    return _apply_matrix(rho_t, u.conj(), [t + n for t in targets])


def density_evolve(circuit: Circuit, spec: NoiseSpec, initial: DensityMatrix | None = None) -> DensityMatrix:
    n = circuit.num_qubits
    if n > MAX_DENSITY_QUBITS:
        raise ValidationError(
            f"density simulation limited to {MAX_DENSITY_QUBITS} qubits, circuit has {n}"
        )
    if initial is None:
        initial = DensityMatrix.from_state(StateVector.zero(n))
    rho = initial.entries.reshape((2,) * (2 * n))
    for layer in circuit.layers():
        touched = sorted({t for g in layer for t in g.targets})
        for g in layer:
            rho = _apply_to_density(rho, gate_matrix(g), g.targets, n)
        for q in touched:
            if spec.p_bit:
                rho = (1 - spec.p_bit) * rho + spec.p_bit * _apply_to_density(rho, _X, (q,), n)
            if spec.p_phase:
                rho = (1 - spec.p_phase) * rho + spec.p_phase * _apply_to_density(rho, _Z, (q,), n)
    return DensityMatrix(rho.reshape(2**n, 2**n), n)
