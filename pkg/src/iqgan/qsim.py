"""Dense statevector simulation for the small gate set the GAN circuits use.

Qubit 0 is the most significant bit of the basis-state index, so for three
qubits ``|100>`` is amplitude index 4.  Rotations follow ``R_P(t) = exp(-i t P / 2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from iqgan.errors import ValidationError

GATE_ARITY = {
    "H": 1, "X": 1, "Z": 1, "RX": 1, "RY": 1, "RZ": 1,
    "CNOT": 2, "ISWAP": 2, "CRX": 2, "CROT": 2,
    "CSWAP": 3,
}
GATE_NPARAMS = {
    "H": 0, "X": 0, "Z": 0, "RX": 1, "RY": 1, "RZ": 1,
    "CNOT": 0, "ISWAP": 0, "CRX": 1, "CROT": 3,
    "CSWAP": 0,
}

_I2 = np.eye(2, dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_P0 = np.diag([1, 0]).astype(complex)
_P1 = np.diag([0, 1]).astype(complex)


def _rx(t):
    c, s = np.cos(t / 2), np.sin(t / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def _ry(t):
    c, s = np.cos(t / 2), np.sin(t / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _rz(t):
    return np.array([[np.exp(-0.5j * t), 0], [0, np.exp(0.5j * t)]], dtype=complex)


def _controlled(u):
    return np.kron(_P0, _I2) + np.kron(_P1, u)


@dataclass(frozen=True)
class Gate:
    """One gate instruction; controls come first in ``targets``."""

    kind: str
    targets: tuple[int, ...]
    params: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in GATE_ARITY:
            raise ValidationError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if len(self.targets) != GATE_ARITY[self.kind]:
            raise ValidationError(
                f"{self.kind} acts on {GATE_ARITY[self.kind]} qubit(s), got targets {self.targets}"
            )
        if len(self.params) != GATE_NPARAMS[self.kind]:
            raise ValidationError(
                f"{self.kind} takes {GATE_NPARAMS[self.kind]} angle(s), got {len(self.params)}"
            )
        if len(set(self.targets)) != len(self.targets):
            raise ValidationError(f"duplicate targets {self.targets} for {self.kind}")
        if any(t < 0 for t in self.targets):
            raise ValidationError(f"negative qubit index in {self.targets}")

    @property
    def arity(self) -> int:
        return len(self.targets)

    def shifted(self, offset: int) -> "Gate":
        return Gate(self.kind, tuple(t + offset for t in self.targets), self.params)


def gate_matrix(gate: Gate) -> np.ndarray:
    kind, p = gate.kind, gate.params
    if kind == "H":
        return _H.copy()
    if kind == "X":
        return _X.copy()
    if kind == "Z":
        return _Z.copy()
    if kind == "RX":
        return _rx(p[0])
    if kind == "RY":
        return _ry(p[0])
    if kind == "RZ":
        return _rz(p[0])
    if kind == "CNOT":
        return _controlled(_X)
    if kind == "ISWAP":
        return np.array(
            [[1, 0, 0, 0], [0, 0, 1j, 0], [0, 1j, 0, 0], [0, 0, 0, 1]], dtype=complex
        )
    if kind == "CRX":
        return _controlled(_rx(p[0]))
    if kind == "CROT":
        phi, theta, omega = p
        return _controlled(_rz(omega) @ _ry(theta) @ _rz(phi))
    if kind == "CSWAP":
        u = np.eye(8, dtype=complex)
        u[[5, 6]] = u[[6, 5]]
        return u
    raise ValidationError(f"unknown gate kind {kind!r}")  # pragma: no cover


@dataclass(frozen=True)
class Circuit:
    """An immutable gate program on ``num_qubits`` qubits."""

    num_qubits: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        if self.num_qubits < 1:
            raise ValidationError("a circuit needs at least one qubit")
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if max(g.targets) >= self.num_qubits:
                raise ValidationError(
                    f"{g.kind} targets {g.targets} outside a {self.num_qubits}-qubit circuit"
                )

    def __len__(self):
        return len(self.gates)

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.num_qubits != self.num_qubits:
            raise ValidationError("cannot concatenate circuits of different width")
        return Circuit(self.num_qubits, self.gates + other.gates)

    def embed(self, num_qubits: int, offset: int) -> "Circuit":
        """Place this circuit on qubits ``offset .. offset+width-1`` of a wider register."""
        return Circuit(num_qubits, tuple(g.shifted(offset) for g in self.gates))

    def count_gates(self) -> tuple[int, int]:
        """(single-qubit gates, multi-qubit gates)."""
        one = sum(1 for g in self.gates if g.arity == 1)
        return one, len(self.gates) - one

    def layers(self) -> list[list[Gate]]:
        """Greedy as-soon-as-possible layering into sets of gates on disjoint qubits."""
        depth = [0] * self.num_qubits
        out: list[list[Gate]] = []
        for g in self.gates:
            level = max(depth[t] for t in g.targets)
            if level == len(out):
                out.append([])
            out[level].append(g)
            for t in g.targets:
                depth[t] = level + 1
        return out

    def dump(self) -> str:
        lines = []
        for g in self.gates:
            parts = [g.kind, ",".join(str(t) for t in g.targets)]
            parts.extend(f"{a:.9g}" for a in g.params)
            lines.append(" ".join(parts))
        return "\n".join(lines) + ("\n" if lines else "")


class StateVector:
    """Amplitudes of an n-qubit pure state."""

    def __init__(self, amplitudes, num_qubits: int | None = None):
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        if num_qubits is None:
            num_qubits = int(round(np.log2(amps.size)))
        if num_qubits < 1 or amps.size != 2**num_qubits:
            raise ValidationError(
                f"{amps.size} amplitudes do not describe {num_qubits} qubit(s)"
            )
        self.num_qubits = num_qubits
        self.amplitudes = amps

    @classmethod
    def zero(cls, num_qubits: int) -> "StateVector":
        amps = np.zeros(2**num_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(amps, num_qubits)

    @classmethod
    def basis(cls, bits: str) -> "StateVector":
        amps = np.zeros(2 ** len(bits), dtype=complex)
        amps[int(bits, 2)] = 1.0
        return cls(amps, len(bits))

    def copy(self) -> "StateVector":
        return StateVector(self.amplitudes.copy(), self.num_qubits)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def __repr__(self):
        return f"StateVector(num_qubits={self.num_qubits})"


def _check_targets(targets, num_qubits):
    if len(set(targets)) != len(targets):
        raise ValidationError(f"duplicate targets {targets}")
    for t in targets:
        if not 0 <= t < num_qubits:
            raise ValidationError(f"qubit {t} out of range for {num_qubits} qubit(s)")


def _apply_matrix(tensor: np.ndarray, u: np.ndarray, targets) -> np.ndarray:
    # tensor has shape (2,)*n; contract the gate's input legs with the target axes
    k = len(targets)
    ut = u.reshape((2,) * (2 * k))
    out = np.tensordot(ut, tensor, axes=(list(range(k, 2 * k)), list(targets)))
    return np.moveaxis(out, list(range(k)), list(targets))


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    _check_targets(gate.targets, state.num_qubits)
    tensor = state.amplitudes.reshape((2,) * state.num_qubits)
    out = _apply_matrix(tensor, gate_matrix(gate), gate.targets)
    return StateVector(out.reshape(-1), state.num_qubits)


def run_gates(tensor: np.ndarray, gates) -> np.ndarray:
    """Apply ``gates`` to an amplitude tensor of shape (2,)*n; returns a new tensor."""
    for g in gates:
        tensor = _apply_matrix(tensor, gate_matrix(g), g.targets)
    return tensor


def run_circuit(circuit: Circuit, initial: StateVector | None = None) -> StateVector:
    if initial is None:
        initial = StateVector.zero(circuit.num_qubits)
    elif initial.num_qubits != circuit.num_qubits:
        raise ValidationError(
            f"circuit has {circuit.num_qubits} qubits but the initial state has {initial.num_qubits}"
        )
    tensor = run_gates(initial.amplitudes.reshape((2,) * circuit.num_qubits), circuit.gates)
    return StateVector(tensor.reshape(-1).copy(), circuit.num_qubits)


def fidelity(a: StateVector, b: StateVector) -> float:
    """Squared overlap |<a|b>|^2 of two pure states."""
    if a.num_qubits != b.num_qubits:
        raise ValidationError(f"fidelity between {a.num_qubits}- and {b.num_qubits}-qubit states")
    return float(min(1.0, abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2))


def qubit_zero_probability(state: StateVector, qubit: int) -> float:
    _check_targets((qubit,), state.num_qubits)
    amps = state.amplitudes.reshape(2**qubit, 2, -1)
    return float(np.sum(np.abs(amps[:, 0, :]) ** 2))


def qubit_expectation_x(state: StateVector, qubit: int) -> float:
    """<X> on one qubit; for a real-amplitude RY(a)|0> factor this is sin(a)."""
    _check_targets((qubit,), state.num_qubits)
    amps = state.amplitudes.reshape(2**qubit, 2, -1)
    return float(2.0 * np.real(np.vdot(amps[:, 0, :], amps[:, 1, :])))


def reduced_density_matrix(state: StateVector, keep) -> np.ndarray:
    """Partial trace of |psi><psi| onto the qubits in ``keep`` (in the given order)."""
    keep = list(keep)
    _check_targets(keep, state.num_qubits)
    rest = [q for q in range(state.num_qubits) if q not in keep]
    t = np.transpose(state.amplitudes.reshape((2,) * state.num_qubits), keep + rest)
    m = t.reshape(2 ** len(keep), -1)
    return m @ m.conj().T


@dataclass
class MeasurementCounts:
    shots: int
    counts: dict[str, int] = field(default_factory=dict)

    def frequency(self, bits: str) -> float:
        return self.counts.get(bits, 0) / self.shots


def sample_measurements(state: StateVector, shots: int, seed: int) -> MeasurementCounts:
    """Draw ``shots`` computational-basis outcomes; reproducible for a fixed seed."""
    if shots < 1:
        raise ValidationError("shots must be at least 1")
    probs = state.probabilities()
    probs = probs / probs.sum()
    rng = np.random.default_rng(seed)
    hist = rng.multinomial(shots, probs)
    n = state.num_qubits
    counts = {format(i, f"0{n}b"): int(c) for i, c in enumerate(hist) if c}
    return MeasurementCounts(shots, counts)
