"""End-to-end acceptance checks.  Each test prints one PASS/FAIL line."""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from iqgan.autodiff import LossContext, Which, finite_diff_grad, gan_loss, param_shift_grad
from iqgan.circuits import (
    Ansatz,
    GeneratorParams,
    build_generator,
    controlled_param_mask,
    gan_circuit_cost,
    generator_param_count,
    hardware_cost,
    swap_test_p0,
)
from iqgan.cli import main
from iqgan.data import fit_pca, load_idx_arrays, project, select_classes
from iqgan.noise import NoiseSpec, density_evolve, noisy_fidelity
from iqgan.qsim import Circuit, Gate, fidelity, run_circuit
from iqgan.training import (
    PretrainConfig,
    TrainConfig,
    ablation_run,
    build_ensemble,
    hs_distance,
    noise_sweep,
    pretrain_encoder,
    train_gan,
)

DATA = Path(__file__).parent / "data"
IMAGES = DATA / "mnist-subset-images-idx3-ubyte.gz"
LABELS = DATA / "mnist-subset-labels-idx1-ubyte.gz"
SEEDS = (0, 1, 2)
DIGIT = 3


@pytest.fixture
def report(capsys):
    def emit(number, name, ok, detail, elapsed):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {name}: {detail} "
                  f"({elapsed:.1f} s)")
    return emit


@pytest.fixture(scope="module")
def digit():
    pixels, labels = load_idx_arrays(IMAGES, LABELS)
    three, _ = select_classes(pixels, labels, [DIGIT])
    seven, _ = select_classes(pixels, labels, [7])
    pca = fit_pca(three, 2)
    return {"pixels": three, "pca": pca, "X": project(pca, three), "other": project(pca, seven)}


def _random_circuit(rng, n):
    gates = []
    for _ in range(3 * n):
        q = int(rng.integers(n))
        gates.append(Gate(str(rng.choice(["RX", "RY", "RZ"])), (q,), (rng.uniform(-np.pi, np.pi),)))
        if n > 1 and rng.random() < 0.5:
            a, b = rng.choice(n, 2, replace=False)
            kind = str(rng.choice(["CNOT", "ISWAP", "CRX", "CROT"]))
            params = {"CNOT": (), "ISWAP": (), "CRX": (rng.uniform(-3, 3),),
                      "CROT": tuple(rng.uniform(-3, 3, 3))}[kind]
            gates.append(Gate(kind, (int(a), int(b)), params))
    return Circuit(n, gates)


def test_c01_swap_test_identity(report):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for i in range(200):
        n = (1, 2, 3)[i % 3]
        a, b = _random_circuit(rng, n), _random_circuit(rng, n)
        f = fidelity(run_circuit(a), run_circuit(b))
        worst = max(worst, abs(swap_test_p0(a, b, n) - (1 + f) / 2))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-10 and elapsed < 10
    report(1, "SWAP-test identity", ok, f"max |P0 - (1+F)/2| = {worst:.2e} over 200 pairs", elapsed)
    assert ok


def test_c02_gradient_oracle(report):
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    kinds = list(Ansatz)
    worst = 0.0
    for i in range(50):
        ansatz = kinds[i % len(kinds)]
        n, b = int(rng.integers(1, 4)), int(rng.integers(1, 3))
        ctx = LossContext(rng.uniform(-1, 1, (int(rng.integers(1, 6)), n)),
                          rng.uniform(0.3, 0.95, n),
                          rng.uniform(-np.pi, np.pi, generator_param_count(n, b, ansatz)),
                          ansatz, n, b, encoder_frozen=False)
        for which in (Which.GENERATOR, Which.ENCODER):
            ps, fd = param_shift_grad(ctx, which), finite_diff_grad(ctx, which)
            worst = max(worst, float(np.max(np.abs(ps - fd) / np.maximum(np.abs(fd), 1e-3))))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-5 and elapsed < 60
    report(2, "gradient oracle", ok, f"max relative error {worst:.2e} over 50 contexts", elapsed)
    assert ok


def test_c03_loss_periodicity(report):
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    worst, worst_controlled_4pi, checked = 0.0, 0.0, 0
    for ansatz in Ansatz:
        n, b = 3, 2
        ctx = LossContext(rng.uniform(-1, 1, (6, n)), rng.uniform(0.5, 1, n),
                          rng.uniform(-np.pi, np.pi, generator_param_count(n, b, ansatz)),
                          ansatz, n, b)
        base = gan_loss(ctx)
        controlled = controlled_param_mask(n, b, ansatz)
        for k in range(ctx.theta_g.size):
            theta = ctx.theta_g.copy()
            # controlled-rotation angles carry a relative phase: their period is 4 pi
            theta[k] += 4 * math.pi if controlled[k] else 2 * math.pi
            diff = abs(gan_loss(LossContext(ctx.batch, ctx.theta_s, theta, ansatz, n, b)) - base)
            if controlled[k]:
                worst_controlled_4pi = max(worst_controlled_4pi, diff)
            else:
                worst = max(worst, diff)
                checked += 1
    elapsed = time.perf_counter() - start
    ok = worst < 1e-12 and worst_controlled_4pi < 1e-12 and elapsed < 5
    report(3, "loss periodicity", ok,
           f"max 2pi deviation {worst:.1e} over {checked} rotation coordinates; "
           f"controlled angles 4pi deviation {worst_controlled_4pi:.1e}", elapsed)
    assert ok


def test_c04_cost_model(report):
    start = time.perf_counter()
    formulas = {
        "IQGAN": lambda n, b: (2 * n + 1, 2 * n * b + n + 2, n, 2 * n * b),
        "QUGAN21": lambda n, b: (2 * n + 1, n * b + 1, 4 * n * b, 5 * n * b),
        "EQGAN": lambda n, b: (2 * n + 1, 2 * n * b + n + 2, (b + 1) * n, 2 * n * b),
    }
    mismatches = 0
    for n in range(1, 9):
        for b in range(1, 5):
            for scheme, f in formulas.items():
                mismatches += hardware_cost(scheme, n, b).as_row() != f(n, b)
            mismatches += gan_circuit_cost(n, b, Ansatz.NO_ENTANGLER).as_row() != formulas["IQGAN"](n, b)
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 1
    report(4, "cost model", ok, f"{mismatches} mismatches over 8x4 grid, 3 schemes + built circuits",
           elapsed)
    assert ok


def _train_digit(digit, seed, encoder=None, **overrides):
    cfg = TrainConfig(seed=seed, **overrides)
    return train_gan(digit["X"], encoder, cfg, allow_unpretrained=encoder is None).final_fidelity


def test_c05_convergence(report, digit):
    start = time.perf_counter()
    finals = [_train_digit(digit, s) for s in SEEDS]
    elapsed = time.perf_counter() - start
    passing = sum(f >= 0.90 for f in finals)
    ok = passing >= 2 and elapsed < 300
    report(5, "convergence", ok,
           f"digit {DIGIT} (m={len(digit['X'])}) finals {', '.join(f'{f:.4f}' for f in finals)}; "
           f"{passing}/3 >= 0.90", elapsed)
    assert ok


def test_c06_trainable_vs_fixed_encoder(report, digit):
    start = time.perf_counter()
    pre = pretrain_encoder([digit["X"], digit["other"]], np.ones(2), PretrainConfig())
    te = [_train_digit(digit, s, pre.encoder) for s in SEEDS]
    fe = [_train_digit(digit, s, encoder_mode="fixed") for s in SEEDS]
    elapsed = time.perf_counter() - start
    wins = sum(t >= f - 0.01 for t, f in zip(te, fe))
    ok = wins >= 2 and elapsed < 600
    report(6, "TE vs FE", ok,
           f"theta_s={np.round(pre.encoder.theta_s, 3).tolist()}, TE {np.round(te, 4).tolist()} "
           f"vs FE {np.round(fe, 4).tolist()}; {wins}/3 seeds TE >= FE - 0.01", elapsed)
    assert ok


def test_c07_ablation_ordering(report, digit):
    start = time.perf_counter()
    rows = ablation_run(digit["X"], None, TrainConfig(), [Ansatz.NO_ENTANGLER, Ansatz.CNOT], SEEDS,
                        allow_unpretrained=True)
    plain, cnot = rows
    generator = build_generator(GeneratorParams(np.zeros(4), Ansatz.NO_ENTANGLER), 2, 1)
    two_qubit = generator.count_gates()[1]
    elapsed = time.perf_counter() - start
    ok = plain.mean_fidelity >= cnot.mean_fidelity - 0.02 and two_qubit == 0 and elapsed < 900
    report(7, "ablation ordering", ok,
           f"NO_ENTANGLER {plain.mean_fidelity:.4f}+-{plain.stddev:.4f} vs CNOT "
           f"{cnot.mean_fidelity:.4f}+-{cnot.stddev:.4f}; generator 2Q gates {two_qubit}", elapsed)
    assert ok


def test_c08_noise_trend(report, digit):
    start = time.perf_counter()
    rows = noise_sweep(digit["pixels"], [2, 4, 6, 8], NoiseSpec(0.01, 0.01), TrainConfig(), 1000)
    elapsed = time.perf_counter() - start
    f = [r.fidelity for r in rows]
    se = [r.stderr for r in rows]
    monotone = all(f[i + 1] <= f[i] + 2 * math.hypot(se[i], se[i + 1]) for i in range(3))
    ok = f[3] < f[0] and monotone and elapsed < 1800
    detail = ", ".join(f"n={r.n}: {r.fidelity:.4f}+-{r.stderr:.4f}" for r in rows)
    report(8, "noise trend", ok, detail, elapsed)
    assert ok


def _density_test_circuits():
    return [
        Circuit(1, [Gate("H", (0,))]),
        Circuit(1, [Gate("RY", (0,), (0.9,)), Gate("RZ", (0,), (-0.4,))]),
        Circuit(2, [Gate("H", (0,)), Gate("CNOT", (0, 1))]),
        Circuit(2, [Gate("RY", (0,), (0.7,)), Gate("RY", (1,), (-1.1,)), Gate("ISWAP", (0, 1))]),
        Circuit(2, [Gate("RX", (0,), (0.3,)), Gate("CRX", (0, 1), (1.2,)), Gate("RZ", (1,), (0.5,)),
                    Gate("CROT", (1, 0), (0.2, -0.8, 1.4))]),
    ]


def test_c09_trajectory_density_equivalence(report):
    start = time.perf_counter()
    spec = NoiseSpec(0.05, 0.03)
    worst = 0.0
    for i, circuit in enumerate(_density_test_circuits()):
        ref = run_circuit(circuit)
        exact = density_evolve(circuit, spec).expectation_state(ref)
        est = noisy_fidelity(circuit, ref, spec, 10_000, seed=[9, i])
        worst = max(worst, abs(est.mean - exact) / est.stderr)
    elapsed = time.perf_counter() - start
    ok = worst < 3 and elapsed < 60
    report(9, "trajectory/density equivalence", ok,
           f"max deviation {worst:.2f} standard errors over 5 circuits", elapsed)
    assert ok


def test_c10_pretraining_ascent(report):
    start = time.perf_counter()
    rng = np.random.default_rng(10)
    a = np.clip(0.8 + 0.1 * rng.normal(size=(40, 2)), -1, 1)
    b = np.clip(-0.8 + 0.1 * rng.normal(size=(40, 2)), -1, 1)
    res = pretrain_encoder([a, b], np.full(2, 0.1), PretrainConfig())
    plus, minus, zero = (build_ensemble([[v]], [1.0]) for v in (1.0, -1.0, 0.0))
    unit = [abs(hs_distance(plus, plus)), abs(hs_distance(plus, minus) - 2.0),
            abs(hs_distance(zero, plus) - 1.0)]
    elapsed = time.perf_counter() - start
    ok = res.objective_trace[-1] > res.initial and max(unit) < 1e-10 and elapsed < 30
    report(10, "pretraining ascent", ok,
           f"separation {res.initial:.4f} -> {res.objective_trace[-1]:.4f}; "
           f"unit-case error {max(unit):.1e}", elapsed)
    assert ok


def test_c11_determinism(report, tmp_path):
    start = time.perf_counter()
    data = ["--images", str(IMAGES), "--labels", str(LABELS), "--per-class", "100",
            "--no-figures", "--seed", "5"]
    commands = {
        "train": (["train", *data, "--classes", "3", "--epochs", "3"], "metrics.csv"),
        "pretrain": (["pretrain", *data, "--classes", "3,7", "--pretrain-steps", "10"],
                     "pretrain_trace.csv"),
        "ablate": (["ablate", *data, "--classes", "3", "--epochs", "2"], "ablation.csv"),
        "noise-sweep": (["noise-sweep", *data, "--classes", "3", "--epochs", "2", "--sizes", "2,3",
                         "--p-bit", "0.01", "--p-phase", "0.01", "--trajectories", "100"],
                        "sweep.csv"),
    }
    identical = []
    for name, (argv, csv) in commands.items():
        outputs = []
        for run in ("a", "b"):
            out = tmp_path / f"{name}-{run}"
            assert main([*argv, "--out", str(out)]) == 0
            outputs.append((out / csv).read_bytes())
        identical.append(outputs[0] == outputs[1])
    elapsed = time.perf_counter() - start
    ok = all(identical)
    report(11, "determinism", ok,
           f"{sum(identical)}/{len(identical)} commands byte-identical ({', '.join(commands)})",
           elapsed)
    assert ok
