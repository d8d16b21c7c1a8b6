import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iqgan.circuits import (
    Ansatz,
    EncoderMode,
    EncoderParams,
    GeneratorParams,
    assemble_gan_circuit,
    build_encoder,
    build_generator,
    controlled_param_mask,
    decode_features,
    decode_generated,
    encode_states,
    encoder_angles,
    gan_circuit_cost,
    generator_param_count,
    hardware_cost,
    swap_test_p0,
)
from iqgan.data import PcaModel
from iqgan.errors import NumericError, ValidationError
from iqgan.qsim import Circuit, Gate, StateVector, fidelity, run_circuit

GOLDEN = Path(__file__).parent / "golden"


def test_trainable_encoding_of_half():
    state = run_circuit(build_encoder(np.array([0.5]), EncoderParams.ones(1)))
    assert state.probabilities()[0] == pytest.approx(math.cos(math.pi / 12) ** 2)
    assert state.probabilities()[0] == pytest.approx(0.9330127, abs=1e-7)


def test_fixed_encoding_endpoints():
    np.testing.assert_allclose(encoder_angles([-1.0, 0.0, 1.0], mode="fixed"), [0, math.pi / 2, math.pi])


def test_decode_oracle_three_quarters():
    state = run_circuit(Circuit(1, [Gate("RY", (0,), (math.pi / 3,))]))
    assert state.probabilities()[0] == pytest.approx(0.75)
    assert decode_features(state, EncoderParams.ones(1))[0] == pytest.approx(math.sin(math.pi / 3))


def test_decode_recovers_negative_features():
    x = np.array([-0.6, 0.3])
    state = run_circuit(build_encoder(x, EncoderParams.ones(2)))
    np.testing.assert_allclose(decode_features(state, EncoderParams.ones(2)), x, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=1, max_size=4),
       st.floats(0.2, 3.0))
def test_encode_decode_round_trip(xs, scale):
    n = len(xs)
    params = EncoderParams(np.full(n, scale))
    x = np.clip(np.array(xs), -1 / scale, 1 / scale)
    state = run_circuit(build_encoder(x, params))
    np.testing.assert_allclose(decode_features(state, params), x, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=1, max_size=4))
def test_fixed_round_trip(xs):
    x = np.array(xs)
    state = run_circuit(build_encoder(x, mode=EncoderMode.FIXED))
    np.testing.assert_allclose(decode_features(state, mode="fixed"), x, atol=1e-9)


def test_decode_with_zero_scale_is_numeric_error():
    with pytest.raises(NumericError):
        decode_features(StateVector.zero(1), EncoderParams(np.zeros(1)))


def test_encode_states_matches_circuits():
    X = np.array([[0.1, -0.7], [0.9, 0.2]])
    theta = np.array([1.0, 1.3])
    vecs = encode_states(X, theta)
    for row, vec in zip(X, vecs):
        np.testing.assert_allclose(vec, run_circuit(build_encoder(row, EncoderParams(theta))).amplitudes,
                                   atol=1e-12)


def test_encoder_clamps_out_of_range(caplog):
    angles = encoder_angles(np.array([0.9]), np.array([2.0]))
    assert angles[0] == pytest.approx(math.pi / 2)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=2, max_size=2),
       st.lists(st.floats(-math.pi, math.pi), min_size=4, max_size=4))
def test_swap_test_probability(xs, thetas):
    enc = build_encoder(np.array(xs), EncoderParams.ones(2))
    gen = build_generator(GeneratorParams(np.array(thetas)), 2, 1)
    f = fidelity(run_circuit(enc), run_circuit(gen))
    assert swap_test_p0(enc, gen, 2) == pytest.approx((1 + f) / 2, abs=1e-12)


def test_swap_test_of_identical_states_is_one():
    enc = build_encoder(np.array([0.5, -0.5]), EncoderParams.ones(2))
    assert swap_test_p0(enc, enc, 2) == pytest.approx(1.0)


def test_swap_test_of_orthogonal_states_is_half():
    zero = Circuit(1, [])
    one = Circuit(1, [Gate("X", (0,))])
    assert swap_test_p0(zero, one, 1) == pytest.approx(0.5)


def test_golden_circuit_dump():
    g = GeneratorParams(np.round(np.linspace(-1.2, 1.3, generator_param_count(3, 2, "crot")), 4), "crot")
    enc = build_encoder(np.array([0.5, -0.25, 0.0]), EncoderParams(np.array([1.0, 2.0, 0.5])))
    c = assemble_gan_circuit(enc, build_generator(g, 3, 2), 3)
    assert c.dump() == (GOLDEN / "gan_crot_n3_b2.txt").read_text()


@pytest.mark.parametrize("ansatz,extra", [("no_entangler", 0), ("cnot", 0), ("iswap", 0),
                                          ("crx", 1), ("crot", 3)])
def test_param_counts(ansatz, extra):
    assert generator_param_count(4, 3, ansatz) == 2 * 4 * 3 + 3 * 3 * extra
    mask = controlled_param_mask(4, 3, ansatz)
    assert mask.sum() == 3 * 3 * extra and not mask[:24].any()


def test_generator_block_layout():
    theta = np.arange(8, dtype=float)
    c = build_generator(GeneratorParams(theta, "no_entangler"), 2, 2)
    assert [(g.kind, g.targets, g.params) for g in c.gates[:4]] == [
        ("RY", (0,), (0.0,)), ("RZ", (0,), (1.0,)), ("RY", (1,), (2.0,)), ("RZ", (1,), (3.0,))]
    assert c.gates[4].params == (4.0,)


def test_wrong_parameter_count_rejected():
    with pytest.raises(ValidationError):
        build_generator(GeneratorParams(np.zeros(3)), 2, 1)


def test_hardware_cost_small_case():
    assert hardware_cost("iqgan", 2, 1).as_row() == (5, 8, 2, 4)
    assert hardware_cost("QuGAN21", 2, 1).as_row() == (5, 3, 8, 10)
    assert hardware_cost("eq-gan", 2, 1).as_row() == (5, 8, 4, 4)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 4))
def test_built_circuit_matches_cost_model(n, b):
    built = gan_circuit_cost(n, b, Ansatz.NO_ENTANGLER)
    assert built.as_row() == hardware_cost("iqgan", n, b).as_row()


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 4))
def test_iqgan_never_costs_more_than_alternatives(n, b):
    iq = hardware_cost("iqgan", n, b)
    for other in ("qugan21", "eqgan"):
        o = hardware_cost(other, n, b)
        assert iq.qubits == o.qubits
        assert iq.two_qubit_gates <= o.two_qubit_gates


def test_unknown_scheme_and_ansatz():
    with pytest.raises(ValidationError):
        hardware_cost("foo", 2, 1)
    with pytest.raises(ValidationError):
        Ansatz.parse("zz")
    assert Ansatz.parse("w/o_2qgate") is Ansatz.NO_ENTANGLER


def test_decode_generated_with_identity_pca():
    x = np.array([0.4, -0.2])
    state = run_circuit(build_encoder(x, EncoderParams.ones(2)))
    out = decode_generated(state, EncoderParams.ones(2), PcaModel.identity(2))
    np.testing.assert_allclose(out, x, atol=1e-12)


def test_finite_shot_decode_is_close_and_needs_rng():
    x = np.array([0.4, -0.2])
    state = run_circuit(build_encoder(x, EncoderParams.ones(2)))
    out = decode_features(state, EncoderParams.ones(2), shots=20000, rng=np.random.default_rng(0))
    np.testing.assert_allclose(out, x, atol=0.05)
    with pytest.raises(ValidationError):
        decode_features(state, EncoderParams.ones(2), shots=100)
