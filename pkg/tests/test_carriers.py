import itertools
import math

import pytest
from hypothesis import given, settings, strategies as st

from qcarrier.carriers import (SchemeSpec, apply_hadamard_round, basis_carrier_component,
                               build_carrier, codeword_label, correlation_defect, decode_symbol,
                               download, encode_amplitudes, encode_message, hadamard_round,
                               round_trip, upload)
from qcarrier.modular_codes import InsufficientShares
from qcarrier.qudit_state import apply_fourier, fidelity, split_product, tensor

SCHEMES = [
    SchemeSpec.kd(),
    SchemeSpec.two_two("odd"), SchemeSpec.two_two("even"),
    SchemeSpec.nn(3, "odd"), SchemeSpec.nn(3, "even"),
    SchemeSpec.kn(2, 3), SchemeSpec.kn(3, 5),
]
IDS = ["KD", "22odd", "22even", "NN3odd", "NN3even", "KN23", "KN35"]


def test_two_two_carriers_match_printed_states():
    odd = build_carrier(SchemeSpec.two_two("odd")).state
    even = build_carrier(SchemeSpec.two_two("even")).state
    assert odd.amplitudes() == pytest.approx({(0, 0, 0): 2**-0.5, (1, 1, 1): 2**-0.5})
    assert even.amplitudes() == pytest.approx(
        {k: 0.5 for k in [(0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0)]})


def test_nn3_even_encoding_expansion():
    # (|+++> + (-1)^s |--->)/sqrt2 spelled out
    zero = encode_amplitudes(SchemeSpec.nn(3), "even", 0)
    one = encode_amplitudes(SchemeSpec.nn(3), "even", 1)
    assert zero == pytest.approx({k: 0.5 for k in [(0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0)]})
    assert one == pytest.approx({k: 0.5 for k in [(0, 0, 1), (0, 1, 0), (1, 0, 0), (1, 1, 1)]})


@pytest.mark.parametrize("scheme", SCHEMES, ids=IDS)
def test_hadamard_round_maps_carrier_to_carrier(scheme):
    after = hadamard_round(build_carrier(scheme))
    assert after.scheme == scheme.flipped()
    assert fidelity(after.state, build_carrier(after.scheme).state) >= 1 - 1e-10
    assert correlation_defect(after.state, after.scheme) < 1e-12


def test_fourier_sign_calibration():
    # the invariance needs the same transform on every wire; conjugating
    # Alice's transform breaks it for the (2,3) carrier
    scheme = SchemeSpec.kn(2, 3)
    c = build_carrier(scheme).state
    bad = apply_fourier(c, "alice", conjugated=True)
    for w in scheme.player_labels:
        bad = apply_fourier(bad, w)
    assert fidelity(bad, c) == pytest.approx(1 / 3, abs=1e-12)
    assert fidelity(apply_hadamard_round(c, scheme), c) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("scheme", SCHEMES, ids=IDS)
def test_upload_shifts_message_by_carrier_digit(scheme):
    d = scheme.d
    for q, s in itertools.product(range(d), repeat=2):
        comp = basis_carrier_component(scheme, q)
        joint = upload(tensor(comp, encode_message(scheme, None, s)), scheme)
        want = tensor(comp, encode_message(scheme, None, (q + s) % d))
        assert fidelity(joint, want) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("scheme", SCHEMES, ids=IDS)
def test_round_trip_every_symbol(scheme):
    original = build_carrier(scheme).state
    for s in range(scheme.d):
        joint, carrier, msg = round_trip(scheme, s)
        assert fidelity(msg, encode_message(scheme, None, s)) >= 1 - 1e-12
        assert fidelity(carrier.state, original) >= 1 - 1e-12
        # in transit the message is entangled with the carrier
        with pytest.raises(ValueError):
            split_product(joint, scheme.carrier_labels)


@settings(max_examples=20, deadline=None)
@given(symbols=st.lists(st.integers(0, 2), min_size=1, max_size=6))
def test_carrier_survives_many_rounds(symbols):
    scheme = SchemeSpec.kn(2, 3)
    carrier = build_carrier(scheme)
    for s in symbols:
        joint = upload(tensor(carrier.state, encode_message(scheme, None, s)), scheme)
        carrier, msg = download(joint, scheme)
        assert codeword_label(scheme, None, next(iter(msg.amplitudes()))) == s
        carrier = hadamard_round(carrier)
    assert fidelity(carrier.state, build_carrier(scheme).state) >= 1 - 1e-10


def test_backends_agree_on_round_trip():
    scheme = SchemeSpec.kn(2, 3)
    for s in range(3):
        _, c1, m1 = round_trip(scheme, s, "sparse")
        _, c2, m2 = round_trip(scheme, s, "dense")
        assert fidelity(m1, m2.to_sparse()) == pytest.approx(1.0, abs=1e-12)
        assert fidelity(c1.state, c2.state.to_sparse()) == pytest.approx(1.0, abs=1e-12)


def test_decode_symbol_rules():
    kn = SchemeSpec.kn(2, 3)
    assert decode_symbol(kn, None, [2, 3], [2, 0]) == 1
    assert decode_symbol(kn, None, [1, 2, 3], [0, 1, 0]) is None
    with pytest.raises(InsufficientShares):
        decode_symbol(kn, None, [1], [0])
    nn = SchemeSpec.nn(3)
    assert decode_symbol(nn, "odd", [1, 2], [1, 1]) == 1
    assert decode_symbol(nn, "odd", [1, 2, 3], [1, 0, 1]) is None
    assert decode_symbol(nn, "even", [1, 2, 3], [1, 0, 0]) == 1
    with pytest.raises(InsufficientShares):
        decode_symbol(nn, "even", [1, 2], [1, 0])


def test_scheme_validation():
    with pytest.raises(ValueError):
        SchemeSpec("KD", 2)
    with pytest.raises(ValueError):
        SchemeSpec("KN", 4, 2)
    with pytest.raises(ValueError):
        SchemeSpec("NN", 3, parity="sideways")
    assert SchemeSpec.from_json(SchemeSpec.kn(3).to_json()) == SchemeSpec.kn(3, 5)
    amps = build_carrier(SchemeSpec.kn(3)).state.amplitudes()
    assert math.isclose(sum(abs(v) ** 2 for v in amps.values()), 1)
