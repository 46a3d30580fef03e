"""One test per acceptance criterion; each prints a PASS/FAIL line."""
import itertools
import time
from pathlib import Path

from conftest import ACCEPTANCE_LINES
from qcarrier.adversary import (AttackModel, contamination_detection, entangle_difference_attack,
                                insider_b3_attack, monte_carlo_detection, orthogonal_ancillas,
                                passive_intercept)
from qcarrier.carriers import (SchemeSpec, build_carrier, encode_message, hadamard_round,
                               round_trip, upload)
from qcarrier.cli import main
from qcarrier.modular_codes import (CodeSpec, branch_label_table, encode_codeword, power_sum,
                                    power_sum_by_recursion, retrieve_classical)
from qcarrier.protocol_engine import (authorized_retrieve, clean_then_retrieve,
                                      retrieve_then_clean)
from qcarrier.qudit_state import dump_state, fidelity, partial_trace, tensor, trace_distance

FIX = Path(__file__).parent / "fixtures"

ALL_SCHEMES = [
    SchemeSpec.kd(), SchemeSpec.two_two("odd"), SchemeSpec.two_two("even"),
    SchemeSpec.nn(3, "odd"), SchemeSpec.nn(3, "even"), SchemeSpec.kn(2, 3), SchemeSpec.kn(3, 5),
]


def verdict(number, title, ok, detail=""):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {title}" + (f" ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_01_codewords_23():
    t0 = time.perf_counter()
    printed = {
        0: [(0, 0, 0), (1, 1, 1), (2, 2, 2)],
        1: [(0, 1, 2), (1, 2, 0), (2, 0, 1)],
        2: [(0, 2, 1), (1, 0, 2), (2, 1, 0)],
    }
    worst = 0.0
    ok = True
    for s, branches in printed.items():
        amps = encode_codeword(CodeSpec(2, 3), s).state.amplitudes()
        ok &= set(amps) == set(branches)
        worst = max([worst] + [abs(amps.get(b, 0) - 3**-0.5) for b in branches])
    dt = time.perf_counter() - t0
    verdict(1, "(2,3) codewords equal the printed superpositions",
            ok and worst < 1e-12 and dt < 1.0, f"max dev {worst:.1e}, {dt:.3f}s")


def test_criterion_02_carrier_invariance():
    t0 = time.perf_counter()
    fids = {}
    for scheme in (SchemeSpec.kd(), SchemeSpec.kn(2, 3), SchemeSpec.kn(3, 5)):
        c = build_carrier(scheme)
        fids[scheme.variant + str(scheme.n)] = fidelity(hadamard_round(c).state, c.state)
    odd = build_carrier(SchemeSpec.two_two("odd"))
    mapped = hadamard_round(odd).state.amplitudes()
    even = {k: 0.5 for k in [(0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0)]}
    dev = max(abs(mapped.get(k, 0) - even.get(k, 0)) for k in set(mapped) | set(even))
    back = hadamard_round(hadamard_round(odd)).state
    dt = time.perf_counter() - t0
    ok = (min(fids.values()) >= 1 - 1e-10 and dev < 1e-12
          and fidelity(back, odd.state) >= 1 - 1e-12 and dt < 5.0)
    verdict(2, "Fourier round leaves carriers invariant, H^3 swaps odd/even",
            ok, f"min fidelity {min(fids.values()):.15f}, odd->even dev {dev:.1e}, {dt:.2f}s")


def test_criterion_03_round_trips():
    t0 = time.perf_counter()
    worst_msg, worst_carrier = 1.0, 1.0
    for scheme in ALL_SCHEMES:
        original = build_carrier(scheme).state
        for s in range(scheme.d):
            _, carrier, msg = round_trip(scheme, s, backend="sparse")
            worst_msg = min(worst_msg, fidelity(msg, encode_message(scheme, None, s)))
            worst_carrier = min(worst_carrier, fidelity(carrier.state, original))
    dt = time.perf_counter() - t0
    verdict(3, "upload/download round trip for every scheme and symbol",
            worst_msg >= 1 - 1e-12 and worst_carrier >= 1 - 1e-12 and dt < 30.0,
            f"min message fidelity {worst_msg:.15f}, min carrier fidelity {worst_carrier:.15f}, "
            f"{dt:.2f}s")


def test_criterion_04_zero_leakage():
    worst = max(max(passive_intercept(s, list(range(s.d))).distances) for s in ALL_SCHEMES)
    verdict(4, "in-transit message marginals are symbol independent", worst < 1e-10,
            f"max trace distance {worst:.1e}")


def test_criterion_05_threshold():
    ok = True
    worst = 0.0
    for k, n in ((2, 3), (3, 5)):
        spec = CodeSpec(k, n)
        scheme = SchemeSpec.kn(k, n)
        for branch, s in branch_label_table(k, n).items():
            for subset in itertools.combinations(range(n), k):
                ok &= retrieve_classical(spec, [(j, branch[j]) for j in subset]) == s
        words = [encode_codeword(spec, s).state for s in range(n)]
        for s, word in enumerate(words):
            for subset in itertools.combinations(range(1, n + 1), k):
                ok &= authorized_retrieve(scheme, word, subset, rng_seed=s) == s
        for subset in itertools.combinations(range(n), k - 1):
            rhos = [partial_trace(w, subset) for w in words]
            worst = max([worst] + [trace_distance(rhos[0], r) for r in rhos[1:]])
    verdict(5, "every k-subset recovers s, every (k-1)-subset learns nothing",
            ok and worst < 1e-10, f"max (k-1)-marginal distance {worst:.1e}")


def test_criterion_06_difference_attack_and_detection():
    exact_ok = True
    for length in (2, 3, 4):
        for seq in itertools.product(range(3), repeat=length):
            got = entangle_difference_attack(SchemeSpec.kn(2, 3), seq).differences
            exact_ok &= got == [(seq[0] - s) % 3 for s in seq[1:]]
    kd = SchemeSpec.kd()
    exact = contamination_detection(kd, orthogonal_ancillas(2)).detection_probability
    freq, checks = monte_carlo_detection(
        kd, AttackModel("contaminate_carrier", {"ancillas": "orthogonal"}),
        rounds=10_000, seed=2024, stray_fraction=0.25)
    verdict(6, "difference attack exact without Hadamard rounds, detected with them",
            exact_ok and abs(exact - 0.5) < 1e-12 and abs(freq - exact) <= 0.02,
            f"exact {exact:.6f}, Monte Carlo {freq:.4f} over {checks} stray checks")


def test_criterion_07_insider():
    d = insider_b3_attack().distances
    verdict(7, "insider's reduced state is symbol independent", max(d) < 1e-10,
            f"max trace distance {max(d):.1e}")


def test_criterion_08_power_sums():
    t0 = time.perf_counter()
    ok = True
    for p in (3, 5, 7, 11, 13):
        for k in range(1, p):
            ok &= power_sum(k, p) == (-(k == p - 1)) % p
        for m in range(2, p):
            ok &= power_sum_by_recursion(m, p) == power_sum(m - 1, p)
    dt = time.perf_counter() - t0
    verdict(8, "S_k(p) = -delta_{k,p-1} by direct sum and recursion", ok and dt < 1.0,
            f"{dt:.3f}s")


def test_criterion_09_commutation():
    scheme = SchemeSpec.kn(2, 3)
    ok = True
    for s in range(3):
        joint = upload(tensor(build_carrier(scheme).state, encode_message(scheme, None, s)), scheme)
        for subset in itertools.combinations((1, 2, 3), 2):
            for seed in range(5):
                a = retrieve_then_clean(joint, scheme, subset, seed)
                b = clean_then_retrieve(joint, scheme, subset, seed)
                ok &= a[0] == b[0] == s and dump_state(a[1]) == dump_state(b[1])
    verdict(9, "retrieve-then-clean equals clean-then-retrieve", ok)


SCENARIOS = [
    ["run-session", "--config", str(FIX / "kn23_clean.toml")],
    ["run-session", "--config", str(FIX / "nn3_alternating.json"), "--format", "csv"],
    ["run-session", "--config", str(FIX / "kd_entangle_difference.toml")],
    ["run-session", "--config", str(FIX / "kd_contaminated.json"), "--seed", "99"],
    ["attack", "entangle_difference", "--variant", "KD", "--symbols", "1", "0", "1", "--hadamard"],
    ["attack", "contaminate_carrier", "--variant", "KD", "--monte-carlo", "300"],
    ["verify-code", "--k", "3", "--n", "5"],
    ["power-sums", "--p-max", "13", "--format", "csv"],
]


def test_criterion_10_reproducibility(tmp_path, capsys):
    ok = True
    for i, argv in enumerate(SCENARIOS):
        outs = []
        for rep in range(2):
            path = tmp_path / f"{i}_{rep}.out"
            main(argv + ["--out", str(path)])
            outs.append(path.read_bytes())
        ok &= outs[0] == outs[1] and len(outs[0]) > 0
    capsys.readouterr()
    verdict(10, "same seed gives byte-identical CLI output", ok, f"{len(SCENARIOS)} scenarios")
