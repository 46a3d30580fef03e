"""Eavesdropper and insider experiments against the carrier.

The standalone experiments compute everything exactly from amplitudes.
The ``*Hook`` classes plug the same attacks into ``run_session`` for
end-to-end Monte Carlo runs.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .carriers import (SchemeSpec, apply_download_gates, apply_hadamard_round, build_carrier,
                       codeword_label, correlation_defect, decode_symbol, encode_amplitudes,
                       encode_message, upload)
from .qudit_state import (DensityMatrix, QuditState, RegisterLayout, RngLike, apply_cnot,
                          apply_inverse_cnot, as_rng, entanglement_entropy, fidelity,
                          measure_and_discard, measure_label, partial_trace, tensor,
                          trace_distance)

ATTACK_KINDS = ("passive_intercept", "entangle_difference", "contaminate_carrier", "insider_b3")


@dataclass
class AttackModel:
    kind: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}")

    @classmethod
    def from_json(cls, data: dict) -> "AttackModel":
        data = dict(data)
        kind = data.pop("kind")
        return cls(kind, data)

    def to_json(self) -> dict:
        return {"kind": self.kind, **self.params}


@dataclass
class AttackReport:
    kind: str
    differences: list[int] = field(default_factory=list)
    distances: list[float] = field(default_factory=list)
    detection_probability: float = 0.0
    entanglement_measures: list[float] = field(default_factory=list)
    notes: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.detection_probability <= 1.0 + 1e-12:
            raise ValueError("detection probability outside [0, 1]")

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "differences": list(self.differences),
            "distances": [float(x) for x in self.distances],
            "detection_probability": float(self.detection_probability),
            "entanglement_measures": [float(x) for x in self.entanglement_measures],
            "notes": self.notes,
        }


def eve_labels(count: int) -> tuple[str, ...]:
    return tuple(f"eve_{i}" for i in range(1, count + 1))


def code_mixture(scheme: SchemeSpec, parity: str | None = None) -> DensityMatrix:
    """(1/d) Σ_s |s̄><s̄| on the message wires, via a purification."""
    d = scheme.d
    amps = {}
    for s in range(d):
        for key, v in encode_amplitudes(scheme, parity, s).items():
            amps[(s,) + key] = v / math.sqrt(d)
    layout = RegisterLayout(d, ("eve_1",) + scheme.message_labels)
    return partial_trace(QuditState(layout, amps), scheme.message_labels)


def in_transit_marginal(scheme: SchemeSpec, s: int) -> DensityMatrix:
    carrier = build_carrier(scheme).state
    joint = upload(tensor(carrier, encode_message(scheme, None, s)), scheme)
    return partial_trace(joint, scheme.message_labels)


# -- passive intercept ---------------------------------------------------------

def passive_intercept(scheme: SchemeSpec, symbols: Sequence[int]) -> AttackReport:
    """Reduced message state per round; pairwise distances between differing symbols."""
    for s in symbols:
        if not 0 <= s < scheme.d:
            raise ValueError(f"symbol {s} out of range")
    cache: dict[int, DensityMatrix] = {}
    rhos = []
    for s in symbols:
        if s not in cache:
            cache[s] = in_transit_marginal(scheme, s)
        rhos.append(cache[s])
    distances = [trace_distance(rhos[a], rhos[b])
                 for a, b in itertools.combinations(range(len(symbols)), 2)
                 if symbols[a] != symbols[b]]
    mix = code_mixture(scheme)
    to_mixture = [trace_distance(cache[s], mix) for s in sorted(cache)]
    return AttackReport(
        "passive_intercept",
        distances=distances,
        detection_probability=0.0,
        notes={"leakage": max(distances, default=0.0),
               "distance_to_code_mixture": max(to_mixture, default=0.0),
               "scheme": scheme.to_json()},
    )


# -- entangle-and-difference ---------------------------------------------------

def _eve_copy(state: QuditState, scheme: SchemeSpec, inverse: bool = False) -> QuditState:
    """C_{M,E}: CNOT from each message wire onto Eve's matching ancilla."""
    gate = apply_inverse_cnot if inverse else apply_cnot
    for m, e in zip(scheme.message_labels, eve_labels(scheme.n)):
        state = gate(state, m, e, 1)
    return state


def _eve_label_fn(scheme: SchemeSpec):
    return lambda digits: -1 if (lab := codeword_label(scheme, None, digits)) is None else lab


def entangle_difference_attack(scheme: SchemeSpec, symbols: Sequence[int],
                               hadamard_rounds: bool = False, rng: RngLike = 0) -> AttackReport:
    """Eve copies the first message into |0̄> ancillas and then reads s_1 - s_j.

    Round 1: Eve applies C_{M,E} and stays entangled with the carrier once
    the players download. Round j: C_{M,E}^{-1} leaves her ancillas in
    |(s_1 - s_j)‾>, she measures the codeword label (which does not disturb
    a code state), and re-applies C_{M,E}.

    With ``hadamard_rounds`` the legitimate parties Fourier-transform the
    carrier after every round; ``detection_probability`` is the exact chance
    that the first stray check afterwards fails.
    """
    if len(symbols) < 2:
        raise ValueError("the attack needs at least two rounds")
    gen = as_rng(rng)
    sch = scheme
    state = build_carrier(sch).state
    eves = eve_labels(sch.n)
    diffs: list[int] = []
    retrieved: list[int | None] = []
    defects: list[float] = []
    for r, s in enumerate(symbols):
        joint = upload(tensor(state, encode_message(sch, None, s)), sch)
        if r == 0:
            joint = tensor(joint, encode_message(sch, None, 0, labels=eves))
            joint = _eve_copy(joint, sch)
        else:
            joint = _eve_copy(joint, sch, inverse=True)
            lab, joint, _ = measure_label(joint, eves, _eve_label_fn(sch), gen)
            diffs.append(int(lab))
            joint = _eve_copy(joint, sch)
        joint = apply_download_gates(joint, sch)
        digits, joint = measure_and_discard(joint, sch.message_labels, gen)
        retrieved.append(decode_symbol(sch, None, range(1, sch.n + 1), digits))
        if hadamard_rounds:
            joint = apply_hadamard_round(joint, sch)
            sch = sch.flipped()
            defects.append(correlation_defect(joint, sch))
        state = joint
    d = scheme.d
    expected = [(symbols[0] - s) % d for s in symbols[1:]]
    return AttackReport(
        "entangle_difference",
        differences=diffs,
        detection_probability=defects[0] if defects else 0.0,
        entanglement_measures=[entanglement_entropy(state, eves, base=d)],
        notes={"retrieved": retrieved, "sent": list(symbols),
               "expected_differences": expected,
               "exact": diffs == expected,
               "per_round_detection": defects,
               "hadamard_rounds": hadamard_rounds},
    )


# -- carrier contamination -------------------------------------------------------

def _ancilla_wires(ancillas: Sequence[np.ndarray], d: int) -> int:
    size = len(ancillas[0])
    m = round(math.log(size, d)) if size > 1 else 0
    if m < 1 or d**m != size:
        raise ValueError(f"ancilla length {size} is not a power of d={d}")
    if any(len(x) != size for x in ancillas):
        raise ValueError("ancilla states must have equal length")
    return m


def contaminated_carrier(scheme: SchemeSpec, ancillas: Sequence[Sequence[complex]]) -> QuditState:
    """Σ_q |q, q̄> ⊗ |ξ_q>, normalized; ξ_q may be unnormalized."""
    d = scheme.d
    xis = [np.asarray(x, dtype=complex) for x in ancillas]
    if len(xis) != d:
        raise ValueError(f"need {d} ancilla states, got {len(xis)}")
    m = _ancilla_wires(xis, d)
    eve_keys = list(itertools.product(range(d), repeat=m))
    amps = {}
    for q, xi in enumerate(xis):
        for key, v in encode_amplitudes(scheme, None, q).items():
            for e, c in zip(eve_keys, xi):
                if c != 0:
                    amps[(q,) + key + e] = v * c
    if not amps:
        raise ValueError("ancilla states are not normalizable (all zero)")
    layout = RegisterLayout(d, scheme.carrier_labels + eve_labels(m))
    return QuditState(layout, amps).normalized()


def apply_local_unitary(state: QuditState, wires: Sequence[str], unitary: np.ndarray) -> QuditState:
    """Apply a matrix to the joint space of ``wires`` (big-endian order)."""
    d = state.dimension
    pos = state.layout.indices(wires)
    rest = [i for i in range(state.wire_count) if i not in pos]
    size = d ** len(pos)
    u = np.asarray(unitary, dtype=complex)
    if u.shape != (size, size):
        raise ValueError(f"unitary must be {size}x{size}")
    groups: dict[tuple, np.ndarray] = {}
    for key, amp in state.items():
        rk = tuple(key[i] for i in rest)
        local = int(np.ravel_multi_index(tuple(key[p] for p in pos), (d,) * len(pos)))
        groups.setdefault(rk, np.zeros(size, dtype=complex))[local] += amp
    out = {}
    for rk, vec in groups.items():
        new = u @ vec
        for local, amp in enumerate(new):
            if abs(amp) < 1e-14:
                continue
            digits = np.unravel_index(local, (d,) * len(pos))
            key = [0] * state.wire_count
            for i, r in zip(rest, rk):
                key[i] = r
            for p, x in zip(pos, digits):
                key[p] = int(x)
            out[tuple(key)] = amp
    return QuditState(state.layout, out)


def ancillas_coincide(ancillas: Sequence[Sequence[complex]], tol: float = 1e-10) -> bool:
    """True when every ξ_q equals ξ_0.

    Overlap fidelity 1 - tol with ξ_0 plus equal norm and zero relative
    phase: a per-q phase would twist the carrier itself and is detectable.
    """
    xis = [np.asarray(x, dtype=complex) for x in ancillas]
    n0 = np.linalg.norm(xis[0])
    for xi in xis[1:]:
        nq = np.linalg.norm(xi)
        if n0 == 0 or nq == 0:
            if n0 != nq:
                return False
            continue
        ov = np.vdot(xis[0], xi)
        if abs(ov) / (n0 * nq) < 1 - tol:
            return False
        if abs(nq - n0) > tol * n0 or abs(ov / abs(ov) - 1) > math.sqrt(tol):
            return False
    return True


def contamination_detection(scheme: SchemeSpec, ancillas: Sequence[Sequence[complex]],
                            eve_unitary: np.ndarray | None = None) -> AttackReport:
    """Exact mismatch probability of a stray check after one Hadamard round.

    The carrier is first entangled as Σ_q |q, q̄>|ξ_q>; the legitimate parties
    then Fourier-transform their wires while Eve applies ``eve_unitary`` (the
    identity by default) to her ancillas.
    """
    state = contaminated_carrier(scheme, ancillas)
    eves = [lab for lab in state.layout.labels if lab.startswith("eve_")]
    before = entanglement_entropy(state, eves, base=scheme.d)
    state = apply_hadamard_round(state, scheme)
    if eve_unitary is not None:
        state = apply_local_unitary(state, eves, eve_unitary)
    after = scheme.flipped()
    p = correlation_defect(state, after)
    return AttackReport(
        "contaminate_carrier",
        detection_probability=min(1.0, max(0.0, p)),
        entanglement_measures=[before],
        notes={"ancillas_coincide": ancillas_coincide(ancillas),
               "scheme": scheme.to_json()},
    )


def orthogonal_ancillas(d: int) -> list[np.ndarray]:
    return [np.eye(d, dtype=complex)[q] for q in range(d)]


def equal_ancillas(d: int) -> list[np.ndarray]:
    return [np.eye(d, dtype=complex)[0] for _ in range(d)]


def parse_ancillas(spec: Any, d: int) -> list[np.ndarray]:
    """``"orthogonal"``, ``"equal"`` or an explicit list of vectors.

    Vector entries are numbers or ``[re, im]`` pairs.
    """
    if spec in (None, "orthogonal"):
        return orthogonal_ancillas(d)
    if spec == "equal":
        return equal_ancillas(d)
    if isinstance(spec, str):
        raise ValueError(f"unknown ancilla preset {spec!r}")
    out = []
    for vec in spec:
        out.append(np.array([complex(*x) if isinstance(x, (list, tuple)) else complex(x)
                             for x in vec]))
    return out


# -- insider B3 ------------------------------------------------------------------

INSIDER_VIEW = ("player_3", "eve_1", "message_1", "message_2", "message_3")


def insider_carrier(etas: Sequence[Sequence[complex]] | None = None) -> QuditState:
    """Σ_{i,j} |i, j+i, j+2i, j>_{A,B1,B2,B3} |η_j>_{B3'}, normalized.

    B3's extra qudit B3' is stored on wire ``eve_1``.
    """
    etas = orthogonal_ancillas(3) if etas is None else [np.asarray(e, dtype=complex) for e in etas]
    if len(etas) != 3 or any(len(e) != 3 for e in etas):
        raise ValueError("need three qutrit states η_0, η_1, η_2")
    amps = {}
    for i in range(3):
        for j in range(3):
            for e, c in enumerate(etas[j]):
                if c != 0:
                    amps[(i, (j + i) % 3, (j + 2 * i) % 3, j, e)] = c
    layout = RegisterLayout(3, ("alice", "player_1", "player_2", "player_3", "eve_1"))
    return QuditState(layout, amps).normalized()


def insider_b3_attack(etas: Sequence[Sequence[complex]] | None = None) -> AttackReport:
    """B3's view (own carrier qudit, extra qudit, all message qudits) per symbol."""
    scheme = SchemeSpec.kn(2, 3)
    carrier = insider_carrier(etas)
    joints, rhos = [], []
    for s in range(3):
        joint = upload(tensor(carrier, encode_message(scheme, None, s)), scheme)
        joints.append(joint)
        rhos.append(partial_trace(joint, INSIDER_VIEW))
    distances = [trace_distance(rhos[a], rhos[b]) for a, b in itertools.combinations(range(3), 2)]
    global_fids = [fidelity(joints[a], joints[b]) for a, b in itertools.combinations(range(3), 2)]
    return AttackReport(
        "insider_b3",
        distances=distances,
        detection_probability=0.0,
        entanglement_measures=global_fids,
        notes={"pairs": [list(p) for p in itertools.combinations(range(3), 2)],
               "global_fidelities": global_fids},
    )


# -- session hooks ------------------------------------------------------------------

@dataclass
class RoundContext:
    scheme: SchemeSpec
    round_index: int
    rng: np.random.Generator
    notes: dict[str, Any] = field(default_factory=dict)


class SessionAdversary:
    """No-op adversary; subclasses override the two hook points."""

    def on_transit(self, state: QuditState, ctx: RoundContext) -> QuditState:
        return state

    def end_of_round(self, state: QuditState, ctx: RoundContext) -> QuditState:
        return state


class PassiveInterceptHook(SessionAdversary):
    """Looks at the in-transit message marginal without touching it."""

    def __init__(self):
        self._mixtures: dict[str, DensityMatrix] = {}

    def on_transit(self, state, ctx):
        sch = ctx.scheme
        mix = self._mixtures.setdefault(sch.parity, code_mixture(sch))
        rho = partial_trace(state, sch.message_labels)
        ctx.notes["distance_to_code_mixture"] = round(trace_distance(rho, mix), 12)
        return state


class EntangleDifferenceHook(SessionAdversary):
    def __init__(self):
        self.attached = False
        self.differences: list[int] = []

    def on_transit(self, state, ctx):
        sch = ctx.scheme
        eves = eve_labels(sch.n)
        if not self.attached:
            state = tensor(state, encode_message(sch, None, 0, labels=eves))
            self.attached = True
            return _eve_copy(state, sch)
        state = _eve_copy(state, sch, inverse=True)
        lab, state, _ = measure_label(state, eves, _eve_label_fn(sch), ctx.rng)
        self.differences.append(int(lab))
        ctx.notes["difference"] = int(lab)
        return _eve_copy(state, sch)


class ContaminationHook(SessionAdversary):
    """Re-entangles a fresh ancilla with the carrier every round.

    The ancilla is attached controlled on Alice's carrier digit, giving the
    Σ_q |q, q̄>|ξ_q> form, and discarded (measured and dropped) at the end of
    the round after the Hadamard round has acted.
    """

    def __init__(self, ancillas: Sequence[np.ndarray]):
        self.ancillas = [np.asarray(x, dtype=complex) for x in ancillas]

    def on_transit(self, state, ctx):
        d = state.dimension
        if len(self.ancillas) != d:
            raise ValueError(f"need {d} ancilla states")
        m = _ancilla_wires(self.ancillas, d)
        a = state.layout.index("alice")
        eve_keys = list(itertools.product(range(d), repeat=m))
        amps = {}
        for key, v in state.items():
            for e, c in zip(eve_keys, self.ancillas[key[a]]):
                if c != 0:
                    amps[key + e] = v * c
        layout = RegisterLayout(d, state.layout.labels + eve_labels(m))
        return QuditState(layout, amps).normalized()

    def end_of_round(self, state, ctx):
        eves = [lab for lab in state.layout.labels if lab.startswith("eve_")]
        if eves:
            _, state = measure_and_discard(state, eves, ctx.rng)
        return state


def session_hook(model: AttackModel | None, scheme: SchemeSpec) -> SessionAdversary | None:
    if model is None:
        return None
    if model.kind == "passive_intercept":
        return PassiveInterceptHook()
    if model.kind == "entangle_difference":
        return EntangleDifferenceHook()
    if model.kind == "contaminate_carrier":
        return ContaminationHook(parse_ancillas(model.params.get("ancillas"), scheme.d))
    raise ValueError(f"{model.kind} is a standalone experiment, not a session adversary")


def monte_carlo_detection(scheme: SchemeSpec, model: AttackModel, rounds: int = 10_000,
                          seed: int = 0, stray_fraction: float = 0.25) -> tuple[float, int]:
    """Stray-check mismatch frequency over a seeded session; returns (frequency, checks)."""
    from .protocol_engine import SessionConfig, detection_check, run_session

    cfg = SessionConfig(scheme=scheme, rounds=rounds, payload=[], stray_fraction=stray_fraction,
                        rng_seed=seed, hadamard_every_round=True, adversary=model)
    stats = detection_check(run_session(cfg))
    return stats.mismatch_rate, stats.stray_rounds
