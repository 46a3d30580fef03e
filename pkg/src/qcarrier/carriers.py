"""Carrier states, message encodings and the upload/download/Hadamard transforms.

Every carrier has the shape (1/√d) Σ_q |q>_alice |q̄>_players, where |q̄> is
the scheme's encoding of q. Alice uploads by CNOTs from her carrier wire
onto the message wires. The players download by inverse CNOTs, each from
their own carrier wire onto their own message wire.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .modular_codes import (CodeSpec, InconsistentShares, InsufficientShares, branch_label_table,
                            encode_codeword, message_labels, retrieve_classical)
from .qudit_state import (QuditState, RegisterLayout, apply_cnot, apply_fourier,
                          apply_inverse_cnot, basis_state, split_product, tensor)

VARIANTS = ("KD", "TwoTwo", "NN", "KN")
PARITIES = ("odd", "even")


@dataclass(frozen=True)
class SchemeSpec:
    """Protocol variant plus its current round parity.

    ``n`` is the number of players. Parity only matters for TwoTwo and NN;
    the KD and KN carriers are fixed by the Hadamard round.
    """

    variant: str
    n: int = 1
    k: int | None = None
    parity: str = "odd"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.parity not in PARITIES:
            raise ValueError(f"parity must be odd or even, got {self.parity!r}")
        if self.variant == "KD" and self.n != 1:
            raise ValueError("KD has exactly one player")
        if self.variant == "TwoTwo" and self.n != 2:
            raise ValueError("TwoTwo has exactly two players")
        if self.variant == "NN" and self.n < 2:
            raise ValueError("NN needs at least two players")
        if self.variant == "KN":
            if self.k is None:
                raise ValueError("KN needs a threshold k")
            CodeSpec(self.k, self.n)
        elif self.k is not None:
            raise ValueError(f"{self.variant} takes no threshold")

    @classmethod
    def kd(cls) -> "SchemeSpec":
        return cls("KD", 1)

    @classmethod
    def two_two(cls, parity: str = "odd") -> "SchemeSpec":
        return cls("TwoTwo", 2, parity=parity)

    @classmethod
    def nn(cls, n: int, parity: str = "odd") -> "SchemeSpec":
        return cls("NN", n, parity=parity)

    @classmethod
    def kn(cls, k: int, n: int | None = None) -> "SchemeSpec":
        return cls("KN", 2 * k - 1 if n is None else n, k)

    @classmethod
    def from_json(cls, data: dict) -> "SchemeSpec":
        variant = data["variant"]
        parity = data.get("parity", "odd")
        if variant == "KD":
            return cls.kd()
        if variant == "TwoTwo":
            return cls.two_two(parity)
        if variant == "NN":
            return cls.nn(int(data["n"]), parity)
        if variant == "KN":
            k = int(data["k"])
            return cls.kn(k, int(data.get("n", 2 * k - 1)))
        raise ValueError(f"unknown variant {variant!r}")

    def to_json(self) -> dict:
        return {"variant": self.variant, "k": self.k, "n": self.n, "parity": self.parity}

    @property
    def d(self) -> int:
        return self.n if self.variant == "KN" else 2

    @property
    def has_parity(self) -> bool:
        return self.variant in ("TwoTwo", "NN")

    @property
    def code(self) -> CodeSpec:
        if self.variant != "KN":
            raise ValueError(f"{self.variant} has no polynomial code")
        return CodeSpec(self.k, self.n)

    @property
    def threshold(self) -> int:
        """Smallest number of players that can read a payload symbol."""
        if self.variant == "KN":
            return self.k
        return self.n

    def with_parity(self, parity: str) -> "SchemeSpec":
        return replace(self, parity=parity)

    def flipped(self) -> "SchemeSpec":
        if not self.has_parity:
            return self
        return self.with_parity("even" if self.parity == "odd" else "odd")

    @property
    def player_labels(self) -> tuple[str, ...]:
        return tuple(f"player_{i}" for i in range(1, self.n + 1))

    @property
    def carrier_labels(self) -> tuple[str, ...]:
        return ("alice",) + self.player_labels

    @property
    def message_labels(self) -> tuple[str, ...]:
        return message_labels(self.n)

    def layout(self) -> RegisterLayout:
        return RegisterLayout(self.d, self.carrier_labels + self.message_labels)


@dataclass
class CarrierState:
    scheme: SchemeSpec
    state: QuditState

    def __post_init__(self):
        if self.state.layout.labels != self.scheme.carrier_labels:
            raise ValueError(
                f"carrier wires must be {self.scheme.carrier_labels}, "
                f"got {self.state.layout.labels}")


# -- encodings -------------------------------------------------------------

def _parity_of(scheme: SchemeSpec, parity: str | None) -> str:
    p = scheme.parity if parity is None else parity
    if p not in PARITIES:
        raise ValueError(f"bad parity {p!r}")
    return p


def encode_amplitudes(scheme: SchemeSpec, parity: str | None, s: int) -> dict[tuple[int, ...], complex]:
    """Amplitude map of |s̄> on the n message digits."""
    d, n = scheme.d, scheme.n
    if not 0 <= s < d:
        raise ValueError(f"symbol {s} out of range for d={d}")
    if scheme.variant == "KN":
        return encode_codeword(scheme.code, s).state.amplitudes()
    if scheme.variant == "KD" or _parity_of(scheme, parity) == "odd":
        return {(s,) * n: 1.0}
    # even: (|+>^n + (-1)^s |->^n)/√2 expands to the uniform superposition of
    # bit strings with parity s, all amplitudes positive.
    amp = 2 ** (-(n - 1) / 2)
    out = {}
    for x in range(2**n):
        bits = tuple((x >> (n - 1 - i)) & 1 for i in range(n))
        if sum(bits) % 2 == s:
            out[bits] = amp
    return out


def encode_message(scheme: SchemeSpec, parity: str | None, s: int,
                   labels: Sequence[str] | None = None, backend: str = "sparse") -> QuditState:
    """|s̄> on the message wires (KD and KN ignore parity)."""
    layout = RegisterLayout(scheme.d, tuple(labels or scheme.message_labels))
    return QuditState(layout, encode_amplitudes(scheme, parity, s)).with_backend(backend)


def encode_superposition(scheme: SchemeSpec, parity: str | None, coeffs: Sequence[complex],
                         labels: Sequence[str] | None = None) -> QuditState:
    """Σ_s coeffs[s] |s̄>, normalized."""
    if len(coeffs) != scheme.d:
        raise ValueError(f"need {scheme.d} coefficients")
    amps: dict = {}
    for s, a in enumerate(coeffs):
        for key, v in encode_amplitudes(scheme, parity, s).items():
            amps[key] = amps.get(key, 0j) + a * v
    layout = RegisterLayout(scheme.d, tuple(labels or scheme.message_labels))
    return QuditState(layout, amps).normalized()


def codeword_label(scheme: SchemeSpec, parity: str | None, digits: Sequence[int]) -> int | None:
    """Symbol whose encoding has ``digits`` as a branch, or None if no codeword does."""
    digits = tuple(digits)
    if scheme.variant == "KD":
        return digits[0]
    if scheme.variant == "KN":
        return branch_label_table(scheme.k, scheme.n).get(digits)
    if _parity_of(scheme, parity) == "odd":
        return digits[0] if all(x == digits[0] for x in digits) else None
    return sum(digits) % 2


# -- carrier ----------------------------------------------------------------

def carrier_state(scheme: SchemeSpec, backend: str = "sparse") -> QuditState:
    d = scheme.d
    amp = 1 / math.sqrt(d)
    amps = {}
    for q in range(d):
        for key, v in encode_amplitudes(scheme, None, q).items():
            amps[(q,) + key] = amp * v
    layout = RegisterLayout(d, scheme.carrier_labels)
    return QuditState(layout, amps).with_backend(backend)


def build_carrier(scheme: SchemeSpec, backend: str = "sparse") -> CarrierState:
    return CarrierState(scheme, carrier_state(scheme, backend))


def upload_powers(scheme: SchemeSpec, parity: str | None = None) -> tuple[int, ...]:
    """CNOT power from Alice's carrier wire onto each message wire."""
    if scheme.variant == "KD":
        return (1,)
    if scheme.variant == "KN":
        return scheme.code.special
    if _parity_of(scheme, parity) == "odd":
        return (1,) * scheme.n
    return (1,) + (0,) * (scheme.n - 1)


def upload(joint: QuditState, scheme: SchemeSpec, parity: str | None = None) -> QuditState:
    """Alice entangles the message with the carrier."""
    _check_joint(joint, scheme)
    out = joint
    for label, power in zip(scheme.message_labels, upload_powers(scheme, parity)):
        if power:
            out = apply_cnot(out, "alice", label, power)
    return out


def apply_download_gates(joint: QuditState, scheme: SchemeSpec,
                         players: Iterable[int] | None = None) -> QuditState:
    """Inverse CNOT from player_i onto message_i for each listed player (default: all)."""
    _check_joint(joint, scheme)
    idx = range(1, scheme.n + 1) if players is None else players
    out = joint
    for i in idx:
        if not 1 <= i <= scheme.n:
            raise ValueError(f"no player {i} in a {scheme.n}-player scheme")
        out = apply_inverse_cnot(out, f"player_{i}", f"message_{i}", 1)
    return out


def download(joint: QuditState, scheme: SchemeSpec, tol: float = 1e-10
             ) -> tuple[CarrierState, QuditState]:
    """All players disentangle the message; returns (clean carrier, message).

    Raises ``ValueError`` when the carrier is still entangled with the rest of
    the register afterwards (purity deficit above ``tol``).
    """
    out = apply_download_gates(joint, scheme)
    carrier, rest = split_product(out, scheme.carrier_labels, tol)
    return CarrierState(scheme, carrier), rest


def apply_hadamard_round(state: QuditState, scheme: SchemeSpec) -> QuditState:
    """F on Alice's and every player's carrier wire; other wires untouched."""
    # the sparse kernel fans every branch out d-fold per wire; small registers go dense
    sparse = state.backend == "sparse"
    out = state.to_dense() if sparse and state.layout.total_dimension <= 2**16 else state
    for label in scheme.carrier_labels:
        out = apply_fourier(out, label)
    return out.to_sparse() if sparse else out


def hadamard_round(carrier: CarrierState | QuditState, scheme: SchemeSpec | None = None) -> CarrierState:
    """Joint Fourier round on a clean carrier; TwoTwo/NN carriers swap parity."""
    if isinstance(carrier, QuditState):
        if scheme is None:
            raise ValueError("scheme required for a bare state")
        if carrier.layout.labels != scheme.carrier_labels:
            raise ValueError("hadamard_round acts on a clean carrier only")
        carrier = CarrierState(scheme, carrier)
    scheme = carrier.scheme
    return CarrierState(scheme.flipped(), apply_hadamard_round(carrier.state, scheme))


def round_trip(scheme: SchemeSpec, s: int, backend: str = "sparse"
               ) -> tuple[QuditState, CarrierState, QuditState]:
    """Upload then download |s̄>; returns (post-upload joint, carrier, message)."""
    carrier = build_carrier(scheme, backend)
    joint = upload(tensor(carrier.state, encode_message(scheme, None, s, backend=backend)), scheme)
    c, m = download(joint, scheme)
    return joint, c, m


def correlation_defect(state: QuditState, scheme: SchemeSpec) -> float:
    """Probability that a stray-symbol check fails on this carrier.

    A basis branch |x>_alice |w>_players passes iff w is a branch of the
    encoding of x; any other branch shifts or scrambles the retrieved
    symbol. Other wires (message, eavesdropper) are ignored.
    """
    a = state.layout.index("alice")
    players = state.layout.indices(scheme.player_labels)
    bad = total = 0.0
    for key, amp in state.items():
        w = abs(amp) ** 2
        total += w
        if codeword_label(scheme, None, tuple(key[p] for p in players)) != key[a]:
            bad += w
    return bad / total if total else 0.0


def _check_joint(joint: QuditState, scheme: SchemeSpec) -> None:
    if joint.dimension != scheme.d:
        raise ValueError(f"register dimension {joint.dimension} != scheme dimension {scheme.d}")
    missing = [lab for lab in scheme.carrier_labels + scheme.message_labels
               if lab not in joint.layout.labels]
    if missing:
        raise ValueError(f"layout mismatch: missing wires {missing}")


def basis_carrier_component(scheme: SchemeSpec, q: int) -> QuditState:
    """|q>_alice |q̄>_players (no 1/√d factor)."""
    a = basis_state(RegisterLayout(scheme.d, ("alice",)), (q,))
    return tensor(a, encode_message(scheme, None, q, labels=scheme.player_labels))


def decode_symbol(scheme: SchemeSpec, parity: str | None, players: Sequence[int],
                  values: Sequence[int]) -> int | None:
    """Symbol read by ``players`` from their measured message digits ``values``.

    Returns None when the digits are inconsistent with every codeword, which
    is how a corrupted share shows up. Raises ``InsufficientShares`` when the
    subset is not authorized for the scheme.
    """
    players = list(players)
    if len(set(players)) != len(players) or not players:
        raise ValueError("players must be a nonempty set")
    for i in players:
        if not 1 <= i <= scheme.n:
            raise ValueError(f"no player {i} in a {scheme.n}-player scheme")
    if scheme.variant == "KN":
        if len(players) < scheme.k:
            raise InsufficientShares(
                f"{len(players)} players cannot read a ({scheme.k},{scheme.n}) share")
        try:
            return retrieve_classical(scheme.code, [(i - 1, v) for i, v in zip(players, values)])
        except InconsistentShares:
            return None
    if scheme.variant == "KD":
        return values[0]
    if _parity_of(scheme, parity) == "odd":
        return values[0] if all(v == values[0] for v in values) else None
    if len(players) != scheme.n:
        raise InsufficientShares("even rounds need every player")
    return sum(values) % 2
