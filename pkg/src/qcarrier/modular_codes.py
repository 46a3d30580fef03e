"""Arithmetic over Z_p and the polynomial (CSS) threshold code.

A symbol s in Z_n is encoded into n qudits of dimension n as the uniform
superposition over every evaluation vector (P(0), ..., P(n-1)) of a
polynomial of degree k-1 with leading coefficient s.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .qudit_state import (QuditState, RegisterLayout, apply_cnot, apply_fourier,
                          apply_pauli, basis_state, omega_powers)


class InsufficientShares(ValueError):
    pass


class InconsistentShares(ValueError):
    pass


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    return all(n % f for f in range(3, math.isqrt(n) + 1, 2))


def _require_odd_prime(p: int) -> None:
    if not is_prime(p) or p < 3:
        raise ValueError(f"{p} is not an odd prime")


def mod_inverse(a: int, p: int) -> int:
    """Inverse via Fermat: a^(p-2) mod p."""
    if a % p == 0:
        raise ZeroDivisionError(f"{a} has no inverse mod {p}")
    return pow(a, p - 2, p)


# -- power sums -------------------------------------------------------------

def power_sum(k: int, p: int) -> int:
    """Σ_{j=1}^{p-1} j^k mod p by direct summation."""
    _require_odd_prime(p)
    if k < 1:
        raise ValueError("k must be >= 1")
    return sum(pow(j, k, p) for j in range(1, p)) % p


def power_sum_by_recursion(m: int, p: int) -> int:
    """S_{m-1}(p) from the binomial recursion, seeded with S_1(p) = 0.

    The recursion divides by m, so it is only usable for m < p. m = 2 returns
    the seed itself.
    """
    _require_odd_prime(p)
    if not 2 <= m <= p - 1:
        raise ValueError(f"recursion needs 2 <= m <= p-1, got m={m}, p={p}")
    sums = {1: 0}
    for mm in range(3, m + 1):
        acc = sum(math.comb(mm, r) * sums[r] for r in range(1, mm - 1)) % p
        sums[mm - 1] = (-acc * mod_inverse(mm, p)) % p
    return sums[m - 1]


def power_sum_table(p: int) -> list[dict]:
    """One row per k in [1, p-1]: direct value, recursive value (None outside its window)."""
    rows = []
    for k in range(1, p):
        direct = power_sum(k, p)
        rec = power_sum_by_recursion(k + 1, p) if k + 1 <= p - 1 else None
        expected = (p - 1) if k == p - 1 else 0
        rows.append({"p": p, "k": k, "direct": direct, "recursive": rec,
                     "expected": expected,
                     "ok": direct == expected and (rec is None or rec == direct)})
    return rows


# -- code description -------------------------------------------------------

def basis_vector(l: int, n: int, k: int | None = None) -> tuple[int, ...]:
    """(e_l)_j = j^l mod n, with 0^0 = 1."""
    upper = k if k is not None else n
    if not 0 <= l < upper:
        raise ValueError(f"basis index {l} out of range [0, {upper})")
    return tuple(pow(j, l, n) for j in range(n))


def dot_mod(u: Sequence[int], v: Sequence[int], n: int) -> int:
    return sum(a * b for a, b in zip(u, v)) % n


@dataclass(frozen=True)
class CodeSpec:
    k: int
    n: int

    def __post_init__(self):
        if not is_prime(self.n) or self.n < 3:
            raise ValueError("n must be prime (odd)")
        if self.k < 2:
            raise ValueError("k must be >= 2")
        if 2 * self.k - 1 > self.n:
            raise ValueError(f"k={self.k} exceeds (n+1)/2 for n={self.n}")

    @classmethod
    def threshold(cls, k: int) -> "CodeSpec":
        return cls(k, 2 * k - 1)

    @property
    def d(self) -> int:
        return self.n

    @property
    def basis(self) -> tuple[tuple[int, ...], ...]:
        return tuple(basis_vector(l, self.n) for l in range(self.k))

    @property
    def special(self) -> tuple[int, ...]:
        """The vector e = e_{k-1} that carries the symbol."""
        return basis_vector(self.k - 1, self.n)

    def to_json(self) -> dict:
        return {"k": self.k, "n": self.n, "basis": [list(v) for v in self.basis]}


@dataclass
class Relation:
    i: int
    j: int
    value: int
    expected: int | None
    passed: bool


@dataclass
class RelationReport:
    spec: CodeSpec
    gram: list[list[int]]
    relations: list[Relation] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.relations)

    @property
    def failures(self) -> list[Relation]:
        return [r for r in self.relations if not r.passed]

    def to_json(self) -> dict:
        return {
            "k": self.spec.k, "n": self.spec.n, "gram": self.gram,
            "relations": [r.__dict__ for r in self.relations],
            "passed": self.passed,
        }


def verify_code_relations(spec: CodeSpec) -> RelationReport:
    """Check e_i.e_j = 0 (i, j <= k-2), e.e_j = 0 (j <= k-2) and e.e = -1 mod n.

    Failures are reported, never raised.
    """
    basis = spec.basis
    n, top = spec.n, spec.k - 1
    gram = [[dot_mod(u, v, n) for v in basis] for u in basis]
    rels = []
    for i in range(spec.k):
        for j in range(i, spec.k):
            value = gram[i][j]
            expected = n - 1 if i == j == top else 0
            rels.append(Relation(i, j, value, expected, value == expected))
    return RelationReport(spec, gram, rels)


# -- codewords -------------------------------------------------------------

def poly_eval(coeffs: Sequence[int], x: int, n: int) -> int:
    """Σ coeffs[l] x^l mod n."""
    return sum(c * pow(x, l, n) for l, c in enumerate(coeffs)) % n


def codeword_branches(spec: CodeSpec, s: int) -> list[tuple[int, ...]]:
    """Evaluation tuples (P(0), ..., P(n-1)) over all lower coefficients."""
    if not 0 <= s < spec.n:
        raise ValueError(f"symbol {s} out of range for n={spec.n}")
    n = spec.n
    out = []
    for c in itertools.product(range(n), repeat=spec.k - 1):
        coeffs = list(c) + [s]
        out.append(tuple(poly_eval(coeffs, j, n) for j in range(n)))
    return out


def message_labels(n: int, role: str = "message") -> tuple[str, ...]:
    return tuple(f"{role}_{j}" for j in range(1, n + 1))


@dataclass
class Codeword:
    spec: CodeSpec
    symbol: int
    state: QuditState


def encode_codeword(spec: CodeSpec, s: int, labels: Sequence[str] | None = None,
                    backend: str = "sparse") -> Codeword:
    branches = codeword_branches(spec, s)
    amp = spec.n ** (-(spec.k - 1) / 2)
    layout = RegisterLayout(spec.n, tuple(labels or message_labels(spec.n)))
    state = QuditState(layout, {b: amp for b in branches}).with_backend(backend)
    return Codeword(spec, s, state)


def encode_superposition(spec: CodeSpec, coeffs: Sequence[complex],
                         labels: Sequence[str] | None = None) -> QuditState:
    """Σ_s coeffs[s] |s̄> (normalized)."""
    if len(coeffs) != spec.n:
        raise ValueError(f"need {spec.n} coefficients")
    amps: dict = {}
    for s, a in enumerate(coeffs):
        if a == 0:
            continue
        for key, v in encode_codeword(spec, s, labels).state.items():
            amps[key] = amps.get(key, 0j) + a * v
    layout = RegisterLayout(spec.n, tuple(labels or message_labels(spec.n)))
    return QuditState(layout, amps).normalized()


def encode_via_circuit_23(s: int, backend: str = "sparse") -> Codeword:
    """(2,3) encoder: F on wire 1, CNOTs fan out, then (I ⊗ X ⊗ X^2)^s."""
    if s not in (0, 1, 2):
        raise ValueError("symbol must be in {0, 1, 2}")
    spec = CodeSpec(2, 3)
    layout = RegisterLayout(3, message_labels(3))
    st = basis_state(layout, (0, 0, 0), backend)
    st = apply_fourier(st, 0)
    st = apply_cnot(st, 0, 1)
    st = apply_cnot(st, 0, 2)
    st = apply_pauli(st, 1, x_power=s % 3)
    st = apply_pauli(st, 2, x_power=(2 * s) % 3)
    return Codeword(spec, s, st)


# -- logical operators -------------------------------------------------------

def logical_z(spec: CodeSpec) -> tuple[int, ...]:
    """Z-exponent on each wire of the logical Z: wire j gets Z^{(e)_j}."""
    return spec.special


def _phase_of(original: QuditState, rotated: QuditState, tol: float = 1e-10) -> complex:
    ref = original.amplitudes()
    ratios = [v / ref[k] for k, v in rotated.items() if k in ref]
    if len(ratios) != original.nnz:
        raise ValueError("input is not an eigenstate (support changed)")
    ratios = np.array(ratios)
    mean = ratios.mean()
    if np.var(ratios) > tol:
        raise ValueError("input is not an eigenstate of the operator")
    return complex(mean)


def check_logical_z(codeword: Codeword | QuditState, spec: CodeSpec | None = None) -> complex:
    """Eigenphase of the logical Z on a code state; ω^{-s} for |s̄>."""
    if isinstance(codeword, Codeword):
        spec, state = codeword.spec, codeword.state
    else:
        state = codeword
        if spec is None:
            raise ValueError("spec required for a bare state")
    out = state
    for j, power in enumerate(logical_z(spec)):
        if power:
            out = apply_pauli(out, j, z_power=power)
    return _phase_of(state, out)


def pairwise_phase(state: QuditState, i: int, j: int) -> complex:
    """Eigenphase of Z_i^{-1} Z_j (wire indices)."""
    d = state.dimension
    out = apply_pauli(state, i, z_power=d - 1)
    out = apply_pauli(out, j, z_power=1)
    return _phase_of(state, out)


def retrieve_by_phase(state: QuditState, i: int, j: int) -> int:
    """Recover s for a k=2 code from the eigenphase ω^{s(j-i)} of Z_i^{-1} Z_j."""
    d = state.dimension
    phase = pairwise_phase(state, i, j)
    roots = omega_powers(d)
    t = min(range(d), key=lambda x: abs(roots[x] - phase))
    if abs(roots[t] - phase) > 1e-8:
        raise ValueError("eigenphase is not a d-th root of unity")
    return (t * mod_inverse((j - i) % d, d)) % d


# -- classical retrieval ---------------------------------------------------------

def lagrange_eval(points: Sequence[tuple[int, int]], x: int, p: int) -> int:
    total = 0
    for i, (xi, yi) in enumerate(points):
        num, den = 1, 1
        for m, (xm, _) in enumerate(points):
            if m != i:
                num = num * (x - xm) % p
                den = den * (xi - xm) % p
        total += yi * num * mod_inverse(den, p)
    return total % p


def leading_coefficient(points: Sequence[tuple[int, int]], p: int) -> int:
    """Coefficient of x^{len(points)-1} of the interpolating polynomial."""
    total = 0
    for i, (xi, yi) in enumerate(points):
        den = 1
        for m, (xm, _) in enumerate(points):
            if m != i:
                den = den * (xi - xm) % p
        total += yi * mod_inverse(den, p)
    return total % p


def retrieve_classical(spec: CodeSpec, evaluations: Iterable[tuple[int, int]]) -> int:
    """Leading coefficient s from >= k evaluations (position j, value P(j)).

    Extra evaluations must agree with the polynomial fixed by the first k;
    otherwise ``InconsistentShares`` is raised.
    """
    pts = [(int(x) % spec.n, int(y) % spec.n) for x, y in evaluations]
    xs = [x for x, _ in pts]
    if len(set(xs)) != len(xs):
        raise ValueError("evaluation positions must be distinct")
    if len(pts) < spec.k:
        raise InsufficientShares(f"need {spec.k} shares, got {len(pts)}")
    base = pts[:spec.k]
    for x, y in pts[spec.k:]:
        if lagrange_eval(base, x, spec.n) != y:
            raise InconsistentShares(f"share at position {x} disagrees with the others")
    return leading_coefficient(base, spec.n)


@lru_cache(maxsize=None)
def branch_label_table(k: int, n: int) -> dict[tuple[int, ...], int]:
    """Map every codeword branch tuple to its symbol."""
    spec = CodeSpec(k, n)
    return {b: s for s in range(n) for b in codeword_branches(spec, s)}
