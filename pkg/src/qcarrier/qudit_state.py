"""State vectors over registers of d-level systems.

Two storage backends share one ``QuditState`` type: a sparse map from digit
tuples to complex amplitudes (the default) and a dense numpy tensor of shape
``(d,) * wire_count``. Basis tuples are big-endian in wire order.

Every gate returns a new state; states are never mutated in place.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np

PRUNE_EPSILON = 1e-14
DENSE_CAP = 2**24

Digits = tuple[int, ...]
Wire = int | str
RngLike = int | np.random.Generator | None

_LABEL_RE = re.compile(r"^(alice|(player|message|eve)_[1-9][0-9]*)$")


def as_rng(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@lru_cache(maxsize=None)
def omega_powers(d: int) -> tuple[complex, ...]:
    """ω^t for t in [0, d) with ω = exp(2πi/d), snapped so that exact roots stay exact."""
    out = []
    for t in range(d):
        z = complex(np.exp(2j * np.pi * t / d))
        re_, im_ = z.real, z.imag
        if abs(re_) < 1e-15:
            re_ = 0.0
        if abs(im_) < 1e-15:
            im_ = 0.0
        out.append(complex(re_, im_))
    return tuple(out)


@dataclass(frozen=True)
class RegisterLayout:
    dimension: int
    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if self.dimension < 2:
            raise ValueError(f"dimension must be >= 2, got {self.dimension}")
        if not self.labels:
            raise ValueError("a register needs at least one wire")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"wire labels must be unique: {self.labels}")
        for lab in self.labels:
            if not _LABEL_RE.match(lab):
                raise ValueError(f"bad wire label {lab!r}")

    @property
    def wire_count(self) -> int:
        return len(self.labels)

    @property
    def total_dimension(self) -> int:
        return self.dimension**self.wire_count

    def index(self, wire: Wire) -> int:
        if isinstance(wire, str):
            try:
                return self.labels.index(wire)
            except ValueError:
                raise ValueError(f"no wire labelled {wire!r} in {self.labels}") from None
        if isinstance(wire, (int, np.integer)) and 0 <= wire < self.wire_count:
            return int(wire)
        raise ValueError(f"wire {wire!r} out of range for {self.wire_count} wires")

    def indices(self, wires: Iterable[Wire]) -> list[int]:
        return [self.index(w) for w in wires]

    def concat(self, other: "RegisterLayout") -> "RegisterLayout":
        if other.dimension != self.dimension:
            raise ValueError(
                f"dimension mismatch: {self.dimension} vs {other.dimension}")
        return RegisterLayout(self.dimension, self.labels + other.labels)

    def subset(self, positions: Sequence[int]) -> "RegisterLayout":
        return RegisterLayout(self.dimension, tuple(self.labels[p] for p in positions))

    def relabel(self, labels: Sequence[str]) -> "RegisterLayout":
        if len(labels) != self.wire_count:
            raise ValueError("relabel needs one label per wire")
        return RegisterLayout(self.dimension, tuple(labels))


def _prune(amps: dict[Digits, complex], eps: float = PRUNE_EPSILON) -> dict[Digits, complex]:
    return {k: v for k, v in amps.items() if abs(v) >= eps}


class QuditState:
    """Pure state of a register; ``backend`` is ``"sparse"`` or ``"dense"``."""

    __slots__ = ("layout", "_amps", "_vec")

    def __init__(self, layout: RegisterLayout, amplitudes: Mapping[Digits, complex] | None = None,
                 *, vector: np.ndarray | None = None):
        self.layout = layout
        if (amplitudes is None) == (vector is None):
            raise ValueError("give exactly one of amplitudes or vector")
        if vector is not None:
            if layout.total_dimension > DENSE_CAP:
                raise ValueError(
                    f"dense backend capped at {DENSE_CAP} amplitudes, "
                    f"layout needs {layout.total_dimension}")
            vec = np.asarray(vector, dtype=complex)
            shape = (layout.dimension,) * layout.wire_count
            if vec.size != layout.total_dimension:
                raise ValueError(f"vector has {vec.size} entries, expected {layout.total_dimension}")
            self._vec = vec.reshape(shape)
            self._amps = None
        else:
            d, n = layout.dimension, layout.wire_count
            amps = {}
            for key, val in amplitudes.items():
                key = tuple(int(x) for x in key)
                if len(key) != n or any(not 0 <= x < d for x in key):
                    raise ValueError(f"basis tuple {key} invalid for layout {layout.labels}")
                amps[key] = complex(val)
            self._amps = _prune(amps)
            self._vec = None

    @classmethod
    def _trusted(cls, layout: RegisterLayout, amps: dict[Digits, complex]) -> "QuditState":
        """Skip validation for maps built by the gate kernels."""
        out = cls.__new__(cls)
        out.layout = layout
        out._amps = _prune(amps)
        out._vec = None
        return out

    # -- inspection -------------------------------------------------------

    @property
    def backend(self) -> str:
        return "sparse" if self._amps is not None else "dense"

    @property
    def dimension(self) -> int:
        return self.layout.dimension

    @property
    def wire_count(self) -> int:
        return self.layout.wire_count

    def items(self) -> list[tuple[Digits, complex]]:
        """Nonzero (digits, amplitude) pairs, in storage order."""
        if self._amps is not None:
            return list(self._amps.items())
        nz = np.argwhere(np.abs(self._vec) >= PRUNE_EPSILON)
        return [(tuple(int(x) for x in idx), complex(self._vec[tuple(idx)])) for idx in nz]

    def amplitudes(self) -> dict[Digits, complex]:
        return dict(self.items())

    def amplitude(self, digits: Sequence[int]) -> complex:
        key = tuple(digits)
        if self._amps is not None:
            return self._amps.get(key, 0j)
        return complex(self._vec[key])

    @property
    def nnz(self) -> int:
        if self._amps is not None:
            return len(self._amps)
        return int(np.count_nonzero(np.abs(self._vec) >= PRUNE_EPSILON))

    def norm(self) -> float:
        if self._amps is not None:
            return math.sqrt(sum(abs(v) ** 2 for v in self._amps.values()))
        return float(np.linalg.norm(self._vec))

    def normalized(self) -> "QuditState":
        nrm = self.norm()
        if nrm == 0:
            raise ValueError("cannot normalize the zero vector")
        if self._amps is not None:
            return QuditState(self.layout, {k: v / nrm for k, v in self._amps.items()})
        return QuditState(self.layout, vector=self._vec / nrm)

    def to_dense(self) -> "QuditState":
        if self._vec is not None:
            return self
        vec = np.zeros((self.dimension,) * self.wire_count, dtype=complex)
        for k, v in self._amps.items():
            vec[k] = v
        return QuditState(self.layout, vector=vec)

    def to_sparse(self) -> "QuditState":
        if self._amps is not None:
            return self
        return QuditState(self.layout, self.amplitudes())

    def with_backend(self, backend: str) -> "QuditState":
        if backend == "sparse":
            return self.to_sparse()
        if backend == "dense":
            return self.to_dense()
        raise ValueError(f"unknown backend {backend!r}")

    def relabel(self, labels: Sequence[str]) -> "QuditState":
        layout = self.layout.relabel(labels)
        if self._amps is not None:
            return QuditState(layout, self._amps)
        return QuditState(layout, vector=self._vec)

    def vector(self) -> np.ndarray:
        """Flat dense vector, big-endian index order."""
        return self.to_dense()._vec.reshape(-1).copy()

    def __repr__(self):
        return (f"QuditState(d={self.dimension}, labels={self.layout.labels}, "
                f"backend={self.backend}, nnz={self.nnz})")

    def _like(self, amps: dict[Digits, complex], layout: RegisterLayout | None = None) -> "QuditState":
        """New state on ``layout`` from a sparse map, keeping this state's backend."""
        out = QuditState._trusted(layout or self.layout, amps)
        return out.to_dense() if self.backend == "dense" else out


# -- construction ---------------------------------------------------------

def basis_state(layout: RegisterLayout, digits: Sequence[int], backend: str = "sparse") -> QuditState:
    digits = tuple(digits)
    if len(digits) != layout.wire_count:
        raise ValueError(f"expected {layout.wire_count} digits, got {len(digits)}")
    for x in digits:
        if not 0 <= x < layout.dimension:
            raise ValueError(f"digit {x} out of range for d={layout.dimension}")
    return QuditState(layout, {digits: 1.0}).with_backend(backend)


def tensor(a: QuditState, b: QuditState) -> QuditState:
    layout = a.layout.concat(b.layout)
    if a.backend == "dense" and b.backend == "dense" and layout.total_dimension <= DENSE_CAP:
        vec = np.tensordot(a._vec, b._vec, axes=0)
        return QuditState(layout, vector=vec)
    bi = b.items()
    amps = {ka + kb: va * vb for ka, va in a.items() for kb, vb in bi}
    return QuditState._trusted(layout, amps)


# -- gates ----------------------------------------------------------------

def _check_power(v: int, d: int) -> int:
    if not 0 <= v < d:
        raise ValueError(f"power {v} outside [0, {d})")
    return int(v)


def _cnot(state: QuditState, control: Wire, target: Wire, v: int) -> QuditState:
    c, t = state.layout.index(control), state.layout.index(target)
    if c == t:
        raise ValueError("control and target must differ")
    d = state.dimension
    if v % d == 0:
        return state
    if state._amps is not None:
        out = {}
        for key, a in state._amps.items():
            nk = list(key)
            nk[t] = (key[t] + v * key[c]) % d
            out[tuple(nk)] = a
        return QuditState._trusted(state.layout, out)
    vec = state._vec
    new = np.empty_like(vec)
    for i in range(d):
        idx = [slice(None)] * vec.ndim
        idx[c] = i
        sub_axis = t - 1 if t > c else t
        new[tuple(idx)] = np.roll(vec[tuple(idx)], shift=(v * i) % d, axis=sub_axis)
    return QuditState(state.layout, vector=new)


def apply_cnot(state: QuditState, control: Wire, target: Wire, power: int = 1) -> QuditState:
    """|i, j> -> |i, j + power*i mod d> on (control, target)."""
    _check_power(power, state.dimension)
    return _cnot(state, control, target, power)


def apply_inverse_cnot(state: QuditState, control: Wire, target: Wire, power: int = 1) -> QuditState:
    """|i, j> -> |i, j - power*i mod d>."""
    d = state.dimension
    _check_power(power, d)
    return _cnot(state, control, target, (-power) % d)


def apply_pauli(state: QuditState, wire: Wire, x_power: int = 0, z_power: int = 0) -> QuditState:
    """Apply X^x_power and then Z^z_power, where X|i>=|i+1> and Z|i>=ω^i|i>."""
    w = state.layout.index(wire)
    d = state.dimension
    xp, zp = x_power % d, z_power % d
    roots = omega_powers(d)
    if state._amps is not None:
        out = {}
        for key, a in state._amps.items():
            j = (key[w] + xp) % d
            nk = key[:w] + (j,) + key[w + 1:]
            out[nk] = a * roots[(zp * j) % d]
        return QuditState._trusted(state.layout, out)
    vec = np.roll(state._vec, shift=xp, axis=w)
    phases = np.array([roots[(zp * j) % d] for j in range(d)])
    shape = [1] * vec.ndim
    shape[w] = d
    return QuditState(state.layout, vector=vec * phases.reshape(shape))


def fourier_matrix(d: int, conjugated: bool = False) -> np.ndarray:
    roots = omega_powers(d)
    sign = -1 if conjugated else 1
    return np.array([[roots[(sign * j * k) % d] for j in range(d)] for k in range(d)]) / math.sqrt(d)


def apply_fourier(state: QuditState, wire: Wire, conjugated: bool = False) -> QuditState:
    """F|j> = d^{-1/2} Σ_k ω^{jk}|k>; ``conjugated`` uses ω^{-jk}."""
    w = state.layout.index(wire)
    d = state.dimension
    if state._amps is not None:
        roots = omega_powers(d)
        sign = -1 if conjugated else 1
        scale = 1 / math.sqrt(d)
        out: dict[Digits, complex] = {}
        for key, a in state._amps.items():
            j = key[w]
            head, tail = key[:w], key[w + 1:]
            a = a * scale
            for k in range(d):
                nk = head + (k,) + tail
                out[nk] = out.get(nk, 0j) + a * roots[(sign * j * k) % d]
        return QuditState._trusted(state.layout, out)
    f = fourier_matrix(d, conjugated)
    vec = np.moveaxis(np.tensordot(f, state._vec, axes=([1], [w])), 0, w)
    return QuditState(state.layout, vector=vec)


# -- density matrices -----------------------------------------------------

@dataclass
class DensityMatrix:
    """Reduced state stored on its support.

    ``support`` lists the basis tuples (of the kept wires) that can carry
    weight; ``matrix`` is the operator restricted to that span. Everything
    outside the support is zero.
    """

    dimension: int
    labels: tuple[str, ...]
    support: tuple[Digits, ...]
    matrix: np.ndarray

    @property
    def wire_count(self) -> int:
        return len(self.labels)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self._hermitian())

    def _hermitian(self) -> np.ndarray:
        return (self.matrix + self.matrix.conj().T) / 2

    def check(self, tol: float = 1e-10, psd_tol: float = 1e-9) -> None:
        if abs(self.trace() - 1) > tol:
            raise ValueError(f"trace {self.trace()} != 1")
        if self.matrix.size and np.max(np.abs(self.matrix - self.matrix.conj().T)) > tol:
            raise ValueError("matrix is not Hermitian")
        if self.matrix.size and self.eigenvalues().min() < -psd_tol:
            raise ValueError("matrix is not positive semidefinite")

    def is_valid(self, tol: float = 1e-10) -> bool:
        try:
            self.check(tol)
        except ValueError:
            return False
        return True

    def embed(self, support: Sequence[Digits]) -> np.ndarray:
        """Matrix on a larger support (must contain our own)."""
        pos = {k: i for i, k in enumerate(support)}
        idx = np.array([pos[k] for k in self.support], dtype=int)
        out = np.zeros((len(support), len(support)), dtype=complex)
        if len(idx):
            out[np.ix_(idx, idx)] = self.matrix
        return out

    def to_dense(self) -> np.ndarray:
        dim = self.dimension**self.wire_count
        if dim > 2**14:
            raise ValueError(f"refusing to densify a {dim}x{dim} matrix")
        flat = [int(np.ravel_multi_index(k, (self.dimension,) * self.wire_count)) for k in self.support]
        out = np.zeros((dim, dim), dtype=complex)
        if flat:
            out[np.ix_(flat, flat)] = self.matrix
        return out

    def expectation(self, state: QuditState) -> float:
        """<ψ|ρ|ψ> for a pure state on the same wires."""
        pos = {k: i for i, k in enumerate(self.support)}
        v = np.zeros(len(self.support), dtype=complex)
        for key, amp in state.items():
            if key in pos:
                v[pos[key]] = amp
        return float(np.real(v.conj() @ self.matrix @ v))

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))


def _grouped_matrix(state: QuditState, rows: Sequence[int]) -> tuple[list[Digits], list[Digits], np.ndarray]:
    """Reshape the amplitude list into a (row-key x column-key) matrix over occupied keys only."""
    rows = list(rows)
    cols = [i for i in range(state.wire_count) if i not in rows]
    rkeys: dict[Digits, int] = {}
    ckeys: dict[Digits, int] = {}
    entries = []
    for key, amp in state.items():
        rk = tuple(key[i] for i in rows)
        ck = tuple(key[i] for i in cols)
        ri = rkeys.setdefault(rk, len(rkeys))
        ci = ckeys.setdefault(ck, len(ckeys))
        entries.append((ri, ci, amp))
    mat = np.zeros((len(rkeys), len(ckeys)), dtype=complex)
    for ri, ci, amp in entries:
        mat[ri, ci] += amp
    return list(rkeys), list(ckeys), mat


def partial_trace(state: QuditState, keep_wires: Iterable[Wire]) -> DensityMatrix:
    keep = state.layout.indices(keep_wires)
    if not keep:
        raise ValueError("keep_wires must be nonempty")
    if len(set(keep)) != len(keep):
        raise ValueError("keep_wires contains duplicates")
    rkeys, _, mat = _grouped_matrix(state, keep)
    order = sorted(range(len(rkeys)), key=lambda i: rkeys[i])
    mat = mat[order]
    support = tuple(rkeys[i] for i in order)
    rho = mat @ mat.conj().T
    labels = tuple(state.layout.labels[i] for i in keep)
    return DensityMatrix(state.dimension, labels, support, rho)


def density_from_state(state: QuditState) -> DensityMatrix:
    return partial_trace(state, range(state.wire_count))


def fidelity(a: QuditState, b: QuditState) -> float:
    """|<a|b>| for pure states on matching registers."""
    if a.dimension != b.dimension or a.wire_count != b.wire_count:
        raise ValueError("layout mismatch")
    if a.backend == "dense" and b.backend == "dense":
        ov = np.vdot(a._vec, b._vec)
    else:
        bm = b.amplitudes()
        ov = sum(va.conjugate() * bm.get(k, 0j) for k, va in a.items())
    return min(1.0, float(abs(ov)))


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """(1/2)||rho - sigma||_1."""
    if rho.dimension != sigma.dimension or rho.wire_count != sigma.wire_count:
        raise ValueError("density matrices act on different registers")
    support = sorted(set(rho.support) | set(sigma.support))
    diff = rho.embed(support) - sigma.embed(support)
    if not support:
        return 0.0
    eig = np.linalg.eigvalsh((diff + diff.conj().T) / 2)
    return float(min(1.0, max(0.0, 0.5 * np.abs(eig).sum())))


def von_neumann_entropy(rho: DensityMatrix, base: float = 2.0) -> float:
    eig = np.clip(rho.eigenvalues(), 0.0, None)
    eig = eig[eig > 1e-15]
    return float(-(eig * np.log(eig)).sum() / math.log(base))


def schmidt_coefficients(state: QuditState, wires: Iterable[Wire]) -> np.ndarray:
    """Singular values of the bipartition ``wires`` | rest."""
    rows = state.layout.indices(wires)
    _, _, mat = _grouped_matrix(state, rows)
    if mat.size == 0:
        return np.zeros(0)
    return np.linalg.svd(mat, compute_uv=False)


def purity_deficit(state: QuditState, wires: Iterable[Wire]) -> float:
    """1 - Tr(rho^2) of the reduced state on ``wires`` (0 for a product cut)."""
    sv = schmidt_coefficients(state, wires) / state.norm()
    return float(max(0.0, 1.0 - np.sum(sv**4)))


def entanglement_entropy(state: QuditState, wires: Iterable[Wire], base: float = 2.0) -> float:
    sv = schmidt_coefficients(state, wires) / state.norm()
    p = sv**2
    p = p[p > 1e-15]
    return float(-(p * np.log(p)).sum() / math.log(base))


def split_product(state: QuditState, wires: Iterable[Wire], tol: float = 1e-10
                  ) -> tuple[QuditState, QuditState]:
    """Factor ``state`` as (state on ``wires``) ⊗ (state on the rest).

    The first factor's lexicographically smallest amplitude is made real
    positive; the global phase goes to the second factor. Raises
    ``ValueError`` when the purity deficit of the cut exceeds ``tol``.
    """
    rows = state.layout.indices(wires)
    cols = [i for i in range(state.wire_count) if i not in rows]
    if not rows or not cols:
        raise ValueError("both sides of the cut must be nonempty")
    rkeys, ckeys, mat = _grouped_matrix(state, rows)
    u, sv, vh = np.linalg.svd(mat, full_matrices=False)
    nrm = math.sqrt(float(np.sum(sv**2)))
    deficit = 1.0 - float(np.sum((sv / nrm) ** 4))
    if deficit > tol:
        raise ValueError(f"state is entangled across the cut (purity deficit {deficit:.3e})")
    a_vec = u[:, 0]
    b_vec = sv[0] * vh[0]
    first = min(range(len(rkeys)), key=lambda i: rkeys[i] if abs(a_vec[i]) > 1e-9 else (math.inf,))
    phase = a_vec[first] / abs(a_vec[first])
    a_vec = a_vec / phase
    b_vec = b_vec * phase
    la = state.layout.subset(rows)
    lb = state.layout.subset(cols)
    a = QuditState(la, dict(zip(rkeys, a_vec)))
    b = QuditState(lb, dict(zip(ckeys, b_vec)))
    if state.backend == "dense":
        a, b = a.to_dense(), b.to_dense()
    return a, b


def permute_wires(state: QuditState, labels: Sequence[str]) -> QuditState:
    """Reorder wires to the given label order."""
    pos = state.layout.indices(labels)
    if sorted(pos) != list(range(state.wire_count)):
        raise ValueError("labels must be a permutation of the layout")
    layout = RegisterLayout(state.dimension, tuple(labels))
    return state._like({tuple(k[p] for p in pos): v for k, v in state.items()}, layout)


# -- measurement ----------------------------------------------------------

def _sample(outcomes: list[Hashable], probs: list[float], rng: np.random.Generator) -> int:
    total = sum(probs)
    r = rng.random() * total
    acc = 0.0
    for i, p in enumerate(probs):
        acc += p
        if r < acc:
            return i
    return len(probs) - 1


def measure_label(state: QuditState, wires: Iterable[Wire], label: Callable[[Digits], Hashable],
                  rng: RngLike = None) -> tuple[Hashable, QuditState, float]:
    """Projective measurement of a classical function of the digits on ``wires``.

    Only the label is revealed: amplitudes inside the chosen preimage keep
    their relative phases. Outcomes are ordered by ``repr`` of the label so
    the sampled value is a deterministic function of the generator state.
    """
    pos = state.layout.indices(wires)
    gen = as_rng(rng)
    weights: dict[Hashable, float] = {}
    items = state.items()
    for key, amp in items:
        lab = label(tuple(key[p] for p in pos))
        weights[lab] = weights.get(lab, 0.0) + abs(amp) ** 2
    outcomes = sorted(weights, key=repr)
    probs = [weights[o] for o in outcomes]
    total = sum(probs)
    if total == 0:
        raise ValueError("cannot measure the zero vector")
    pick = outcomes[_sample(outcomes, probs, gen)]
    kept = {k: v for k, v in items if label(tuple(k[p] for p in pos)) == pick}
    p = weights[pick] / total
    if p <= 0:
        raise RuntimeError("measurement selected a zero-probability outcome")
    scale = 1 / math.sqrt(weights[pick])
    post = state._like({k: v * scale for k, v in kept.items()})
    return pick, post, p


def measure_computational(state: QuditState, wires: Iterable[Wire], rng: RngLike = None
                          ) -> tuple[Digits, QuditState, float]:
    """Born-rule sample of the digits on ``wires``; returns (digits, post_state, probability)."""
    wires = list(wires)
    digits, post, p = measure_label(state, wires, lambda ds: ds, rng)
    return digits, post, p


def discard_wires(state: QuditState, wires: Iterable[Wire]) -> QuditState:
    """Drop wires that sit in a definite basis state (e.g. just measured)."""
    pos = state.layout.indices(wires)
    keep = [i for i in range(state.wire_count) if i not in pos]
    seen = None
    out: dict[Digits, complex] = {}
    for key, amp in state.items():
        dropped = tuple(key[p] for p in pos)
        if seen is None:
            seen = dropped
        elif dropped != seen:
            raise ValueError("wires to discard are not in a definite basis state")
        nk = tuple(key[i] for i in keep)
        out[nk] = out.get(nk, 0j) + amp
    return state._like(out, state.layout.subset(keep))


def measure_and_discard(state: QuditState, wires: Iterable[Wire], rng: RngLike = None
                        ) -> tuple[Digits, QuditState]:
    wires = list(wires)
    digits, post, _ = measure_computational(state, wires, rng)
    return digits, discard_wires(post, wires)


# -- serialization --------------------------------------------------------

def _clean(x: float) -> float:
    x = round(float(x), 12)
    return 0.0 if x == 0 else x


def state_to_dict(state: QuditState) -> dict:
    rows = sorted(state.items())
    return {
        "dimension": state.dimension,
        "labels": list(state.layout.labels),
        "amplitudes": [
            {"digits": list(k), "re": _clean(v.real), "im": _clean(v.imag)}
            for k, v in rows
            if abs(complex(_clean(v.real), _clean(v.imag))) > 0
        ],
    }


def dump_state(state: QuditState) -> str:
    """JSON dump; identical text for sparse and dense copies of the same state."""
    return json.dumps(state_to_dict(state), sort_keys=True)


def load_state(text: str | dict, backend: str = "sparse") -> QuditState:
    data = json.loads(text) if isinstance(text, str) else text
    layout = RegisterLayout(int(data["dimension"]), tuple(data["labels"]))
    amps = {tuple(row["digits"]): complex(row["re"], row["im"]) for row in data["amplitudes"]}
    return QuditState(layout, amps).with_backend(backend)
