"""Round-based session simulator.

Each round: encode, upload, transit (adversary hook), download, measure the
message wires, retrieve or announce, then the optional Hadamard round. The
carrier (plus any wires an eavesdropper has attached) persists across rounds.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .adversary import AttackModel, RoundContext, session_hook
from .carriers import (SchemeSpec, apply_download_gates, apply_hadamard_round, build_carrier,
                       decode_symbol, encode_message, upload)
from .modular_codes import InconsistentShares, InsufficientShares, retrieve_by_phase
from .qudit_state import (QuditState, RngLike, as_rng, fidelity, measure_and_discard,
                          measure_computational, partial_trace, split_product, tensor)

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

log = logging.getLogger(__name__)

RNG_NAME = "PCG64"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class PartyId:
    role: str
    index: int = 0

    def __post_init__(self):
        if self.role not in ("alice", "player", "eve"):
            raise ValueError(f"unknown role {self.role!r}")
        if self.role == "alice" and self.index != 0:
            raise ValueError("alice has no index")
        if self.role != "alice" and self.index < 1:
            raise ValueError("indices start at 1")

    @classmethod
    def player(cls, i: int) -> "PartyId":
        return cls("player", i)

    @classmethod
    def parse(cls, text: str) -> "PartyId":
        if text == "alice":
            return cls("alice")
        role, _, idx = text.partition("_")
        return cls(role, int(idx))

    def __str__(self):
        return "alice" if self.role == "alice" else f"{self.role}_{self.index}"


def player_indices(subset: Iterable[int | str | PartyId]) -> list[int]:
    """Normalize a subset given as ints, ``player_i`` strings or PartyIds."""
    out = []
    for p in subset:
        if isinstance(p, str):
            p = PartyId.parse(p)
        if isinstance(p, PartyId):
            if p.role != "player":
                raise ValueError(f"{p} is not a player")
            p = p.index
        out.append(int(p))
    if len(set(out)) != len(out):
        raise ValueError("duplicate players in subset")
    return sorted(out)


def subset_key(players: Sequence[int]) -> str:
    return ",".join(str(i) for i in players)


# -- configuration -----------------------------------------------------------

@dataclass
class SessionConfig:
    scheme: SchemeSpec
    rounds: int
    payload: list[int] = field(default_factory=list)
    stray_fraction: float = 0.25
    rng_seed: int = 0
    hadamard_every_round: bool = True
    adversary: AttackModel | None = None
    retrieval_subsets: list[list[int]] | None = None
    announcing_subset: list[int] | None = None

    def __post_init__(self):
        self.validate()

    @property
    def alternates(self) -> bool:
        """TwoTwo/NN with Hadamard rounds: odd rounds are checks, even rounds carry payload."""
        return self.scheme.has_parity and self.hadamard_every_round

    @property
    def stray_count(self) -> int:
        if self.alternates:
            first_odd = self.scheme.parity == "odd"
            return (self.rounds + first_odd) // 2
        return int(round(self.stray_fraction * self.rounds))

    @property
    def payload_budget(self) -> int:
        return self.rounds - self.stray_count

    def subsets(self) -> list[list[int]]:
        if self.retrieval_subsets is not None:
            return [player_indices(s) for s in self.retrieval_subsets]
        sch = self.scheme
        top = sch.k if sch.variant == "KN" else sch.n
        return [list(range(1, top + 1))]

    def announcers(self) -> list[int]:
        if self.announcing_subset is not None:
            return player_indices(self.announcing_subset)
        return list(range(1, self.scheme.n + 1))

    def validate(self) -> None:
        sch = self.scheme
        if not isinstance(self.rounds, int) or self.rounds < 1:
            raise ConfigError("rounds must be a positive integer")
        if not 0.0 <= self.stray_fraction < 1.0:
            raise ConfigError("stray_fraction must lie in [0, 1)")
        for s in self.payload:
            if not isinstance(s, int) or not 0 <= s < sch.d:
                raise ConfigError(f"payload symbol {s!r} outside Z_{sch.d}")
        if len(self.payload) > self.payload_budget:
            raise ConfigError(
                f"payload of {len(self.payload)} symbols exceeds the {self.payload_budget} "
                "non-stray rounds")
        if self.adversary is not None and self.adversary.kind == "insider_b3":
            raise ConfigError("insider_b3 is a standalone experiment; use the attack command")
        payload_parity = "even" if self.alternates else sch.parity
        groups = [("retrieval", s) for s in self.subsets()] + [("announcing", self.announcers())]
        for name, group in groups:
            parity = "odd" if name == "announcing" and self.alternates else payload_parity
            if not group or any(not 1 <= i <= sch.n for i in group):
                raise ConfigError(f"{name} subset {group} is not a set of players 1..{sch.n}")
            if sch.variant == "KN" and len(group) < sch.k:
                raise ConfigError(f"{name} subset {group} has fewer than k={sch.k} players")
            if sch.has_parity and parity == "even" and len(group) != sch.n:
                raise ConfigError(f"{name} subset {group}: even rounds need every player")

    @classmethod
    def from_dict(cls, data: dict) -> "SessionConfig":
        try:
            data = dict(data)
            scheme = SchemeSpec.from_json(data.pop("scheme"))
            adv = data.pop("adversary", None)
            seed = data.pop("rng_seed", data.pop("seed", 0))
            known = {"rounds", "payload", "stray_fraction", "hadamard_every_round",
                     "retrieval_subsets", "announcing_subset"}
            extra = set(data) - known
            if extra:
                raise ConfigError(f"unknown config keys: {sorted(extra)}")
            return cls(
                scheme=scheme,
                rounds=data["rounds"],
                payload=list(data.get("payload", [])),
                stray_fraction=float(data.get("stray_fraction", 0.25)),
                rng_seed=int(seed),
                hadamard_every_round=bool(data.get("hadamard_every_round", True)),
                adversary=AttackModel.from_json(adv) if adv else None,
                retrieval_subsets=data.get("retrieval_subsets"),
                announcing_subset=data.get("announcing_subset"),
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid session config: {exc!r}") from exc

    def to_json(self) -> dict:
        return {
            "scheme": self.scheme.to_json(),
            "rounds": self.rounds,
            "payload": list(self.payload),
            "stray_fraction": self.stray_fraction,
            "rng_seed": self.rng_seed,
            "hadamard_every_round": self.hadamard_every_round,
            "adversary": self.adversary.to_json() if self.adversary else None,
            "retrieval_subsets": self.subsets(),
            "announcing_subset": self.announcers(),
        }


def load_config(path: str | Path) -> SessionConfig:
    """Read a SessionConfig from TOML (``.toml``) or JSON (anything else)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        data = tomllib.loads(text) if path.suffix == ".toml" else json.loads(text)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a table/object")
    return SessionConfig.from_dict(data)


# -- transcript ------------------------------------------------------------------

@dataclass
class RoundRecord:
    round: int
    parity: str | None
    kind: str  # payload | filler | stray
    symbol_sent: int
    symbols_retrieved: dict[str, int | None]
    detection_flags: dict[str, Any] | None
    notes: dict[str, Any] = field(default_factory=dict)

    @property
    def is_stray(self) -> bool:
        return self.kind == "stray"

    def to_json(self) -> dict:
        out = {
            "round": self.round, "parity": self.parity, "kind": self.kind,
            "is_stray": self.is_stray, "symbol_sent": self.symbol_sent,
            "symbols_retrieved": self.symbols_retrieved,
            "detection_flags": self.detection_flags,
        }
        if self.notes:
            out["notes"] = self.notes
        return out


@dataclass
class SessionTranscript:
    config: SessionConfig
    records: list[RoundRecord]
    final_carrier_fidelity: float
    summary: dict[str, Any] = field(default_factory=dict)

    def payload_retrieved(self, subset: str | None = None) -> list[int | None]:
        key = subset or subset_key(self.config.subsets()[0])
        return [r.symbols_retrieved[key] for r in self.records if r.kind == "payload"]

    def to_jsonl(self) -> str:
        lines = [json.dumps(r.to_json(), sort_keys=True) for r in self.records]
        lines.append(json.dumps({"summary": self.summary}, sort_keys=True))
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["round", "parity", "kind", "is_stray", "symbol_sent",
                    "symbols_retrieved", "announced", "mismatch"])
        for r in self.records:
            got = ";".join(f"{k}={'' if v is None else v}" for k, v in r.symbols_retrieved.items())
            flags = r.detection_flags or {}
            w.writerow([r.round, r.parity or "", r.kind, int(r.is_stray), r.symbol_sent, got,
                        "" if flags.get("announced") is None else flags["announced"],
                        "" if not flags else int(flags["mismatch"])])
        return buf.getvalue()


@dataclass
class DetectionStats:
    stray_rounds: int
    mismatches: int
    flags: dict[int, bool]

    @property
    def mismatch_rate(self) -> float:
        return self.mismatches / self.stray_rounds if self.stray_rounds else 0.0

    def to_json(self) -> dict:
        return {"stray_rounds": self.stray_rounds, "mismatches": self.mismatches,
                "mismatch_rate": self.mismatch_rate}


def detection_check(transcript: SessionTranscript) -> DetectionStats:
    """Compare every announced stray outcome against the symbol Alice sent."""
    flags = {}
    for r in transcript.records:
        if r.is_stray:
            flags[r.round] = r.detection_flags["announced"] != r.symbol_sent
    return DetectionStats(len(flags), sum(flags.values()), flags)


# -- session ----------------------------------------------------------------------

def _plan(config: SessionConfig, rng: np.random.Generator) -> list[str]:
    n = config.rounds
    if config.alternates:
        start_odd = config.scheme.parity == "odd"
        kinds = ["stray" if (r % 2 == 0) == start_odd else "data" for r in range(n)]
    else:
        stray = set(int(x) for x in rng.choice(n, size=config.stray_count, replace=False))
        kinds = ["stray" if r in stray else "data" for r in range(n)]
    left = len(config.payload)
    for r, k in enumerate(kinds):
        if k == "data":
            kinds[r] = "payload" if left > 0 else "filler"
            left -= 1
    return kinds


def _carrier_fidelity(state: QuditState, scheme: SchemeSpec) -> float:
    ideal = build_carrier(scheme).state
    if state.layout.labels == scheme.carrier_labels:
        return fidelity(state, ideal)
    rho = partial_trace(state, scheme.carrier_labels)
    return math.sqrt(max(0.0, rho.expectation(ideal)))


def run_session(config: SessionConfig) -> SessionTranscript:
    """Simulate a full session; deterministic given ``config.rng_seed``.

    The seed is split into independent streams for the round plan (stray
    positions and decoy symbols), the players' measurements and the
    adversary, so adding an adversary does not move the stray positions.
    """
    config.validate()
    plan_ss, meas_ss, eve_ss = np.random.SeedSequence(config.rng_seed).spawn(3)
    plan_rng = np.random.Generator(np.random.PCG64(plan_ss))
    meas_rng = np.random.Generator(np.random.PCG64(meas_ss))
    eve_rng = np.random.Generator(np.random.PCG64(eve_ss))

    kinds = _plan(config, plan_rng)
    hook = session_hook(config.adversary, config.scheme)
    subsets = config.subsets()
    announcers = config.announcers()
    sch = config.scheme
    carrier = build_carrier(sch).state
    payload = iter(config.payload)
    records = []
    for r, kind in enumerate(kinds):
        sym = next(payload) if kind == "payload" else int(plan_rng.integers(sch.d))
        joint = upload(tensor(carrier, encode_message(sch, None, sym)), sch)
        ctx = RoundContext(sch, r, eve_rng)
        if hook is not None:
            joint = hook.on_transit(joint, ctx)
        joint = apply_download_gates(joint, sch)
        digits, joint = measure_and_discard(joint, sch.message_labels, meas_rng)
        retrieved: dict[str, int | None] = {}
        flags = None
        if kind == "stray":
            announced = decode_symbol(sch, None, announcers, [digits[i - 1] for i in announcers])
            flags = {"announced": announced, "mismatch": announced != sym}
        else:
            for group in subsets:
                retrieved[subset_key(group)] = decode_symbol(
                    sch, None, group, [digits[i - 1] for i in group])
        parity = sch.parity if sch.has_parity else None
        if config.hadamard_every_round:
            joint = apply_hadamard_round(joint, sch)
            sch = sch.flipped()
        if hook is not None:
            joint = hook.end_of_round(joint, ctx)
        carrier = joint
        records.append(RoundRecord(r, parity, kind, sym, retrieved, flags, dict(ctx.notes)))

    fid = round(_carrier_fidelity(carrier, sch), 12)
    transcript = SessionTranscript(config, records, fid)
    stats = detection_check(transcript)
    payload_got = transcript.payload_retrieved() if config.payload else []
    transcript.summary = {
        "rounds": config.rounds,
        "scheme": config.scheme.to_json(),
        "rng": RNG_NAME,
        "rng_seed": config.rng_seed,
        "adversary": config.adversary.to_json() if config.adversary else None,
        "stray_rounds": stats.stray_rounds,
        "mismatches": stats.mismatches,
        "mismatch_rate": round(stats.mismatch_rate, 12),
        "payload_sent": list(config.payload),
        "payload_retrieved": payload_got,
        "payload_errors": sum(a != b for a, b in zip(config.payload, payload_got)),
        "final_carrier_fidelity": fid,
    }
    log.info("session done: %d rounds, %d/%d stray mismatches", config.rounds,
             stats.mismatches, stats.stray_rounds)
    return transcript


# -- retrieval by subsets -----------------------------------------------------------

def _message_wires(players: Sequence[int]) -> list[str]:
    return [f"message_{i}" for i in players]


def authorized_retrieve(scheme: SchemeSpec, downloaded: QuditState,
                        subset: Iterable[int | str | PartyId], rng_seed: RngLike = 0,
                        method: str = "measure") -> int:
    """Symbol read by ``subset`` from a downloaded message register.

    ``method="measure"`` measures the subset's message wires in the
    computational basis and interpolates (KN), compares (odd rounds) or takes
    the parity (even rounds). ``method="phase"`` reads a k=2 code from the
    eigenphase of Z_i^{-1} Z_j without collapsing it.
    """
    players = player_indices(subset)
    if not players or any(not 1 <= i <= scheme.n for i in players):
        raise ValueError(f"subset {players} is not a set of players 1..{scheme.n}")
    if scheme.variant == "KN" and len(players) < scheme.k:
        raise InsufficientShares(
            f"{len(players)} players cannot read a ({scheme.k},{scheme.n}) share")
    if method == "phase":
        if scheme.variant != "KN" or scheme.k != 2:
            raise ValueError("phase retrieval is defined for k = 2 codes")
        pos = downloaded.layout.indices(_message_wires(players[:2]))
        return retrieve_by_phase(downloaded, pos[0], pos[1])
    if method != "measure":
        raise ValueError(f"unknown method {method!r}")
    digits, _, _ = measure_computational(downloaded, _message_wires(players), rng_seed)
    sym = decode_symbol(scheme, None, players, digits)
    if sym is None:
        raise InconsistentShares(f"measured shares {digits} match no codeword")
    return sym


def partial_download(joint: QuditState, scheme: SchemeSpec,
                     acting_subset: Iterable[int | str | PartyId]) -> QuditState:
    """Only ``acting_subset`` applies its inverse CNOTs."""
    players = player_indices(acting_subset)
    if not players:
        raise ValueError("acting subset is empty")
    return apply_download_gates(joint, scheme, players)


def retrieve_then_clean(joint: QuditState, scheme: SchemeSpec, subset, rng: RngLike = 0
                        ) -> tuple[int | None, QuditState]:
    """Subset downloads and measures; the others clean the carrier afterwards."""
    players = player_indices(subset)
    gen = as_rng(rng)
    st = partial_download(joint, scheme, players)
    digits, st, _ = measure_computational(st, _message_wires(players), gen)
    sym = decode_symbol(scheme, None, players, digits)
    rest = [i for i in range(1, scheme.n + 1) if i not in players]
    if rest:
        st = apply_download_gates(st, scheme, rest)
    carrier, _ = split_product(st, scheme.carrier_labels)
    return sym, carrier


def clean_then_retrieve(joint: QuditState, scheme: SchemeSpec, subset, rng: RngLike = 0
                        ) -> tuple[int | None, QuditState]:
    """Everyone downloads first; the subset measures afterwards."""
    players = player_indices(subset)
    gen = as_rng(rng)
    st = apply_download_gates(joint, scheme)
    digits, st, _ = measure_computational(st, _message_wires(players), gen)
    sym = decode_symbol(scheme, None, players, digits)
    carrier, _ = split_product(st, scheme.carrier_labels)
    return sym, carrier
