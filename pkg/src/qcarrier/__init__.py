"""Quantum carrier protocols for secret sharing over qudits."""
from .adversary import (AttackModel, AttackReport, contamination_detection,
                        entangle_difference_attack, insider_b3_attack, passive_intercept)
from .carriers import (CarrierState, SchemeSpec, build_carrier, download, encode_message,
                       hadamard_round, upload)
from .modular_codes import (CodeSpec, InconsistentShares, InsufficientShares, encode_codeword,
                            power_sum, power_sum_by_recursion, retrieve_classical,
                            verify_code_relations)
from .protocol_engine import (ConfigError, PartyId, SessionConfig, SessionTranscript,
                              authorized_retrieve, detection_check, load_config,
                              partial_download, run_session)
from .qudit_state import (DensityMatrix, QuditState, RegisterLayout, fidelity, partial_trace,
                          trace_distance)

__version__ = "0.1.0"

__all__ = [
    "AttackModel", "AttackReport", "CarrierState", "CodeSpec", "ConfigError", "DensityMatrix",
    "InconsistentShares", "InsufficientShares", "PartyId", "QuditState", "RegisterLayout",
    "SchemeSpec", "SessionConfig", "SessionTranscript", "authorized_retrieve", "build_carrier",
    "contamination_detection", "detection_check", "download", "encode_codeword",
    "encode_message", "entangle_difference_attack", "fidelity", "hadamard_round",
    "insider_b3_attack", "load_config", "partial_download", "partial_trace", "passive_intercept",
    "power_sum", "power_sum_by_recursion", "retrieve_classical", "run_session", "trace_distance",
    "upload", "verify_code_relations",
]
