"""Quantum bit-commitment simulator."""

from ._core import (
    DecodeError,
    DeviceLimitError,
    DimensionError,
    DomainError,
    Error,
    cheat_bound,
    closed_forms,
    committed_state,
    decode_unveil,
    encode_unveil,
    helstrom_attack,
    multi_copy_distinguisher,
    n_a_max,
    naive_attack,
    omega,
    phi_tilde_minus,
    plan_security,
    required_s,
    rho_minus,
    rho_plus,
    run_honest,
    steering_attack,
    sweep,
    trace_distance_plus_minus,
    wilson_interval,
)

__version__ = "0.1.0"
