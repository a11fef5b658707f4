"""Consistent-histories quantum reasoning: frameworks, histories, consistency and valid inference."""

from .classical import (
    Event,
    FiniteSampleSpace,
    classical_cond_prob,
    classical_infer,
    classical_phi,
    diagonal_embedding,
)
from .framework import (
    AlgebraElement,
    And,
    Elementary,
    Framework,
    Not,
    Or,
    build_framework,
    decompose,
    frameworks_compatible_single_time,
    generated_framework,
    phi,
)
from .histories import (
    ConsistencyReport,
    GeneralizedHistory,
    HistoryFamily,
    PropagatorSet,
    SimpleHistory,
    TimeGrid,
    build_family,
    chain_operator_general,
    chain_operator_simple,
    conditional_probability,
    consistency_functional,
    families_compatible,
    history_projector,
    infer_histories,
    lift_history,
    propagators_explicit,
    propagators_from_hamiltonian,
    weight,
)
from .logic import Description, InferenceVerdict, Reason, entails, infer_single_time, master_description
from .models import (
    NamedModel,
    build_double_slit_model,
    build_spin_measurement_model,
    build_two_device_model,
)

__version__ = "0.1.0"
