"""Finite-time coherent Otto cycle on a d-level spin with measured statistics.

The package simulates the four-stroke cycle (two driven unitary strokes, two
damping isochores), finds its limit cycle, and computes the full work and heat
fluctuation statistics under two measurement protocols: projective energy
measurements at the cycle corners, and measurements in the instantaneous state
eigenbasis with Bayesian inference of the energies.
"""

__version__ = "0.1.0"

from .engine import (
    ConvergenceError,
    CycleConfig,
    CycleOperators,
    DrivingProtocol,
    build_cycle,
    classify_regime,
    cycle_map,
    gad_channel,
    limit_cycle,
    propagator,
    unmeasured_thermo,
)
from .qcore import (
    DiscreteDistribution,
    SpectralDecomposition,
    dephase,
    eig_hermitian,
    kl_divergence,
    moments,
    rel_entropy_coherence,
    spin_operators,
    trace_distance,
    von_neumann_entropy,
)
from .stats import (
    FluctuationRatio,
    OutcomeJoint,
    SchemeReport,
    avg_post_measurement_state,
    check_equivalence_conditions,
    dbn_joint,
    fluctuation_ratio,
    marginals,
    scheme_distributions,
    scheme_report,
    tpm_joint,
    value_distribution,
)

closed_form_report = scheme_report
