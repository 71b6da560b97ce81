"""Desk-scale quantum state tomography workbench.

Simulates Pauli-basis measurements on canonical multi-qubit states,
reconstructs density matrices by gradient-training small networks through a
built-in reverse-mode autodiff engine, and replays trained models on a
simulated analog crossbar to measure accuracy degradation.
"""

from .autodiff import Tensor
from .crossbar import (
    CrossbarConfig,
    DegradationReport,
    ProgrammedCrossbar,
    analog_mvm,
    program_weights,
    run_network_on_crossbar,
)
from .measurement import (
    BasisSet,
    MeasurementDataset,
    acquire,
    enumerate_bases,
    filter_nonzero_expectation,
    is_informationally_complete,
    load_dataset,
    save_dataset,
    select_bases,
)
from .networks import (
    Discriminator,
    Network,
    NetworkSpec,
    build_discriminator,
    build_network,
)
from .quantum import (
    DensityMatrix,
    PureState,
    expectation,
    fidelity,
    ghz_state,
    load_state,
    make_mixed_state,
    make_pure_state,
    outcome_probabilities,
    pauli_operator,
    purity,
    random_mixture,
    random_pure_state,
    save_state,
    validate_density,
    w_state,
    werner_state,
)
from .training import TrainConfig, TrainTrace, train_cgan, train_reconstruction

__version__ = "0.1.0"
