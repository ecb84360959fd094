"""Dense associative memory (modern Hopfield network) toolkit.

Two formulations share one code path: the original one, with the learning
scale applied outside the interaction function, and the modified one, with
similarity scores normalised by the dimension and the scale moved inside.
"""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    Family,
    Formulation,
    InteractionSpec,
    NetworkConfig,
    Precision,
    derive_alpha,
    derive_beta,
    homogeneity_degree,
    interaction_eval,
)
from .dynamics import (  # noqa: E402
    OverflowStats,
    RelaxResult,
    classical_update,
    clamped_overlap,
    energy_difference,
    hebbian_weights,
    probe_overflow,
    relax,
    update_neuron,
)
from .training import TrainConfig, TrainTrace, gradient, loss, predict, train  # noqa: E402
from .experiments import (  # noqa: E402
    SweepGrid,
    SweepResultRow,
    generate_bipolar_dataset,
    recall_distance,
    run_cell,
    run_sweep,
)
