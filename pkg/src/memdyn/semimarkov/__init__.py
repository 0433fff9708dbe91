"""Semi-Markov jump dynamics, classical and quantum."""
from .classical import (
    ClassicalSemiMarkov,
    classical_embedding,
    classical_gme_solve,
    classical_mc,
    extended_chain_solve,
    stochastic_violations,
)
from .phasetype import (
    PhaseTypeWTD,
    convolution,
    erlang,
    exponential,
    hyperexponential,
    mixture,
    renewal_count_probs,
)
from .quantum import (
    ORDERINGS,
    MCResult,
    SemiMarkovModel,
    SeriesResult,
    dynamics_family,
    embedded_propagators,
    kernel_local,
    kernel_time_samples,
    laplace_propagators,
    laplace_series,
    laplace_solution,
    mc_simulate,
    memory_kernel,
    series_evaluate,
    transfer_functions,
)
from .volterra import solve_volterra, volterra_solution

__all__ = [name for name in dir() if not name.startswith("_")]
