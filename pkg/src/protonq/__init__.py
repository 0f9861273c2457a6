"""protonq: qubit-compiled nuclear wavepacket dynamics and vibrational spectra.

Pipeline: build a grid Hamiltonian (kernel kinetic energy + double-well
potential), block-diagonalize it through the mirror-pairing basis change,
compile each sub-block propagator to one- and two-qubit gate programs, run
them on a density-matrix simulator with depolarizing/readout noise, remap
block outcomes to site probabilities, and Fourier-extract level splittings
and the relative energy ladder. A tensor-train engine extends the same
machinery to multiple coupled dimensions.
"""

from .constants import AU_TIME_TO_FS, HARTREE_TO_INVCM
from .hamiltonian import (
    DafKineticSpec,
    EigenSolution,
    NuclearHamiltonian,
    PotentialCurve,
    SpatialGrid,
    build_hamiltonian,
    daf_kernel,
    exact_diagonalize,
    hermite_even,
    load_builtin_dmanh,
    reflection_symmetrize,
)
from .symmetry import (
    BlockDiagonalHamiltonian,
    GivensReflector,
    IsingParameters,
    build_reflector,
    fit_ising_params,
    ising_matrix,
    parity_permutation,
    transform,
)
from .gates import GateProgram, emit_text, parse_text, program_unitary
from .compiler import (
    EulerAngles,
    TwoQubitUnitary,
    block_propagator,
    cartan_decompose,
    cnot_to_ms,
    euler_zyz,
    trotter_compile,
)
from .simulator import NoiseModel, circuit_fidelity_estimate, run_program, sample_counts
from .dynamics import (
    InitialStateSpec,
    TimeSeries,
    WavepacketState,
    prepare_initial,
    remap_probabilities,
    run_dynamics,
    to_block_states,
)
from .spectrum import (
    EnergyLadder,
    PeakSet,
    Spectrum,
    autocorrelation_spectrum,
    combine_spectra,
    detect_peaks,
    fourier_spectrum,
    reconstruct_ladder,
)

__version__ = "0.1.0"
