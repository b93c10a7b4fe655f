"""Second-quantized Unruh-DeWitt detectors on discretized 1+1D momentum grids."""

__version__ = "0.1.0"

from .kinematics import BoostParam, Species, boost_momentum, dispersion_detector, dispersion_photon, gamma_of
from .fockspace import (
    FockSpace,
    ModeGrid,
    SectorState,
    aligned_decay_grids,
    inner,
    make_grid,
    tensor_with_frame,
    wavepacket_state,
)
from .operators import DensityOperator, KetBraOperator
from .perturbation import (
    CouplingConfig,
    InteractionHamiltonian,
    apply_hint_rec,
    apply_hint_res,
    first_order_emission,
    s_norm,
    time_window,
)

__all__ = [
    "BoostParam",
    "CouplingConfig",
    "DensityOperator",
    "FockSpace",
    "InteractionHamiltonian",
    "KetBraOperator",
    "ModeGrid",
    "SectorState",
    "Species",
    "aligned_decay_grids",
    "apply_hint_rec",
    "apply_hint_res",
    "boost_momentum",
    "dispersion_detector",
    "dispersion_photon",
    "first_order_emission",
    "gamma_of",
    "inner",
    "make_grid",
    "s_norm",
    "tensor_with_frame",
    "time_window",
    "wavepacket_state",
]
