"""Simulation of heralded atomic-state transfer between two optical cavities.

Atom 1's unknown state ``c_f|f> + c_g|g>`` is moved onto atom 2 using two
cycles of atom-cavity interaction, photon leakage, and coincidence
detection behind a balanced beam splitter.  The package offers

* ``hilbert``     36-dim basis, operators, reductions, fidelities
* ``dynamics``    no-click propagation and quantum-jump channels
* ``pulses``      ideal single-atom transformations, Raman estimate
* ``protocol``    conditioned analytic pipeline and outcome bookkeeping
* ``analysis``    closed-form probabilities, fidelities, timing budget
* ``trajectory``  Monte-Carlo unraveling driven by observed clicks only
* ``cli``         command-line driver
"""

from .dynamics import OverdampedRegime, SystemParams, solve_t1
from .hilbert import TruncationError
from .protocol import InputState, ProtocolSchedule, run_analytic
from .trajectory import TrajectoryConfig, run_ensemble

__all__ = [
    "InputState",
    "OverdampedRegime",
    "ProtocolSchedule",
    "SystemParams",
    "TrajectoryConfig",
    "TruncationError",
    "run_analytic",
    "run_ensemble",
    "solve_t1",
]
__version__ = "0.1.0"
