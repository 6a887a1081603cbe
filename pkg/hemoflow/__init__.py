"""One-dimensional viscoelastic blood flow in a single vessel.

Contains the finite-volume solver of the standard-linear-solid wall model
with its inlet and Windkessel boundary conditions, and the physics-informed
network that infers the wall's instantaneous modulus and relaxation time
from area and velocity waveforms.

Author: hemoflow developers
Version: 0.1.0
"""

from .apnn import *
from .autodiff import Tape, Variable, value_of
from .boundary import *
from .config import *
from .data_io import *
from .errors import *
from .imex import *
from .kind import *
from .network import *
from .optim import *
from .protocols import *
from .riemann import *
from .scales import *
from .solver import *
from .utilities import *
from .vessel import *
from .weno import *
