from .test_apnn import *
from .test_autodiff import *
from .test_boundary import *
from .test_cli import *
from .test_config import *
from .test_data_io import *
from .test_imex import *
from .test_network import *
from .test_optim import *
from .test_plotting import *
from .test_riemann import *
from .test_scales import *
from .test_solver import *
from .test_vessel import *
from .test_weno import *
