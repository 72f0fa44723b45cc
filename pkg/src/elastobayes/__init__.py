"""Object-based Bayesian inversion of shear-wave data for elastic inclusions."""

from .config import SimulationConfig, transducer_line
from .dataset import DataSet, SplitData
from .errors import ElastoError

__all__ = ["SimulationConfig", "transducer_line", "DataSet", "SplitData", "ElastoError"]
__version__ = "0.1.0"
