"""Time-domain elastic obstacle scattering with BDF2 convolution quadrature.

Forward synthesis of scattered-field traces by a Nyström boundary integral
solver per contour frequency, and shape reconstruction by a
frequency-sweeping regularized Newton iteration.
"""

from .cq import CQGrid, make_grid
from .forward import ElasticMedium, IncidentWave, TraceSet, add_noise, forward_solve
from .geometry import ObservationCircle, StarCurve, TrigPoly, apple, circle, hausdorff_distance, peanut
from .inverse import InverseConfig, reconstruct

__all__ = [
    "CQGrid", "make_grid", "ElasticMedium", "IncidentWave", "TraceSet", "add_noise", "forward_solve",
    "ObservationCircle", "StarCurve", "TrigPoly", "apple", "circle", "hausdorff_distance", "peanut",
    "InverseConfig", "reconstruct",
]

__version__ = "0.1.0"
