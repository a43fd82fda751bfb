"""collarflow: harmonic map flow from hyperbolic cylinders into warped products."""

__version__ = "0.1.0"

from .collar import CollarMetric, collar_width, thin_part_width
from .flow import FlowParams, relax_harmonic, step_full, step_rescaled
from .grid import StretchSpec, build_grid
from .initial import InitialDataSpec, build_initial
from .monitors import MonitorConfig
from .runner import run_flow
from .symmap import SymmetricMap
from .target import TargetGeometry, build_compact_coupling, make_warping

__all__ = [
    "CollarMetric",
    "FlowParams",
    "InitialDataSpec",
    "MonitorConfig",
    "StretchSpec",
    "SymmetricMap",
    "TargetGeometry",
    "build_compact_coupling",
    "build_grid",
    "build_initial",
    "collar_width",
    "make_warping",
    "relax_harmonic",
    "run_flow",
    "step_full",
    "step_rescaled",
    "thin_part_width",
]
