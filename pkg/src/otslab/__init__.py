"""Opinion transition systems: asynchronous opinion dynamics driven by action words."""

from .analysis import RunTrace, audit_bounds, convergence, execute
from .dynamics import step
from .graph import Edge, GPath, InfluenceGraph

__all__ = ["Edge", "GPath", "InfluenceGraph", "RunTrace", "audit_bounds", "convergence", "execute", "step"]
__version__ = "0.1.0"
