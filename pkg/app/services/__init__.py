"""Services module initialization."""
from .settings import Settings
from .config_serializer import ConfigSerializer
from .topology import Topology

__all__ = ["Settings", "ConfigSerializer", "Topology"]
