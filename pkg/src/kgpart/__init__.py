"""
kgpart - workload-aware adaptive partitioning of RDF knowledge graphs.
Shards follow the features the SPARQL workload uses and are re-planned
when the workload drifts.
"""

__version__ = "1.0.0"

from .config import EngineConfig
from .core import PartitionEngine
from .kg_model import KnowledgeGraph
from .workload import Workload

__all__ = ["EngineConfig", "KnowledgeGraph", "PartitionEngine", "Workload"]
