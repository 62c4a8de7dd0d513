from .graph import FIFO_ROLES, NODE_KINDS, FifoConfig, Node, PipelineGraph, lower_program
from .resources import ResourceReport, compute_resource_report

__all__ = [
    "FIFO_ROLES", "NODE_KINDS", "FifoConfig", "Node", "PipelineGraph", "lower_program", "ResourceReport",
    "compute_resource_report",
]
