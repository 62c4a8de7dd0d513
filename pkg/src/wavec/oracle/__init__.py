from .enumerate import Bounds, BoundsExceeded, enumerate_executions, freeze, state_key
from .source import SourceInterpreter, interpret_sequential_source
from .serial import OracleError, ThreadExec, init_store, interpret_serialized

__all__ = [
    "Bounds", "BoundsExceeded", "OracleError", "ThreadExec", "enumerate_executions", "freeze", "init_store",
    "interpret_sequential_source", "interpret_serialized", "SourceInterpreter", "state_key",
]
