from .engine import Simulator, combine, partition_nonblocking, run
from .model import (
    ChannelSpec,
    Clock,
    Fault,
    FaultKind,
    Message,
    Mode,
    ProcessSpec,
    Scenario,
    ScenarioError,
    channels_for,
    inject_fault,
)
from .process import ProcessState, Trajectory, run_convergence
from .sync import SyncReport, measure_sync
from .trace import Event, Trace
from .transaction import Kill, Transaction, TransactionResult, fold_output, run_transaction, transaction_model

__all__ = [
    "ChannelSpec",
    "Clock",
    "Event",
    "Fault",
    "FaultKind",
    "Kill",
    "Message",
    "Mode",
    "ProcessSpec",
    "ProcessState",
    "Scenario",
    "ScenarioError",
    "Simulator",
    "SyncReport",
    "Trace",
    "Trajectory",
    "Transaction",
    "TransactionResult",
    "channels_for",
    "combine",
    "fold_output",
    "inject_fault",
    "measure_sync",
    "partition_nonblocking",
    "run",
    "run_convergence",
    "run_transaction",
    "transaction_model",
]
