"""Task-based automation and inequality: CES worker output, comparative statics,
capability sweeps, O-ring matching and weighted skill correlations."""

from .core import (
    Correlation,
    InequalityReading,
    ProductionSpec,
    ScenarioParams,
    adoption,
    effective_inputs,
    inequality,
    output,
    scenario_workers,
    worker_outputs,
)
from .errors import (
    DomainError,
    LoadError,
    ModelError,
    ParameterError,
    StencilError,
    UndefinedCorrelationError,
)

__version__ = "0.1.0"

__all__ = [
    "Correlation",
    "DomainError",
    "InequalityReading",
    "LoadError",
    "ModelError",
    "ParameterError",
    "ProductionSpec",
    "ScenarioParams",
    "StencilError",
    "UndefinedCorrelationError",
    "adoption",
    "effective_inputs",
    "inequality",
    "output",
    "scenario_workers",
    "worker_outputs",
]
