"""Worker output under CES production with optional task automation.

Skill vectors and capability vectors are plain tuples of floats, one entry
per task. A capability of 0 means no technology is offered for that task.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

from .errors import DomainError, ParameterError

#: |rho| below this selects the exact Cobb-Douglas (geometric mean) formula.
COBB_DOUGLAS_EPS = 1e-9

_SHARE_TOL = 1e-12


class Correlation(str, enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


@dataclass(frozen=True)
class ProductionSpec:
    """CES technology ``Y = (sum_t a_t L_t**rho) ** (1/rho)``.

    ``rho`` must be finite and at most 1; the Leontief limit (rho -> -inf) is
    not supported. Shares must be positive and sum to one.
    """

    rho: float
    shares: tuple[float, ...] = (0.5, 0.5)

    def __post_init__(self):
        shares = tuple(float(a) for a in self.shares)
        object.__setattr__(self, "shares", shares)
        rho = float(self.rho)
        object.__setattr__(self, "rho", rho)
        if not math.isfinite(rho) or rho > 1:
            raise ParameterError(f"rho must be finite and <= 1, got {self.rho!r}")
        if not shares:
            raise ParameterError("shares must be non-empty")
        if any(not (a > 0) or not math.isfinite(a) for a in shares):
            raise ParameterError(f"shares must be positive, got {shares}")
        if abs(math.fsum(shares) - 1.0) > _SHARE_TOL:
            raise ParameterError(f"shares must sum to 1, got sum {math.fsum(shares)!r}")

    @classmethod
    def equal_shares(cls, rho: float, task_count: int = 2) -> "ProductionSpec":
        if task_count < 1:
            raise ParameterError(f"task_count must be positive, got {task_count}")
        return cls(rho, (1.0 / task_count,) * task_count)

    @property
    def task_count(self) -> int:
        return len(self.shares)

    @property
    def is_cobb_douglas(self) -> bool:
        return abs(self.rho) < COBB_DOUGLAS_EPS

    @property
    def elasticity(self) -> float:
        """Elasticity of substitution 1/(1 - rho); infinite at rho = 1."""
        if self.rho == 1:
            return math.inf
        return 1.0 / (1.0 - self.rho)


@dataclass(frozen=True)
class ScenarioParams:
    """Two-type skill scenario: H and L workers built from B, C with 1 < C < B."""

    b: float
    c: float
    correlation: Correlation

    def __post_init__(self):
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "correlation", Correlation(self.correlation))
        if not (math.isfinite(self.b) and 1.0 < self.c < self.b):
            raise ParameterError(f"need 1 < C < B, got B={self.b!r}, C={self.c!r}")


@dataclass(frozen=True)
class InequalityReading:
    y_high: float
    y_low: float
    delta: float
    abs_delta: float
    cv: float
    gini: float


def _check_vector(values: Sequence[float], n: int, name: str, positive: bool) -> tuple[float, ...]:
    vec = tuple(float(v) for v in values)
    if len(vec) != n:
        raise ParameterError(f"{name} has length {len(vec)}, expected {n}")
    for v in vec:
        if not math.isfinite(v) or (v <= 0 if positive else v < 0):
            bound = "> 0" if positive else ">= 0"
            raise ParameterError(f"{name} entries must be finite and {bound}, got {vec}")
    return vec


def _logsumexp(xs: Sequence[float]) -> float:
    m = max(xs)
    return m + math.log(math.fsum(math.exp(x - m) for x in xs))


def output(spec: ProductionSpec, skills: Sequence[float]) -> float:
    """Worker output for the given per-task skills (or effective inputs)."""
    L = _check_vector(skills, spec.task_count, "skills", positive=True)
    logs = [math.log(x) for x in L]
    if spec.is_cobb_douglas:
        try:
            y = math.prod(x**a for x, a in zip(L, spec.shares))
        except OverflowError:
            y = math.inf
        if not (0 < y < math.inf):
            y = _exp_or_raise(math.fsum(a * l for a, l in zip(spec.shares, logs)), spec)
        return y

    rho = spec.rho
    # log1p/expm1 keeps full relative precision as rho -> 0; logsumexp covers
    # overflow and the s -> -1 end where log1p loses digits.
    try:
        s = math.fsum(a * math.expm1(rho * l) for a, l in zip(spec.shares, logs))
    except OverflowError:
        s = math.inf
    if -0.5 <= s < math.inf:
        ln_y = math.log1p(s) / rho
    else:
        ln_y = _logsumexp([rho * l + math.log(a) for a, l in zip(spec.shares, logs)]) / rho
    return _exp_or_raise(ln_y, spec)


def _exp_or_raise(ln_y: float, spec: ProductionSpec) -> float:
    try:
        y = math.exp(ln_y)
    except OverflowError:
        y = math.inf
    if not (0 < y < math.inf):
        raise DomainError(
            f"output is not representable (log-output {ln_y!r}) for rho={spec.rho!r}; "
            "check skills/capabilities magnitudes"
        )
    return y


def effective_inputs(skills: Sequence[float], automation: Sequence[float]) -> tuple[float, ...]:
    """Per-task input after rational adoption: ``max(L_t, A_t)``."""
    L = _check_vector(skills, len(tuple(skills)), "skills", positive=True)
    A = _check_vector(automation, len(L), "automation", positive=False)
    return tuple(a if a > l else l for l, a in zip(L, A))


def adoption(skills: Sequence[float], automation: Sequence[float]) -> tuple[bool, ...]:
    """Which tasks a worker hands to the technology (strictly better than own skill)."""
    L = _check_vector(skills, len(tuple(skills)), "skills", positive=True)
    A = _check_vector(automation, len(L), "automation", positive=False)
    return tuple(a > l for l, a in zip(L, A))


def scenario_workers(params: ScenarioParams) -> tuple[tuple[float, float], tuple[float, float]]:
    """Skill vectors ``(H, L)`` for the two worker types."""
    b, c = params.b, params.c
    if params.correlation is Correlation.POSITIVE:
        return (b, b * c), (1.0, c)
    return (b, 1.0), (1.0, c)


def worker_outputs(
    spec: ProductionSpec, params: ScenarioParams, automation: Sequence[float]
) -> tuple[float, float]:
    if spec.task_count != 2:
        raise ParameterError("scenario evaluation requires a two-task production spec")
    high, low = scenario_workers(params)
    return (
        output(spec, effective_inputs(high, automation)),
        output(spec, effective_inputs(low, automation)),
    )


def inequality(
    spec: ProductionSpec, params: ScenarioParams, automation: Sequence[float]
) -> InequalityReading:
    """Output gap between the H and L types at the given capabilities.

    Besides the signed gap ``delta = Y_H - Y_L`` and its absolute value, the
    reading carries the two-worker coefficient of variation
    ``|Y_H - Y_L| / (Y_H + Y_L)`` and the Gini coefficient, which for two
    workers is half of it.
    """
    y_h, y_l = worker_outputs(spec, params, automation)
    delta = y_h - y_l
    cv = abs(delta) / (y_h + y_l)
    return InequalityReading(y_h, y_l, delta, abs(delta), cv, cv / 2)
