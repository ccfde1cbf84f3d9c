"""Two-task O-ring economy: log-normal skills, assortative matching, within-firm correlation.

Random numbers come from numpy's PCG64 bit generator; normals use
``Generator.standard_normal`` (ziggurat). Populations are generated in
fixed-size chunks, chunk ``k`` seeded by the ``k``-th child of
``SeedSequence(seed)``, so results do not depend on the thread count.
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import ndtri

from .errors import ParameterError, UndefinedCorrelationError

CHUNK = 1 << 16
SE_BATCHES = 20


@dataclass(frozen=True)
class PopulationParams:
    """Joint log-normal skills: both logs ~ N(mu, scale**2), log-correlation ``corr_pop``."""

    mu: float = 0.0
    scale: float = 0.5
    corr_pop: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.scale)) or not self.scale > 0:
            raise ParameterError(f"need finite mu and scale > 0, got mu={self.mu}, scale={self.scale}")
        if not -1 < self.corr_pop < 1:
            raise ParameterError(f"corr_pop must lie in (-1, 1), got {self.corr_pop}")


@dataclass
class Firms:
    """Matched firms. ``skills`` has shape ``(firms, n, 2)``."""

    skills: np.ndarray
    dropped: int = 0

    @property
    def size(self) -> int:
        return self.skills.shape[1]

    @property
    def worker_outputs(self) -> np.ndarray:
        return np.sqrt(self.skills[..., 0] * self.skills[..., 1])

    def __len__(self) -> int:
        return self.skills.shape[0]


def _chunked(seed, count: int, draw, threads: int) -> np.ndarray:
    n_chunks = max(1, -(-count // CHUNK))
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = root.spawn(n_chunks)
    sizes = [min(CHUNK, count - k * CHUNK) for k in range(n_chunks)]

    def work(k):
        return draw(np.random.Generator(np.random.PCG64(children[k])), sizes[k])

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        parts = list(pool.map(work, range(n_chunks)))
    return np.concatenate(parts)


def sample_population(params: PopulationParams, count: int, seed, threads: int = 1) -> np.ndarray:
    """``(count, 2)`` array of skill levels ``(L1, L2)``."""
    if count < 1:
        raise ParameterError(f"count must be >= 1, got {count}")
    z = _chunked(seed, count, lambda rng, m: rng.standard_normal((m, 2)), threads)
    r = params.corr_pop
    log1 = params.mu + params.scale * z[:, 0]
    log2 = params.mu + params.scale * (r * z[:, 0] + math.sqrt(1 - r * r) * z[:, 1])
    return np.exp(np.column_stack([log1, log2]))


def _block(ordered: np.ndarray, n: int) -> Firms:
    if n < 1:
        raise ParameterError(f"firm size must be >= 1, got {n}")
    usable = len(ordered) // n * n
    dropped = len(ordered) - usable
    if dropped:
        warnings.warn(f"{dropped} lowest-ranked workers dropped (count not divisible by n={n})", stacklevel=3)
    return Firms(ordered[:usable].reshape(-1, n, 2), dropped)


def assortative_match(workers: np.ndarray, n: int) -> Firms:
    """Sort by output ``sqrt(L1 * L2)`` descending and cut into blocks of ``n``.

    Ties keep input order. A remainder of fewer than ``n`` workers is dropped
    from the bottom of the ranking and counted in ``Firms.dropped``.
    """
    workers = np.asarray(workers, dtype=float)
    y = np.sqrt(workers[:, 0] * workers[:, 1])
    order = np.argsort(-y, kind="stable")
    return _block(workers[order], n)


def random_match(workers: np.ndarray, n: int, seed) -> Firms:
    """Control grouping: a seeded random permutation cut into blocks of ``n``."""
    workers = np.asarray(workers, dtype=float)
    order = np.random.default_rng(seed).permutation(len(workers))
    return _block(workers[order], n)


def firm_output(member_outputs) -> float:
    """Product of the members' outputs."""
    member_outputs = list(member_outputs)
    if not member_outputs:
        raise ParameterError("a firm needs at least one member")
    return math.prod(member_outputs)


def firm_outputs(firms: Firms) -> np.ndarray:
    return np.prod(firms.worker_outputs, axis=1)


def _deviations(firms: Firms, logs: bool, normalize: bool) -> tuple[np.ndarray, np.ndarray]:
    if len(firms) < 2 or firms.size < 2:
        raise UndefinedCorrelationError("need at least 2 firms with at least 2 members each")
    x = np.log(firms.skills) if logs else firms.skills
    if normalize and not logs:
        # conditional (co)variances scale with Y_k**2; dividing by the firm's
        # output gives every firm equal weight in the pooled estimate
        x = x / firms.worker_outputs.mean(axis=1)[:, None, None]
    dev = x - x.mean(axis=1, keepdims=True)
    return dev[..., 0], dev[..., 1]


def _corr(d1: np.ndarray, d2: np.ndarray) -> float:
    v1, v2 = float(np.sum(d1 * d1)), float(np.sum(d2 * d2))
    if v1 == 0 or v2 == 0:
        raise UndefinedCorrelationError("zero within-firm variance in a skill")
    return float(np.sum(d1 * d2) / math.sqrt(v1 * v2))


def within_firm_correlation(firms: Firms, logs: bool = False, normalize: bool = True) -> float:
    """Pooled within-firm Pearson correlation of the two skills.

    Each skill is demeaned by its own firm's mean and the deviations are
    pooled across firms (raw second moments, no small-sample correction).
    With ``normalize`` (the default, levels only) each firm's deviations are
    first divided by the firm's mean worker output; ``normalize=False`` pools
    raw level deviations, which weights firms by output squared. ``logs=True``
    works on log skills instead.
    """
    return _corr(*_deviations(firms, logs, normalize))


def _batch_se(d1: np.ndarray, d2: np.ndarray, batches: int = SE_BATCHES) -> float:
    """Standard error from interleaved batches (unit ``i`` goes to batch ``i % batches``)."""
    m = len(d1)
    if m < 2 * batches:
        return math.nan
    ests = []
    for b in range(batches):
        try:
            ests.append(_corr(d1[b::batches], d2[b::batches]))
        except UndefinedCorrelationError:
            return math.nan
    return float(np.std(ests, ddof=1) / math.sqrt(batches))


def _jackknife_se(d1: np.ndarray, d2: np.ndarray) -> float:
    """Delete-one-firm jackknife, using per-firm sums so it stays O(firms)."""
    a, b, c = (d1 * d1).sum(axis=1), (d2 * d2).sum(axis=1), (d1 * d2).sum(axis=1)
    k = len(a)
    with np.errstate(invalid="ignore", divide="ignore"):
        loo = (c.sum() - c) / np.sqrt((a.sum() - a) * (b.sum() - b))
    if not np.all(np.isfinite(loo)):
        return math.nan
    return float(math.sqrt((k - 1) / k * np.sum((loo - loo.mean()) ** 2)))


def within_firm_correlation_se(firms: Firms, logs: bool = False, normalize: bool = True) -> float:
    """Jackknife standard error of :func:`within_firm_correlation` (firms are the units)."""
    return _jackknife_se(*_deviations(firms, logs, normalize))


def predicted_corr_firm(scale: float, corr_pop: float) -> float:
    """Continuum-limit within-firm correlation ``-exp(-scale**2 * (1 - corr_pop) / 2)``."""
    PopulationParams(0.0, scale, corr_pop)
    return -math.exp(-scale * scale * (1 - corr_pop) / 2)


def population_level_correlation(scale: float, corr_pop: float) -> float:
    """Correlation of skill levels (not logs) implied by the log-normal population."""
    s2 = scale * scale
    return math.expm1(corr_pop * s2) / math.expm1(s2)


def _oracle_levels(y, scale, corr_pop, draws, seed, stratified, threads):
    if draws < 2:
        raise ParameterError(f"draws must be >= 2, got {draws}")
    PopulationParams(0.0, scale, corr_pop)
    sd = math.sqrt(2 * scale * scale * (1 - corr_pop))
    u = _chunked(seed, draws, lambda rng, m: rng.random(m), threads)
    if stratified:
        # one draw per equal-probability stratum of the normal
        z = ndtri((np.arange(draws) + u) / draws)
    else:
        z = ndtri(u)
    if not (y > 0 and math.isfinite(y)):
        raise ParameterError(f"conditioning output y must be positive, got {y}")
    half = 0.5 * sd * z
    # L_j = y * factor_j; the correlation only ever sees the factors
    return np.exp(half), np.exp(-half)


def conditional_oracle(
    y: float,
    scale: float,
    corr_pop: float,
    draws: int,
    seed,
    stratified: bool = True,
    threads: int = 1,
) -> float:
    """Correlation of skills among workers who share output ``y``.

    Draws the log-skill gap ``D ~ N(0, 2 scale**2 (1 - corr_pop))`` and sets
    ``L1 = y exp(D/2)``, ``L2 = y exp(-D/2)``. Normals come from the inverse
    normal CDF of uniforms; with ``stratified`` the i-th uniform is placed in
    ``[i/draws, (i+1)/draws)``, which keeps the far tail represented. The
    correlation is computed on the factors ``exp(+-D/2)``, so it is exactly
    the same for every ``y``.
    """
    l1, l2 = _oracle_levels(y, scale, corr_pop, draws, seed, stratified, threads)
    return _corr(l1 - l1.mean(), l2 - l2.mean())


def conditional_oracle_se(y, scale, corr_pop, draws, seed, stratified=True, threads=1) -> float:
    l1, l2 = _oracle_levels(y, scale, corr_pop, draws, seed, stratified, threads)
    return _batch_se(l1 - l1.mean(), l2 - l2.mean())


@dataclass
class MatchingResult:
    mu: float
    scale: float
    corr_pop: float
    workers: int
    firm_size: int
    firms: int
    dropped: int
    measured_corr: float
    measured_se: float
    predicted_corr: float
    abs_gap: float
    oracle_corr: float | None
    oracle_se: float | None
    oracle_draws: int
    random_log_corr: float
    random_log_se: float
    seed: int
    firm_outputs_head: list

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, allow_nan=True)


def run_matching(
    params: PopulationParams,
    workers: int,
    n: int,
    seed: int,
    oracle_draws: int = 10**6,
    normalize: bool = True,
    threads: int = 1,
    keep_outputs: int = 20,
) -> MatchingResult:
    """Sample, match assortatively, and compare with the closed form and the oracle.

    Also groups the same population at random (the control) and reports the
    pooled within-firm correlation of log skills, which should equal
    ``corr_pop``. Seeds: children 0, 1 and 2 of ``SeedSequence(seed)`` drive
    the population, the oracle and the random grouping.
    """
    if n < 2:
        raise ParameterError(f"firm size must be >= 2 for a within-firm correlation, got {n}")
    pop_seed, oracle_seed, control_seed = np.random.SeedSequence(seed).spawn(3)
    pop = sample_population(params, workers, pop_seed, threads)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        firms = assortative_match(pop, n)
        control = random_match(pop, n, control_seed)
    measured = within_firm_correlation(firms, normalize=normalize)
    se = within_firm_correlation_se(firms, normalize=normalize)
    predicted = predicted_corr_firm(params.scale, params.corr_pop)
    oracle = oracle_se = None
    if oracle_draws:
        l1, l2 = _oracle_levels(1.0, params.scale, params.corr_pop, oracle_draws, oracle_seed, True, threads)
        oracle = _corr(l1 - l1.mean(), l2 - l2.mean())
        oracle_se = _batch_se(l1 - l1.mean(), l2 - l2.mean())
    z = firm_outputs(firms)
    return MatchingResult(
        params.mu, params.scale, params.corr_pop, workers, n, len(firms), firms.dropped,
        measured, se, predicted, abs(measured - predicted), oracle, oracle_se, oracle_draws,
        within_firm_correlation(control, logs=True), within_firm_correlation_se(control, logs=True),
        seed, [float(v) for v in z[:keep_outputs]],
    )
