"""Ensemble orchestration: run configs, batched trajectory ensembles,
heralding-window statistics, and the ensemble-vs-deterministic
consistency check.

A run is described by a flat key=value config (see ``parse_config``).
Ensembles are integrated in fixed subbatches of ``SUBBATCH`` trajectories
whose results are reduced in subbatch order regardless of how many
workers produced them, so every statistic (and every emitted CSV byte)
depends only on the config, never on scheduling.
"""

from __future__ import annotations

import math
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .entangle import GG, eof_batch, populations_batch
from .errors import ConfigError
from .lindblad import integrate_me
from .model import DEFAULT_COUPLING, ModelParams, build_operators
from .trajectories import (
    BatchResult,
    TrajectoryRecord,
    run_diffusive_sse_batch,
    run_jump_sse_batch,
    run_sme_batch,
)

__all__ = [
    "SUBBATCH",
    "CONSISTENCY_ATOL",
    "RunConfig",
    "EnsembleStats",
    "ConsistencyReport",
    "parse_config",
    "parse_config_values",
    "effective_workers",
    "run_ensemble",
    "consistency_check",
    "emit_csv",
]

SUBBATCH = 256          # trajectories per kernel call; part of the reduction contract
CONSISTENCY_ATOL = 1e-4  # additive floor under the 3-SE rule (finite-dt bias, zero-SE entries)

_ENGINES = ("steady", "me", "jump", "diffusive", "sme", "g2")
_STOCHASTIC = ("jump", "diffusive", "sme")

TRAJ_HEADER = (
    "t,norm,pop_ee,pop_plus_i,pop_minus_i,pop_gg,entanglement,"
    "jump_left,jump_right,dxi"
)
STATS_HEADER = (
    "t,mean_pop_ee,se_pop_ee,mean_pop_plus_i,se_pop_plus_i,"
    "mean_pop_minus_i,se_pop_minus_i,mean_pop_gg,se_pop_gg,"
    "mean_entanglement,se_entanglement"
)
_HIST_BINS = 50


@dataclass(frozen=True)
class RunConfig:
    """Validated parameters of one run.  ``engine`` selects what the run
    computes; the stochastic engines (jump, diffusive, sme) integrate
    trajectory ensembles, while steady/me/g2 are deterministic."""

    engine: str
    g: float = DEFAULT_COUPLING
    alpha: float = 100.0
    theta: float = 0.0
    kl: float = math.pi / 2.0
    eta_l: float = 1.0
    eta_r: float = 1.0
    t_end: float = 20.0
    dt: float = 5e-5
    sample_stride: int = 200
    n_traj: int = 1
    seed: int = 1000003
    out: str = "."
    workers: int | None = None
    emit_svg: bool = False

    def __post_init__(self):
        if self.engine not in _ENGINES:
            raise ConfigError(
                f"engine must be one of {', '.join(_ENGINES)} (got {self.engine!r})"
            )
        checks = (
            ("g", self.g > 0.0, "must be positive"),
            ("alpha", self.alpha >= 0.0, "must be non-negative"),
            ("eta_l", 0.0 <= self.eta_l <= 1.0, "must lie in [0, 1]"),
            ("eta_r", 0.0 <= self.eta_r <= 1.0, "must lie in [0, 1]"),
            ("t_end", self.t_end > 0.0, "must be positive"),
            ("dt", self.dt > 0.0, "must be positive"),
            ("sample_stride", self.sample_stride >= 1, "must be >= 1"),
            ("n_traj", self.n_traj >= 1, "must be >= 1"),
            ("seed", 0 <= self.seed < 2**64, "must lie in [0, 2^64)"),
            ("workers", self.workers is None or self.workers >= 1, "must be >= 1"),
        )
        for name, ok, why in checks:
            if not ok:
                raise ConfigError(f"{name} {why} (got {getattr(self, name)!r})")

    def model_params(self) -> ModelParams:
        return ModelParams(
            g=self.g,
            alpha_mag=self.alpha,
            theta=self.theta,
            kl=self.kl,
            eta_l=self.eta_l,
            eta_r=self.eta_r,
        )


_KL_PI = re.compile(r"^(?P<coef>[^a-df-oq-z]*?)\s*\*?\s*pi$", re.IGNORECASE)


def _parse_kl(raw: str) -> float:
    m = _KL_PI.match(raw.strip())
    if m:
        coef = m.group("coef").strip()
        return (float(coef) if coef else 1.0) * math.pi
    return float(raw)


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


_PARSERS = {
    "engine": lambda s: s.strip().lower(),
    "g": float,
    "alpha": float,
    "theta": float,
    "kl": _parse_kl,
    "eta_l": float,
    "eta_r": float,
    "t_end": float,
    "dt": float,
    "sample_stride": int,
    "n_traj": int,
    "seed": int,
    "out": lambda s: s.strip(),
    "workers": int,
    "emit_svg": _parse_bool,
}


def parse_config_values(text: str) -> dict:
    """Parse key=value lines into a plain dict of typed values.

    One assignment per line; ``#`` starts a comment; keys are
    case-insensitive; ``kl`` accepts plain radians or a ``pi`` suffix
    (``0.5pi``, ``pi``).  Unknown keys, duplicate keys, and malformed
    values raise ConfigError naming the offending key and line.
    """
    values: dict[str, object] = {}
    seen: dict[str, int] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value on line {lineno}: {raw_line.strip()!r}")
        key_raw, value_raw = line.split("=", 1)
        key = key_raw.strip().lower()
        value_raw = value_raw.strip()
        if key not in _PARSERS:
            raise ConfigError(f"unknown key {key!r} on line {lineno}")
        if key in seen:
            raise ConfigError(
                f"duplicate key {key!r} on line {lineno} (first set on line {seen[key]})"
            )
        seen[key] = lineno
        try:
            values[key] = _PARSERS[key](value_raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(
                f"invalid value for {key!r} on line {lineno}: {value_raw!r} ({exc})"
            ) from None
    return values


def parse_config(text: str) -> RunConfig:
    """Parse and validate a complete config; ``engine`` is required."""
    values = parse_config_values(text)
    if "engine" not in values:
        raise ConfigError("missing required key 'engine'")
    return RunConfig(**values)


def effective_workers(config: RunConfig) -> int:
    """Worker count: explicit config value, else BELLHERALD_WORKERS, else
    the CPU count."""
    if config.workers is not None:
        return config.workers
    env = os.environ.get("BELLHERALD_WORKERS")
    if env is not None:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"BELLHERALD_WORKERS must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigError(f"BELLHERALD_WORKERS must be >= 1, got {n}")
        return n
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# ensemble statistics


@dataclass(frozen=True)
class EnsembleStats:
    """Reduced ensemble summary.

    Population columns follow the projective basis {|ee>, |+i>, |-i>,
    |gg>}.  Standard errors use the ddof=1 sample variance over
    trajectories (zero when n_traj = 1).  Window quantities describe
    heralding windows: a window opens on a left click whose post-state
    fidelity with |+i> exceeds 1/2 and closes on the next left click
    (which opens the following window when it lands on |+i> again);
    trailing open windows are excluded.  ``window_rel_t`` pools sampled
    times measured from each window's opening click, aligned with
    ``window_pop_plus_i`` and ``window_entanglement``.
    ``jump_time_histogram`` bins left-channel click times over
    [0, t_end].
    """

    engine: str
    n_traj: int
    times: np.ndarray
    mean_rho: np.ndarray
    mean_populations: np.ndarray
    se_populations: np.ndarray
    mean_entanglement: np.ndarray
    se_entanglement: np.ndarray
    herald_count: int
    jump_time_histogram: tuple[np.ndarray, np.ndarray]
    n_windows: int
    mean_window_duration: float
    herald_fidelity_mean: float
    birth_fidelities: np.ndarray = field(repr=False)
    birth_entanglement: np.ndarray = field(repr=False)
    window_durations: np.ndarray = field(repr=False)
    window_rel_t: np.ndarray = field(repr=False)
    window_pop_plus_i: np.ndarray = field(repr=False)
    window_entanglement: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class ConsistencyReport:
    """Outcome of the ensemble-vs-master-equation comparison.  The ratio
    for each density-matrix entry (real and imaginary parts separately)
    is |deviation| / (SE + atol/3); the check passes iff the largest
    ratio is <= 3."""

    engine: str
    n_traj: int
    passed: bool
    max_ratio: float
    max_deviation: float
    se_at_max: float
    time_at_max: float
    entry_at_max: tuple[int, int, str]
    atol: float


def _initial_pure() -> np.ndarray:
    return GG.copy()


def _initial_mixed() -> np.ndarray:
    return np.outer(GG, GG.conj())


def _run_one_batch(config: RunConfig, ops, lo: int, hi: int) -> BatchResult:
    idx = range(lo, hi)
    if config.engine == "jump":
        return run_jump_sse_batch(
            ops, _initial_pure(), config.t_end, config.dt, config.seed, idx,
            sample_stride=config.sample_stride,
        )
    if config.engine == "diffusive":
        return run_diffusive_sse_batch(
            ops, _initial_pure(), config.t_end, config.dt, config.seed, idx,
            sample_stride=config.sample_stride,
        )
    return run_sme_batch(
        ops, _initial_mixed(), config.t_end, config.dt, config.seed, idx,
        config.eta_l, config.eta_r, sample_stride=config.sample_stride,
    )


def _run_batches(config: RunConfig) -> list[BatchResult]:
    """Integrate the whole ensemble; results come back in subbatch order
    no matter how many workers ran them."""
    if config.engine not in _STOCHASTIC:
        raise ConfigError(
            f"engine {config.engine!r} does not produce trajectory ensembles"
        )
    ops = build_operators(config.model_params())
    ranges = [
        (lo, min(lo + SUBBATCH, config.n_traj))
        for lo in range(0, config.n_traj, SUBBATCH)
    ]
    workers = effective_workers(config)
    if workers == 1 or len(ranges) == 1:
        return [_run_one_batch(config, ops, lo, hi) for lo, hi in ranges]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futs = [pool.submit(_run_one_batch, config, ops, lo, hi) for lo, hi in ranges]
        return [f.result() for f in futs]


def _closed_windows(events):
    """Split left clicks into (birth, death) windows by landing state.

    A left jump lands in span{|+i>, |gg>} (the image of the left jump
    operator), so its post-state fidelity with |+i> classifies it: above
    1/2 the jump opens a window, otherwise it belongs to the ground
    cycle.  Any later left click closes the open window; if that click
    itself lands on |+i> it opens the next window at the same instant.
    Plain click counting is not equivalent: a click can fire off residual
    |+i> coherence while the even sector sits at a drive-rotation node,
    landing near |gg> and silently flipping the count parity.
    """
    windows = []
    birth = None
    for e in events:
        if e.channel != "left":
            continue
        if birth is None:
            if e.post_state_fidelity_plus_i > 0.5:
                birth = e
        else:
            windows.append((birth, e))
            birth = e if e.post_state_fidelity_plus_i > 0.5 else None
    return windows


def _reduce(config: RunConfig, batches: list[BatchResult]) -> EnsembleStats:
    n = config.n_traj
    times = batches[0].times
    n_s = len(times)

    pop_sum = np.zeros((n_s, 4))
    pop_sq = np.zeros((n_s, 4))
    ent_sum = np.zeros(n_s)
    ent_sq = np.zeros(n_s)
    rho_sum = np.zeros((n_s, 4, 4), dtype=complex)
    left_times: list[np.ndarray] = []
    birth_fid: list[float] = []
    birth_ent: list[float] = []
    durations: list[float] = []
    rel_t: list[np.ndarray] = []
    win_pop: list[np.ndarray] = []
    win_ent: list[np.ndarray] = []
    herald_count = 0

    for br in batches:
        pop_sum += br.populations.sum(axis=0)
        pop_sq += (br.populations**2).sum(axis=0)
        ent_sum += br.entanglement.sum(axis=0)
        ent_sq += (br.entanglement**2).sum(axis=0)
        rho_sum += br.moment_sum
        for row, evs in enumerate(br.jump_events):
            lt = np.array([e.time for e in evs if e.channel == "left"])
            herald_count += lt.size
            if lt.size:
                left_times.append(lt)
            for birth, death in _closed_windows(evs):
                birth_fid.append(birth.post_state_fidelity_plus_i)
                birth_ent.append(birth.post_entanglement)
                durations.append(death.time - birth.time)
                inside = (times >= birth.time) & (times < death.time)
                if inside.any():
                    rel_t.append(times[inside] - birth.time)
                    win_pop.append(br.populations[row, inside, 1])
                    win_ent.append(br.entanglement[row, inside])

    mean_pop = pop_sum / n
    mean_ent = ent_sum / n
    if n > 1:
        var_pop = np.maximum(pop_sq - n * mean_pop**2, 0.0) / (n - 1)
        var_ent = np.maximum(ent_sq - n * mean_ent**2, 0.0) / (n - 1)
        se_pop = np.sqrt(var_pop / n)
        se_ent = np.sqrt(var_ent / n)
    else:
        se_pop = np.zeros_like(mean_pop)
        se_ent = np.zeros_like(mean_ent)

    all_left = np.concatenate(left_times) if left_times else np.empty(0)
    hist = np.histogram(all_left, bins=_HIST_BINS, range=(0.0, config.t_end))
    durations_arr = np.array(durations)
    return EnsembleStats(
        engine=config.engine,
        n_traj=n,
        times=times,
        mean_rho=rho_sum / n,
        mean_populations=mean_pop,
        se_populations=se_pop,
        mean_entanglement=mean_ent,
        se_entanglement=se_ent,
        herald_count=herald_count,
        jump_time_histogram=hist,
        n_windows=len(durations),
        mean_window_duration=float(durations_arr.mean()) if durations else float("nan"),
        herald_fidelity_mean=float(np.mean(birth_fid)) if birth_fid else float("nan"),
        birth_fidelities=np.array(birth_fid),
        birth_entanglement=np.array(birth_ent),
        window_durations=durations_arr,
        window_rel_t=np.concatenate(rel_t) if rel_t else np.empty(0),
        window_pop_plus_i=np.concatenate(win_pop) if win_pop else np.empty(0),
        window_entanglement=np.concatenate(win_ent) if win_ent else np.empty(0),
    )


# ---------------------------------------------------------------------------
# CSV output


def _fmt(x) -> str:
    return format(float(x), ".9g")


def _write_traj_csv(path, times, norms, pops, ent, jl, jr, dxi) -> None:
    lines = [TRAJ_HEADER]
    for i in range(len(times)):
        lines.append(
            ",".join(
                (
                    _fmt(times[i]),
                    _fmt(norms[i]),
                    _fmt(pops[i, 0]),
                    _fmt(pops[i, 1]),
                    _fmt(pops[i, 2]),
                    _fmt(pops[i, 3]),
                    _fmt(ent[i]),
                    str(int(jl[i])),
                    str(int(jr[i])),
                    _fmt(dxi[i]),
                )
            )
        )
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def emit_csv(obj, path) -> str:
    """Write a TrajectoryRecord or EnsembleStats to ``path`` in its
    canonical CSV schema (floats as %.9g; byte-identical for identical
    inputs)."""
    if isinstance(obj, TrajectoryRecord):
        _write_traj_csv(
            path,
            obj.t_grid,
            obj.norms,
            obj.populations,
            obj.entanglement,
            obj.jump_counts_left,
            obj.jump_counts_right,
            obj.dxi_window,
        )
    elif isinstance(obj, EnsembleStats):
        lines = [STATS_HEADER]
        for i in range(len(obj.times)):
            cells = [_fmt(obj.times[i])]
            for c in range(4):
                cells.append(_fmt(obj.mean_populations[i, c]))
                cells.append(_fmt(obj.se_populations[i, c]))
            cells.append(_fmt(obj.mean_entanglement[i]))
            cells.append(_fmt(obj.se_entanglement[i]))
            lines.append(",".join(cells))
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("\n".join(lines) + "\n")
    else:
        raise TypeError(f"cannot emit CSV for {type(obj).__name__}")
    return str(path)


def write_me_csv(times, states, path) -> str:
    """Master-equation history in the trajectory schema: unit norm, zero
    click counts and noise, entanglement of formation."""
    _write_traj_csv(
        path,
        times,
        np.ones(len(times)),
        populations_batch(states),
        eof_batch(states),
        np.zeros(len(times), dtype=np.int64),
        np.zeros(len(times), dtype=np.int64),
        np.zeros(len(times)),
    )
    return str(path)


def write_matrix_csv(rho, path) -> str:
    """Density matrix as i,j,re,im rows."""
    lines = ["i,j,re,im"]
    for i in range(4):
        for j in range(4):
            lines.append(f"{i},{j},{_fmt(rho[i, j].real)},{_fmt(rho[i, j].imag)}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    return str(path)


def write_g2_csv(taus, values, path) -> str:
    lines = ["tau,g2"]
    for t, v in zip(taus, values):
        lines.append(f"{_fmt(t)},{_fmt(v)}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    return str(path)


# ---------------------------------------------------------------------------
# drivers


def run_ensemble(config: RunConfig, *, write_outputs: bool = True) -> EnsembleStats:
    """Integrate a stochastic ensemble and reduce it.

    When ``write_outputs`` is set, writes ``stats.csv`` plus
    ``traj_NNNN.csv`` for the first min(n_traj, 8) trajectories into
    ``config.out`` (created if needed), and ``ensemble.svg`` when
    ``emit_svg`` is on.
    """
    batches = _run_batches(config)
    stats = _reduce(config, batches)
    if write_outputs:
        os.makedirs(config.out, exist_ok=True)
        emit_csv(stats, os.path.join(config.out, "stats.csv"))
        first = batches[0]
        for row in range(min(config.n_traj, 8)):
            _write_traj_csv(
                os.path.join(config.out, f"traj_{row:04d}.csv"),
                first.times,
                first.norms[row],
                first.populations[row],
                first.entanglement[row],
                first.jump_counts_left[row],
                first.jump_counts_right[row],
                first.dxi_window[row],
            )
        if config.emit_svg:
            from .charts import render_series

            render_series(
                os.path.join(config.out, "ensemble.svg"),
                f"{config.engine} ensemble, n={config.n_traj}",
                stats.times,
                [
                    ("pop |ee>", stats.mean_populations[:, 0]),
                    ("pop |+i>", stats.mean_populations[:, 1]),
                    ("pop |-i>", stats.mean_populations[:, 2]),
                    ("pop |gg>", stats.mean_populations[:, 3]),
                    ("entanglement", stats.mean_entanglement),
                ],
            )
    return stats


def consistency_check(config: RunConfig, *, atol: float = CONSISTENCY_ATOL) -> ConsistencyReport:
    """Compare the ensemble-mean density matrix against the deterministic
    master equation on the same time grid, entry by entry."""
    if config.engine not in _STOCHASTIC:
        raise ConfigError(f"engine {config.engine!r} has no ensemble to check")
    if config.n_traj < 2:
        raise ConfigError("consistency check needs n_traj >= 2")
    batches = _run_batches(config)
    n = config.n_traj

    rho_sum = np.zeros_like(batches[0].moment_sum)
    sq_re = np.zeros_like(batches[0].moment_sq_re)
    sq_im = np.zeros_like(batches[0].moment_sq_im)
    for br in batches:
        rho_sum += br.moment_sum
        sq_re += br.moment_sq_re
        sq_im += br.moment_sq_im
    mean = rho_sum / n
    var_re = np.maximum(sq_re - n * mean.real**2, 0.0) / (n - 1)
    var_im = np.maximum(sq_im - n * mean.imag**2, 0.0) / (n - 1)
    se_re = np.sqrt(var_re / n)
    se_im = np.sqrt(var_im / n)

    ops = build_operators(config.model_params())
    times, me_states = integrate_me(
        ops, _initial_mixed(), config.t_end, config.dt, sample_stride=config.sample_stride
    )
    if times.shape != batches[0].times.shape or not np.allclose(times, batches[0].times):
        raise RuntimeError("ensemble and master-equation grids disagree")

    dev_re = np.abs(mean.real - me_states.real)
    dev_im = np.abs(mean.imag - me_states.imag)
    ratio_re = dev_re / (se_re + atol / 3.0)
    ratio_im = dev_im / (se_im + atol / 3.0)
    stacked = np.stack([ratio_re, ratio_im])
    flat = int(np.argmax(stacked))
    part, t_i, i, j = np.unravel_index(flat, stacked.shape)
    max_ratio = float(stacked[part, t_i, i, j])
    return ConsistencyReport(
        engine=config.engine,
        n_traj=n,
        passed=bool(max_ratio <= 3.0),
        max_ratio=max_ratio,
        max_deviation=float((dev_re if part == 0 else dev_im)[t_i, i, j]),
        se_at_max=float((se_re if part == 0 else se_im)[t_i, i, j]),
        time_at_max=float(times[t_i]),
        entry_at_max=(int(i), int(j), "re" if part == 0 else "im"),
        atol=atol,
    )
