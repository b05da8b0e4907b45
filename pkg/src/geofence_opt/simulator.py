"""Agent-based commuting simulation with per-step perimeter maintenance.

Each round samples a study window, agent starting positions, walk
parameters, a privacy constraint, and a set of surveillance sites. Six
perimeters per site are tracked across the walk:

* fixed:     radius drawn once from Uniform(0.5, window hypotenuse)
* window:    recomputed each step from the in-window agent count
* focal:     recomputed each step from the smoothed density at the site
* focal_t0:  the focal radius frozen at step zero
* lambda:    searched each step against the full density snapshot
* lambda_t0: the lambda radius frozen at step zero

Agents perform biased random walks: an isotropic Gaussian step plus unit
vector pulls toward nearby agents and the nearest target, with the total
step capped and reflecting window boundaries. Walk parameters follow the
sampled round configuration; paused agents hold position and keep emitting
one geolocation tag per step.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import ConstraintUnreachableError, DegenerateDensityError
from .estimators import radius_focal, radius_lambda, radius_window
from .geometry import Point, StudyWindow
from .point_process import (
    GrfConfig,
    IntensityField,
    generate_grf_field,
    grid_for_window,
    sample_poisson_homogeneous,
    sample_poisson_inhomogeneous,
)

PERIMETER_TYPES = ("fixed", "window", "focal", "focal_t0", "lambda", "lambda_t0")

CSV_COLUMNS = (
    "round_id",
    "seed",
    "site_x",
    "site_y",
    "perimeter_type",
    "k",
    "n",
    "mean_abs_dev",
    "mean_surveillance_fraction",
    "expected_fraction",
)

AGENT_CSV_COLUMNS = (
    "round_id",
    "seed",
    "agent_id",
    "site_x",
    "site_y",
    "perimeter_type",
    "surveillance_fraction",
    "expected_fraction",
)


@dataclass(frozen=True, eq=False)
class SimulationConfig:
    """One sampled round: window, walk parameters, agents, constraint, sites."""

    window: StudyWindow
    n_steps: int
    start_mode: str  # "uniform" or "grf"
    start_lambda: Optional[float]
    grf: Optional[GrfConfig]
    start_positions: np.ndarray  # (n, 2)
    targets: np.ndarray  # (m, 2)
    interaction_radius: float
    agent_interaction_strength: float
    target_interaction_strength: float
    pause_probability: float
    max_paused_steps: int
    k: float
    sites: np.ndarray  # (n_sites, 2)
    seed: int
    snapshot_grid_cols: int = 64
    bandwidth_frac: float = 0.05
    step_sigma: Optional[float] = None

    @property
    def n_agents(self) -> int:
        return self.start_positions.shape[0]

    @property
    def n_sites(self) -> int:
        return self.sites.shape[0]

    def sigma(self) -> float:
        return self.step_sigma if self.step_sigma is not None else 0.01 * self.window.hypotenuse()


def sample_config(
    rng: np.random.Generator,
    *,
    n_sites: int = 30,
    max_steps: Optional[int] = None,
    max_agents: Optional[int] = None,
    snapshot_grid_cols: int = 64,
    grf_grid_cols: int = 32,
    seed: int = 0,
) -> SimulationConfig:
    """Draw one round configuration.

    Distributions: window maxima Uniform(10, 35) with minima at zero; steps
    integer Uniform(1, 1000); starting positions from a homogeneous Poisson
    process (density Uniform(0.01, 1)) or an exponentiated Gaussian field
    (psill Uniform(0.25, 2.5), range Uniform(2, hypotenuse), nugget
    Uniform(0, 0.25), log-mean Uniform(-2.5, 1)); interaction radius
    Uniform(0, 5); both interaction strengths Uniform(-1, 1); pause
    probability Uniform(0, 0.5); pause cap Poisson(0.25 * steps); k integer
    Uniform over {1..agent count}; sites uniform over the window.

    `max_steps` and `max_agents` are desk-scale caps: steps truncate, and
    oversize patterns are uniformly thinned (which preserves the Poisson
    character of the starts).
    """
    x_max = rng.uniform(10.0, 35.0)
    y_max = rng.uniform(10.0, 35.0)
    window = StudyWindow(0.0, 0.0, x_max, y_max)

    n_steps = int(rng.integers(1, 1001))
    if max_steps is not None:
        n_steps = min(n_steps, int(max_steps))

    if rng.random() < 0.5:
        start_mode = "uniform"
        start_lambda = float(rng.uniform(0.01, 1.0))
        grf = None
    else:
        start_mode = "grf"
        start_lambda = None
        grf = GrfConfig(
            psill=float(rng.uniform(0.25, 2.5)),
            range=float(rng.uniform(2.0, window.hypotenuse())),
            nugget=float(rng.uniform(0.0, 0.25)),
            beta=float(rng.uniform(-2.5, 1.0)),
        )

    positions = np.empty((0, 2))
    for _ in range(50):
        if start_mode == "uniform":
            pattern = sample_poisson_homogeneous(window, start_lambda, rng)
        else:
            n_rows, _ = grid_for_window(window, grf_grid_cols)
            field = generate_grf_field(window, (grf_grid_cols, n_rows), grf, rng)
            pattern = sample_poisson_inhomogeneous(field, rng)
        if len(pattern) > 0:
            positions = pattern.points
            break
    else:
        raise RuntimeError("failed to draw a non-empty starting pattern in 50 attempts")
    if max_agents is not None and positions.shape[0] > max_agents:
        keep = np.sort(rng.choice(positions.shape[0], size=int(max_agents), replace=False))
        positions = positions[keep]

    n_targets = int(rng.integers(0, 6))
    targets = rng.uniform((0.0, 0.0), (x_max, y_max), size=(n_targets, 2))

    interaction_radius = float(rng.uniform(0.0, 5.0))
    agent_strength = float(rng.uniform(-1.0, 1.0))
    target_strength = float(rng.uniform(-1.0, 1.0))
    pause_probability = float(rng.uniform(0.0, 0.5))
    max_paused_steps = int(rng.poisson(0.25 * n_steps))

    k = float(rng.integers(1, positions.shape[0] + 1))
    sites = rng.uniform((0.0, 0.0), (x_max, y_max), size=(int(n_sites), 2))

    return SimulationConfig(
        window=window,
        n_steps=n_steps,
        start_mode=start_mode,
        start_lambda=start_lambda,
        grf=grf,
        start_positions=positions,
        targets=targets,
        interaction_radius=interaction_radius,
        agent_interaction_strength=agent_strength,
        target_interaction_strength=target_strength,
        pause_probability=pause_probability,
        max_paused_steps=max_paused_steps,
        k=k,
        sites=sites,
        seed=int(seed),
        snapshot_grid_cols=snapshot_grid_cols,
    )


@dataclass
class WalkState:
    positions: np.ndarray  # (n, 2)
    paused_until: np.ndarray  # (n,) int; agent i holds position while t < paused_until[i]
    t: int


def _reflect(v: np.ndarray, lo: float, hi: float) -> np.ndarray:
    span = hi - lo
    u = np.mod(v - lo, 2.0 * span)
    u = np.where(u > span, 2.0 * span - u, u)
    return lo + u


def step_agents(state: WalkState, cfg: SimulationConfig, rng: np.random.Generator) -> WalkState:
    """Advance every agent by one step.

    Pause triggers are drawn first (paused agents hold position for a
    Uniform{1..max_paused_steps} number of steps), then active agents move
    by a Gaussian step plus interaction bias, capped at three standard
    deviations and reflected at the window boundary.
    """
    n = state.positions.shape[0]
    t = state.t
    paused_until = state.paused_until.copy()
    movable = paused_until <= t

    if cfg.pause_probability > 0.0 and cfg.max_paused_steps >= 1:
        trigger = rng.random(n) < cfg.pause_probability
        durations = rng.integers(1, cfg.max_paused_steps + 1, size=n)
        newly = movable & trigger
        paused_until[newly] = t + durations[newly]
        movable &= ~trigger

    sigma = cfg.sigma()
    step = rng.normal(0.0, sigma, size=(n, 2))
    bx, by = kernels.walk_bias(
        np.ascontiguousarray(state.positions[:, 0]),
        np.ascontiguousarray(state.positions[:, 1]),
        np.ascontiguousarray(cfg.targets[:, 0]),
        np.ascontiguousarray(cfg.targets[:, 1]),
        cfg.interaction_radius,
        cfg.agent_interaction_strength,
        cfg.target_interaction_strength,
    )
    step[:, 0] += bx
    step[:, 1] += by
    norms = np.hypot(step[:, 0], step[:, 1])
    cap = 3.0 * sigma
    over = norms > cap
    step[over] *= (cap / norms[over])[:, None]

    positions = state.positions.copy()
    positions[movable] += step[movable]
    w = cfg.window
    positions[:, 0] = _reflect(positions[:, 0], w.x_min, w.x_max)
    positions[:, 1] = _reflect(positions[:, 1], w.y_min, w.y_max)
    return WalkState(positions=positions, paused_until=paused_until, t=t + 1)


@dataclass(frozen=True)
class AgentTrajectory:
    """One agent's full tag sequence: the start plus one entry per step."""

    agent_id: int
    positions: np.ndarray  # (n_steps + 1, 2)
    paused_until: int = 0


def estimate_density_snapshot(
    positions: np.ndarray,
    window: StudyWindow,
    bandwidth: Optional[float] = None,
    n_cols: int = 64,
) -> IntensityField:
    """Gaussian kernel density of the current agent positions.

    Normalized so the raster mass equals the agent count. Bandwidth defaults
    to 5 percent of the window hypotenuse.
    """
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    n = positions.shape[0]
    if n < 1:
        raise ValueError("density snapshot needs at least one agent")
    h = 0.05 * window.hypotenuse() if bandwidth is None else float(bandwidth)
    n_rows, cell = grid_for_window(window, n_cols)
    gx = window.x_min + (np.arange(n_cols) + 0.5) * cell
    gy = window.y_min + (np.arange(n_rows) + 0.5) * cell
    raw = kernels.kde_grid(
        np.ascontiguousarray(positions[:, 0]), np.ascontiguousarray(positions[:, 1]), gx, gy, h
    )
    mass = raw.sum() * cell * cell
    values = raw * (n / mass)
    return IntensityField(window, n_cols, n_rows, cell, values)


@dataclass
class PerimeterRoster:
    """Per-site radii for the six perimeter types, in PERIMETER_TYPES order."""

    sites: np.ndarray  # (s, 2)
    radii: np.ndarray  # (s, 6)
    carried_forward: np.ndarray  # (s, 6) count of steps a radius had to be held

    def copy(self) -> "PerimeterRoster":
        return PerimeterRoster(self.sites, self.radii.copy(), self.carried_forward.copy())


_FIXED, _WINDOW, _FOCAL, _FOCAL_T0, _LAMBDA, _LAMBDA_T0 = range(6)


def build_roster(
    cfg: SimulationConfig, snapshot: IntensityField, rng: np.random.Generator
) -> PerimeterRoster:
    """Initial roster at step zero; frozen variants copy the live estimates."""
    s = cfg.n_sites
    radii = np.empty((s, 6))
    carried = np.zeros((s, 6), dtype=np.int64)
    radii[:, _FIXED] = rng.uniform(0.5, cfg.window.hypotenuse(), size=s)
    r_window = radius_window(cfg.window.area(), cfg.n_agents, cfg.k).r
    radii[:, _WINDOW] = r_window
    for i in range(s):
        site = Point(cfg.sites[i, 0], cfg.sites[i, 1])
        lam = snapshot.value_at(site.x, site.y)
        if lam > 0:
            r_focal = radius_focal(lam, cfg.k).r
        else:
            r_focal = r_window
            carried[i, _FOCAL] += 1
        radii[i, _FOCAL] = r_focal
        try:
            r_lambda = radius_lambda(snapshot, site, cfg.k).r
        except (DegenerateDensityError, ConstraintUnreachableError):
            r_lambda = r_focal
            carried[i, _LAMBDA] += 1
        radii[i, _LAMBDA] = r_lambda
    radii[:, _FOCAL_T0] = radii[:, _FOCAL]
    radii[:, _LAMBDA_T0] = radii[:, _LAMBDA]
    return PerimeterRoster(sites=cfg.sites, radii=radii, carried_forward=carried)


def maintain_perimeters(
    roster: PerimeterRoster,
    positions: np.ndarray,
    cfg: SimulationConfig,
    field_snapshot: IntensityField,
) -> PerimeterRoster:
    """Recompute the adaptive radii for the current step.

    Window uses the in-window agent count, focal the snapshot density at
    each site, lambda the full snapshot search. A degenerate density or an
    unreachable constraint leaves the previous radius in place and bumps
    the carried-forward count. Fixed and frozen columns never change.
    """
    out = roster.copy()
    w = cfg.window
    in_window = (
        (positions[:, 0] >= w.x_min)
        & (positions[:, 0] <= w.x_max)
        & (positions[:, 1] >= w.y_min)
        & (positions[:, 1] <= w.y_max)
    )
    n_t = int(in_window.sum())
    if n_t >= 1:
        out.radii[:, _WINDOW] = radius_window(w.area(), n_t, cfg.k).r
    else:
        out.carried_forward[:, _WINDOW] += 1
    for i in range(roster.sites.shape[0]):
        site = Point(roster.sites[i, 0], roster.sites[i, 1])
        lam = field_snapshot.value_at(site.x, site.y)
        if lam > 0:
            out.radii[i, _FOCAL] = radius_focal(lam, cfg.k).r
        else:
            out.carried_forward[i, _FOCAL] += 1
        try:
            out.radii[i, _LAMBDA] = radius_lambda(field_snapshot, site, cfg.k).r
        except (DegenerateDensityError, ConstraintUnreachableError):
            out.carried_forward[i, _LAMBDA] += 1
    return out


@dataclass(frozen=True, eq=False)
class RoundMetrics:
    """Per-(site, perimeter) deviation and surveillance summaries."""

    k: float
    n_agents: int
    n_steps: int
    mean_abs_dev: np.ndarray  # (s, 6): mean over steps of |captured - k|
    mean_fraction: np.ndarray  # (s, 6): mean over agents of in-perimeter step share
    mean_abs_fraction_error: np.ndarray  # (s, 6): mean over agents of |share - k/n|
    agent_fractions: Optional[np.ndarray] = None  # (s, 6, n)

    @property
    def expected_fraction(self) -> float:
        return self.k / self.n_agents


def record_metrics(
    trajectories: np.ndarray,
    sites: np.ndarray,
    radii_by_step: np.ndarray,
    k: float,
    collect_agent_fractions: bool = False,
) -> RoundMetrics:
    """Fold trajectories and the per-step radii into round metrics.

    trajectories is (n_steps + 1, n, 2) and radii_by_step is
    (n_steps + 1, s, 6); every time point, including step zero, counts one
    geolocation tag per agent.
    """
    t1, n, _ = trajectories.shape
    s = sites.shape[0]
    mean_abs_dev = np.empty((s, 6))
    mean_fraction = np.empty((s, 6))
    mean_abs_err = np.empty((s, 6))
    fractions = np.empty((s, 6, n)) if collect_agent_fractions else None
    expected = k / n
    for i in range(s):
        d2 = ((trajectories - sites[i]) ** 2).sum(axis=2)  # (t1, n)
        for j in range(6):
            rj = radii_by_step[:, i, j]
            inside = d2 <= (rj * rj)[:, None]
            captured = inside.sum(axis=1)
            mean_abs_dev[i, j] = np.abs(captured - k).mean()
            frac = inside.mean(axis=0)
            mean_fraction[i, j] = frac.mean()
            mean_abs_err[i, j] = np.abs(frac - expected).mean()
            if fractions is not None:
                fractions[i, j] = frac
    return RoundMetrics(
        k=k,
        n_agents=n,
        n_steps=t1 - 1,
        mean_abs_dev=mean_abs_dev,
        mean_fraction=mean_fraction,
        mean_abs_fraction_error=mean_abs_err,
        agent_fractions=fractions,
    )


@dataclass(frozen=True, eq=False)
class RoundResult:
    config: SimulationConfig
    metrics: RoundMetrics
    radii_by_step: np.ndarray  # (n_steps + 1, s, 6)
    trajectories: np.ndarray  # (n_steps + 1, n, 2)


def run_round(
    cfg: SimulationConfig, rng: np.random.Generator, collect_agent_fractions: bool = False
) -> RoundResult:
    """Walk one sampled round and fold the tallies into metrics."""
    t_total = cfg.n_steps
    n = cfg.n_agents
    s = cfg.n_sites
    traj = np.empty((t_total + 1, n, 2))
    traj[0] = cfg.start_positions
    radii = np.empty((t_total + 1, s, 6))

    snapshot = estimate_density_snapshot(
        cfg.start_positions, cfg.window, n_cols=cfg.snapshot_grid_cols
    )
    roster = build_roster(cfg, snapshot, rng)
    radii[0] = roster.radii

    state = WalkState(
        positions=cfg.start_positions.copy(),
        paused_until=np.zeros(n, dtype=np.int64),
        t=0,
    )
    for t in range(1, t_total + 1):
        state = step_agents(state, cfg, rng)
        traj[t] = state.positions
        snapshot = estimate_density_snapshot(
            state.positions, cfg.window, n_cols=cfg.snapshot_grid_cols
        )
        roster = maintain_perimeters(roster, state.positions, cfg, snapshot)
        radii[t] = roster.radii

    metrics = record_metrics(traj, cfg.sites, radii, cfg.k, collect_agent_fractions)
    return RoundResult(config=cfg, metrics=metrics, radii_by_step=radii, trajectories=traj)


def _round_seed(master_seed: int, round_id: int) -> int:
    return int(np.random.SeedSequence([master_seed, round_id]).generate_state(1)[0])


def run_round_from_seed(
    round_seed: int,
    *,
    n_sites: int = 30,
    max_steps: Optional[int] = None,
    max_agents: Optional[int] = None,
    snapshot_grid_cols: int = 64,
    collect_agent_fractions: bool = False,
) -> RoundResult:
    """Sample a configuration and run it, all from one integer seed."""
    children = np.random.SeedSequence(round_seed).spawn(2)
    cfg_rng = np.random.default_rng(children[0])
    walk_rng = np.random.default_rng(children[1])
    cfg = sample_config(
        cfg_rng,
        n_sites=n_sites,
        max_steps=max_steps,
        max_agents=max_agents,
        snapshot_grid_cols=snapshot_grid_cols,
        seed=round_seed,
    )
    return run_round(cfg, walk_rng, collect_agent_fractions)


def rows_from_result(round_id: int, result: RoundResult) -> list[dict]:
    m = result.metrics
    cfg = result.config
    rows = []
    for i in range(cfg.n_sites):
        for j, name in enumerate(PERIMETER_TYPES):
            rows.append(
                {
                    "round_id": round_id,
                    "seed": cfg.seed,
                    "site_x": float(cfg.sites[i, 0]),
                    "site_y": float(cfg.sites[i, 1]),
                    "perimeter_type": name,
                    "k": m.k,
                    "n": m.n_agents,
                    "mean_abs_dev": float(m.mean_abs_dev[i, j]),
                    "mean_surveillance_fraction": float(m.mean_fraction[i, j]),
                    "expected_fraction": m.expected_fraction,
                }
            )
    return rows


def agent_rows_from_result(round_id: int, result: RoundResult) -> list[dict]:
    m = result.metrics
    if m.agent_fractions is None:
        raise ValueError("round was run without collect_agent_fractions")
    cfg = result.config
    rows = []
    for i in range(cfg.n_sites):
        for j, name in enumerate(PERIMETER_TYPES):
            for a in range(m.n_agents):
                rows.append(
                    {
                        "round_id": round_id,
                        "seed": cfg.seed,
                        "agent_id": a,
                        "site_x": float(cfg.sites[i, 0]),
                        "site_y": float(cfg.sites[i, 1]),
                        "perimeter_type": name,
                        "surveillance_fraction": float(m.agent_fractions[i, j, a]),
                        "expected_fraction": m.expected_fraction,
                    }
                )
    return rows


def _run_one(args: tuple) -> tuple[list[dict], list[dict]]:
    round_id, round_seed, knobs, per_agent = args
    result = run_round_from_seed(round_seed, collect_agent_fractions=per_agent, **knobs)
    rows = rows_from_result(round_id, result)
    agent_rows = agent_rows_from_result(round_id, result) if per_agent else []
    return rows, agent_rows


def run_rounds(
    n_rounds: int,
    seed: int,
    *,
    n_sites: int = 30,
    max_steps: Optional[int] = None,
    max_agents: Optional[int] = None,
    snapshot_grid_cols: int = 64,
    per_agent: bool = False,
    threads: int = 1,
) -> tuple[list[dict], list[dict]]:
    """Run independent rounds under per-round derived seeds.

    Rounds parallelize across processes when threads > 1; output ordering is
    by round id either way, so results do not depend on scheduling.
    """
    knobs = {
        "n_sites": n_sites,
        "max_steps": max_steps,
        "max_agents": max_agents,
        "snapshot_grid_cols": snapshot_grid_cols,
    }
    tasks = [(i, _round_seed(seed, i), knobs, per_agent) for i in range(n_rounds)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outputs = list(pool.map(_run_one, tasks))
    else:
        outputs = [_run_one(t) for t in tasks]
    rows = [r for out in outputs for r in out[0]]
    agent_rows = [r for out in outputs for r in out[1]]
    return rows, agent_rows


def write_rows_csv(rows: list[dict], path, columns: tuple = CSV_COLUMNS) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_csv_cell(row[c]) for c in columns])


def _csv_cell(v):
    if isinstance(v, float):
        return repr(v)
    return v


def summarize_rows(rows: list[dict]) -> dict[str, dict[str, float]]:
    """Mean deviation and surveillance-fraction error per perimeter type."""
    summary = {}
    for name in PERIMETER_TYPES:
        sub = [r for r in rows if r["perimeter_type"] == name]
        if not sub:
            continue
        dev = float(np.mean([r["mean_abs_dev"] for r in sub]))
        frac_err = float(
            np.mean(
                [abs(r["mean_surveillance_fraction"] - r["expected_fraction"]) for r in sub]
            )
        )
        summary[name] = {"mean_abs_dev": dev, "mean_fraction_error": frac_err}
    return summary
