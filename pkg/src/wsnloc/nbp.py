"""Particle-based belief propagation for node position estimation.

Beliefs and messages are weighted 2D sample sets smoothed by a shared
Gaussian kernel whose covariance follows the M**(-1/3) * sample-covariance
rule. A message from t to u projects each belief sample onto a ring of
radius d_tu + v (v a fresh Gaussian range-noise draw) at a uniform angle,
carrying the measured distance geometrically rather than as a weight.
Sample weights combine the link potential with the sender's belief weight
divided by the previous-iteration reverse message density.

The schedule is synchronous: every directed message of iteration n is
built from iteration n-1 beliefs, then all non-anchor beliefs are rebuilt
by mixture importance sampling (proposal: uniform mixture of the incoming
message mixtures; target: product of incoming message densities times the
flat in-field prior). Every draw comes from a stream keyed by
(seed, purpose, iteration, node ids), so results are reproducible under
any execution order or worker count.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import mixture_density, weighted_mean_cov
from ._seeds import TAG_BELIEF, TAG_INIT, TAG_MESSAGE, derive, stream
from .energy import STEP_TABLE, MessageTrace
from .field import FieldScenario, MeasurementModel, RangeGraph, connectivity_prob

__all__ = [
    "NbpParams", "ParticleBelief", "ParticleMessage", "LocalizationResult",
    "NbpNumericalError", "init_beliefs", "pairwise_potential", "draw_message",
    "kde_eval", "update_belief", "estimate_position", "run_nbp", "mean_error",
    "write_result_csv", "SIGMA_EVAL_FLOOR", "REVERSE_DENSITY_FLOOR",
]

log = logging.getLogger(__name__)

# Potential evaluation needs a positive sigma; noiseless models fall back here.
SIGMA_EVAL_FLOOR = 0.5
# Absolute floor for the reverse-message density in the weight quotient.
REVERSE_DENSITY_FLOOR = 1e-12


class NbpNumericalError(RuntimeError):
    """Raised when a particle set degenerates (all weights zero/non-finite)."""

    def __init__(self, node: int, detail: str):
        super().__init__(f"node {node}: {detail}")
        self.node = node


@dataclass(frozen=True)
class NbpParams:
    particles_m: int = 100
    max_iterations: int = 10
    convergence_shift: float = 0.1
    weight_floor_eps: float = 1e-8
    estimator: str = "map"  # or "mean"

    def __post_init__(self):
        if self.particles_m < 10:
            raise ValueError("particles_m must be >= 10")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.convergence_shift <= 0:
            raise ValueError("convergence_shift must be positive")
        if not 0 < self.weight_floor_eps < 1:
            raise ValueError("weight_floor_eps must be in (0, 1)")
        if self.estimator not in ("map", "mean"):
            raise ValueError("estimator must be 'map' or 'mean'")


@dataclass
class ParticleBelief:
    node: int
    samples: np.ndarray   # (M, 2)
    weights: np.ndarray   # (M,), sums to 1
    bandwidth: np.ndarray  # (2, 2) SPD kernel covariance


@dataclass
class ParticleMessage:
    src: int
    dst: int
    samples: np.ndarray
    weights: np.ndarray
    bandwidth: np.ndarray
    noise: np.ndarray    # realized per-sample ring-radius offset from d_tu
    source: np.ndarray = None  # belief draws the rings were projected from


@dataclass
class LocalizationResult:
    estimates: dict
    per_node_error: dict
    iterations_run: int
    trace: MessageTrace
    disconnected: tuple = ()
    mean_error_history: list = field(default_factory=list)


def _bandwidth(samples: np.ndarray, weights: np.ndarray, radius: float) -> np.ndarray:
    """Kernel covariance: M**(-1/3) times the weighted sample covariance.

    Degenerate sets (co-located or collinear samples) get a small isotropic
    ridge scaled by the communication radius so the kernel stays invertible.
    """
    m = samples.shape[0]
    _, cov = weighted_mean_cov(samples, weights)
    bw = m ** (-1.0 / 3.0) * cov
    tr = bw[0, 0] + bw[1, 1]
    det = bw[0, 0] * bw[1, 1] - bw[0, 1] * bw[0, 1]
    min_eig = tr / 2.0 - math.sqrt(max((tr / 2.0) ** 2 - det, 0.0))
    if not np.all(np.isfinite(bw)) or min_eig <= 1e-9 * radius * radius:
        bw = bw + 1e-6 * radius * radius * np.eye(2)
    return bw


def init_beliefs(scenario: FieldScenario, params: NbpParams, seed: int) -> dict:
    """Iteration-0 beliefs: anchor deltas, uniform field samples elsewhere."""
    m = params.particles_m
    beliefs = {}
    for node in scenario.nodes:
        if node.is_anchor:
            samples = np.tile(np.asarray(node.true_pos, dtype=np.float64), (m, 1))
        else:
            rng = stream(seed, TAG_INIT, node.id)
            samples = rng.uniform((0.0, 0.0), (scenario.width, scenario.height), size=(m, 2))
        weights = np.full(m, 1.0 / m)
        beliefs[node.id] = ParticleBelief(node.id, samples, weights,
                                          _bandwidth(samples, weights, scenario.radius_r))
    return beliefs


def pairwise_potential(x_t, x_u, d_tu: float, model: MeasurementModel,
                       radius: float) -> float:
    """Range likelihood times link potential for a candidate pair of positions."""
    if d_tu < 0:
        raise ValueError("measured distance must be >= 0")
    sigma = model.noise_sigma if model.noise_sigma > 0 else SIGMA_EVAL_FLOOR
    dist = math.hypot(x_t[0] - x_u[0], x_t[1] - x_u[1])
    return math.exp(-((dist - d_tu) ** 2) / (2.0 * sigma * sigma)) * \
        connectivity_prob(x_t, x_u, radius)


def ring_project(samples: np.ndarray, d_tu: float, noise: np.ndarray,
                 theta: np.ndarray):
    """Project each sample onto a ring of radius d_tu + noise at angle theta.

    The offset component order is [sin, cos]. Radii are clamped at zero and
    the realized offsets (radius - d_tu) are returned, so the distance of
    each projected point from its source is exactly d_tu + the returned
    noise value.
    """
    radii = np.maximum(d_tu + noise, 0.0)
    offsets = radii[:, None] * np.column_stack([np.sin(theta), np.cos(theta)])
    return samples + offsets, radii - d_tu


def draw_message(belief: ParticleBelief, d_tu: float, model: MeasurementModel,
                 reverse_msg, radius: float, seed: int, dst: int = -1) -> ParticleMessage:
    """Outgoing message built from a belief and one measured range.

    Source points are drawn from the belief (multinomial over its weights),
    so the rings are centered where the belief's mass actually sits; the
    drawn points carry uniform weight. Each is projected onto a ring of
    radius d_tu + fresh range noise, weighted by the link potential over
    the reverse-message density.
    """
    m = belief.samples.shape[0]
    wsum = float(belief.weights.sum())
    if not np.isfinite(wsum) or wsum <= 0:
        raise NbpNumericalError(belief.node, "degenerate belief weights")
    rng = stream(seed, TAG_MESSAGE)
    cum = np.cumsum(belief.weights)
    picks = np.minimum(np.searchsorted(cum, rng.random(m) * cum[-1], side="right"), m - 1)
    source = belief.samples[picks]
    theta = rng.uniform(0.0, 2.0 * np.pi, m)
    v = rng.normal(0.0, model.noise_sigma, m) if model.noise_sigma > 0 else np.zeros(m)
    samples, noise = ring_project(source, d_tu, v, theta)
    radii = d_tu + noise
    # Link potential between each source point and its projection; their
    # separation is the ring radius by construction.
    link = np.exp(-(radii * radii) / (2.0 * radius * radius))
    if reverse_msg is not None:
        rev = mixture_density(source, reverse_msg.samples,
                              reverse_msg.weights, reverse_msg.bandwidth)
    else:
        rev = np.ones(m)
    weights = link * (1.0 / m) / np.maximum(rev, REVERSE_DENSITY_FLOOR)
    total = float(weights.sum())
    if not np.isfinite(total) or total <= 0:
        raise NbpNumericalError(belief.node, "message weights degenerated")
    weights = weights / total
    return ParticleMessage(src=belief.node, dst=dst, samples=samples, weights=weights,
                           bandwidth=_bandwidth(samples, weights, radius), noise=noise,
                           source=source)


def kde_eval(msg_or_belief, point) -> float:
    """Gaussian-mixture density of a particle set at a point (or (P,2) points)."""
    pts = np.atleast_2d(np.asarray(point, dtype=np.float64))
    dens = mixture_density(pts, msg_or_belief.samples, msg_or_belief.weights,
                           msg_or_belief.bandwidth)
    return dens if np.ndim(point) > 1 else float(dens[0])


def update_belief(node: int, prior: ParticleBelief, incoming, params: NbpParams,
                  seed: int, *, width: float, height: float, radius: float) -> ParticleBelief:
    """Mixture importance sampling over the incoming messages.

    Proposal: pick a message uniformly, then draw from its smoothed mixture.
    Target: product of all incoming message densities times the flat
    in-field prior (nodes are known to lie inside the field, so samples
    outside it are weighted down to the floor).
    """
    if not incoming:
        raise ValueError(f"node {node}: need at least one incoming message")
    if np.ptp(prior.samples, axis=0).max() == 0.0:
        raise ValueError(f"node {node}: anchor beliefs are fixed and never update")
    m = params.particles_m
    k = len(incoming)
    rng = stream(seed, TAG_BELIEF)
    choice = rng.integers(0, k, size=m)
    samples = np.empty((m, 2))
    for j, msg in enumerate(incoming):
        idx = np.nonzero(choice == j)[0]
        if idx.size == 0:
            continue
        cum = np.cumsum(msg.weights)
        comp = np.minimum(np.searchsorted(cum, rng.random(idx.size) * cum[-1],
                                          side="right"), msg.weights.size - 1)
        chol = np.linalg.cholesky(msg.bandwidth)
        samples[idx] = msg.samples[comp] + rng.standard_normal((idx.size, 2)) @ chol.T
    # Beliefs live in the field padded by one communication radius.
    np.clip(samples, (-radius, -radius), (width + radius, height + radius), out=samples)

    dens = np.empty((k, m))
    for j, msg in enumerate(incoming):
        dens[j] = mixture_density(samples, msg.samples, msg.weights, msg.bandwidth)
    with np.errstate(divide="ignore"):
        log_num = np.log(dens).sum(axis=0)
        log_prop = np.log(dens.mean(axis=0))
    in_field = ((samples[:, 0] >= 0) & (samples[:, 0] <= width) &
                (samples[:, 1] >= 0) & (samples[:, 1] <= height))
    log_prior = np.where(in_field, -math.log(width * height), -np.inf)
    log_w = np.where(np.isfinite(log_prop), log_num + log_prior - log_prop, -np.inf)
    finite = np.isfinite(log_w)
    if not finite.any():
        log.warning("node %d: all importance weights degenerate; belief re-initialized", node)
        fresh = stream(seed, TAG_BELIEF, 1).uniform((0.0, 0.0), (width, height), size=(m, 2))
        weights = np.full(m, 1.0 / m)
        return ParticleBelief(node, fresh, weights, _bandwidth(fresh, weights, radius))
    weights = np.exp(log_w - log_w[finite].max())
    weights = np.maximum(weights, params.weight_floor_eps * weights.max())
    weights = weights / weights.sum()
    return ParticleBelief(node, samples, weights, _bandwidth(samples, weights, radius))


def estimate_position(belief: ParticleBelief, estimator: str = "map") -> np.ndarray:
    """Position extraction: in-sample density argmax, or the weighted mean."""
    if estimator == "mean":
        return belief.weights @ belief.samples
    dens = mixture_density(belief.samples, belief.samples, belief.weights,
                           belief.bandwidth)
    return belief.samples[int(np.argmax(dens))].copy()


def _anchor_reachable(scenario: FieldScenario, ranges: RangeGraph) -> set:
    """Nodes connected to at least one anchor through the range graph."""
    seen = set(scenario.anchor_ids)
    frontier = list(scenario.anchor_ids)
    while frontier:
        t = frontier.pop()
        for u in ranges.neighbors_of(t):
            if u not in seen:
                seen.add(u)
                frontier.append(u)
    return seen


def run_nbp(scenario: FieldScenario, ranges: RangeGraph, params: NbpParams,
            seed: int, model: MeasurementModel | None = None) -> LocalizationResult:
    """Full synchronous belief-propagation run over the range graph.

    Stops once the largest per-node estimate shift drops below
    ``convergence_shift`` or after ``max_iterations``. The returned trace
    counts one send/receive per directed edge per iteration (anchors receive
    and discard) plus the declared compute steps.
    """
    if not scenario.anchor_ids:
        raise ValueError("localization needs at least one anchor")
    model = model if model is not None else MeasurementModel()
    m = params.particles_m
    msg_steps = STEP_TABLE["nbp_message_per_particle"] * m
    anchors = set(scenario.anchor_ids)
    unknowns = list(scenario.unknown_ids)
    reachable = _anchor_reachable(scenario, ranges)
    disconnected = tuple(t for t in unknowns if t not in reachable)

    beliefs = init_beliefs(scenario, params, seed)
    priors = dict(beliefs)
    trace = MessageTrace(range(scenario.n_nodes))
    messages: dict[tuple[int, int], ParticleMessage] = {}
    estimates = {t: estimate_position(beliefs[t], params.estimator) for t in unknowns}
    truth = scenario.positions
    history = []
    iterations_run = 0

    for it in range(1, params.max_iterations + 1):
        iterations_run = it
        new_messages = {}
        for t in range(scenario.n_nodes):
            for u in ranges.neighbors_of(t):
                trace.add(t, it, sent=1, steps=msg_steps)
                trace.add(u, it, received=1)
                if u in anchors:
                    continue  # anchors discard; send/compute still charged above
                new_messages[(t, u)] = draw_message(
                    beliefs[t], ranges.distance(t, u), model, messages.get((u, t)),
                    scenario.radius_r, derive(seed, TAG_MESSAGE, it, t, u), dst=u)
        for u in unknowns:
            incoming = [new_messages[(t, u)] for t in ranges.neighbors_of(u)]
            if not incoming:
                continue
            beliefs[u] = update_belief(
                u, priors[u], incoming, params, derive(seed, TAG_BELIEF, it, u),
                width=scenario.width, height=scenario.height, radius=scenario.radius_r)
            trace.add(u, it, steps=STEP_TABLE["nbp_belief_update_per_particle_per_message"]
                      * m * len(incoming))
        messages = new_messages
        new_estimates = {t: estimate_position(beliefs[t], params.estimator)
                         for t in unknowns}
        shift = max((float(np.linalg.norm(new_estimates[t] - estimates[t]))
                     for t in unknowns), default=0.0)
        estimates = new_estimates
        if unknowns:
            history.append(float(np.mean([np.linalg.norm(estimates[t] - truth[t])
                                          for t in unknowns])))
        if shift < params.convergence_shift:
            break

    all_estimates = {t: truth[t].copy() for t in anchors}
    all_estimates.update(estimates)
    per_node_error = {t: float(np.linalg.norm(all_estimates[t] - truth[t]))
                      for t in range(scenario.n_nodes)}
    return LocalizationResult(all_estimates, per_node_error, iterations_run, trace,
                              disconnected=disconnected, mean_error_history=history)


def mean_error(result: LocalizationResult, scenario: FieldScenario) -> float:
    """Arithmetic mean of per-node error over non-anchor nodes."""
    unknowns = scenario.unknown_ids
    if not unknowns:
        raise ValueError("mean error undefined: scenario has no non-anchor nodes")
    return float(np.mean([result.per_node_error[t] for t in unknowns]))


def write_result_csv(result: LocalizationResult, scenario: FieldScenario, path) -> None:
    lines = ["node_id,true_x,true_y,est_x,est_y,error_m"]
    for node in scenario.nodes:
        est = result.estimates[node.id]
        lines.append(f"{node.id},{node.true_pos[0]:.6f},{node.true_pos[1]:.6f},"
                     f"{est[0]:.6f},{est[1]:.6f},{result.per_node_error[node.id]:.6f}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
