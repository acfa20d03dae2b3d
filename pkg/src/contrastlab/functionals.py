"""Discrete-grid laboratory for the intrinsic free-energy functionals.

Densities live on equal-weight quadrature grids (uniform circle bins,
Fibonacci sphere lattice) so every identity here is exact at grid level:
the Gibbs minimizer satisfies F(rho*) = -log Z, the functional-vs-energy
difference reduces to a KL term, and the coordinate lower bound of the
multimodal functional is met by the floor-plus-spike construction.
Entropy uses the 0*log(0) := 0 convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateWeights, InfeasibleFloor, NonPositiveDensity
from .manifold import geodesic_distance_sphere, sample_uniform_sphere


@dataclass(frozen=True)
class Grid:
    """Quadrature nodes on a compact container: points (n, d), weights (n,)."""

    kind: str
    points: np.ndarray
    weights: np.ndarray

    @property
    def mu_total(self) -> float:
        return float(np.sum(self.weights))

    @property
    def n(self) -> int:
        return len(self.weights)


def circle_grid(n: int = 360) -> Grid:
    """Uniform bin centers on the circle; each cell carries 2*pi/n."""
    theta = -math.pi + (np.arange(n) + 0.5) * (2.0 * math.pi / n)
    pts = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    return Grid("circle", pts, np.full(n, 2.0 * math.pi / n))


def sphere_fibonacci_grid(n: int = 4096) -> Grid:
    """Fibonacci lattice on S^2 with equal weights 4*pi/n."""
    i = np.arange(n)
    z = 1.0 - (2.0 * i + 1.0) / n
    golden_angle = math.pi * (3.0 - math.sqrt(5.0))
    phi = golden_angle * i
    r = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    pts = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    return Grid("sphere", pts, np.full(n, 4.0 * math.pi / n))


def circle_angles(grid: Grid) -> np.ndarray:
    return np.arctan2(grid.points[:, 1], grid.points[:, 0])


def normalize_density(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Scale nonnegative values so they integrate to one against the grid."""
    values = np.asarray(values, dtype=float)
    total = float(np.sum(values * grid.weights))
    if not total > 0:
        raise NonPositiveDensity("cannot normalize a mass-zero density")
    return values / total


def random_density(grid: Grid, rng: np.random.Generator, roughness: float = 0.5) -> np.ndarray:
    """Strictly positive random density (log-normal bumps, normalized)."""
    return normalize_density(np.exp(roughness * rng.standard_normal(grid.n)), grid)


def _xlogx(rho: np.ndarray) -> np.ndarray:
    out = np.zeros_like(rho)
    mask = rho > 0
    out[mask] = rho[mask] * np.log(rho[mask])
    return out


def _kl_terms(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """p*log(p/q) with 0*log(0) = 0; q <= 0 where p > 0 is an error."""
    mask = p > 0
    if np.any(q[mask] <= 0):
        raise NonPositiveDensity("KL undefined: second density vanishes on support")
    out = np.zeros_like(p)
    out[mask] = p[mask] * (np.log(p[mask]) - np.log(q[mask]))
    return out


def free_energy(rho: np.ndarray, u: np.ndarray, tau: float, grid: Grid) -> float:
    """(1/tau) * integral(u * rho) - entropy(rho), both against grid weights."""
    if not tau > 0:
        raise ValueError("temperature must be positive")
    rho = np.asarray(rho, dtype=float)
    u = np.asarray(u, dtype=float)
    binding = float(np.sum(u * rho * grid.weights)) / tau
    neg_entropy = float(np.sum(_xlogx(rho) * grid.weights))
    return binding + neg_entropy


def gibbs_density(u: np.ndarray, tau: float, grid: Grid):
    """Minimizer of the free energy: rho ~ exp(-u/tau); returns (rho, logZ)."""
    if not tau > 0:
        raise ValueError("temperature must be positive")
    u = np.asarray(u, dtype=float)
    logits = -u / tau
    m = float(np.max(logits))
    w = np.exp(logits - m)
    z_shift = float(np.sum(w * grid.weights))
    return w / z_shift, m + math.log(z_shift)


def kl_divergence(p: np.ndarray, q: np.ndarray, grid: Grid) -> float:
    return float(np.sum(_kl_terms(np.asarray(p, float), np.asarray(q, float)) * grid.weights))


def sym_kl_half(rho1: np.ndarray, rho2: np.ndarray, grid: Grid) -> float:
    """Halved symmetric KL: (KL(p||q) + KL(q||p)) / 2 on the grid."""
    rho1 = np.asarray(rho1, dtype=float)
    rho2 = np.asarray(rho2, dtype=float)
    if np.any(rho1 <= 0) or np.any(rho2 <= 0):
        raise NonPositiveDensity("symmetric KL needs strictly positive densities")
    return 0.5 * (kl_divergence(rho1, rho2, grid) + kl_divergence(rho2, rho1, grid))


def mm_free_energy(
    rho1: np.ndarray,
    rho2: np.ndarray,
    u12: np.ndarray,
    u21: np.ndarray,
    tau: float,
    grid: Grid,
) -> float:
    """Mean of the two directional free energies minus the symmetric KL."""
    rho1 = np.asarray(rho1, dtype=float)
    rho2 = np.asarray(rho2, dtype=float)
    if np.any(rho1 <= 0) or np.any(rho2 <= 0):
        raise NonPositiveDensity("multimodal functional needs strictly positive densities")
    half_sum = 0.5 * (
        free_energy(rho1, u12, tau, grid) + free_energy(rho2, u21, tau, grid)
    )
    return half_sum - sym_kl_half(rho1, rho2, grid)


def effective_potential(u12: np.ndarray, rho2: np.ndarray, tau: float) -> np.ndarray:
    """(1/tau) * u12 + log(rho2): the barrier the peer density erects."""
    rho2 = np.asarray(rho2, dtype=float)
    if np.any(rho2 <= 0):
        raise NonPositiveDensity("effective potential needs a strictly positive peer density")
    return np.asarray(u12, dtype=float) / tau + np.log(rho2)


@dataclass(frozen=True)
class FloorConstraint:
    """Density floor and the excess mass it leaves: excess = 1 - floor * mu(Z)."""

    floor: float
    excess: float


def floor_constraint(floor: float, grid: Grid) -> FloorConstraint:
    if not floor > 0:
        raise ValueError("floor must be positive")
    excess = 1.0 - floor * grid.mu_total
    if excess <= 0:
        raise InfeasibleFloor(
            f"floor {floor} uses mass {floor * grid.mu_total:.6f} >= 1"
        )
    return FloorConstraint(floor=floor, excess=excess)


def default_floor(grid: Grid) -> FloorConstraint:
    """10% background mass, leaving 90% for spike dynamics."""
    return floor_constraint(0.1 / grid.mu_total, grid)


def random_floor_density(
    fc: FloorConstraint, grid: Grid, rng: np.random.Generator, roughness: float = 0.5
) -> np.ndarray:
    """Random feasible density: floor plus excess spread by log-normal bumps."""
    bump = np.exp(roughness * rng.standard_normal(grid.n))
    bump /= float(np.sum(bump * grid.weights))
    return fc.floor + fc.excess * bump


def _spike_support(v: np.ndarray, sigma: float, grid: Grid) -> np.ndarray:
    """Deterministic shrinking support inside the sigma-sublevel set of v.

    Smallest-index prefix of the sublevel cells, truncated to measure
    sigma * mu(Z) / range(v) so the support vanishes as sigma does even
    when the sublevel set itself stays flat.
    """
    v = np.asarray(v, dtype=float)
    vmin = float(np.min(v))
    spread = float(np.max(v)) - vmin
    eligible = np.flatnonzero(v <= vmin + sigma)
    if spread <= 0 or sigma >= spread:
        return eligible
    target = min(
        float(np.sum(grid.weights[eligible])), sigma * grid.mu_total / spread
    )
    cum = np.cumsum(grid.weights[eligible])
    k = max(1, int(np.searchsorted(cum, target * (1.0 + 1e-12), side="right")))
    return eligible[:k]


def sigma_spike_density(
    v: np.ndarray, sigma: float, fc: FloorConstraint, grid: Grid
) -> np.ndarray:
    """Floor everywhere plus the excess mass uniform on the shrinking support."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    support = _spike_support(v, sigma, grid)
    rho = np.full(grid.n, fc.floor)
    rho[support] += fc.excess / float(np.sum(grid.weights[support]))
    return rho


def coordinate_lower_bound(
    v: np.ndarray,
    rho2: np.ndarray,
    u12: np.ndarray,
    u21: np.ndarray,
    fc: FloorConstraint,
    tau: float,
    grid: Grid,
) -> float:
    """Infimum of the rho1-coordinate of the multimodal functional.

    F* = (floor * int(V) + min(V) * excess) / 2 + log(floor) / 2 + C(rho2),
    where C(rho2) is recovered by subtracting the explicit rho1 terms from
    the functional at any feasible rho1 (grid-exact; uniform is used).
    """
    v = np.asarray(v, dtype=float)
    uniform = np.full(grid.n, 1.0 / grid.mu_total)
    explicit = 0.5 * float(np.sum(uniform * v * grid.weights)) + 0.5 * float(
        np.sum(np.asarray(rho2, float) * np.log(uniform) * grid.weights)
    )
    c_rho2 = mm_free_energy(uniform, rho2, u12, u21, tau, grid) - explicit
    v_star = float(np.min(v))
    int_v = float(np.sum(v * grid.weights))
    return (
        0.5 * (fc.floor * int_v + v_star * fc.excess)
        + 0.5 * math.log(fc.floor)
        + c_rho2
    )


def spike_gap_bound(
    v: np.ndarray, sigma: float, rho2: np.ndarray, fc: FloorConstraint, grid: Grid
) -> float:
    """Upper bound (excess*sigma + spike_mass*log_penalty)/2 on the spike gap."""
    support = _spike_support(v, sigma, grid)
    mu_support = float(np.sum(grid.weights[support]))
    m_sigma = float(np.sum(np.asarray(rho2, float)[support] * grid.weights[support]))
    l_sigma = math.log(1.0 + fc.excess / (fc.floor * mu_support))
    return 0.5 * (fc.excess * sigma + m_sigma * l_sigma)


@dataclass(frozen=True)
class ProbeReport:
    ok: bool
    worst_margin: float
    trials: int


def convexity_probe(
    u: np.ndarray, tau: float, grid: Grid, trials: int, rng: np.random.Generator
) -> ProbeReport:
    """Strict convexity of the free energy on random density pairs."""
    worst = math.inf
    for _ in range(trials):
        rho_a = random_density(grid, rng)
        rho_b = random_density(grid, rng)
        lam = rng.uniform(0.05, 0.95)
        mix = lam * rho_a + (1.0 - lam) * rho_b
        margin = (
            lam * free_energy(rho_a, u, tau, grid)
            + (1.0 - lam) * free_energy(rho_b, u, tau, grid)
            - free_energy(mix, u, tau, grid)
        )
        worst = min(worst, margin)
    return ProbeReport(ok=worst > 1e-12, worst_margin=worst, trials=trials)


def concavity_probe(
    u12: np.ndarray,
    rho2: np.ndarray,
    fc: FloorConstraint,
    tau: float,
    grid: Grid,
    trials: int,
    rng: np.random.Generator,
) -> ProbeReport:
    """Strict concavity of rho1 -> F_mm(rho1, rho2) over the floor class.

    The rho2-only terms are constant along the rho1 coordinate, so the
    probe evaluates the functional with a zero peer potential.
    """
    u21 = np.zeros(grid.n)
    worst = math.inf
    for _ in range(trials):
        rho_a = random_floor_density(fc, grid, rng)
        rho_b = random_floor_density(fc, grid, rng)
        lam = rng.uniform(0.05, 0.95)
        mix = lam * rho_a + (1.0 - lam) * rho_b
        margin = mm_free_energy(mix, rho2, u12, u21, tau, grid) - (
            lam * mm_free_energy(rho_a, rho2, u12, u21, tau, grid)
            + (1.0 - lam) * mm_free_energy(rho_b, rho2, u12, u21, tau, grid)
        )
        worst = min(worst, margin)
    return ProbeReport(ok=worst > 1e-12, worst_margin=worst, trials=trials)


def unimodal_consistency_identity(
    q: np.ndarray, qsmooth: np.ndarray, u: np.ndarray, tau: float, grid: Grid
):
    """Grid-exact identity: F(q) - [binding - H_x(q, qsmooth)] = KL(q||qsmooth)."""
    q = np.asarray(q, dtype=float)
    qsmooth = np.asarray(qsmooth, dtype=float)
    if np.any(q <= 0) or np.any(qsmooth <= 0):
        raise NonPositiveDensity("identity check needs strictly positive densities")
    binding = float(np.sum(u * q * grid.weights)) / tau
    h_cross = -float(np.sum(q * np.log(qsmooth) * grid.weights))
    lhs = free_energy(q, u, tau, grid) - (binding - h_cross)
    rhs = kl_divergence(q, qsmooth, grid)
    return lhs, rhs


def mm_consistency_identity(
    q1: np.ndarray,
    q2: np.ndarray,
    q1s: np.ndarray,
    q2s: np.ndarray,
    u12: np.ndarray,
    u21: np.ndarray,
    tau: float,
    grid: Grid,
):
    """Cross-modal analogue: the functional-energy gap is a pair of log ratios."""
    arrays = [np.asarray(a, dtype=float) for a in (q1, q2, q1s, q2s)]
    q1, q2, q1s, q2s = arrays
    if any(np.any(a <= 0) for a in arrays):
        raise NonPositiveDensity("identity check needs strictly positive densities")
    w = grid.weights

    def directional(qa, u_a, qs_other):
        binding = float(np.sum(u_a * qa * w)) / tau
        h_cross = -float(np.sum(qa * np.log(qs_other) * w))
        return binding - h_cross

    j_mm = 0.5 * (directional(q1, u12, q2s) + directional(q2, u21, q1s))
    lhs = mm_free_energy(q1, q2, u12, u21, tau, grid) - j_mm
    rhs = 0.5 * (
        float(np.sum(q1 * (np.log(q2) - np.log(q2s)) * w))
        + float(np.sum(q2 * (np.log(q1) - np.log(q1s)) * w))
    )
    return lhs, rhs


@dataclass(frozen=True)
class GibbsSample:
    """Self-normalized importance sample of a Gibbs law on S^2."""

    pool: np.ndarray
    weights: np.ndarray
    draws: np.ndarray

    def expect(self, values: np.ndarray) -> float:
        """Weighted expectation of per-pool-point values."""
        return float(np.sum(self.weights * np.asarray(values, dtype=float)))


def gibbs_importance_sampler(
    u_fn,
    tau: float,
    n_pool: int,
    n_draw: int,
    rng: np.random.Generator,
) -> GibbsSample:
    """Uniform proposal, weights exp(-U/tau), Gumbel-top-k draw w/o replacement."""
    if n_draw > n_pool:
        raise ValueError("cannot draw more points than the pool holds")
    pool = sample_uniform_sphere(rng, 3, n_pool)
    u = np.asarray(u_fn(pool), dtype=float)
    logw = -u / tau
    finite = np.isfinite(logw)
    if not np.any(finite):
        raise DegenerateWeights("all importance weights are non-finite")
    m = float(np.max(logw[finite]))
    w = np.where(finite, np.exp(logw - m), 0.0)
    total = float(np.sum(w))
    if not (total > 0 and np.isfinite(total)):
        raise DegenerateWeights("importance weights underflowed to zero mass")
    weights = w / total
    keys = logw + rng.gumbel(size=n_pool)
    if n_draw == n_pool:
        idx = np.arange(n_pool)
    else:
        idx = np.sort(np.argpartition(-keys, n_draw)[:n_draw])
    return GibbsSample(pool=pool, weights=weights, draws=pool[idx])


def cap_mass(
    rho: np.ndarray, grid: Grid, centers: np.ndarray, eps: float
) -> float:
    """Mass of rho within geodesic radius eps of any listed center."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    inside = np.zeros(grid.n, dtype=bool)
    for center in centers:
        inside |= geodesic_distance_sphere(grid.points, center[None, :]) <= eps
    return float(np.sum(np.asarray(rho, float)[inside] * grid.weights[inside]))


def cap_mass_particles(points: np.ndarray, centers: np.ndarray, eps: float) -> float:
    """Fraction of particles within geodesic radius eps of any center."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    inside = np.zeros(len(points), dtype=bool)
    for center in centers:
        inside |= geodesic_distance_sphere(points, center[None, :]) <= eps
    return float(np.mean(inside))


def weighted_cap_mass(sample: GibbsSample, centers: np.ndarray, eps: float) -> float:
    """Importance-weighted cap mass of the Gibbs law."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    inside = np.zeros(len(sample.pool), dtype=bool)
    for center in centers:
        inside |= geodesic_distance_sphere(sample.pool, center[None, :]) <= eps
    return sample.expect(inside.astype(float))
