"""Experiment runners: gradient consistency, sphere concentration, modality gap.

Each runner is a pure function of its config dataclass: per-seed work is
keyed through rng_from_key(seed_base, experiment_id, seed, ...) so reruns
are bit-identical, seeds may execute in parallel (--jobs), and results are
aggregated in seed order before any file is written. Defaults reproduce
the reference protocol of each experiment.
"""

from __future__ import annotations

import dataclasses
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .datagen import (
    GmmConfig,
    VmMixtureConfig,
    circular_correlation,
    gmm_build,
    gmm_sample,
    gmm_sample_pairs,
    mm_gap_batch,
)
from .diagnostics import (
    RunRecord,
    binned_marginal,
    diagonal_band_mass,
    joint_histogram,
    sym_kl_sum,
    write_csv,
)
from .encoders import LinearEncoder, init_encoder
from .energies import grad_alignment
from .functionals import (
    cap_mass_particles,
    gibbs_importance_sampler,
    weighted_cap_mass,
)
from .kernels import cosine_critic, rbf_critic
from .losses import clip_inbatch_value_and_grad_fast, infonce_batch_mean_grad
from .manifold import normalize
from .optim import adam_init, adam_step
from .particles import ParticleConfig, TwoWellPotential, default_two_well, train_particles
from .rng import EXPERIMENT_IDS, rng_from_key


def _stderr(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        return 0.0
    return float(np.std(values, ddof=1) / math.sqrt(len(values)))


def _std(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        return 0.0
    return float(np.std(values, ddof=1))


def _pmap(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _echo(cfg) -> dict:
    return {f.name: str(getattr(cfg, f.name)) for f in dataclasses.fields(cfg)}


# ---------------------------------------------------------------------------
# Gradient consistency across negative-pool sizes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GradConsistencyConfig:
    seeds: int = 20
    seed_base: int = 0
    jobs: int = 1
    input_dim: int = 64
    n_components: int = 4
    separation: float = 4.0
    sigma: float = 1.0
    out_dim: int = 128
    tau_cos: float = 0.1
    tau_rbf: float = 1.0
    sigma_aug_cos: float = 0.05
    sigma_aug_rbf: float = 0.2
    batch: int = 64
    n_ref: int = 4096
    sweep: tuple = (4, 8, 16, 32, 64, 128, 256, 512, 1024)


_REGIMES = ("cosine", "rbf")


def _grad_consistency_seed(task):
    cfg, regime, seed = task
    stream = _REGIMES.index(regime)
    rng = rng_from_key(cfg.seed_base, EXPERIMENT_IDS["grad_consistency"], seed, stream)
    sigma_aug = cfg.sigma_aug_cos if regime == "cosine" else cfg.sigma_aug_rbf
    gmm = GmmConfig(
        dim=cfg.input_dim,
        n_components=cfg.n_components,
        separation=cfg.separation,
        sigma=cfg.sigma,
        sigma_aug=sigma_aug,
    )
    model = gmm_build(gmm, rng)
    anchors, positives = gmm_sample_pairs(model, gmm, cfg.batch, rng)
    pool = gmm_sample(model, gmm, cfg.n_ref, rng)
    if regime == "cosine":
        head, critic, tau = "normalize", cosine_critic(), cfg.tau_cos
    else:
        head, critic, tau = "tanh", rbf_critic(1.0 / cfg.out_dim), cfg.tau_rbf
    enc = init_encoder(rng, cfg.out_dim, cfg.input_dim, head)
    _, g_ref = infonce_batch_mean_grad(
        enc, anchors, positives, pool, cfg.n_ref, critic, tau
    )
    metrics = []
    for n in cfg.sweep:
        _, g_n = infonce_batch_mean_grad(enc, anchors, positives, pool, n, critic, tau)
        rep = grad_alignment(g_n, g_ref)
        metrics.append((f"align@{n}", rep.alignment))
        metrics.append((f"relerr@{n}", rep.rel_error))
    return regime, RunRecord(
        experiment="grad_consistency", seed=seed, config_echo=_echo(cfg),
        metrics=tuple(metrics),
    )


def run_grad_consistency(cfg: GradConsistencyConfig, out_dir: str) -> dict:
    tasks = [(cfg, regime, seed) for regime in _REGIMES for seed in range(cfg.seeds)]
    results = _pmap(_grad_consistency_seed, tasks, cfg.jobs)
    results.sort(key=lambda r: (_REGIMES.index(r[0]), r[1].seed))
    table = {}
    for regime, record in results:
        for n in cfg.sweep:
            table.setdefault((regime, n), []).append(
                (record.value(f"align@{n}"), record.value(f"relerr@{n}"))
            )
    csv_rows = []
    summary = {}
    for regime in _REGIMES:
        for n in cfg.sweep:
            vals = np.asarray(table[(regime, n)])
            align, relerr = vals[:, 0], vals[:, 1]
            csv_rows.append(
                (
                    regime,
                    n,
                    float(np.mean(align)), _std(align), _stderr(align),
                    float(np.mean(relerr)), _std(relerr), _stderr(relerr),
                )
            )
            summary[(regime, n)] = (float(np.mean(align)), float(np.mean(relerr)))
    os.makedirs(out_dir, exist_ok=True)
    write_csv(
        os.path.join(out_dir, "grad_consistency.csv"),
        [
            "regime", "N",
            "align_mean", "align_std", "align_stderr",
            "relerr_mean", "relerr_std", "relerr_stderr",
        ],
        csv_rows,
    )
    return summary


# ---------------------------------------------------------------------------
# Gibbs concentration on the sphere
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GibbsSphereConfig:
    seeds: int = 20
    seed_base: int = 0
    jobs: int = 1
    gamma: float = 12.0
    kappa: float = 12.0
    w: float = 0.5
    h: float = 0.35
    steps: int = 5000
    lr: float = 0.05
    noise_sigma: float = 0.06
    n_mc: int = 120_000
    viz_pool: int = 24_000
    viz_draw: int = 2400
    eps: float = 0.5
    particles: int = 256
    taus: tuple = (10.0, 5.0, 2.5, 1.0, 0.5, 0.2, 0.1)


def _two_well(cfg: GibbsSphereConfig) -> TwoWellPotential:
    base = default_two_well()
    return TwoWellPotential(
        gamma=cfg.gamma, kappa=cfg.kappa, w=cfg.w, m1=base.m1, m2=base.m2
    )


def _gibbs_sphere_seed(task):
    cfg, tau_idx, seed = task
    tau = cfg.taus[tau_idx]
    potential = _two_well(cfg)
    centers = np.stack([potential.m1, potential.m2])
    rng = rng_from_key(cfg.seed_base, EXPERIMENT_IDS["gibbs_sphere"], seed, tau_idx, 0)
    sample = gibbs_importance_sampler(
        lambda pts: _potential_values(potential, pts), tau, cfg.n_mc, 1, rng
    )
    gibbs_cap = weighted_cap_mass(sample, centers, cfg.eps)
    particle_seed = int(
        rng_from_key(
            cfg.seed_base, EXPERIMENT_IDS["gibbs_sphere"], seed, tau_idx, 1
        ).integers(2**62)
    )
    result = train_particles(
        ParticleConfig(
            n_particles=cfg.particles,
            tau=tau,
            h=cfg.h,
            steps=cfg.steps,
            lr=cfg.lr,
            noise_sigma=cfg.noise_sigma,
            seed=particle_seed,
        ),
        potential,
    )
    trained_cap = cap_mass_particles(result.cloud.projected, centers, cfg.eps)
    record = RunRecord(
        experiment="gibbs_sphere", seed=seed, config_echo=_echo(cfg),
        metrics=(
            ("tau", tau), ("gibbs_cap", gibbs_cap), ("trained_cap", trained_cap),
        ),
    )
    return tau_idx, record, result.cloud.projected


def _potential_values(potential: TwoWellPotential, pts: np.ndarray) -> np.ndarray:
    from .particles import two_well_u

    return two_well_u(potential, pts)


def run_gibbs_sphere(cfg: GibbsSphereConfig, out_dir: str) -> dict:
    potential = _two_well(cfg)
    centers = np.stack([potential.m1, potential.m2])
    tasks = [
        (cfg, tau_idx, seed)
        for tau_idx in range(len(cfg.taus))
        for seed in range(cfg.seeds)
    ]
    results = _pmap(_gibbs_sphere_seed, tasks, cfg.jobs)
    results.sort(key=lambda r: (r[0], r[1].seed))
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    summary = {}
    for tau_idx, tau in enumerate(cfg.taus):
        per_tau = [r for r in results if r[0] == tau_idx]
        gibbs = np.asarray([r[1].value("gibbs_cap") for r in per_tau])
        trained = np.asarray([r[1].value("trained_cap") for r in per_tau])
        rows.append(
            (
                tau,
                float(np.mean(trained)), _std(trained),
                float(np.mean(gibbs)), _std(gibbs),
            )
        )
        summary[tau] = {
            "trained_mean": float(np.mean(trained)),
            "gibbs_mean": float(np.mean(gibbs)),
        }
        viz_rng = rng_from_key(
            cfg.seed_base, EXPERIMENT_IDS["gibbs_sphere"], 10_000, tau_idx, 2
        )
        viz = gibbs_importance_sampler(
            lambda pts: _potential_values(potential, pts),
            tau, cfg.viz_pool, cfg.viz_draw, viz_rng,
        )
        tag = f"{tau:g}"
        write_csv(
            os.path.join(out_dir, f"cloud_{tag}_gibbs.csv"),
            ["x", "y", "z"],
            [tuple(p) for p in viz.draws],
        )
        first_cloud = per_tau[0][2]
        write_csv(
            os.path.join(out_dir, f"cloud_{tag}_trained.csv"),
            ["x", "y", "z"],
            [tuple(p) for p in first_cloud],
        )
    write_csv(
        os.path.join(out_dir, "concentration.csv"),
        [
            "tau",
            "capmass_trained_mean", "capmass_trained_std",
            "capmass_gibbs_mean", "capmass_gibbs_std",
        ],
        rows,
    )
    return summary


# ---------------------------------------------------------------------------
# Multimodal marginal gap under controlled misalignment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MmGapConfig:
    seeds: int = 20
    seed_base: int = 0
    jobs: int = 1
    w: float = 0.7
    mu1: float = 0.0
    mu2: float = math.pi
    concentration: float = 6.0
    sigma_obs: float = 0.02
    tau: float = 0.07
    lr: float = 5e-3
    steps: int = 2000
    batch: int = 256
    nbins: int = 60
    n_eval: int = 8000
    sigmas: tuple = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7)


def _rotation2(phi: float) -> np.ndarray:
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, -s], [s, c]])


def _train_mm_encoders(cfg: MmGapConfig, data_cfg: VmMixtureConfig, rng):
    # Random-rotation (orthogonal) init: both encoders start as degree +1
    # circle maps. Mismatched determinant signs at init are a topological
    # obstruction to pointwise alignment and make cold-temperature training
    # collapse on a fraction of seeds.
    Wf = _rotation2(rng.uniform(-math.pi, math.pi))
    Wg = _rotation2(rng.uniform(-math.pi, math.pi))
    params = np.concatenate([Wf.ravel(), Wg.ravel()])
    state = adam_init(params.size, lr=cfg.lr)
    for _ in range(cfg.steps):
        xs, ys = mm_gap_batch(data_cfg, cfg.batch, rng)
        Wf = params[:4].reshape(2, 2)
        Wg = params[4:].reshape(2, 2)
        _, gWf, gWg = clip_inbatch_value_and_grad_fast(Wf, Wg, xs, ys, cfg.tau)
        grad = np.concatenate([gWf.ravel(), gWg.ravel()])
        state, params = adam_step(state, grad, params)
    return params[:4].reshape(2, 2), params[4:].reshape(2, 2)


def _mm_gap_seed(task):
    cfg, sigma_idx, seed = task
    sigma = cfg.sigmas[sigma_idx]
    data_cfg = VmMixtureConfig(
        w=cfg.w, mu1=cfg.mu1, mu2=cfg.mu2, concentration=cfg.concentration,
        sigma_mis=sigma, sigma_obs=cfg.sigma_obs,
    )
    rng = rng_from_key(cfg.seed_base, EXPERIMENT_IDS["mm_gap"], seed, sigma_idx)
    Wf, Wg = _train_mm_encoders(cfg, data_cfg, rng)
    xs, ys = mm_gap_batch(data_cfg, cfg.n_eval, rng)
    z1 = normalize(xs @ Wf.T)
    z2 = normalize(ys @ Wg.T)
    a1 = np.arctan2(z1[:, 1], z1[:, 0])
    a2 = np.arctan2(z2[:, 1], z2[:, 0])
    h1 = binned_marginal(a1, cfg.nbins, pseudocount=1.0)
    h2 = binned_marginal(a2, cfg.nbins, pseudocount=1.0)
    record = RunRecord(
        experiment="mm_gap", seed=seed, config_echo=_echo(cfg),
        metrics=(("sigma_mis", sigma), ("symkl", sym_kl_sum(h1, h2))),
    )
    return sigma_idx, record, a1, a2


def run_mm_gap(cfg: MmGapConfig, out_dir: str) -> dict:
    tasks = [
        (cfg, sigma_idx, seed)
        for sigma_idx in range(len(cfg.sigmas))
        for seed in range(cfg.seeds)
    ]
    results = _pmap(_mm_gap_seed, tasks, cfg.jobs)
    results.sort(key=lambda r: (r[0], r[1].seed))
    os.makedirs(out_dir, exist_ok=True)
    gap_rows = []
    summary = {}
    for sigma_idx, sigma in enumerate(cfg.sigmas):
        per_sigma = [r for r in results if r[0] == sigma_idx]
        gaps = np.asarray([r[1].value("symkl") for r in per_sigma])
        gap_rows.append(
            (sigma, len(gaps), float(np.mean(gaps)), _std(gaps), _stderr(gaps))
        )
        summary[sigma] = {
            "symkl_mean": float(np.mean(gaps)),
            "symkl_stderr": _stderr(gaps),
        }
        a1_all = np.concatenate([r[2] for r in per_sigma])
        a2_all = np.concatenate([r[3] for r in per_sigma])
        tag = f"{sigma:g}"
        h1 = binned_marginal(a1_all, cfg.nbins, pseudocount=1.0)
        h2 = binned_marginal(a2_all, cfg.nbins, pseudocount=1.0)
        write_csv(
            os.path.join(out_dir, f"marginals_{tag}.csv"),
            ["bin_center", "density_mod1", "density_mod2"],
            list(zip(h1.centers, h1.density, h2.density)),
        )
        joint = joint_histogram(a1_all, a2_all, cfg.nbins)
        centers = 0.5 * (joint.edges[:-1] + joint.edges[1:])
        joint_rows = [
            (centers[i], centers[j], int(joint.counts[i, j]))
            for i in range(cfg.nbins)
            for j in range(cfg.nbins)
        ]
        write_csv(
            os.path.join(out_dir, f"joint_{tag}.csv"),
            ["bin_a1", "bin_a2", "count"],
            joint_rows,
        )
        from .diagnostics import angle_shift_density

        delta = angle_shift_density(a1_all, a2_all, cfg.nbins, pseudocount=1.0)
        write_csv(
            os.path.join(out_dir, f"delta_{tag}.csv"),
            ["bin_center", "density"],
            list(zip(delta.centers, delta.density)),
        )
        summary[sigma]["diag_band_mass"] = diagonal_band_mass(joint, band=3)
    write_csv(
        os.path.join(out_dir, "gap_curve.csv"),
        ["sigma_mis", "seed_count", "symkl_mean", "symkl_std", "symkl_stderr"],
        gap_rows,
    )
    return summary


# ---------------------------------------------------------------------------
# Selftest battery
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SelftestConfig:
    seeds: int = 1
    seed_base: int = 0
    jobs: int = 1
    corrupt_gradient: bool = False


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    margin: float
    detail: str = ""


def run_selftest(cfg: SelftestConfig, out_dir: str | None = None) -> list[CheckResult]:
    """Cross-module invariant battery; returns one result per named check."""
    from . import manifold
    from .functionals import (
        circle_grid,
        convexity_probe,
        concavity_probe,
        default_floor,
        free_energy,
        gibbs_density,
        random_density,
        sphere_fibonacci_grid,
        sym_kl_half,
        unimodal_consistency_identity,
    )
    from .kernels import (
        kernel_volume_mc,
        kernel_volume_s2_cosine,
        sharp_peak_check,
    )
    from .losses import UniBatch, infonce_loss

    checks: list[CheckResult] = []
    rng = rng_from_key(cfg.seed_base, EXPERIMENT_IDS["selftest"], 0)

    # Geometry: quadratic sandwich 1 - cos(d) within [(2/pi^2) d^2, d^2 / 2].
    z = manifold.sample_uniform_sphere(rng, 3, 2000)
    w = manifold.sample_uniform_sphere(rng, 3, 2000)
    d = manifold.geodesic_distance_sphere(z, w)
    val = 1.0 - np.einsum("ij,ij->i", z, w)
    lo = (2.0 / math.pi**2) * d * d
    hi = 0.5 * d * d
    margin = float(min(np.min(val - lo), np.min(hi - val)))
    checks.append(CheckResult("manifold.cosine_quadratic_sandwich", margin >= -1e-9, margin))

    # Angle wrap is idempotent and additive mod 2*pi.
    a = rng.uniform(-30, 30, size=500)
    b = rng.uniform(-30, 30, size=500)
    wa, wb = manifold.wrap_angle(a), manifold.wrap_angle(b)
    err = np.abs(manifold.wrap_angle(wa + wb) - manifold.wrap_angle(a + b))
    margin = float(np.max(np.minimum(err, 2.0 * math.pi - err)))
    checks.append(CheckResult("manifold.wrap_additivity", margin <= 1e-9, margin))

    # Kernel volume: MC at random anchors agrees with the closed form.
    vk = kernel_volume_s2_cosine(1.0)
    anchors = manifold.sample_uniform_sphere(rng, 3, 4)
    worst = 0.0
    for anchor in anchors:
        est = kernel_volume_mc(
            manifold.sphere(3), cosine_critic(), 1.0, anchor, 50_000, rng
        )
        worst = max(worst, abs(est.value - vk.value) / est.std_error)
    checks.append(CheckResult("kernels.volume_mc_vs_analytic", worst <= 4.0, worst))

    # Sharp-peak sandwich for the cosine critic on the sphere.
    rep = sharp_peak_check(
        cosine_critic(), manifold.sphere(3), math.pi, 2.0 / math.pi**2, 0.5, 4000, rng
    )
    checks.append(CheckResult("kernels.sharp_peak_cosine", rep.ok, rep.worst_violation))

    # Losses: uniform-similarity batch hits log(N + 1) exactly.
    enc = LinearEncoder(W=np.eye(2), head="normalize")
    x = np.array([1.0, 0.0])
    batch = UniBatch(anchor=x, positive=x, negatives=np.stack([x, x, x]))
    margin = abs(infonce_loss(enc, batch, cosine_critic(), 0.5) - math.log(4.0))
    checks.append(CheckResult("losses.uniform_softmax_value", margin <= 1e-12, margin))

    # Gradients match finite differences (the corruptible check).
    rng_fd = rng_from_key(cfg.seed_base, EXPERIMENT_IDS["selftest"], 1)
    worst = 0.0
    sign = -1.0 if cfg.corrupt_gradient else 1.0
    for _ in range(5):
        W = rng_fd.standard_normal((3, 2))
        anchors = rng_fd.standard_normal((2, 2))
        positives = anchors + 0.1 * rng_fd.standard_normal((2, 2))
        pool = rng_fd.standard_normal((4, 2))
        enc = LinearEncoder(W=W, head="normalize")
        _, grad = infonce_batch_mean_grad(
            enc, anchors, positives, pool, 4, cosine_critic(), 0.5
        )
        grad = sign * grad

        def fn(flat):
            from .losses import _as_rows, _nce_mean_var

            return _nce_mean_var(
                ag.reshape(flat, (3, 2)), "normalize", _as_rows(anchors),
                _as_rows(positives), pool, cosine_critic(), 0.5,
            )

        fd = ag.finite_diff_grad(fn, W.ravel(), 1e-5)
        worst = max(worst, float(np.linalg.norm(grad.ravel() - fd) / np.linalg.norm(fd)))
    checks.append(CheckResult("grad.finite_difference_agreement", worst <= 1e-4, worst))

    # Functionals: Gibbs minimizes and attains -log Z.
    grid = circle_grid(64)
    u = np.cos(3.0 * np.arctan2(grid.points[:, 1], grid.points[:, 0]))
    rho_star, logz = gibbs_density(u, 0.7, grid)
    f_star = free_energy(rho_star, u, 0.7, grid)
    margin = abs(f_star + logz)
    ok = margin <= 1e-9
    worst_gap = math.inf
    for _ in range(50):
        rho = random_density(grid, rng)
        worst_gap = min(worst_gap, free_energy(rho, u, 0.7, grid) - f_star)
    checks.append(CheckResult("functionals.gibbs_value", ok, margin))
    checks.append(CheckResult("functionals.gibbs_minimizes", worst_gap > 1e-10, worst_gap))

    # Identity: functional minus energy form equals the KL term.
    q = random_density(grid, rng)
    qs = random_density(grid, rng)
    lhs, rhs = unimodal_consistency_identity(q, qs, u, 0.7, grid)
    margin = abs(lhs - rhs)
    checks.append(CheckResult("functionals.consistency_identity", margin <= 1e-9, margin))

    # Curvature probes.
    rep = convexity_probe(u, 0.7, grid, 50, rng)
    checks.append(CheckResult("functionals.strict_convexity", rep.ok, rep.worst_margin))
    fc = default_floor(grid)
    rho2 = random_density(grid, rng)
    rep = concavity_probe(u, rho2, fc, 0.7, grid, 50, rng)
    checks.append(CheckResult("functionals.coordinate_concavity", rep.ok, rep.worst_margin))

    # Symmetric KL is symmetric and vanishes at equality.
    p1 = random_density(grid, rng)
    p2 = random_density(grid, rng)
    sym_ab = sym_kl_half(p1, p2, grid)
    sym_ba = sym_kl_half(p2, p1, grid)
    margin = abs(sym_ab - sym_ba) + abs(sym_kl_half(p1, p1, grid))
    checks.append(CheckResult("functionals.sym_kl_symmetry", margin == 0.0, margin))

    # Particles: gradient matches finite differences at the looser gate.
    from .particles import make_cloud, particle_objective, particle_objective_grad

    rng_p = rng_from_key(cfg.seed_base, EXPERIMENT_IDS["selftest"], 2)
    ambient = np.asarray(normalize(rng_p.standard_normal((6, 3))))
    cloud = make_cloud(ambient)
    potential = default_two_well()
    _, grad = particle_objective_grad(cloud, potential, 0.5, 0.35)
    flat = ambient.ravel()
    fd = np.zeros_like(flat)
    h = 1e-6
    for i in range(flat.size):
        p_plus, p_minus = flat.copy(), flat.copy()
        p_plus[i] += h
        p_minus[i] -= h
        fd[i] = (
            particle_objective(make_cloud(p_plus.reshape(6, 3)), potential, 0.5, 0.35)
            - particle_objective(make_cloud(p_minus.reshape(6, 3)), potential, 0.5, 0.35)
        ) / (2.0 * h)
    margin = float(np.linalg.norm(grad.ravel() - fd) / np.linalg.norm(fd))
    checks.append(CheckResult("particles.gradient_fd", margin <= 1e-3, margin))

    # Data generators: latent dependence stays strong at the largest shift.
    from .datagen import sample_latent_pairs

    data_cfg = VmMixtureConfig(
        w=0.7, mu1=0.0, mu2=math.pi, concentration=6.0, sigma_mis=0.7, sigma_obs=0.02
    )
    theta, theta2 = sample_latent_pairs(data_cfg, 20_000, rng)
    corr = circular_correlation(theta, theta2)
    checks.append(CheckResult("datagen.pair_dependence", corr > 0.5, corr))

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_csv(
            os.path.join(out_dir, "selftest.csv"),
            ["check", "ok", "margin"],
            [(c.name, c.ok, c.margin) for c in checks],
        )
    return checks


# ---------------------------------------------------------------------------
# Config plumbing shared by the CLI
# ---------------------------------------------------------------------------

CONFIG_TYPES = {
    "grad_consistency": GradConsistencyConfig,
    "gibbs_sphere": GibbsSphereConfig,
    "mm_gap": MmGapConfig,
    "selftest": SelftestConfig,
}

RUNNERS = {
    "grad_consistency": run_grad_consistency,
    "gibbs_sphere": run_gibbs_sphere,
    "mm_gap": run_mm_gap,
}


def build_config(experiment: str, overrides: dict[str, str]):
    """Instantiate an experiment config from string overrides."""
    cls = CONFIG_TYPES[experiment]
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, raw in overrides.items():
        if key not in fields:
            raise KeyError(f"unknown {experiment} option {key!r}")
        ftype = fields[key].type
        if ftype in ("int", int):
            kwargs[key] = int(raw)
        elif ftype in ("float", float):
            kwargs[key] = float(raw)
        elif ftype in ("bool", bool):
            kwargs[key] = str(raw).strip().lower() in ("true", "1", "yes", "on")
        elif ftype in ("tuple", tuple):
            parts = [p for p in str(raw).split(",") if p.strip()]
            template = fields[key].default
            cast = int if template and isinstance(template[0], int) else float
            kwargs[key] = tuple(cast(p) for p in parts)
        else:
            kwargs[key] = raw
    return cls(**kwargs)
