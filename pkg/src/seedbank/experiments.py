"""Batch experiments: reproducible runs with machine-readable reports.

Each experiment consumes an ExperimentConfig, runs on counter-based streams
derived from (master_seed, replicate, role), and returns registered checks
plus output files.  Workers only partition replicate ranges; every statistic
is computed from the assembled per-replicate arrays in index order, so the
outputs are byte-identical for any worker count.
"""
from __future__ import annotations

import hashlib
import json
import math
import multiprocessing as mp
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .coalescent import BlockCountState, simulate_block_counting_many
from .diffusion import (PROJECT, REJECT, DiffusionState, IntegratorConfig,
                        integrate_sdbk, integrate_sdbkm, z3_exact)
from .duality import DUALITY_CSV_HEADER, DualityInstance, csv_row, duality_gap
from .freqchain import (CENSORED, FIXED_HEART, FIXED_SPADE,
                        simulate_frequency_paths)
from .generators import convergence_csv, convergence_table
from .lookdown import lookdown_replicates
from .measures import MeasureKind, MeasureSpec, induced_mutation_measure
from .params import EnvConvention, FrequencyState, SimParams
from .stats import (DISTRIBUTIONAL_P, IDENTITY_K_SIGMA, SampleSummary,
                    ks_two_sample)

EXPERIMENTS = ("moran", "lookdown", "coalescent", "sde", "duality",
               "generator_conv", "fixation_equiv")


@dataclass
class Check:
    name: str
    passed: bool
    detail: str


@dataclass
class ExperimentConfig:
    experiment: str
    params: SimParams
    n_pop: int = 20
    replicates: int = 1000
    horizon: float = 1.0
    record: tuple[float, ...] = (1.0,)
    master_seed: int = 1
    init: tuple[int, int, int, int] | None = None   # (ha, hd, sa, sd)
    env0: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; "
                             f"choose from {EXPERIMENTS}")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")

    def semantic_dict(self) -> dict:
        """Everything that affects results (workers and paths excluded)."""
        return {
            "experiment": self.experiment,
            "params": {
                "reproduction": json.loads(self.params.reproduction.to_json()),
                "mutation": json.loads(self.params.mutation.to_json()),
                "alpha": self.params.alpha,
                "sigma": self.params.sigma,
                "env_convention": self.params.env_convention.value,
            },
            "n_pop": self.n_pop,
            "replicates": self.replicates,
            "horizon": self.horizon,
            "record": list(self.record),
            "master_seed": self.master_seed,
            "init": list(self.init) if self.init is not None else None,
            "env0": self.env0,
            "extra": self.extra,
        }

    def config_hash(self) -> str:
        text = json.dumps(self.semantic_dict(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def config_from_dict(obj: dict) -> ExperimentConfig:
    p = obj["params"]
    params = SimParams(
        reproduction=MeasureSpec.from_json(json.dumps(p["reproduction"])),
        mutation=MeasureSpec.from_json(json.dumps(p.get("mutation", {
            "kingman_mass": 0.0, "atoms": [], "kind": "mutation"}))),
        alpha=float(p.get("alpha", 0.0)),
        sigma=float(p.get("sigma", 0.0)),
        env_convention=EnvConvention(p.get("env_convention", "activity_matched")),
    )
    return ExperimentConfig(
        experiment=obj["experiment"],
        params=params,
        n_pop=int(obj.get("n_pop", 20)),
        replicates=int(obj.get("replicates", 1000)),
        horizon=float(obj.get("horizon", 1.0)),
        record=tuple(obj.get("record", [1.0])),
        master_seed=int(obj.get("master_seed", 1)),
        init=tuple(obj["init"]) if obj.get("init") is not None else None,
        env0=int(obj.get("env0", 0)),
        extra=dict(obj.get("extra", {})),
    )


# ---------------------------------------------------------------------------
# Worker plumbing
# ---------------------------------------------------------------------------

def _chunk_ranges(total: int, workers: int) -> list[tuple[int, int]]:
    base = total // workers
    rem = total % workers
    out = []
    start = 0
    for w in range(workers):
        size = base + (1 if w < rem else 0)
        if size > 0:
            out.append((start, size))
        start += size
    return out


def _freq_task(args):
    (params, init_counts, env0, grid, count, seed, role, offset,
     need_mono, env_stationary) = args
    return simulate_frequency_paths(params, init_counts, env0, grid, count,
                                    seed, role=role, rep_offset=offset,
                                    need_mono=need_mono,
                                    env_stationary=env_stationary)


def run_freq_chunked(params, init_counts, env0, grid, reps, seed, role,
                     workers=1, need_mono=False, env_stationary=False):
    """Frequency-chain replicates, optionally fanned over processes.

    Results are concatenated in replicate order, so the worker count cannot
    change any output byte.
    """
    if workers <= 1:
        return simulate_frequency_paths(params, init_counts, env0, grid, reps,
                                        seed, role=role, need_mono=need_mono,
                                        env_stationary=env_stationary)
    tasks = [(params, init_counts, env0, grid, cnt, seed, role, off,
              need_mono, env_stationary)
             for off, cnt in _chunk_ranges(reps, workers)]
    with mp.get_context("fork").Pool(workers) as pool:
        parts = pool.map(_freq_task, tasks)
    samples = np.concatenate([p[0] for p in parts], axis=0)
    fix = np.concatenate([p[1] for p in parts], axis=0)
    counts = sum(p[2] for p in parts)
    integrals = sum(p[3] for p in parts)
    return samples, fix, counts, integrals


def _lookdown_task(args):
    (params, counts, env0, grid, cnt, seed, role, off, until_mono,
     force_l1, report_upper, reduce_l1) = args
    return lookdown_replicates(params, counts, env0, grid, cnt, seed,
                               role=role, rep_offset=off,
                               until_monomorphic=until_mono,
                               force_level1_heart=force_l1,
                               report_upper=report_upper,
                               reduce_level1=reduce_l1)


def run_lookdown_chunked(params, counts, env0, grid, reps, seed, role,
                         workers=1, until_monomorphic=False,
                         force_level1_heart=False, report_upper=False,
                         reduce_level1=False):
    if workers <= 1:
        return lookdown_replicates(params, counts, env0, grid, reps, seed,
                                   role=role,
                                   until_monomorphic=until_monomorphic,
                                   force_level1_heart=force_level1_heart,
                                   report_upper=report_upper,
                                   reduce_level1=reduce_level1)
    tasks = [(params, counts, env0, grid, cnt, seed, role, off,
              until_monomorphic, force_level1_heart, report_upper,
              reduce_level1)
             for off, cnt in _chunk_ranges(reps, workers)]
    with mp.get_context("fork").Pool(workers) as pool:
        parts = pool.map(_lookdown_task, tasks)
    return (np.concatenate([p[0] for p in parts], axis=0),
            np.concatenate([p[1] for p in parts], axis=0),
            np.concatenate([p[2] for p in parts], axis=0),
            np.concatenate([p[3] for p in parts], axis=0))


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


def run_moran(cfg: ExperimentConfig, workers: int = 1):
    """Frequency paths of the unordered model on the recording grid."""
    init = cfg.init if cfg.init is not None else _default_init(cfg.n_pop)
    ha, hd, sa, sd = init
    init_counts = (ha, sa, hd, sd)  # kernel order: n1, n2, d1, d2
    grid = [t for t in cfg.record if t <= cfg.horizon]
    samples, fix, counts, integrals = run_freq_chunked(
        cfg.params, init_counts, cfg.env0, grid, cfg.replicates,
        cfg.master_seed, role=0, workers=workers)
    files = {"paths.csv": _samples_csv(samples, grid, cfg.n_pop)}
    checks = _event_audit_checks(counts, integrals)
    metrics = _grid_moments(samples, grid, cfg.n_pop)
    metrics["event_counts"] = counts.tolist()
    # rounded so that worker partial-sum rounding cannot leak into outputs
    metrics["rate_integrals"] = [float(f"{x:.9g}") for x in integrals]
    if cfg.params.mutation.total_mass() == 0:
        checks.append(_martingale_check(samples, grid, cfg.n_pop, init))
    return checks, files, metrics


def run_lookdown_exp(cfg: ExperimentConfig, workers: int = 1):
    """Ordered-model frequency paths (kernel, no event logs)."""
    init = cfg.init if cfg.init is not None else _default_init(cfg.n_pop)
    grid = [t for t in cfg.record if t <= cfg.horizon]
    samples, fix, lvl1, _ = run_lookdown_chunked(
        cfg.params, init, cfg.env0, grid, cfg.replicates, cfg.master_seed,
        role=0, workers=workers)
    files = {"paths.csv": _lookdown_csv(samples, grid)}
    metrics = {
        "fixed_heart": int((fix[:, 0] == 1).sum()),
        "fixed_spade": int((fix[:, 0] == 2).sum()),
        "censored": int((fix[:, 0] == 0).sum()),
    }
    return [], files, metrics


def run_coalescent(cfg: ExperimentConfig, workers: int = 1):
    """Replicated block-counting runs; reports final states."""
    n0 = int(cfg.extra.get("n_blocks", 5))
    m0 = int(cfg.extra.get("m_blocks", 0))
    finals, times = simulate_block_counting_many(
        BlockCountState(n0, m0, cfg.env0), cfg.params, cfg.horizon,
        cfg.replicates, cfg.master_seed, role=0,
        stop_at_single=bool(cfg.extra.get("stop_at_single", True)))
    lines = ["replicate,n,m,s,stop_time"]
    for r in range(len(finals)):
        lines.append(f"{r},{finals[r,0]},{finals[r,1]},{finals[r,2]},"
                     f"{float(times[r])!r}")
    files = {"paths.csv": "\n".join(lines) + "\n"}
    metrics = {
        "absorbed": int(((finals[:, 0] + finals[:, 1]) <= 1).sum()),
        "mean_stop_time": float(times.mean()),
    }
    return [], files, metrics


def run_sde(cfg: ExperimentConfig, workers: int = 1):
    """Jump-diffusion integration with the closed-form z3 regression check."""
    z = cfg.extra.get("init_z", [0.25, 0.25, 0.5])
    dt = float(cfg.extra.get("dt", 1e-3))
    system = cfg.extra.get("system", "sdbk")
    clamp = PROJECT if cfg.extra.get("clamp", "project") == "project" else REJECT
    grid = tuple(t for t in cfg.record if t <= cfg.horizon)
    init = DiffusionState(z[0], z[1], z[2], env=cfg.env0)
    config = IntegratorConfig(dt=dt, clamp_mode=clamp, grid=grid,
                              env_override=int(cfg.extra.get("env_override", -1)))
    integrator = integrate_sdbk if system == "sdbk" else integrate_sdbkm

    if workers <= 1:
        res = integrator(init, cfg.params, config, cfg.replicates,
                         cfg.master_seed, role=0)
        samples = res.samples
        clamp_acc = res.clamp_accumulated
        jumps = res.jump_counts
    else:
        tasks = [(system, init, cfg.params, config, cnt, cfg.master_seed, off)
                 for off, cnt in _chunk_ranges(cfg.replicates, workers)]
        with mp.get_context("fork").Pool(workers) as pool:
            parts = pool.map(_sde_task, tasks)
        samples = np.concatenate([p[0] for p in parts], axis=0)
        clamp_acc = np.concatenate([p[1] for p in parts], axis=0)
        jumps = sum(p[2] for p in parts)

    gridv = np.asarray(sorted(grid))
    z3_ref = np.array([z3_exact(z[2], cfg.params.alpha, cfg.params.sigma, t)
                       for t in gridv])
    z3_err = float(np.max(np.abs(samples[:, :, 2] - z3_ref[None, :])))
    checks = [Check("z3_closed_form", z3_err <= 1e-10,
                    f"max |z3 - closed form| = {z3_err:.3e} (tol 1e-10)")]
    lines = ["path_id,t,z1,z2,z3,env"]
    for r in range(samples.shape[0]):
        for g, t in enumerate(gridv):
            s = samples[r, g]
            lines.append(f"{r},{float(t)!r},{float(s[0])!r},{float(s[1])!r},"
                         f"{float(s[2])!r},{int(s[3])}")
    files = {"paths.csv": "\n".join(lines) + "\n"}
    metrics = {"moments": _sde_moments(samples, gridv),
               "mean_clamp": float(clamp_acc.mean()),
               "jump_counts": jumps.tolist()}
    return checks, files, metrics


def _sde_task(args):
    system, init, params, config, cnt, seed, off = args
    fn = integrate_sdbk if system == "sdbk" else integrate_sdbkm
    res = fn(init, params, config, cnt, seed, role=0, rep_offset=off)
    return res.samples, res.clamp_accumulated, res.jump_counts


def run_duality(cfg: ExperimentConfig, workers: int = 1):
    """Duality-gap grid; each cell passes iff |gap| <= 4 pooled SE."""
    z = cfg.extra.get("z", [0.25, 0.25, 0.5])
    env_mode = cfg.extra.get("env_mode", "stationary")
    cells = cfg.extra.get("cells", [{"t": 1.0, "n": 1, "m": 0}])
    rows = [DUALITY_CSV_HEADER]
    checks = []
    for idx, cell in enumerate(cells):
        inst = DualityInstance(
            cfg.params, cfg.n_pop,
            FrequencyState(z[0], z[1], z[2], cfg.env0),
            (int(cell["n"]), int(cell["m"])), float(cell["t"]),
            cfg.replicates, env_mode=env_mode)
        # distinct stream roles per cell keep the grid cells independent
        lhs, rhs, gap, se = _duality_cell(inst, cfg.master_seed, workers,
                                          roles=(2 * idx + 1, 2 * idx + 2))
        rows.append(csv_row(inst, lhs, rhs, gap, se))
        ok = abs(gap) <= IDENTITY_K_SIGMA * se
        checks.append(Check(
            f"duality_t{cell['t']}_n{cell['n']}_m{cell['m']}", ok,
            f"gap={gap:+.3e} 4se={IDENTITY_K_SIGMA * se:.3e}"))
    files = {"duality.csv": "\n".join(rows) + "\n"}
    return checks, files, {"cells": len(cells)}


def _duality_cell(inst: DualityInstance, seed: int, workers: int,
                  roles: tuple[int, int] = (1, 2)):
    if workers <= 1:
        return duality_gap(inst, seed, roles=roles)
    from .duality import gap_from_values
    tasks = [(inst, seed, off, cnt, roles) for off, cnt in
             _chunk_ranges(inst.replicates, workers)]
    with mp.get_context("fork").Pool(workers) as pool:
        parts = pool.map(_duality_task, tasks)
    # assemble per-replicate values in index order, then summarize once, so
    # the statistics are bit-identical for any worker count
    lhs_vals = np.concatenate([p[0] for p in parts])
    rhs_vals = np.concatenate([p[1] for p in parts])
    return gap_from_values(lhs_vals, rhs_vals)


def _duality_task(args):
    inst, seed, off, cnt, roles = args
    from .duality import backward_h_values, forward_h_values
    return (forward_h_values(inst, seed, off, cnt, roles[0]),
            backward_h_values(inst, seed, off, cnt, roles[1]))


def run_generator_conv(cfg: ExperimentConfig, workers: int = 1):
    """First-order convergence of the finite generator to the limit one."""
    n_values = [int(v) for v in cfg.extra.get("n_values", [100, 200])]
    table = convergence_table(n_values, cfg.params,
                              z3=float(cfg.extra.get("z3", 0.5)))
    checks = []
    n_lo, n_hi = min(n_values), max(n_values)
    for name, by_n in table.items():
        e_lo, e_hi = by_n[n_lo], by_n[n_hi]
        if e_lo < 1e-10 and e_hi < 1e-10:
            checks.append(Check(f"generator_exact_{name}", True,
                                f"errors below 1e-10 at N={n_lo} and N={n_hi}"
                                " (operator is exact for this function)"))
        else:
            ratio = e_lo / e_hi if e_hi > 0 else math.inf
            ok = 1.5 <= ratio <= 2.5
            checks.append(Check(f"generator_ratio_{name}", ok,
                                f"err({n_lo})/err({n_hi}) = {ratio:.3f} "
                                "(expect [1.5, 2.5])"))
    files = {"generator_convergence.csv": convergence_csv(table)}
    return checks, files, {"table": {k: {str(n): v for n, v in d.items()}
                                     for k, d in table.items()}}


def run_fixation_equiv(cfg: ExperimentConfig, workers: int = 1):
    """Fixation-conditioning experiment.

    (i) over runs to monomorphism, the fixing allele must equal the initial
        level-1 allele (zero disagreements);
    (ii) the time-t_obs full-model heart-active frequency has the same law
        under rejection-sampled fixing unordered runs, the conditioned
        ordered run (levels above 1), and the reduced model with the induced
        mutation measure;
    (iii) optionally, rerunning the reduced model under the literal
        environment orientation with alpha != sigma must break (ii).
    """
    if cfg.params.mutation.total_mass() > 0:
        raise ValueError("fixation experiment requires a zero mutation measure")
    n = cfg.n_pop
    init = cfg.init if cfg.init is not None else _default_init(n)
    ha, hd, sa, sd = init
    t_obs = float(cfg.extra.get("t_obs", 0.5))
    reps_fix = int(cfg.extra.get("reps_fixation", cfg.replicates))
    reps_ks = int(cfg.extra.get("reps_ks", 5000))
    demonstrate = bool(cfg.extra.get("demonstrate_convention_failure", False))
    seed = cfg.master_seed
    checks = []

    # (i) fixation equivalence on ordered runs to monomorphism
    _, fix, lvl1, _ = run_lookdown_chunked(
        cfg.params, init, cfg.env0, [], reps_fix, seed, role=0,
        workers=workers, until_monomorphic=True)
    heart_fixed = fix[:, 0] == 1
    disagree = int((heart_fixed != (lvl1 == 1)).sum())
    checks.append(Check("fixation_equivalence", disagree == 0,
                        f"{disagree} disagreements in {reps_fix} runs"))

    # (ii) three conditioned samples of the full-model frequency at t_obs
    need = reps_ks
    moran_reps = int(cfg.extra.get("reps_moran", int(2.4 * need)))
    samples, fixm, _, _ = run_freq_chunked(
        cfg.params, (ha, sa, hd, sd), cfg.env0, [t_obs], moran_reps, seed,
        role=1, workers=workers, need_mono=True)
    keep = fixm[:, 0] == FIXED_HEART
    moran_z1 = samples[keep, 0, 0] / n
    direct = _conditioned_sample(cfg, init, t_obs, need, seed, role=2,
                                 workers=workers, reduced=False)
    reduced = _conditioned_sample(cfg, init, t_obs, need, seed, role=3,
                                  workers=workers, reduced=True)
    p_md, p_mr, p_dr = _pairwise_ks(moran_z1[:need], direct, reduced)
    ok = min(p_md, p_mr, p_dr) > DISTRIBUTIONAL_P and len(moran_z1) >= need
    checks.append(Check(
        "conditioned_law_equality", ok,
        f"KS p: rejection-vs-direct={p_md:.4f} rejection-vs-reduced={p_mr:.4f} "
        f"direct-vs-reduced={p_dr:.4f} (need all > {DISTRIBUTIONAL_P})"))

    metrics = {"heart_fixed_fraction": float(heart_fixed.mean()),
               "ks_p": {"rejection_vs_direct": p_md,
                        "rejection_vs_reduced": p_mr,
                        "direct_vs_reduced": p_dr}}

    # (iii) the literal environment orientation must fail detectably
    if demonstrate:
        alpha = float(cfg.extra.get("literal_alpha", 2.0))
        sigma = float(cfg.extra.get("literal_sigma", 0.5))
        base = SimParams(cfg.params.reproduction, cfg.params.mutation,
                         alpha, sigma, EnvConvention.ACTIVITY_MATCHED)
        cfg_lit = ExperimentConfig(
            experiment="fixation_equiv", params=base, n_pop=n,
            replicates=cfg.replicates, horizon=cfg.horizon,
            record=cfg.record, master_seed=seed, init=init, env0=cfg.env0,
            extra=cfg.extra)
        direct2 = _conditioned_sample(cfg_lit, init, t_obs, need, seed,
                                      role=4, workers=workers, reduced=False)
        lit = SimParams(base.reproduction, base.mutation, alpha, sigma,
                        EnvConvention.PAPER_LITERAL)
        cfg_lit2 = ExperimentConfig(
            experiment="fixation_equiv", params=lit, n_pop=n,
            replicates=cfg.replicates, horizon=cfg.horizon,
            record=cfg.record, master_seed=seed, init=init, env0=cfg.env0,
            extra=cfg.extra)
        reduced2 = _conditioned_sample(cfg_lit2, init, t_obs, need, seed,
                                       role=5, workers=workers, reduced=True)
        _, p_bad = ks_two_sample(direct2, reduced2)
        checks.append(Check(
            "literal_convention_fails", p_bad < DISTRIBUTIONAL_P,
            f"KS p = {p_bad:.2e} under the literal orientation "
            f"(must be < {DISTRIBUTIONAL_P} to demonstrate the mismatch)"))
        metrics["ks_p_literal"] = p_bad

    files = {"summary.csv": "check,passed,detail\n" + "".join(
        f"{c.name},{int(c.passed)},\"{c.detail}\"\n" for c in checks)}
    return checks, files, metrics


def _conditioned_sample(cfg, init, t_obs, reps, seed, role, workers,
                        reduced: bool):
    """Full-model heart-active frequency at t_obs under conditioning."""
    n = cfg.n_pop
    if reduced:
        params = SimParams(
            cfg.params.reproduction,
            induced_mutation_measure(cfg.params.reproduction),
            cfg.params.alpha, cfg.params.sigma, cfg.params.env_convention)
        samples, _, _, _ = run_lookdown_chunked(
            params, init, cfg.env0, [t_obs], reps, seed, role=role,
            workers=workers, reduce_level1=True)
    else:
        samples, _, _, _ = run_lookdown_chunked(
            cfg.params, init, cfg.env0, [t_obs], reps, seed, role=role,
            workers=workers, force_level1_heart=True, report_upper=True)
    z1_upper = samples[:, 0, 0]
    env = samples[:, 0, 3]
    return ((n - 1) * z1_upper + env) / n


def _pairwise_ks(a, b, c):
    _, p_ab = ks_two_sample(a, b)
    _, p_ac = ks_two_sample(a, c)
    _, p_bc = ks_two_sample(b, c)
    return p_ab, p_ac, p_bc


RUNNERS = {
    "moran": run_moran,
    "lookdown": run_lookdown_exp,
    "coalescent": run_coalescent,
    "sde": run_sde,
    "duality": run_duality,
    "generator_conv": run_generator_conv,
    "fixation_equiv": run_fixation_equiv,
}


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path,
                   workers: int = 1) -> tuple[bool, dict]:
    """Execute an experiment and write paths.csv / summary.json / report.txt.

    Returns (all_checks_passed, summary dict).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    checks, files, metrics = RUNNERS[cfg.experiment](cfg, workers=workers)
    for name, text in files.items():
        (out / name).write_text(text)
    summary = {
        "experiment": cfg.experiment,
        "config_hash": cfg.config_hash(),
        "seed": cfg.master_seed,
        "version": __version__,
        "checks": [{"name": c.name, "passed": bool(c.passed), "detail": c.detail}
                   for c in checks],
        "metrics": metrics,
        "all_passed": bool(all(c.passed for c in checks)),
    }
    (out / "summary.json").write_text(json.dumps(summary, sort_keys=True,
                                                 indent=1))
    lines = [f"experiment: {cfg.experiment}",
             f"config hash: {cfg.config_hash()}",
             f"seed: {cfg.master_seed}",
             f"version: {__version__}", ""]
    for c in checks:
        lines.append(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}")
    if not checks:
        lines.append("(no registered checks for this experiment)")
    (out / "report.txt").write_text("\n".join(lines) + "\n")
    return summary["all_passed"], summary


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------


def _default_init(n_pop: int) -> tuple[int, int, int, int]:
    """Half hearts, half active, balanced across the four classes."""
    q, r = divmod(n_pop, 4)
    counts = [q + (1 if i < r else 0) for i in range(4)]
    return tuple(counts)  # (ha, hd, sa, sd)


def _samples_csv(samples: np.ndarray, grid, n_pop: int) -> str:
    lines = ["replicate,t,z1,z2,z3,env"]
    for r in range(samples.shape[0]):
        for g, t in enumerate(grid):
            n1, d1, nact, s = samples[r, g]
            lines.append(f"{r},{float(t)!r},{float(n1) / n_pop!r},"
                         f"{float(d1) / n_pop!r},{float(nact) / n_pop!r},"
                         f"{int(s)}")
    return "\n".join(lines) + "\n"


def _lookdown_csv(samples: np.ndarray, grid) -> str:
    lines = ["replicate,t,z1,z2,z3,env"]
    for r in range(samples.shape[0]):
        for g, t in enumerate(grid):
            z1, z2, z3, s = samples[r, g]
            lines.append(f"{r},{float(t)!r},{float(z1)!r},{float(z2)!r},"
                         f"{float(z3)!r},{int(s)}")
    return "\n".join(lines) + "\n"


def _grid_moments(samples: np.ndarray, grid, n_pop: int) -> dict:
    out = {}
    for g, t in enumerate(grid):
        z1 = samples[:, g, 0] / n_pop
        z2 = samples[:, g, 1] / n_pop
        out[str(t)] = {
            "mean_z1": float(z1.mean()),
            "se_z1": float(z1.std(ddof=1) / math.sqrt(len(z1))),
            "mean_z2": float(z2.mean()),
            "se_z2": float(z2.std(ddof=1) / math.sqrt(len(z2))),
        }
    return out


def _sde_moments(samples: np.ndarray, grid) -> dict:
    out = {}
    for g, t in enumerate(grid):
        z1 = samples[:, g, 0]
        out[str(float(t))] = {
            "mean_z1": float(z1.mean()),
            "var_z1": float(z1.var(ddof=1)),
            "se_z1": float(z1.std(ddof=1) / math.sqrt(len(z1))),
        }
    return out


def _event_audit_checks(counts: np.ndarray, integrals: np.ndarray) -> list[Check]:
    """count / integrated rate must be 1 within 4/sqrt(count) per class."""
    names = ["pair", "activity_flip", "env_flip", "large", "single_mutation",
             "coordinated_mutation"]
    checks = []
    for i, name in enumerate(names):
        if integrals[i] <= 0:
            continue
        if counts[i] < 100:
            continue  # too few events for a meaningful ratio
        ratio = counts[i] / integrals[i]
        tol = IDENTITY_K_SIGMA / math.sqrt(counts[i])
        checks.append(Check(f"event_rate_{name}", abs(ratio - 1.0) <= tol,
                            f"count/integral = {ratio:.4f} (tol {tol:.4f})"))
    return checks


def _martingale_check(samples: np.ndarray, grid, n_pop: int,
                      init: tuple[int, int, int, int]) -> Check:
    ha, hd, _, _ = init
    target = (ha + hd) / n_pop
    worst = 0.0
    detail = []
    ok = True
    for g, t in enumerate(grid):
        tot = (samples[:, g, 0] + samples[:, g, 1]) / n_pop
        se = tot.std(ddof=1) / math.sqrt(len(tot))
        dev = abs(tot.mean() - target)
        if se > 0:
            zscore = dev / se
            worst = max(worst, zscore)
            ok = ok and dev <= IDENTITY_K_SIGMA * se
            detail.append(f"t={t}: dev={dev:.2e} ({zscore:.2f} se)")
    return Check("heart_mass_conserved", ok, "; ".join(detail))
