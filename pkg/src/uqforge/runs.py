"""Example drivers: each wires a problem to a sampler and the output writers."""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import problems
from .domain import PriorSpec, TargetDensity
from .dram import DramOptions, run_dram
from .errors import InvalidArgumentError
from .forward import param_qoi_joint_stats, propagate
from .gsa import analyze, build_design, convergence_sweep, write_gsa_files, write_sweep_csv
from .multilevel import LevelMhOptions, MlOptions, run_amssa
from .options import (
    EnvSpec,
    OptionSet,
    check_supported,
    open_display_file,
    read_matrix_file,
    read_options,
    seed_for_worker,
    write_chain_files,
    write_csv,
)
from .sequence import (
    FilterSpec,
    SampleSequence,
    autocorrelation,
    ecdf,
    filter_sequence,
    gaussian_kde,
    mean_and_covariance,
    unify,
)

log = logging.getLogger(__name__)

REPORT_NAME = "run_report.json"


@dataclass
class RunReport:
    subcommand: str
    options_file: str
    seed: int
    workers: int
    manifest: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def to_json(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "options_file": self.options_file,
            "seed": self.seed,
            "workers": self.workers,
            "manifest": [str(p) for p in self.manifest],
            "summary": _jsonable(self.summary),
            "wall_time_s": self.wall_time,
        }


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.floating, float)):
        return float(v) if math.isfinite(v) else str(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


@dataclass
class RunContext:
    """What the command line adds on top of the option file."""

    options_file: str
    out_dir: Path = Path(".")
    seed: int | None = None
    workers: int | None = None
    extra: dict = field(default_factory=dict)

    def load(self) -> tuple[OptionSet, EnvSpec]:
        overrides = {}
        if self.seed is not None:
            overrides["env_seed"] = self.seed
        if self.workers is not None:
            overrides["env_numSubEnvironments"] = self.workers
        opts = read_options(self.options_file, overrides)
        return opts, EnvSpec.from_options(opts)


class _Outputs:
    """Collects written files and the per-worker display sinks."""

    def __init__(self, ctx: RunContext, env: EnvSpec):
        self.ctx = ctx
        self.out_dir = Path(ctx.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.files: list[Path] = []
        self.displays = {}
        for w in range(env.num_sub_environments):
            sink = open_display_file(env, w, self.out_dir)
            if sink is not None:
                self.displays[w] = sink
                self.files.append(Path(sink.name))

    def say(self, msg: str, worker: int | None = None):
        targets = self.displays.items() if worker is None else [(worker, self.displays.get(worker))]
        for _, sink in targets:
            if sink is not None:
                sink.write(msg + "\n")

    def add(self, paths):
        self.files.extend(Path(p) for p in paths)

    def chains(self, base: str, var: str, per_worker):
        if base == ".":
            return
        self.add(write_chain_files(base, var, per_worker, self.out_dir))

    def csv(self, name: str, header, columns):
        self.files.append(write_csv(self.out_dir / name, header, columns))

    def close(self):
        for sink in self.displays.values():
            sink.close()

    def manifest(self) -> list[str]:
        out = []
        for p in self.files:
            try:
                out.append(str(p.relative_to(self.out_dir)))
            except ValueError:
                out.append(str(p))
        return out


def _finish(report: RunReport, outs: _Outputs, started: float) -> RunReport:
    outs.close()
    report.manifest = outs.manifest()
    missing = [m for m in outs.files if not m.exists()]
    if missing:
        raise OSError(f"expected output files are missing: {missing}")
    report.wall_time = time.perf_counter() - started
    path = outs.out_dir / REPORT_NAME
    path.write_text(json.dumps(report.to_json(), indent=2) + "\n")
    return report


def _stats(seq: SampleSequence) -> dict:
    mean, cov = mean_and_covariance(seq)
    return {"n": len(seq), "mean": mean, "covariance": cov}


def _diagnostic_tables(outs: _Outputs, stem: str, seq: SampleSequence, max_lag: int = 100, grid_points: int = 100):
    x = seq.samples
    for i in range(seq.dim):
        col = x[:, i]
        lo, hi = float(col.min()), float(col.max())
        pad = 0.1 * (hi - lo) if hi > lo else 1.0
        grid = np.linspace(lo - pad, hi + pad, grid_points)
        name = f"theta{i + 1}"
        if len(seq) >= 10:
            outs.csv(f"{stem}_kde_{name}.csv", ["grid", "kde"], [grid, gaussian_kde(seq, i, grid)])
        outs.csv(f"{stem}_ecdf_{name}.csv", ["grid", "ecdf"], [grid, ecdf(seq, i, grid)])
        lags = min(max_lag, len(seq) - 1)
        if lags >= 1 and np.ptp(col) > 0:
            outs.csv(f"{stem}_autocorr_{name}.csv", ["lag", "autocorr"], [np.arange(lags + 1), autocorrelation(seq, i, lags)])


def dram_options(opts: OptionSet, family: str, start, cov) -> DramOptions:
    """DRAM settings from an ``ip_mh_`` style family; ``start``/``cov`` are fallbacks."""
    g = lambda name: opts.get(f"{family}_{name}")  # noqa: E731
    start = np.atleast_1d(np.asarray(start, dtype=float))
    if g("initialPositionDataInputFileName") != ".":
        start = read_matrix_file(g("initialPositionDataInputFileName")).ravel()
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if g("initialProposalCovMatrixDataInputFileName") != ".":
        cov = read_matrix_file(g("initialProposalCovMatrixDataInputFileName"))
    extra = g("drMaxNumExtraStages")
    if extra < 0:
        raise InvalidArgumentError(f"{family}_drMaxNumExtraStages must be non-negative")
    scales = list(g("drScalesForExtraStages"))[:extra]
    scales += [scales[-1] if scales else 1.0] * (extra - len(scales))
    s_d = g("amEta") if opts.from_file(f"{family}_amEta") else None
    return DramOptions(
        n_pos=g("rawChainSize"),
        initial_position=start,
        initial_proposal_cov=cov,
        n_stages=1 + extra,
        stage_scales=[1.0] + scales,
        s_d=s_d,
        epsilon=g("amEpsilon"),
        n0=g("amInitialNonAdaptInterval"),
        adapt_interval=g("amAdaptInterval"),
        out_of_bounds_in_chain=bool(g("putOutOfBoundsInChain")),
    )


def _run_dram_workers(target: TargetDensity, options: DramOptions, env: EnvSpec, outs: _Outputs):
    n = env.num_sub_environments
    seeds = [seed_for_worker(env.seed, w, n) for w in range(n)]

    def one(w):
        return run_dram(target, options, np.random.default_rng(seeds[w]), worker=w)

    if n == 1:
        results = [one(0)]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(one, range(n)))
    for w, res in enumerate(results):
        outs.say(f"worker {w}: seed {seeds[w]}, {res.n_sweeps} sweeps, "
                 f"acceptance {res.acceptance_rate:.4f}, out of support {res.out_of_support}", w)
    return results


def _sip(opts: OptionSet, env: EnvSpec, outs: _Outputs, target: TargetDensity, start, cov, stem: str):
    """Shared DRAM inverse-problem pipeline; returns (raw unified, filtered unified or None, summary)."""
    check_supported(opts, "ip_mh")
    mh = dram_options(opts, "ip_mh", start, cov)
    results = _run_dram_workers(target, mh, env, outs)
    raw = [r.chain for r in results]
    outs.chains(opts.get("ip_mh_rawChainDataOutputFileName"), "ip_mh_rawChain", list(enumerate(c.samples for c in raw)))
    raw_all = unify(raw)
    summary = {"raw": _stats(raw_all), "acceptance_rate": [r.acceptance_rate for r in results]}
    filtered_all = None
    if opts.get("ip_mh_filteredChainGenerate"):
        spec = FilterSpec(opts.get("ip_mh_filteredChainDiscardedPortion"), opts.get("ip_mh_filteredChainLag"))
        filtered = [filter_sequence(c, spec) for c in raw]
        outs.chains(opts.get("ip_mh_filteredChainDataOutputFileName"), "ip_mh_filtChain",
                    list(enumerate(c.samples for c in filtered)))
        filtered_all = unify(filtered)
        summary["filtered"] = _stats(filtered_all)
    _diagnostic_tables(outs, stem, raw_all)
    return raw_all, filtered_all, summary


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def run_sip_simple(ctx: RunContext) -> RunReport:
    started = time.perf_counter()
    opts, env = ctx.load()
    outs = _Outputs(ctx, env)
    try:
        target = TargetDensity.from_prior(problems.simple_sip_prior(), problems.simple_sip_loglike)
        _, _, summary = _sip(opts, env, outs, target, [0.0, 0.0], np.diag([8.0, 2.0]), "sip_simple")
    finally:
        outs.close()
    report = RunReport("sip-simple", ctx.options_file, env.seed, env.num_sub_environments, summary=summary)
    return _finish(report, outs, started)


def _prior_mc(opts: OptionSet, env: EnvSpec, prior: PriorSpec, qoi, outs: _Outputs):
    n = env.num_sub_environments
    size = opts.get("fp_mc_qseq_size")
    params, qois = [], []
    for w in range(n):
        rng = np.random.default_rng(seed_for_worker(env.seed, w, n))
        p, q = propagate(prior, qoi, size, rng)
        params.append(SampleSequence(p.samples, origin_worker=w))
        qois.append(SampleSequence(q.samples, origin_worker=w))
    return params, qois


def _sfp_outputs(opts: OptionSet, outs: _Outputs, params, qois, stem: str) -> dict:
    outs.chains(opts.get("fp_mc_pseq_dataOutputFileName"), "fp_mc_ParamSeq",
                [(s.origin_worker, s.samples) for s in params])
    outs.chains(opts.get("fp_mc_qseq_dataOutputFileName"), "fp_mc_QoiSeq",
                [(s.origin_worker, s.samples) for s in qois])
    p_all, q_all = unify(params), unify(qois)
    summary = {"param": _stats(p_all), "qoi": _stats(q_all)}
    if opts.get("fp_computeCovariances") or opts.get("fp_computeCorrelations"):
        cov, corr = param_qoi_joint_stats(p_all, q_all)
        if opts.get("fp_computeCovariances"):
            summary["param_qoi_covariance"] = cov
        if opts.get("fp_computeCorrelations"):
            summary["param_qoi_correlation"] = corr
    _diagnostic_tables(outs, f"{stem}_qoi", q_all)
    return summary


def run_sfp_simple(ctx: RunContext) -> RunReport:
    started = time.perf_counter()
    opts, env = ctx.load()
    outs = _Outputs(ctx, env)
    try:
        params, qois = _prior_mc(opts, env, problems.simple_sfp_prior(), problems.sum_qoi(), outs)
        summary = _sfp_outputs(opts, outs, params, qois, "sfp_simple")
    finally:
        outs.close()
    report = RunReport("sfp-simple", ctx.options_file, env.seed, env.num_sub_environments, summary=summary)
    return _finish(report, outs, started)


def run_gravity(ctx: RunContext) -> RunReport:
    started = time.perf_counter()
    opts, env = ctx.load()
    outs = _Outputs(ctx, env)
    try:
        target = TargetDensity.from_prior(problems.gravity_prior(), problems.gravity_loglike)
        raw, _, sip = _sip(opts, env, outs, target, [9.5], [[0.01]], "gravity_sip")
        summary = {"sip": sip}
        if opts.get("fp_computeSolution"):
            requested = opts.get("fp_mc_qseq_size")
            per_worker = len(raw) // env.num_sub_environments
            if requested != per_worker:
                outs.say(f"fp_mc_qseq_size = {requested} replaced by {per_worker}: "
                         "the forward problem uses every position of the posterior chain")
            qoi = problems.gravity_qoi(**ctx.extra.get("gravity", {}))
            params, qois = [], []
            for w in range(env.num_sub_environments):
                chunk = SampleSequence(raw.samples[w * per_worker:(w + 1) * per_worker], origin_worker=w)
                p, q = propagate(chunk, qoi)
                params.append(p)
                qois.append(q)
            summary["sfp"] = _sfp_outputs(opts, outs, params, qois, "gravity_sfp")
    finally:
        outs.close()
    report = RunReport("gravity", ctx.options_file, env.seed, env.num_sub_environments, summary=summary)
    return _finish(report, outs, started)


def _level_mh(opts: OptionSet, level, is_last: bool) -> LevelMhOptions:
    e = lambda name: opts.level_entry(level, name, is_last)  # noqa: E731
    extra = e("drMaxNumExtraStages").value
    scales = list(e("drScalesForExtraStages").value)[:extra]
    scales += [scales[-1] if scales else 1.0] * (extra - len(scales))
    eta = e("amEta")
    return LevelMhOptions(
        n_stages=1 + extra,
        stage_scales=[1.0] + scales,
        n0=e("amInitialNonAdaptInterval").value,
        adapt_interval=e("amAdaptInterval").value,
        s_d=eta.value if eta.provenance == "file" else None,
        epsilon=e("amEpsilon").value,
        scale_cov=bool(e("scaleCovMatrix").value),
        n_total=e("rawChainSize").value,
    )


def ml_options(opts: OptionSet, env: EnvSpec, chain_layout: str = "multiplicity") -> MlOptions:
    check_supported(opts, "ip_ml")
    explicit = opts.level_keys_set()
    return MlOptions(
        n_total=opts.level_value(None, "rawChainSize"),
        beta_min=opts.level_value(None, "minEffectiveSizeRatio"),
        beta_max=opts.level_value(None, "maxEffectiveSizeRatio"),
        n_workers=env.num_sub_environments,
        seed=env.seed,
        chain_layout=chain_layout,
        mh=_level_mh(opts, None, False),
        level_mh={lv: _level_mh(opts, lv, False) for lv in explicit if isinstance(lv, int)},
        last_level_mh=_level_mh(opts, None, True) if "last" in explicit else None,
    )


def _level_chain_base(opts: OptionSet, level: int, is_last: bool) -> str:
    entry = opts.level_entry(level, "rawChainDataOutputFileName", is_last)
    if entry.value == "." or entry.key.startswith(f"ip_ml_{level}_"):
        return entry.value
    return f"{entry.value}_level{level}"


def _run_ml(ctx: RunContext, name: str, stem: str, prior, loglike, extra_summary=None) -> RunReport:
    started = time.perf_counter()
    opts, env = ctx.load()
    outs = _Outputs(ctx, env)
    try:
        ml = ml_options(opts, env, ctx.extra.get("chain_layout", "multiplicity"))
        result = run_amssa(prior, loglike, ml, keep_levels=True)
        last = len(result.levels) - 1
        for rec in result.levels:
            outs.say(f"level {rec.level}: tau {rec.tau:.10g}, ess ratio {rec.ess_ratio:.6f}, "
                     f"log c {rec.log_c:.10g}, {rec.n_samples} samples")
            base = _level_chain_base(opts, rec.level, rec.level == last)
            totals = rec.worker_totals or [rec.n_samples]
            cuts = np.concatenate([[0], np.cumsum(totals)])
            outs.chains(base, f"ip_ml_{rec.level}_rawChain",
                        [(w, rec.samples.samples[cuts[w]:cuts[w + 1]]) for w in range(len(totals)) if totals[w]])
            _diagnostic_tables(outs, f"{stem}_level{rec.level}", rec.samples)
        outs.csv(f"{stem}_levels.csv", ["level", "tau", "ess_ratio", "log_c", "n_samples"],
                 [[r.level for r in result.levels], np.array(result.taus, dtype=float),
                  np.array([r.ess_ratio for r in result.levels], dtype=float),
                  np.array([r.log_c for r in result.levels], dtype=float),
                  [r.n_samples for r in result.levels]])
        summary = {
            "log_evidence": result.log_evidence,
            "n_levels": len(result.levels),
            "taus": result.taus,
            "ess_ratios": [r.ess_ratio for r in result.levels],
            "posterior": _stats(result.samples),
        }
        if extra_summary is not None:
            summary.update(extra_summary(result))
    finally:
        outs.close()
    report = RunReport(name, ctx.options_file, env.seed, env.num_sub_environments, summary=summary)
    return _finish(report, outs, started)


def run_bimodal(ctx: RunContext) -> RunReport:
    def masses(result):
        x = result.samples.samples[:, 0]
        low = float(np.mean(x < problems.BIMODAL_SPLIT))
        return {"mode_mass": [low, 1.0 - low]}

    return _run_ml(ctx, "bimodal", "bimodal", problems.bimodal_prior(), problems.bimodal_loglike, masses)


def run_modal(ctx: RunContext, num_modes: int = 1, concatenated_prior: bool = False) -> RunReport:
    prior = problems.modal_prior(num_modes, concatenated_prior)
    extra = {"num_modes": num_modes, "concatenated_prior": concatenated_prior}
    return _run_ml(ctx, "modal", f"modal_{num_modes}mode", prior, problems.modal_loglike(num_modes),
                   lambda _: extra)


def run_gsa_line(ctx: RunContext, n_samples: int | None = None, x: float = 2.0) -> RunReport:
    started = time.perf_counter()
    opts, env = ctx.load()
    outs = _Outputs(ctx, env)
    try:
        N = opts.get("fp_mc_qseq_size") if n_samples is None else int(n_samples)
        if N < 2:
            raise InvalidArgumentError("the sensitivity design needs at least 2 samples")
        rng = np.random.default_rng(seed_for_worker(env.seed, 0, 1))
        design = build_design(problems.line_priors(), N, problems.line_qoi(x), rng,
                              list(problems.LINE_NAMES), env.num_sub_environments)
        outs.add(write_gsa_files(design, outs.out_dir / "gsa"))
        res = analyze(design)
        sizes = [s for s in (100, 250, 500, 1000, 2500, 5000, 10000, 25000, 50000, 100000) if s < N] + [N]
        outs.add([write_sweep_csv(convergence_sweep(design, sizes), outs.out_dir / "gsa_sweep.csv")])
        summary = {
            "N": N,
            "x": x,
            "f0": res.f0,
            "V": res.V,
            "indices": {f"{e.kind}:{e.parameter}:{e.method}": e.value for e in res.estimates},
            "exact_first_order": problems.line_exact_indices(x),
        }
        outs.say(f"GSA on y = m*{x} + c with N = {N}: f0 {res.f0:.10g}, V {res.V:.10g}")
    finally:
        outs.close()
    report = RunReport("gsa-line", ctx.options_file, env.seed, env.num_sub_environments, summary=summary)
    return _finish(report, outs, started)
