"""Scenario runner: `zeno-nh run|validate|list-scenarios|version`.

A scenario JSON carries the model fields (M, N, J, U, boundary, kappa,
C_re, C_im, pattern, N0_K), an initial occupation vector, one or more
engines, and the numerics block (dt, t_final, n_traj, base_seed,
sample_points).  Every engine writes CSV payloads plus a shared manifest
into one run directory; outputs are deterministic for a fixed seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from . import fockspace as fs
from . import inference as inf
from . import master_eq as meq
from . import model as mdl
from . import steady_state as sst
from . import trajectories as trj
from . import zeno_effective as zef
from .exceptions import ValidationError, ZenoError
from .kernels import BACKEND_NAME
from .output import RunManifest, write_csv
from .rng import RNG_IDENTIFIER, stream_seed
from .scenarios import BUILTIN_SCENARIOS

ENGINES = ("lindblad", "trajectory", "ensemble", "nonhermitian", "raman",
           "steady_state", "infer")

#: tracked-population columns are capped at this many Fock states
MAX_TRACKED = 12


@dataclass
class Numerics:
    dt: float
    t_final: float
    n_traj: int
    base_seed: int
    sample_points: int


@dataclass
class Scenario:
    name: str
    params: mdl.BhmParams
    meas: mdl.MeasurementConfig
    engines: list[str]
    numerics: Numerics
    initial_state: tuple | None
    steady_state: dict | None
    infer: dict | None
    raw: dict


def _need(data, key, kind, check=None, msg=""):
    if key not in data:
        raise ValidationError(key, "missing required field")
    val = data[key]
    try:
        val = kind(val)
    except (TypeError, ValueError):
        raise ValidationError(key, f"expected {kind.__name__}, got {val!r}") from None
    if check is not None and not check(val):
        raise ValidationError(key, msg or f"invalid value {val!r}")
    return val


def validate_scenario(data: dict) -> Scenario:
    """Full field validation; raises ValidationError naming the bad field."""
    name = str(data.get("name", "scenario"))
    M = _need(data, "M", int, lambda v: v >= 1, "must be a positive integer")
    N = _need(data, "N", int, lambda v: v >= 0, "must be >= 0")
    J = _need(data, "J", float, lambda v: v >= 0, "must be >= 0")
    U = _need(data, "U", float)
    boundary = _need(data, "boundary", str, lambda v: v in ("periodic", "open"),
                     "must be 'periodic' or 'open'")
    kappa = _need(data, "kappa", float, lambda v: v > 0, "must be > 0")
    C = complex(_need(data, "C_re", float), float(data.get("C_im", 0.0)))
    n0k = _need(data, "N0_K", float) if "N0_K" in data else 0.0

    lattice = fs.LatticeConfig(sites=M, atoms=N, boundary=boundary)
    params = mdl.BhmParams(J=J, U=U, lattice=lattice)

    pattern = data.get("pattern", "all_sites")
    if isinstance(pattern, str):
        pattern_vec = mdl.named_pattern(pattern, M)
    else:
        pattern_vec = np.asarray([complex(p) for p in pattern])
        if pattern_vec.shape != (M,):
            raise ValidationError("pattern", f"expected length {M}")
    meas = mdl.MeasurementConfig(kappa=kappa, C=C, pattern=tuple(pattern_vec), n0_k=n0k)

    engines = data.get("engines", data.get("engine"))
    if engines is None:
        raise ValidationError("engines", "missing required field")
    if isinstance(engines, str):
        engines = [engines]
    for e in engines:
        if e not in ENGINES:
            raise ValidationError("engines", f"unknown engine {e!r}; choose from {ENGINES}")

    ndata = data.get("numerics", {})
    dt = float(ndata.get("dt", 0.0))
    t_final = float(ndata.get("t_final", 0.0))
    if dt <= 0:
        raise ValidationError("numerics.dt", "must be > 0")
    if t_final <= 0:
        raise ValidationError("numerics.t_final", "must be > 0")
    rate = max(meas.gamma, J, abs(U))
    if dt > 0.05 / rate + 1e-15:
        raise ValidationError(
            "numerics.dt", f"dt={dt} violates the stability heuristic 0.05/max(gamma, J, |U|)={0.05 / rate:g}"
        )
    n_traj = int(ndata.get("n_traj", 1))
    if n_traj < 1:
        raise ValidationError("numerics.n_traj", "must be >= 1")
    sample_points = int(ndata.get("sample_points", 201))
    if sample_points < 2:
        raise ValidationError("numerics.sample_points", "must be >= 2")
    base_seed = int(ndata.get("base_seed", 0))
    numerics = Numerics(dt, t_final, n_traj, base_seed, sample_points)

    initial_state = data.get("initial_state")
    needs_state = any(e in ("lindblad", "trajectory", "ensemble", "nonhermitian", "raman")
                      for e in engines)
    if initial_state is not None:
        initial_state = tuple(int(n) for n in initial_state)
        if len(initial_state) != M:
            raise ValidationError("initial_state", f"expected {M} entries")
        if any(n < 0 for n in initial_state):
            raise ValidationError("initial_state", "occupations must be >= 0")
        if sum(initial_state) != N:
            raise ValidationError("initial_state", f"occupations must sum to N={N}")
    elif needs_state:
        raise ValidationError("initial_state", "required by the requested engines")

    ss_data = data.get("steady_state")
    if "steady_state" in engines:
        if ss_data is None:
            raise ValidationError("steady_state", "engine requires a steady_state block")
        coeffs = ss_data.get("coefficients", "uniform")
        coeffs = None if coeffs == "uniform" else coeffs
        sst.SteadyStateSpec(lattice=lattice, delta_n=int(ss_data.get("delta_N", 0)),
                            coefficients=coeffs)

    infer_data = data.get("infer")
    if "infer" in engines and infer_data is None:
        raise ValidationError("infer", "engine requires an infer block")

    return Scenario(name, params, meas, list(engines), numerics,
                    initial_state, ss_data, infer_data, data)


def load_scenario(ref: str) -> Scenario:
    """Load from a JSON path or from the built-in table."""
    if ref in BUILTIN_SCENARIOS:
        return validate_scenario(BUILTIN_SCENARIOS[ref])
    path = Path(ref)
    if not path.exists():
        raise ValidationError("scenario", f"{ref!r} is neither a file nor a built-in name")
    return validate_scenario(json.loads(path.read_text()))


# ------------------------------------------------------------ engines ----

class _Context:
    """Operators shared by the engines of one run."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.basis = fs.build_basis(scenario.params.lattice)
        self.H0 = mdl.build_hamiltonian(scenario.params, self.basis)
        self.c = mdl.build_jump_operator(scenario.meas, self.basis)
        self.subspaces = mdl.enumerate_zeno_subspaces(scenario.meas, self.basis)
        self.target = self._target_index()
        self.psi0 = None
        if scenario.initial_state is not None:
            self.psi0 = self.basis.state_vector(scenario.initial_state)

    def _target_index(self) -> int | None:
        n0 = self.scenario.meas.n0_k
        for m, sub in enumerate(self.subspaces):
            if abs(sub.eigenvalue - n0) <= 1e-9:
                return m
        return None

    def tracked_indices(self) -> np.ndarray:
        if self.target is not None:
            idx = self.subspaces[self.target].indices
        else:
            idx = np.arange(self.basis.dim)
        return idx[:MAX_TRACKED]

    def tracked_names(self) -> list[str]:
        return [
            "pop_" + "_".join(str(n) for n in self.basis.states[i])
            for i in self.tracked_indices()
        ]


def _engine_nonhermitian(ctx: _Context, manifest: RunManifest, seed: int, threads: int):
    sc = ctx.scenario
    heff = zef.build_effective_hamiltonian(ctx.H0, ctx.c, sc.meas.c0)
    zef.verify_no_gain(heff)
    res = zef.evolve_nonhermitian(ctx.psi0, heff, sc.numerics.t_final,
                                  sc.numerics.dt, sc.numerics.sample_points)
    tracked = ctx.tracked_indices()
    header = ["t"] + ctx.tracked_names() + ["norm", "subspace_leakage"]
    pops = res.populations(tracked)
    if ctx.target is not None:
        leak = 1.0 - res.populations(ctx.subspaces[ctx.target].indices).sum(axis=1)
    else:
        leak = np.zeros_like(res.times)
    cols = [res.times] + [pops[:, i] for i in range(tracked.size)] + [res.norms, leak]
    path = manifest.start_file("nonhermitian.csv", "nonhermitian", "timeseries")
    rows = write_csv(path, header, cols)
    manifest.finish_file("nonhermitian.csv", rows=rows, columns=header)

    if ctx.basis.dim <= zef.DENSE_EIG_CAP:
        spec = zef.spectrum(heff)
        gamma = sc.meas.gamma
        cutoff = 20.0 * sc.params.J**2 / gamma if gamma > 0 else 0.0
        classes = np.where(np.abs(spec.eigenvalues.imag) <= cutoff, 1.0, 0.0)
        path = manifest.start_file("eigenspectrum.csv", "nonhermitian", "spectrum")
        rows = write_csv(
            path,
            ["re", "im", "slow"],
            [spec.eigenvalues.real, spec.eigenvalues.imag, classes],
        )
        manifest.finish_file("eigenspectrum.csv", rows=rows,
                             slow_cutoff=cutoff, columns=["re", "im", "slow"])


def _engine_ensemble(ctx: _Context, manifest: RunManifest, seed: int, threads: int):
    sc = ctx.scenario
    condition = ctx.subspaces[ctx.target].indices if ctx.target is not None else None
    ens = trj.run_ensemble(
        ctx.psi0, ctx.H0, ctx.c, sc.numerics.t_final, sc.numerics.dt,
        sc.numerics.n_traj, seed, sc.numerics.sample_points, threads=threads,
        condition_on=condition,
    )
    tracked = ctx.tracked_indices()
    sub_pops = ens.subspace_populations(ctx.subspaces)
    header = (["t"] + ctx.tracked_names()
              + [f"pop_sub_{i}" for i in range(len(ctx.subspaces))])
    pops = ens.cond_mean_abs2 if ens.cond_mean_abs2 is not None else ens.mean_abs2
    cols = [ens.times] + [pops[:, i] for i in tracked] \
        + [sub_pops[:, i] for i in range(len(ctx.subspaces))]
    if ens.cond_fraction is not None:
        header = header + ["consistent_fraction"]
        cols = cols + [ens.cond_fraction]
    path = manifest.start_file("ensemble.csv", "ensemble", "timeseries")
    rows = write_csv(path, header, cols)
    manifest.finish_file(
        "ensemble.csv", rows=rows, columns=header, n_traj=ens.n_traj,
        mean_jumps=float(ens.jump_counts.mean()),
        subspace_eigenvalues=[s.eigenvalue for s in ctx.subspaces],
    )


def _engine_trajectory(ctx: _Context, manifest: RunManifest, seed: int, threads: int):
    sc = ctx.scenario
    res = trj.run_trajectory(ctx.psi0, ctx.H0, ctx.c, sc.numerics.t_final,
                             sc.numerics.dt, stream_seed(seed, 0),
                             sc.numerics.sample_points)
    obs = trj.observables_series(
        res.states, res.times, ctx.basis, ctx.scenario.meas, ctx.subspaces,
        momentum=ctx.basis.config.boundary == "periodic",
    )
    header = ["t"] + obs.names()
    cols = [obs.times] + [obs.columns[n] for n in obs.names()]
    path = manifest.start_file("trajectory.csv", "trajectory", "timeseries")
    rows = write_csv(path, header, cols)
    manifest.finish_file("trajectory.csv", rows=rows, columns=header,
                         n_jumps=res.record.count, engine_path=res.engine_path)

    path = manifest.start_file("record.json", "trajectory", "detection-record")
    res.record.to_json(path, extra={"seed": res.seed, "scenario": sc.name})
    manifest.finish_file("record.json", n_jumps=res.record.count)


def _engine_lindblad(ctx: _Context, manifest: RunManifest, seed: int, threads: int):
    sc = ctx.scenario
    rho0 = meq.BlockDensityMatrix.from_state(ctx.psi0, ctx.subspaces, ctx.target)
    res = meq.integrate_lindblad(rho0, ctx.H0, ctx.c, sc.numerics.t_final,
                                 sc.numerics.dt, sc.numerics.sample_points)
    purities = [meq.purity(r) for r in res.rhos]
    pops = res.populations()
    header = (["t", "trace", "purity_total", "purity_remainder"]
              + [f"pop_sub_{i}" for i in range(len(ctx.subspaces))])
    cols = [res.times, res.traces,
            np.array([p.total for p in purities]),
            np.array([p.remainder for p in purities])]
    cols += [pops[:, i] for i in range(len(ctx.subspaces))]
    path = manifest.start_file("lindblad.csv", "lindblad", "timeseries")
    rows = write_csv(path, header, cols)
    manifest.finish_file("lindblad.csv", rows=rows, columns=header,
                         trace_drift=res.trace_drift,
                         subspace_eigenvalues=[s.eigenvalue for s in ctx.subspaces])


def _engine_raman(ctx: _Context, manifest: RunManifest, seed: int, threads: int):
    sc = ctx.scenario
    if ctx.target is None:
        raise ValidationError("N0_K", "no measurement eigenspace matches N0_K")
    heff = zef.build_projected_raman_hamiltonian(
        sc.params, sc.meas, ctx.basis, ctx.subspaces, ctx.target)
    members = ctx.subspaces[ctx.target].indices
    if 1.0 - float((np.abs(ctx.psi0[members]) ** 2).sum()) > 1e-12:
        raise ValidationError("initial_state", "must lie inside the target subspace")
    res = zef.evolve_nonhermitian(ctx.psi0, heff, sc.numerics.t_final,
                                  sc.numerics.dt, sc.numerics.sample_points)
    tracked = ctx.tracked_indices()
    header = ["t"] + ctx.tracked_names() + ["norm"]
    pops = res.populations(tracked)
    cols = [res.times] + [pops[:, i] for i in range(tracked.size)] + [res.norms]
    path = manifest.start_file("raman.csv", "raman", "timeseries")
    rows = write_csv(path, header, cols)
    manifest.finish_file("raman.csv", rows=rows, columns=header)


def _engine_steady_state(ctx: _Context, manifest: RunManifest, seed: int, threads: int):
    sc = ctx.scenario
    coeffs = sc.steady_state.get("coefficients", "uniform")
    spec = sst.SteadyStateSpec(
        lattice=sc.params.lattice,
        delta_n=int(sc.steady_state.get("delta_N", 0)),
        coefficients=None if coeffs == "uniform" else coeffs,
    )
    psi, basis = sst.build_steady_state(spec)
    occ_str = ["".join(str(n) for n in s) for s in basis.states]
    path = manifest.start_file("steady_state.csv", "steady_state", "amplitudes")
    rows = write_csv(path, ["occupation", "re", "im"],
                     [np.array(occ_str, dtype=object), psi.real, psi.imag])
    manifest.finish_file("steady_state.csv", rows=rows)

    report = sst.verify_dark_state(psi, basis, sc.params, sc.meas)
    path = manifest.start_file("darkstate_report.json", "steady_state", "report")
    Path(path).write_text(json.dumps({
        "tunnelling_norm": report.tunnelling_norm,
        "delta_n_value": report.delta_n_value,
        "delta_n_residual": report.delta_n_residual,
        "measured_variance": report.measured_variance,
        "h0_residual": report.h0_residual,
        "superfluid_overlap": report.superfluid_overlap,
        "lindblad_rhs_max": report.lindblad_rhs_max,
    }, indent=2))
    manifest.finish_file("darkstate_report.json", max_residual=report.max_residual())


def _engine_infer(ctx: _Context, manifest: RunManifest, seed: int, threads: int):
    sc = ctx.scenario
    cfg = sc.infer
    if "hypotheses" in cfg:
        hyps = [inf.SubspaceHypothesis(rate=float(h["rate"]),
                                       prior=float(h.get("prior", 1.0)))
                for h in cfg["hypotheses"]]
        rates = np.array([h.rate for h in hyps])
    else:
        rates = np.abs(mdl.jump_eigenvalues(sc.meas, ctx.subspaces)) ** 2
        hyps = inf.uniform_hypotheses(rates)
    source = cfg.get("record", "simulate")
    if source == "simulate":
        true_idx = int(cfg.get("true_subspace", ctx.target or 0))
        record = inf.simulate_poisson_record(
            float(rates[true_idx]), sc.numerics.t_final, stream_seed(seed, 1))
    else:
        record = trj.DetectionRecord.from_json(source)
    times = np.linspace(0.0, record.t_final, sc.numerics.sample_points)
    post = inf.posterior_series(hyps, record, times,
                                exponent=cfg.get("exponent", "m"))
    header = ["t"] + [f"p_sub_{i}" for i in range(len(hyps))]
    cols = [times] + [post[:, i] for i in range(len(hyps))]
    path = manifest.start_file("posterior.csv", "infer", "timeseries")
    rows = write_csv(path, header, cols)
    manifest.finish_file("posterior.csv", rows=rows, columns=header,
                         rates=rates.tolist(), n_detections=record.count)


_ENGINE_FNS = {
    "nonhermitian": _engine_nonhermitian,
    "ensemble": _engine_ensemble,
    "trajectory": _engine_trajectory,
    "lindblad": _engine_lindblad,
    "raman": _engine_raman,
    "steady_state": _engine_steady_state,
    "infer": _engine_infer,
}


def run_scenario(scenario: Scenario, outdir: Path, seed: int | None = None,
                 threads: int = 1) -> RunManifest:
    seed = scenario.numerics.base_seed if seed is None else int(seed)
    manifest = RunManifest(
        outdir=outdir, scenario=scenario.raw, seed=seed,
        version=__version__, rng=RNG_IDENTIFIER, backend=BACKEND_NAME,
    )
    ctx = _Context(scenario)
    try:
        for engine in scenario.engines:
            _ENGINE_FNS[engine](ctx, manifest, seed, threads)
    except Exception:
        manifest.finalize(ok=False)
        raise
    manifest.finalize(ok=True)
    return manifest


# ---------------------------------------------------------------- CLI ----

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="zeno-nh",
        description="Measurement-conditioned lattice-boson dynamics in the weak Zeno regime",
    )
    sub = parser.add_subparsers(dest="command")

    p_run = sub.add_parser("run", help="run a scenario file or built-in name")
    p_run.add_argument("scenario")
    p_run.add_argument("--out", default=None, help="output directory (default runs/<name>)")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--threads", type=int, default=1)

    p_val = sub.add_parser("validate", help="validate a scenario without running")
    p_val.add_argument("scenario")

    sub.add_parser("list-scenarios", help="list built-in scenarios")
    sub.add_parser("version", help="print version and RNG identifier")

    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2

    if args.command == "version":
        print(f"zeno-nh {__version__} (rng: {RNG_IDENTIFIER}; kernels: {BACKEND_NAME})")
        return 0

    if args.command == "list-scenarios":
        for name, data in BUILTIN_SCENARIOS.items():
            engines = ",".join(data["engines"])
            print(f"{name}: M={data['M']} N={data['N']} engines={engines}")
        return 0

    try:
        scenario = load_scenario(args.scenario)
    except (ValidationError, json.JSONDecodeError) as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return 2

    if args.command == "validate":
        print(f"OK: scenario {scenario.name!r} valid (engines: {', '.join(scenario.engines)})")
        return 0

    outdir = Path(args.out) if args.out else Path("runs") / scenario.name
    try:
        manifest = run_scenario(scenario, outdir, args.seed, args.threads)
    except ZenoError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {len(manifest.files)} files to {manifest.outdir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
