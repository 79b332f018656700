"""Experiment orchestration and CSV/text emission.

Drives three kinds of runs from a manifest (config file and/or flags):

  paper3d / paper2d  hierarchy study: reference level first, then each study
                     level; relative energies against the reference and the
                     per-pair experimental orders of convergence.
  equilibrium        rest-state preservation, measured against the analytic
                     equilibrium on each level.
  mms                manufactured-solution convergence of the conformation
                     equation alone.

Outputs (17 significant digits everywhere):

  diagnostics_M<k>.csv   one row per time level, header
      t,kinetic,elastic_trace,frobenius,log_term,visc_diss,trace_grad_diss,
      relax_diss,source,free_energy,min_eig,div_norm,fp_iters
  relative_energy.csv    t,M,E_kin,E_el,E_frob,E_total
  eoc.csv                t,M_coarse,M_fine,EOC
  mms_errors.csv         M,h,l2_error,eoc        (mms experiment only)
  ref_M<k>_s<i>.txt      reference snapshots in the mesh dump format
"""

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from . import diagnostics as diag
from . import manufactured
from .assembly import ElementQuadrature
from .exceptions import ConfigParseError, ConfigValidationError
from .mesh import NodalField, build_mesh, dump_field, prolongate
from .solver import (ConformationStepper, SimulationState, SolverConfig,
                     equilibrium_state, n_steps_for, run)
from .tensor_ops import n_components

EXPERIMENTS = ("paper3d", "paper2d", "equilibrium", "mms")

_EXPERIMENT_DEFAULTS = {
    "paper3d": dict(dim=3, levels=(2, 4, 8), reference=16),
    "paper2d": dict(dim=2, levels=(2, 4, 8), reference=16),
    "equilibrium": dict(dim=3, levels=(4,), reference=8),
    "mms": dict(dim=2, levels=(8, 16, 32), reference=64, T_final=0.5),
}

_CONFIG_FIELDS = {f.name for f in fields(SolverConfig)}
_MANIFEST_KEYS = _CONFIG_FIELDS | {
    "experiment", "dim", "levels", "reference", "out", "seed", "threads",
    "sample_interval",
}


@dataclass
class RunManifest:
    """Everything one experiment needs: levels, parameters, output paths."""

    experiment: str
    dim: int
    levels: tuple
    reference: int
    config: SolverConfig
    out_dir: str = "out"
    seed: int = 0
    threads: int = 1
    sample_interval: float = 0.05

    def sample_times(self):
        if self.config.T_final <= 0:
            return [0.0]
        n = max(1, int(round(self.config.T_final / self.sample_interval)))
        return [self.config.T_final * k / n for k in range(n + 1)]


def _parse_value(key, raw):
    if key == "experiment":
        if raw not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {raw!r}")
        return raw
    if key == "out":
        return raw
    if key == "levels":
        return tuple(int(tok) for tok in raw.replace(",", " ").split())
    if key in ("dim", "reference", "seed", "threads", "fp_max_iters",
               "lin_max_iters", "quad_assembly", "quad_diagnostics"):
        return int(raw)
    return float(raw)


def parse_config(text) -> RunManifest:
    """Parse `key = value` configuration text into a manifest.

    Blank lines and `#` comments are allowed; unknown and duplicate keys are
    rejected with the offending line number.
    """
    data = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigParseError(ln, f"expected 'key = value', got {line!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _MANIFEST_KEYS:
            raise ConfigParseError(ln, f"unknown key {key!r}")
        if key in data:
            raise ConfigParseError(ln, f"duplicate key {key!r}")
        if not val:
            raise ConfigParseError(ln, f"empty value for {key!r}")
        try:
            data[key] = _parse_value(key, val)
        except ValueError as exc:
            raise ConfigParseError(ln, str(exc)) from None
    return build_manifest(data)


def build_manifest(options) -> RunManifest:
    """Resolve experiment defaults and validate into a RunManifest."""
    opts = dict(options)
    experiment = opts.pop("experiment", "paper3d")
    if experiment not in EXPERIMENTS:
        raise ConfigValidationError(f"unknown experiment {experiment!r}")
    defaults = dict(_EXPERIMENT_DEFAULTS[experiment])
    for key, val in defaults.items():
        opts.setdefault(key, val)

    cfg_kwargs = {k: opts.pop(k) for k in list(opts) if k in _CONFIG_FIELDS}
    try:
        config = SolverConfig(**cfg_kwargs)
    except ValueError as exc:
        raise ConfigValidationError(str(exc)) from None

    manifest = RunManifest(
        experiment=experiment,
        dim=int(opts.pop("dim")),
        levels=tuple(int(m) for m in opts.pop("levels")),
        reference=int(opts.pop("reference")),
        config=config,
        out_dir=str(opts.pop("out", "out")),
        seed=int(opts.pop("seed", 0)),
        threads=int(opts.pop("threads", 1)),
        sample_interval=float(opts.pop("sample_interval", 0.05)),
    )
    if opts:
        raise ConfigValidationError(f"unused keys: {sorted(opts)}")
    _validate_manifest(manifest)
    return manifest


def _validate_manifest(man: RunManifest):
    if man.dim not in (2, 3):
        raise ConfigValidationError(f"dim must be 2 or 3, got {man.dim}")
    if not man.levels:
        raise ConfigValidationError("need at least one level")
    if any(m < 1 for m in man.levels):
        raise ConfigValidationError(f"levels must be >= 1: {man.levels}")
    if list(man.levels) != sorted(set(man.levels)):
        raise ConfigValidationError(f"levels must strictly increase: {man.levels}")
    for coarse, fine in zip(man.levels, man.levels[1:]):
        if fine != 2 * coarse:
            raise ConfigValidationError(
                f"adjacent levels must halve h: {coarse} then {fine}")
    if man.reference <= max(man.levels):
        raise ConfigValidationError(
            f"reference M={man.reference} must exceed all levels {man.levels}")
    for m in man.levels:
        ratio = man.reference / m
        if 2 ** int(round(math.log2(ratio))) != ratio:
            raise ConfigValidationError(
                f"reference M={man.reference} not dyadically related to M={m}")
    if man.threads < 1:
        raise ConfigValidationError("threads must be >= 1")
    if man.sample_interval <= 0:
        raise ConfigValidationError("sample_interval must be > 0")


# ---------------------------------------------------------------------------
# Initial data per experiment
# ---------------------------------------------------------------------------

def paper_initial_velocity(dim):
    """All components sin(2 pi x) sin(2 pi y) [sin(2 pi z)]."""
    def u0(points):
        s = np.ones(points.shape[0])
        for k in range(dim):
            s = s * np.sin(2.0 * np.pi * points[:, k])
        return np.repeat(s[:, None], dim, axis=1)
    return u0


def equilibrium_conformation(dim):
    """The relaxation equilibrium C = I / sqrt(dim)."""
    def c0(points):
        out = np.zeros((points.shape[0], n_components(dim)))
        out[:, :dim] = 1.0 / np.sqrt(dim)
        return out
    return c0


# ---------------------------------------------------------------------------
# Trajectory sampling (linear interpolation in time at the output times)
# ---------------------------------------------------------------------------

class TrajectorySampler:
    """Collects states at fixed sample times while a run advances."""

    def __init__(self, times):
        self.times = list(times)
        self.samples = []
        self._next = 0

    def _emit(self, state):
        self.samples.append(state)
        self._next += 1

    def __call__(self, prev, new):
        tol = 1e-9 * (1.0 + abs(new.t))
        while self._next < len(self.times) and self.times[self._next] <= new.t + tol:
            ts = self.times[self._next]
            if prev is None or abs(new.t - ts) <= tol:
                self._emit(SimulationState(ts, new.u.copy(), new.p.copy(),
                                           new.C.copy()))
                continue
            theta = (ts - prev.t) / (new.t - prev.t)
            self._emit(SimulationState(
                ts,
                (1 - theta) * prev.u + theta * new.u,
                (1 - theta) * prev.p + theta * new.p,
                (1 - theta) * prev.C + theta * new.C,
            ))


# ---------------------------------------------------------------------------
# CSV helpers
# ---------------------------------------------------------------------------

def _fmt(x):
    return f"{x:.17g}"


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(row + "\n")


def _write_diagnostics(path, records):
    _write_csv(path, diag.DiagnosticsRecord.CSV_HEADER,
               [rec.csv_row() for rec in records])


def _mark_failed(out_dir, name, message):
    with open(os.path.join(out_dir, name), "a") as fh:
        fh.write(f"FAILED,{message}\n")


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

def _prolongated_state(mesh_level, mesh_ref, state):
    if mesh_level.M == mesh_ref.M:
        return state
    u = np.column_stack([
        prolongate_values(mesh_level, mesh_ref, state.u[:, k])
        for k in range(mesh_level.dim)
    ])
    C = np.column_stack([
        prolongate_values(mesh_level, mesh_ref, state.C[:, c])
        for c in range(state.C.shape[1])
    ])
    return SimulationState(state.t, u, np.zeros(mesh_ref.n_vertices), C)


def prolongate_values(coarse_mesh, fine_mesh, values):
    return prolongate(NodalField(coarse_mesh, values), fine_mesh).values


def _run_level(man, M, sample_times, u0, c0):
    mesh = build_mesh(man.dim, M)
    sampler = TrajectorySampler(sample_times)
    records, final = run(man.config, mesh, u0, c0, observer=sampler)
    return mesh, records, sampler.samples, final


def _run_hierarchy(man: RunManifest):
    out = man.out_dir
    u0 = paper_initial_velocity(man.dim)
    c0 = equilibrium_conformation(man.dim)
    times = man.sample_times()

    mesh_ref, rec_ref, samples_ref, _ = _run_level(man, man.reference, times,
                                                   u0, c0)
    _write_diagnostics(os.path.join(out, f"diagnostics_M{man.reference}.csv"),
                       rec_ref)
    for i, snap in enumerate(samples_ref):
        stacked = np.column_stack([snap.u, snap.p, snap.C])
        dump_field(NodalField(mesh_ref, stacked),
                   os.path.join(out, f"ref_M{man.reference}_s{i:03d}.txt"))

    def level_job(M):
        mesh, records, samples, _ = _run_level(man, M, times, u0, c0)
        energies = []
        for snap, ref_snap in zip(samples, samples_ref):
            pro = _prolongated_state(mesh, mesh_ref, snap)
            rec = diag.relative_energy(pro, ref_snap, mesh_ref,
                                       man.config.quad_diagnostics)
            energies.append(rec)
        return M, records, energies

    results = {}
    if man.threads > 1:
        with ThreadPoolExecutor(max_workers=man.threads) as pool:
            for M, records, energies in pool.map(level_job, man.levels):
                results[M] = (records, energies)
    else:
        for M in man.levels:
            M, records, energies = level_job(M)
            results[M] = (records, energies)

    rel_rows = []
    for M in man.levels:
        records, energies = results[M]
        _write_diagnostics(os.path.join(out, f"diagnostics_M{M}.csv"), records)
        for rec in energies:
            rel_rows.append(",".join([
                _fmt(rec.t), str(M), _fmt(rec.e_kin), _fmt(rec.e_el),
                _fmt(rec.e_frob), _fmt(rec.total)]))
    _write_csv(os.path.join(out, "relative_energy.csv"),
               "t,M,E_kin,E_el,E_frob,E_total", rel_rows)

    eoc_rows = []
    for i, t in enumerate(times):
        for coarse, fine in zip(man.levels, man.levels[1:]):
            e_c = results[coarse][1][i].total
            e_f = results[fine][1][i].total
            if e_c <= 0.0 or e_f <= 0.0:
                continue
            eoc_rows.append(",".join([
                _fmt(t), str(coarse), str(fine), _fmt(math.log2(e_c / e_f))]))
    _write_csv(os.path.join(out, "eoc.csv"), "t,M_coarse,M_fine,EOC", eoc_rows)


def _run_equilibrium(man: RunManifest):
    out = man.out_dir
    c0 = equilibrium_conformation(man.dim)
    times = man.sample_times()
    rel_rows = []
    for M in man.levels:
        mesh, records, samples, _ = _run_level(man, M, times, None, c0)
        _write_diagnostics(os.path.join(out, f"diagnostics_M{M}.csv"), records)
        rest = equilibrium_state(mesh)
        for snap in samples:
            rec = diag.relative_energy(snap, rest, mesh,
                                       man.config.quad_diagnostics)
            rel_rows.append(",".join([
                _fmt(snap.t), str(M), _fmt(rec.e_kin), _fmt(rec.e_el),
                _fmt(rec.e_frob), _fmt(rec.total)]))
    _write_csv(os.path.join(out, "relative_energy.csv"),
               "t,M,E_kin,E_el,E_frob,E_total", rel_rows)
    _write_csv(os.path.join(out, "eoc.csv"), "t,M_coarse,M_fine,EOC", [])


def _run_mms(man: RunManifest):
    out = man.out_dir
    errors = []
    for M in man.levels:
        mesh = build_mesh(man.dim, M)
        quad_force = ElementQuadrature(mesh, man.config.quad_diagnostics)
        _, dt_eff = n_steps_for(man.config, mesh.h)

        def forcing(t, _mesh=mesh, _quad=quad_force, _dt=dt_eff):
            return manufactured.forcing_load(_mesh, _quad, t,
                                             man.config.epsilon, man.config.a,
                                             dt=_dt)

        def c0(points):
            return manufactured.exact_conformation(points, 0.0)

        records, final = run(man.config, mesh, None, c0,
                             stepper_cls=ConformationStepper, forcing=forcing)
        _write_diagnostics(os.path.join(out, f"diagnostics_M{M}.csv"), records)
        err = manufactured.l2_error(mesh, quad_force, final.C, final.t)
        errors.append((M, mesh.h, err))

    rows = []
    for i, (M, h, err) in enumerate(errors):
        rate = (math.log2(errors[i - 1][2] / err) if i > 0 and err > 0
                else math.nan)
        rows.append(",".join([str(M), _fmt(h), _fmt(err), _fmt(rate)]))
    _write_csv(os.path.join(out, "mms_errors.csv"), "M,h,l2_error,eoc", rows)


def run_experiment(man: RunManifest) -> int:
    """Run one manifest to completion; returns a process exit status."""
    os.makedirs(man.out_dir, exist_ok=True)
    runner = {
        "paper3d": _run_hierarchy,
        "paper2d": _run_hierarchy,
        "equilibrium": _run_equilibrium,
        "mms": _run_mms,
    }[man.experiment]
    try:
        runner(man)
    except Exception as exc:
        _mark_failed(man.out_dir, "relative_energy.csv", str(exc))
        raise
    return 0


# ---------------------------------------------------------------------------
# Command line
# ---------------------------------------------------------------------------

def _build_parser():
    p = argparse.ArgumentParser(
        prog="peterlinfem",
        description="Viscoelastic Lagrange-Galerkin experiments")
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--experiment", choices=EXPERIMENTS)
    p.add_argument("--dim", type=int, choices=(2, 3))
    p.add_argument("--levels", help="comma-separated cells-per-side levels")
    p.add_argument("--reference", type=int, help="reference level M")
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int, help="parallel level jobs")
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    options = {}
    try:
        if args.config:
            with open(args.config) as fh:
                text = fh.read()
            # parse for line-number errors, then merge flags on top
            parse_config(text)
            for ln, raw in enumerate(text.splitlines(), start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                key, _, val = line.partition("=")
                options[key.strip()] = _parse_value(key.strip(), val.strip())
        for key in ("experiment", "dim", "reference", "out", "threads"):
            val = getattr(args, key)
            if val is not None:
                options[key] = val
        if args.levels is not None:
            options["levels"] = _parse_value("levels", args.levels)
        man = build_manifest(options)
    except (ConfigParseError, ConfigValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return run_experiment(man)
    except Exception as exc:  # marker already written
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
