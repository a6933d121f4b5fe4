"""Command-line runner: ``qphase run|validate <config>`` and ``qphase plot <manifest>``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import imaginary_diffusion as idiff
from . import relativistic as rel
from . import schrodinger as sch
from . import stochastic as st
from . import wigner_moyal as wm
from .config import ConfigError, ExperimentConfig, parse_config, serialize_config
from .core import (
    PhysParams,
    build_grid,
    format_field,
    gaussian_wigner,
    momentum_moment_identity,
    position_marginal,
)
from .potentials import PotentialSpec

log = logging.getLogger("qphase")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class NumericalFailure(RuntimeError):
    pass


def potential_from_config(block) -> PotentialSpec:
    kind = block["kind"]
    if kind == "constant":
        return PotentialSpec.constant(block["U0"])
    if kind == "linear":
        return PotentialSpec.linear(block["a"])
    if kind == "harmonic":
        return PotentialSpec.harmonic(block["k"])
    if kind == "polynomial":
        return PotentialSpec.polynomial(block["coefficients"])
    return PotentialSpec.gaussian_well(block["depth"], block["width"])


def params_from_config(cfg: ExperimentConfig) -> PhysParams:
    p = cfg["params"]
    return PhysParams(hbar=p["hbar"], mass=p["mass"], c=p.get("c", 1.0))


def grid_from_config(cfg: ExperimentConfig):
    g = cfg["grid"]
    return build_grid(g["q_min"], g["q_max"], g["n_q"], g["p_min"], g["p_max"], g["n_p"])


def _initial(cfg, params):
    ini = cfg["initial"]
    sq = ini["sigma_q"]
    sp = ini.get("sigma_p", params.hbar / (2 * sq))
    return ini["q0"], ini["p0"], sq, sp


class ArtifactWriter:
    """Writes files under the output directory and records their SHA-256."""

    def __init__(self, directory, formats):
        self.root = Path(directory)
        self.root.mkdir(parents=True, exist_ok=True)
        self.formats = set(formats)
        self.entries = []

    def text(self, name, content, kind):
        path = self.root / name
        data = content.encode()
        path.write_bytes(data)
        self.entries.append({"path": name, "kind": kind, "sha256": hashlib.sha256(data).hexdigest()})
        return path

    def table(self, name, header, rows, kind):
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join(_fmt(x) for x in row))
        return self.text(name, "\n".join(lines) + "\n", kind)

    def field(self, name, W, params, extra=None):
        if "fields" in self.formats:
            self.text(name, format_field(W, params, extra), "wigner_field")

    def manifest(self, cfg, summary):
        doc = {
            "experiment": cfg.kind,
            "config": serialize_config(cfg),
            "artifacts": self.entries,
            "summary": summary,
        }
        data = json.dumps(doc, indent=2, sort_keys=True) + "\n"
        (self.root / "manifest.json").write_text(data)
        return self.root / "manifest.json"


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def run_wigner_evolve(cfg, out: ArtifactWriter):
    params = params_from_config(cfg)
    grid = grid_from_config(cfg)
    U = potential_from_config(cfg["potential"])
    q0, p0, sq, sp = _initial(cfg, params)
    W0 = gaussian_wigner(grid, q0, p0, sq, sp)
    s = cfg["solver"]
    config = wm.SolverConfig(s["dt"], s["steps"], s.get("kernel", "exact"), s.get("order"),
                             s.get("record_every", max(1, s["steps"])))
    ev = wm.evolve(W0, U, params, config)
    out.table("moments.csv", wm.MOMENT_COLUMNS, ev.moments_table(), "moments")
    for i, W in enumerate(ev.snapshots):
        out.field(f"field_{i:04d}.csv", W, params)
    last = ev.moments[-1]
    summary = {
        "final_time": ev.moment_times[-1],
        "final_var_q": last.var_q,
        "final_norm": last.norm,
        "norm_drift": abs(last.norm - ev.moments[0].norm),
        "analytic_free_var_q": sq**2 + (params.hbar * ev.moment_times[-1] / (2 * params.mass * sq)) ** 2,
        "p2_identity": momentum_moment_identity(ev.snapshots[-1].normalized()),
        "hbar": params.hbar, "mass": params.mass, "sigma_q0": sq, "sigma_p0": sp,
    }
    return summary


def run_schrodinger(cfg, out: ArtifactWriter):
    params = params_from_config(cfg)
    grid = grid_from_config(cfg)
    U = potential_from_config(cfg["potential"])
    q0, p0, sq, _ = _initial(cfg, params)
    psi = sch.gaussian_wave(grid.q, q0, p0, sq, params)
    s = cfg["solver"]
    every = s.get("record_every", max(1, s["steps"]))
    done = 0
    idx = 0
    rows = []
    while True:
        out.table(f"wave_{idx:04d}.csv", ("q", "re_psi", "im_psi"),
                  zip(psi.q, psi.psi.real, psi.psi.imag), "wave")
        rows.append((psi.time, float(np.sum(psi.q * psi.density) * psi.dq), psi.norm))
        if done >= s["steps"]:
            break
        n = min(every, s["steps"] - done)
        psi = sch.split_step_schrodinger(psi, U, params, s["dt"], n)
        done += n
        idx += 1
    fields = sch.madelung_decompose(psi, params=params)
    Q = sch.bohm_potential(fields.rho, fields.q, params, fields.mask)
    flux = sch.flux_decomposition(psi, params)
    out.table("madelung.csv", ("q", "rho", "S", "mask", "bohm_Q", "convective", "fick"),
              zip(fields.q, fields.rho, fields.S, fields.mask.astype(int), Q, flux.convective, flux.fick),
              "madelung")
    out.table("wave_moments.csv", ("t", "mean_q", "norm"), rows, "wave_moments")
    W = sch.wigner_transform(psi, grid, params)
    out.field("wigner_final.csv", W, params)
    return {"final_time": psi.time, "final_norm": psi.norm}


def run_relativistic(cfg, out: ArtifactWriter):
    params = params_from_config(cfg)
    grid = grid_from_config(cfg)
    q0, p0, sq, sp = _initial(cfg, params)
    W0 = gaussian_wigner(grid, q0, p0, sq, sp)
    t = cfg["solver"]["t"]
    Wt = rel.evolve_relativistic_free(W0, params, t)
    back = rel.evolve_relativistic_free(Wt, params, -t)
    out.field("field_initial.csv", W0, params)
    out.field("field_final.csv", Wt, params)
    rho0, rhot = position_marginal(W0), position_marginal(Wt)
    out.table("marginals.csv", ("q", "rho_initial", "rho_final"), zip(rho0.q, rho0.rho, rhot.rho), "marginals")
    mean0 = float(np.sum(rho0.q * rho0.rho) * rho0.dq)
    meant = float(np.sum(rhot.q * rhot.rho) * rhot.dq)
    return {
        "t": t,
        "centroid_speed": (meant - mean0) / t if t else 0.0,
        "p0_over_propagator_mass": p0 / float(rel.propagator_mass(p0, 0.0, params)),
        "p0_over_m": p0 / params.mass,
        "reversal_linf": float(np.abs(back.values - W0.values).max()),
    }


def run_diffusion(cfg, out: ArtifactWriter):
    params = params_from_config(cfg)
    d = cfg["diffusion"]
    ts = np.linspace(0.0, d["t_max"], d["samples"])
    D = d.get("D", 0.0)
    rows = [(t, float(idiff.classical_gaussian_spread(d["sigma0"], D, t)),
             idiff.quantum_gaussian_spread(d["sigma0"], params, t).variance) for t in ts]
    out.table("spread.csv", ("t", "classical_var", "quantum_var"), rows, "spread")
    ks = d.get("k_values", (1.0, 2.0, 4.0))
    out.table("dispersion.csv", ("k", "omega"), idiff.dispersion_table(ks, params), "dispersion")
    return {"final_quantum_var": rows[-1][2], "final_classical_var": rows[-1][1]}


def run_stochastic(cfg, out: ArtifactWriter):
    params = params_from_config(cfg)
    grid = grid_from_config(cfg)
    U = potential_from_config(cfg["potential"])
    q0, p0, sq, sp = _initial(cfg, params)
    s = cfg["solver"]
    n = cfg["ensemble"]["count"]
    nz = cfg["noise"]
    noise = st.NoiseModel(nz["family"], nz.get("amplitude", 0.0), nz.get("correlation_time", s["dt"]), cfg.seed)
    R0, V0 = st.gaussian_initial_states(n, q0, p0, sq, sp, params, seed=cfg.seed)
    ens = st.run_ensemble(R0, V0, U, params, noise, s["dt"], s["steps"], s.get("integrator_order", 2))
    out.table("ensemble_final.csv", ("index", "R", "V", "xi_last"),
              [(int(r[0]), r[1], r[2], r[3]) for r in ens.final_state_table()], "ensemble")
    e = cfg["ensemble"]
    bw = (e["bandwidth_q"], e["bandwidth_p"]) if "bandwidth_q" in e and "bandwidth_p" in e else None
    W = st.ensemble_density(ens, grid, bw)
    out.field("kde_field.csv", W, params)
    report = st.closure_diagnostic(ens, W, e.get("closure_orders", (0, 1, 2)), bw)
    out.text("closure_report.json", report.to_text() + "\n", "closure_report")
    return {"p2_xi2": report.p2_xi2, "order0_within_tolerance": report.order0_within_tolerance,
            "kde_norm": W.norm}


def run_compare(cfg, out: ArtifactWriter):
    params = params_from_config(cfg)
    grid = grid_from_config(cfg)
    U = potential_from_config(cfg["potential"])
    q0, p0, sq, _ = _initial(cfg, params)
    s = cfg["solver"]
    psi0 = sch.gaussian_wave(grid.q, q0, p0, sq, params)
    W0 = sch.wigner_transform(psi0, grid, params)
    WT = sch.wigner_transform(sch.split_step_schrodinger(psi0, U, params, s["dt"], s["steps"]), grid, params)
    rows = []
    variants = [("exact", None), ("truncated", s.get("order", 1)), ("classical", None)]
    result = {}
    for variant, order in variants:
        Wm = wm.evolve_to(W0, U, params, s["dt"], s["steps"], variant, order)
        cmp_ = wm.compare_fields(Wm, WT)
        label = variant if order is None else f"{variant}_{order}"
        rows.append((label, cmp_.l2, cmp_.linf, cmp_.norm_diff))
        result[label] = cmp_.l2
        if variant == "exact":
            out.field("wigner_moyal_final.csv", Wm, params)
    out.field("schrodinger_wigner_final.csv", WT, params)
    out.table("compare.csv", ("kernel", "l2", "linf", "norm_diff"), rows, "compare")
    return {"l2": result, "t": s["dt"] * s["steps"]}


RUNNERS = {
    "wigner_evolve": run_wigner_evolve,
    "schrodinger_reference": run_schrodinger,
    "relativistic_free": run_relativistic,
    "imaginary_diffusion": run_diffusion,
    "stochastic_ensemble": run_stochastic,
    "compare": run_compare,
}


def run(cfg: ExperimentConfig, base_dir=None):
    """Execute one experiment; returns the manifest path."""
    directory = Path(cfg["output"]["directory"])
    if base_dir is not None and not directory.is_absolute():
        directory = Path(base_dir) / directory
    out = ArtifactWriter(directory, cfg["output"].get("formats", ("csv", "fields")))
    try:
        summary = RUNNERS[cfg.kind](cfg, out)
    except (FloatingPointError, ArithmeticError, wm.SolverError, sch.BoundaryLeakError,
            rel.ValidityGateError) as exc:
        raise NumericalFailure(f"{cfg.kind}: {type(exc).__name__}: {exc}") from exc
    return out.manifest(cfg, summary)


def _read_config(path):
    with open(path) as fh:
        return parse_config(fh.read())


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="qphase", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_val = sub.add_parser("validate", help="check a config without running it")
    p_val.add_argument("config")
    p_plot = sub.add_parser("plot", help="render images from a run manifest")
    p_plot.add_argument("manifest")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)

    if args.command == "plot":
        from .plotting import PlotError, plot_manifest
        try:
            for path in plot_manifest(args.manifest):
                print(path)
        except PlotError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        return EXIT_OK

    try:
        cfg = _read_config(args.config)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: cannot read {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        print(f"ok: {cfg.kind}")
        return EXIT_OK
    try:
        manifest = run(cfg, base_dir=os.path.dirname(os.path.abspath(args.config)))
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError) as exc:
        print(f"configuration error while running {cfg.kind}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(manifest)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
