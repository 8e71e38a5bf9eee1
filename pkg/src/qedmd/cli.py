"""Batch front end: ``python -m qedmd <subcommand> --scenario s.json --out dir``."""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from . import dmd as dmd_mod
from . import error_propagation as ep
from . import logical_cost as lc
from . import physical_cost as pc
from . import projector as pj
from . import sw_bounds as swb
from .lattice import (
    ConvergenceError,
    DimensionCapError,
    LatticeSpec,
    build_heisenberg,
    diagonalize,
    hubbard_norm,
    hubbard_spectra,
)

log = logging.getLogger("qedmd")

EXIT_OK, EXIT_SCHEMA, EXIT_INVARIANT, EXIT_RESOURCE = 0, 2, 3, 4

SUBCOMMANDS = (
    "model-ed", "dmd-fit", "dmd-discover", "error-sweep", "project-sim",
    "cost-logical", "cost-physical", "bounds-extrapolate", "reproduce-table2",
)


class SchemaError(ValueError):
    pass


class InvariantError(RuntimeError):
    pass


# Every accepted key with its default; anything else is rejected.
SCHEMA: dict[str, Any] = {
    "seed": 0,
    "model": {
        "kind": "hubbard", "sites": 4, "geometry": "chain", "boundary": "open", "electrons": None,
        "t": 1.0, "U": 8.0, "J": 1.0, "sectors": "all", "k": None, "below": None, "dim_cap": 1 << 20,
    },
    "dmd": {
        "pool": ["total-spin-spin", "total-double-occupancy", "total-hopping"], "ansatz": None,
        "cutoff": "lowest:2^N", "eps_target": None, "count": None, "policy": "eigenstates",
        "samples": None, "budget": None, "max_kappa": None,
    },
    "error": {"bits": [5, 15], "perturb_descriptors": False, "target": None},
    "projector": {
        "cutoff": "band-edge", "delta": None, "eps": [1e-2, 1e-3], "trials": 100, "gamma_min": 0.5,
        "sector": None,
    },
    "logical": {
        "preset": "hubbard", "N": 22, "U_over_t": 12.0, "p": 0.1, "method": "COE", "observables": "min",
        "log_base": "2", "gamma": 0.093, "gap": 0.12,
    },
    "physical": {
        "p_phys": 1e-3, "t_cycle": 1e-6, "layout": "compact", "distillery": "search", "n_factories": 1,
        "logical_qubits": None, "t_count": None, "distance": None, "objective": "spacetime",
    },
    "bounds": {
        "U_over_t": 12.0, "sizes": [2, 4, 6, 8], "targets": [22, 24], "geometry": "ladder",
        "boundary": "open", "ground_sizes": [2, 4, 6, 8], "ground_target": 22,
    },
    "outputs": {"dir": "out"},
}


def load_scenario(path: str | None) -> dict:
    """Merge a JSON scenario over the defaults, rejecting unknown blocks and keys."""
    raw: dict = {}
    if path is not None:
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise SchemaError(f"cannot read scenario: {exc}") from None
    if not isinstance(raw, dict):
        raise SchemaError("scenario must be a JSON object")
    out = copy.deepcopy(SCHEMA)
    for key, value in raw.items():
        if key not in SCHEMA:
            raise SchemaError(f"unknown scenario key {key!r}")
        if isinstance(SCHEMA[key], dict):
            if not isinstance(value, dict):
                raise SchemaError(f"block {key!r} must be an object")
            for sub, v in value.items():
                if sub not in SCHEMA[key]:
                    raise SchemaError(f"unknown key {key}.{sub}")
                out[key][sub] = v
        else:
            out[key] = value
    if not isinstance(out["seed"], int) or out["seed"] < 0:
        raise SchemaError("seed must be a non-negative integer")
    return out


def param_hash(subcommand: str, scenario: dict) -> str:
    blob = json.dumps({"subcommand": subcommand, "scenario": scenario}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


class Writer:
    """Emits CSV/JSON artifacts with a provenance header."""

    def __init__(self, out: Path, subcommand: str, scenario: dict):
        self.out = out
        self.provenance = {
            "tool": "qedmd",
            "version": __version__,
            "seed": scenario["seed"],
            "param_hash": param_hash(subcommand, scenario),
            "subcommand": subcommand,
        }
        out.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []

    def csv(self, name: str, header: Sequence[str], rows: Sequence[Sequence]) -> Path:
        path = self.out / name
        with open(path, "w", newline="") as fh:
            for k, v in self.provenance.items():
                fh.write(f"# {k}={v}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(x) for x in r])
        self.files.append(name)
        return path

    def json(self, name: str, payload: dict) -> Path:
        path = self.out / name
        with open(path, "w") as fh:
            json.dump({"provenance": self.provenance, **_plain(payload)}, fh, indent=1, sort_keys=True)
            fh.write("\n")
        self.files.append(name)
        return path


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    return "" if x is None else x


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


# ---------------------------------------------------------------------------
# shared model helpers
# ---------------------------------------------------------------------------


def _lattice(m: dict) -> LatticeSpec:
    return LatticeSpec(int(m["sites"]), m["geometry"], m["boundary"], m["electrons"])


def _sectors(m: dict, spec: LatticeSpec):
    if m["sectors"] == "all":
        return spec.sz_sectors()
    if m["sectors"] == "default":
        return [spec.default_sector()]
    try:
        return [tuple(int(x) for x in s) for s in m["sectors"]]
    except (TypeError, ValueError):
        raise SchemaError("model.sectors must be 'all', 'default' or a list of [n_up, n_down]") from None


def _spectra(m: dict):
    spec = _lattice(m)
    if m["kind"] == "hubbard":
        return spec, hubbard_spectra(spec, float(m["t"]), float(m["U"]), sectors=_sectors(m, spec),
                                     k=m["k"], below=m["below"], dim_cap=int(m["dim_cap"]))
    if m["kind"] == "heisenberg":
        op = build_heisenberg(spec, float(m["J"]))
        return spec, [diagonalize(op, m["k"], below=m["below"], dim_cap=int(m["dim_cap"]))]
    raise SchemaError(f"unknown model kind {m['kind']!r}")


def _norm(m: dict) -> float:
    return hubbard_norm(int(m["sites"]), float(m["t"]), float(m["U"]))


def _resolve_cutoff(rule, spectra, sites: int, U: float) -> float:
    """Numeric cutoff, 'lowest:<n>' (midpoint above the n-th lowest level, n may be 2^N)
    or 'band-edge' (largest gap within U of the ground energy)."""
    energies = np.sort(np.concatenate([d.eigenvalues for d in spectra]))
    if isinstance(rule, (int, float)):
        return float(rule)
    if rule == "band-edge":
        return swb.lower_band_edge(energies, U)
    if isinstance(rule, str) and rule.startswith("lowest:"):
        arg = rule.split(":", 1)[1]
        n = 2**sites if arg == "2^N" else int(arg)
        if n >= len(energies):
            raise SchemaError(f"cutoff rule {rule!r} needs more than {len(energies)} levels")
        return float(0.5 * (energies[n - 1] + energies[n]))
    raise SchemaError(f"bad cutoff rule {rule!r}")


def _pool(spec: LatticeSpec, entries) -> dmd_mod.DescriptorPool:
    descs = []
    for e in entries:
        if isinstance(e, str):
            descs.append(dmd_mod.DescriptorSpec(e))
        elif isinstance(e, dict) and set(e) <= {"kind", "indices", "label"} and "kind" in e:
            descs.append(dmd_mod.DescriptorSpec(e["kind"], tuple(e.get("indices", ())), e.get("label", "")))
        else:
            raise SchemaError(f"bad descriptor entry {e!r}")
    return dmd_mod.DescriptorPool(spec, descs)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_model_ed(sc: dict, w: Writer, jobs: int) -> dict:
    m = sc["model"]
    _, spectra = _spectra(m)
    rows = []
    for d in spectra:
        label = d.basis.label
        for k, e in enumerate(d.eigenvalues):
            rows.append([str(label), k, float(e), "t" if m["kind"] == "hubbard" else "J"])
    w.csv("spectrum.csv", ["sector", "k", "eigenvalue", "units"], rows)
    return {"levels": len(rows), "ground_energy": min(r[2] for r in rows)}


def _samples_from_model(sc: dict):
    m, d = sc["model"], sc["dmd"]
    spec, spectra = _spectra(m)
    pool = _pool(spec, d["pool"])
    cutoff = _resolve_cutoff(d["cutoff"], spectra, spec.sites, float(m["U"]))
    return spec, spectra, pool, cutoff


def cmd_dmd_fit(sc: dict, w: Writer, jobs: int) -> dict:
    d = sc["dmd"]
    if d["samples"] is not None:
        samples = dmd_mod.load_samples(d["samples"])
        if not samples:
            raise SchemaError("sample file is empty")
        labels = tuple(samples[0].labels)
        ansatz = tuple(d["ansatz"] or labels)
        idx = [labels.index(a) for a in ansatz]
        X = np.array([s.descriptors for s in samples])[:, idx]
        y = np.array([s.energy for s in samples])
        fit = dmd_mod.fit_linear(X, y, True, ansatz)
        verdict = None
    else:
        spec, spectra, pool, cutoff = _samples_from_model(sc)
        ansatz = tuple(d["ansatz"] or pool.labels)
        count = d["count"] or sum(len(x.indices_below(cutoff)) for x in spectra)
        low = dmd_mod.sample_low_energy(spectra, cutoff, count, d["policy"], pool, ansatz)
        comp = dmd_mod.sample_complement(spectra, cutoff, count, d["policy"], pool, ansatz, list(low))
        fit = dmd_mod.fit_samples(list(low), pool, ansatz)
        eps_target = d["eps_target"] if d["eps_target"] is not None else math.inf
        verdict = dmd_mod.classify_fit(fit, list(low), list(comp), cutoff, eps_target, _norm(sc["model"]))
        dmd_mod.dump_samples(list(low) + list(comp), w.out / "samples.json")
        w.files.append("samples.json")
    rows = [[lab, c, "t"] for lab, c in zip(fit.labels, fit.couplings if fit.couplings is not None else
                                             [math.nan] * len(fit.labels))]
    rows.append(["intercept", fit.intercept, "t"])
    rows.append(["eps_hat", fit.eps_hat, "t"])
    w.csv("couplings.csv", ["term", "value", "units"], rows)
    report = {"fit": json.loads(json.dumps(_plain(fit.to_json()))), "residual_max": fit.eps_hat,
              "verdict": verdict.to_json() if verdict is not None else None}
    w.json("fit.json", report)
    if fit.couplings is None:
        raise InvariantError("design is rank deficient: couplings not identifiable")
    return {"eps_hat": fit.eps_hat, "verdict": verdict.case if verdict else None}


def cmd_dmd_discover(sc: dict, w: Writer, jobs: int) -> dict:
    d = sc["dmd"]
    spec, spectra, pool, cutoff = _samples_from_model(sc)
    eps_target = d["eps_target"]
    if eps_target is None:
        raise SchemaError("dmd.eps_target is required for discovery")
    res = dmd_mod.discover(pool, spectra, cutoff, float(eps_target), d["budget"], norm_bound=_norm(sc["model"]),
                           max_kappa=d["max_kappa"])
    with open(w.out / "trace.jsonl", "w") as fh:
        for line in res.trace_lines():
            fh.write(line + "\n")
    w.files.append("trace.jsonl")
    w.json("discovery.json", {
        "report": res.report, "exhausted": res.exhausted, "cutoff": cutoff, "cutoff_units": "t",
        "fit": res.fit.to_json() if res.fit is not None else None,
        "verdict": res.verdict.to_json() if res.verdict is not None else None,
    })
    return {"report": res.report}


def cmd_error_sweep(sc: dict, w: Writer, jobs: int) -> dict:
    e = sc["error"]
    spec, spectra, pool, cutoff = _samples_from_model(sc)
    if sc["dmd"]["ansatz"]:
        pool = pool.subset(sc["dmd"]["ansatz"])
    count = sc["dmd"]["count"] or sum(len(x.indices_below(cutoff)) for x in spectra)
    samples = list(dmd_mod.sample_low_energy(spectra, cutoff, count, sc["dmd"]["policy"], pool))
    lo, hi = e["bits"]
    rows = ep.run_truncation_sweep(samples, pool, range(int(lo), int(hi) + 1), bool(e["perturb_descriptors"]))
    w.csv("sweep.csv", ["b", "coupling", "observed", "bound", "ratio", "units", "truncation"],
          [[r.b, r.label, r.observed, r.bound, r.ratio, "t", ep.TRUNCATION_DIRECTION] for r in rows])
    violations = sum(r.observed > r.bound for r in rows)
    out = {"rows": len(rows), "violations": violations}
    if e["target"] is not None:
        eps, b = ep.budget_from_target(float(e["target"]), samples)
        out.update(eps_oe_h=eps, bits=b)
    w.json("sweep.json", out)
    if violations:
        raise InvariantError(f"{violations} sweep rows exceed the coupling-error bound")
    return out


def cmd_project_sim(sc: dict, w: Writer, jobs: int) -> dict:
    m, p = sc["model"], sc["projector"]
    spec = _lattice(m)
    sector = tuple(p["sector"]) if p["sector"] is not None else spec.default_sector()
    (decomp,) = hubbard_spectra(spec, float(m["t"]), float(m["U"]), sectors=[sector])
    lam = _norm(m)
    cutoff = _resolve_cutoff(p["cutoff"], [decomp], spec.sites, float(m["U"]))
    E = decomp.eigenvalues
    scale = lam + abs(cutoff)
    if p["delta"] is None:
        below, above = E[E <= cutoff].max(), E[E > cutoff].min()
        delta = 0.5 * min(cutoff - below, above - cutoff) / scale
    else:
        delta = float(p["delta"])
    good = E <= cutoff
    rng = np.random.default_rng(sc["seed"])
    rows, failures = [], 0
    gamma_min = float(p["gamma_min"])
    for eps in p["eps"]:
        eps = float(eps)
        poly = pj.build_sign_poly(delta, eps)
        # amplification runs the projector at error eps * gamma so the flagged state has infidelity < eps
        amp_poly = pj.build_sign_poly(delta, eps * gamma_min)
        mult = pj.multipliers(decomp, cutoff, lam, amp_poly)
        for trial in range(int(p["trials"])):
            psi = pj.random_state_with_overlap(decomp, good, gamma_min, rng)
            outc = pj.apply_half_projector(decomp, cutoff, lam, poly, psi)
            ok_res = outc.residual <= eps / 2
            ok_ret = outc.retained > outc.gamma * (1 - eps / 2)
            k = amplification_rounds(float(np.linalg.norm(mult * (decomp.eigenvectors.T @ psi))))
            tr = pj.simulate_amplification(decomp, psi, mult, good, k)
            ok_amp = tr.infidelity[-1] < eps
            failures += not (ok_res and ok_ret and ok_amp)
            rows.append([eps, trial, poly.degree, outc.gamma, outc.retained, outc.residual, k,
                         float(tr.infidelity[-1]), int(ok_res and ok_ret), int(ok_amp), "1"])
    w.csv("trials.csv", ["eps", "trial", "degree", "gamma", "retained", "residual", "iterations",
                         "amplified_infidelity", "projection_ok", "amplification_ok", "units"], rows)
    w.json("projector.json", {"cutoff": cutoff, "cutoff_units": "t", "delta": delta, "norm_bound": lam,
                              "trials": len(rows), "failures": failures})
    if failures:
        raise InvariantError(f"{failures} trials violate the projector guarantees")
    return {"trials": len(rows), "failures": failures}


def amplification_rounds(amplitude: float) -> int:
    """Grover rounds k maximizing sin((2k + 1) theta) for flagged amplitude sin(theta)."""
    theta = math.asin(min(1.0, max(amplitude, 1e-300)))
    return max(0, round(math.pi / (4 * theta) - 0.5))


def _logical_plan(lg: dict) -> tuple[lc.ParameterPreset, lc.PlanResult]:
    if lg["preset"] == "hubbard":
        preset = lc.hubbard_preset(int(lg["N"]), float(lg["U_over_t"]), float(lg["p"]))
    elif lg["preset"] == "ground-state":
        preset = lc.ground_state_preset(int(lg["N"]), float(lg["U_over_t"]), float(lg["p"]),
                                        float(lg["gamma"]), float(lg["gap"]))
    else:
        raise SchemaError(f"unknown logical preset {lg['preset']!r}")
    method = lg["method"]
    obs = lg["observables"]
    if obs == "min":
        M = lc.minimal_observables(preset.N)
    elif obs == "1-RDM":
        M = None if method == lc.CSOE else lc.rdm_observables(preset.N, 1)
    elif isinstance(obs, int) and obs >= 0:
        M = obs
    else:
        raise SchemaError("logical.observables must be 'min', '1-RDM' or a count")
    return preset, lc.estimate(preset, method, M, 1, lg["log_base"])


def cmd_cost_logical(sc: dict, w: Writer, jobs: int) -> dict:
    preset, res = _logical_plan(sc["logical"])
    b = res.budget
    b.check()
    rows = [["total", "logical_qubits", b.qubits, "qubits"], ["total", "t_count", b.t_count, "T gates"]]
    for k, v in sorted(b.breakdown.get("t_terms", {}).items()):
        rows.append(["t_term", k, v, "T gates"])
    for k, v in sorted(b.alternatives.items()):
        if isinstance(v, (int, float)):
            rows.append(["alternative", k, v, "T gates" if "t" in k.lower() else "qubits"])
    w.csv("logical.csv", ["kind", "name", "value", "units"], rows)
    w.json("logical.json", {"label": res.label, "method": b.method, "qubits": b.qubits, "t_count": b.t_count,
                            "breakdown": b.breakdown, "alternatives": b.alternatives,
                            "preset": {k: v for k, v in vars(preset).items()}})
    return {"qubits": b.qubits, "t_count": b.t_count}


def cmd_cost_physical(sc: dict, w: Writer, jobs: int) -> dict:
    ph = sc["physical"]
    if ph["logical_qubits"] is None or ph["t_count"] is None:
        _, res = _logical_plan(sc["logical"])
        q = res.budget.qubits if ph["logical_qubits"] is None else int(ph["logical_qubits"])
        t = res.budget.t_count if ph["t_count"] is None else int(ph["t_count"])
    else:
        q, t = int(ph["logical_qubits"]), int(ph["t_count"])
    hw = pc.HardwareModel(float(ph["p_phys"]), float(ph["t_cycle"]))
    if ph["distillery"] in (None, "none"):
        fac = None
    elif ph["distillery"] == "search":
        fac = pc.search_factory(hw.p_phys, pc.FAILURE_BUDGET / t, ph["objective"])
    else:
        fac = pc.factory_model(pc.parse_distillery(ph["distillery"]), hw.p_phys)
    est = pc.physical_estimate(q, t, ph["layout"], fac, hw, int(ph["n_factories"]), ph["distance"])
    rows = [
        ["logical_qubits", q, "qubits"], ["t_count", t, "T gates"], ["distance", est.distance, "1"],
        ["physical_qubits", est.physical_qubits, "qubits"], ["runtime", est.runtime, "s"],
        ["consumption_time", est.consumption_time, "s"], ["production_time", est.production_time, "s"],
        ["failure_logical", est.failure.logical, "1"], ["failure_t_states", est.failure.t_states, "1"],
        ["failure_single_type", est.failure.single_type, "1"],
        ["distance_single_type", est.failure.single_type_distance, "1"],
        ["failure_data_only", est.failure.data_only, "1"], ["failure_per_code_cycle", est.failure.per_code_cycle, "1"],
    ]
    if fac is not None:
        rows += [["factory_output_error", fac.output_error, "1"], ["factory_footprint", fac.footprint, "qubits"],
                 ["factory_period", fac.period, "code cycles"]]
    w.csv("physical.csv", ["quantity", "value", "units"], rows)
    w.json("physical.json", {"regime": est.regime, "layout": est.layout, "factory": est.factory,
                             "n_factories": est.n_factories})
    if fac is not None and fac.output_error > pc.FAILURE_BUDGET / t:
        log.warning("factory output error %.3g exceeds the per-state budget %.3g", fac.output_error,
                    pc.FAILURE_BUDGET / t)
    return {"distance": est.distance, "runtime": est.runtime}


def cmd_bounds_extrapolate(sc: dict, w: Writer, jobs: int) -> dict:
    b = sc["bounds"]
    U = float(b["U_over_t"])
    pts = swb.edge_series(U, tuple(b["sizes"]), 1.0, b["geometry"], b["boundary"], jobs)
    swb.write_series_csv(pts, w.out / "edge_series.csv")
    w.files.append("edge_series.csv")
    fit = swb.fit_upper_edge([p.sites for p in pts], [p.max_m0 for p in pts], U)
    targets = [swb.extrapolate_niter(fit, int(n)) for n in b["targets"]]
    gpts = swb.ground_series(U, tuple(b["ground_sizes"]), 1.0, b["geometry"], b["boundary"], jobs)
    swb.write_series_csv(gpts, w.out / "ground_series.csv")
    w.files.append("ground_series.csv")
    gfit = swb.ground_state_extrapolation([g.sites for g in gpts], [g.gamma for g in gpts], [g.gap for g in gpts],
                                          int(b["ground_target"]), 1.0, U)
    w.json("extrapolation.json", {
        "edge_fit": {"slope": fit.slope, "intercept": fit.intercept, "C": fit.c_estimate,
                     "residuals": fit.residuals, "units": "1 per site"},
        "targets": [vars(t) for t in targets],
        "ground_state": {"a": gfit.a, "b": gfit.b, "c": gfit.c, **vars(gfit.target), "gap_units": "t",
                         "delta_units": "1/lambda"},
    })
    return {"n_iter": {t.target_sites: t.n_iter for t in targets}, "gamma": gfit.target.gamma}


def cmd_reproduce_table2(sc: dict, w: Writer, jobs: int) -> dict:
    logical = lc.reproduce_logical_table()
    rows = []
    for r in logical:
        rows.append(["logical", r["observables"], r["method"], "", "", "logical_qubits", r["qubits"],
                     r["qubits_reference"], r["qubits"] - r["qubits_reference"], "qubits"])
        rows.append(["logical", r["observables"], r["method"], "", "", "t_count", r["t_count"],
                     r["t_count_reference"], r["t_ratio"] - 1, "T gates"])
    for r in pc.reproduce_physical_table():
        key = [r["observables"], r["method"], r["p_phys"], r["layout"]]
        rows.append(["physical", *key, "distance", r["distance"], r["distance_reference"],
                     r["distance"] - r["distance_reference"], "1"])
        rows.append(["physical", *key, "physical_qubits", r["physical_qubits"], r["physical_qubits_reference"],
                     r["physical_qubits"] / r["physical_qubits_reference"] - 1, "qubits"])
        rows.append(["physical", *key, "runtime", r["runtime_s"], r["runtime_reference_s"],
                     r["runtime_s"] / r["runtime_reference_s"] - 1, "s"])
    w.csv("table2.csv", ["block", "observables", "method", "p_phys", "layout", "quantity", "value", "reference",
                         "deviation", "units"], rows)
    exact_q = all(r["qubits"] == r["qubits_reference"] for r in logical)
    return {"rows": len(rows), "logical_qubits_exact": exact_q}


COMMANDS = {
    "model-ed": cmd_model_ed,
    "dmd-fit": cmd_dmd_fit,
    "dmd-discover": cmd_dmd_discover,
    "error-sweep": cmd_error_sweep,
    "project-sim": cmd_project_sim,
    "cost-logical": cmd_cost_logical,
    "cost-physical": cmd_cost_physical,
    "bounds-extrapolate": cmd_bounds_extrapolate,
    "reproduce-table2": cmd_reproduce_table2,
}


def run(subcommand: str, scenario_path: str | None = None, out: str | None = None, seed: int | None = None,
        jobs: int = 1) -> int:
    """Run one subcommand; returns the process exit status."""
    try:
        if subcommand not in COMMANDS:
            raise SchemaError(f"unknown subcommand {subcommand!r}")
        sc = load_scenario(scenario_path)
        if seed is not None:
            sc["seed"] = seed
        out_dir = Path(out if out is not None else sc["outputs"]["dir"])
        writer = Writer(out_dir, subcommand, sc)
        summary = COMMANDS[subcommand](sc, writer, jobs)
        print(json.dumps({"status": "ok", "files": writer.files, **_plain(summary)}, sort_keys=True))
        return EXIT_OK
    except (SchemaError, KeyError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (InvariantError, ConvergenceError, pc.SearchError, pj.SignPolynomialError, AssertionError) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (DimensionCapError, MemoryError) as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="qedmd", description=__doc__)
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--scenario", help="JSON scenario file (defaults used when omitted)")
    parser.add_argument("--out", help="output directory (overrides outputs.dir)")
    parser.add_argument("--seed", type=int, help="RNG seed (overrides scenario seed)")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes for size series")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.seed is not None and args.seed < 0:
        parser.error("--seed must be non-negative")
    return run(args.subcommand, args.scenario, args.out, args.seed, args.jobs)


if __name__ == "__main__":
    sys.exit(main())
