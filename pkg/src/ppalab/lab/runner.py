"""Run a parsed scenario: modulus estimate, PPA, certificates, probes, checks.

Every stage is recorded in the report.  A stage that raises is recorded
with status ``error`` and later independent stages still run.  Statuses:

``pass`` / ``fail``
    a certificate held or was violated, or a probe/check matched or missed
    its ``expect`` field.
``inconclusive`` / ``inapplicable`` / ``skipped``
    nothing was decided (too little data, hypotheses not met, missing
    inputs); these never fail a batch.
``error``
    the stage raised; counts as a failure.
"""

import csv
import json
import math
import time
from pathlib import Path

import numpy as np

from ..exceptions import PpaLabError
from ..operators import (ConvexFunction, InverseOf, OperatorPair, check_coercive,
                         check_monotone, check_pair_monotone, matched_preimage,
                         matrix_r_lipschitz)
from ..ppa import (PpaConfig, certify_distance_bound, certify_linear_rate,
                   certify_step_decay, certify_value_gap, check_trajectory_invariants,
                   run_ppa, sequence_rate_check)
from ..regularity import (RegularityProbe, check_calm, check_closed_graph_at_zero,
                          check_metric_regularity, check_metric_subregularity,
                          estimate_modulus, fit_modulus, hoffman_consistency,
                          r_continuity_verdict)
from ..sampling import sample_pairs
from . import plots
from .scenario import EstimateDirective, as_map

SCHEMA_VERSION = 1
DECIDED = ("pass", "fail", "error")
FAILING = ("fail", "error")


def jsonable(v):
    """Plain JSON value; infinities become the strings "inf"/"-inf", NaN null."""
    if isinstance(v, dict):
        return {str(k): jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return jsonable(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if v is None or isinstance(v, str):
        return v
    return repr(v)


def _outcome_status(outcome, expect):
    if outcome == expect:
        return "pass"
    if outcome == "inconclusive":
        return "inconclusive"
    return "fail"


def _skipped(name, reason):
    return {"name": name, "status": "skipped", "reason": reason}


def _error(name, exc):
    return {"name": name, "status": "error", "reason": f"{type(exc).__name__}: {exc}"}


def _fmt(x):
    return "" if x is None else format(float(x), ".17g")


def write_trajectory_csv(traj, path):
    dim = traj.iterates.shape[1] if len(traj) else 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n"] + [f"x{i + 1}" for i in range(dim)] + ["a_n", "f", "d"])
        for i, n in enumerate(traj.indices):
            f = None if traj.function_values is None else traj.function_values[i]
            d = None if traj.distances is None else traj.distances[i]
            w.writerow([int(n)] + [_fmt(v) for v in traj.iterates[i]]
                       + [_fmt(traj.step_norms[i]), _fmt(f), _fmt(d)])


def read_trajectory_csv(path):
    """Columns of a trajectory CSV as float arrays (empty cells become NaN)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = {}
    for j, name in enumerate(header):
        cols[name] = np.array([float(r[j]) if r[j] else math.nan for r in body])
    return cols


class _Context:
    def __init__(self, scn, out_dir, seed, plots_on):
        self.scn, self.out_dir, self.seed, self.plots_on = scn, out_dir, seed, plots_on
        self.timing = {}

    def timed(self, key, fn, *args):
        t0 = time.perf_counter()
        try:
            return fn(*args)
        finally:
            self.timing[key] = self.timing.get(key, 0.0) + time.perf_counter() - t0


def _probe_for(spec, seed, sample_radius=None):
    return RegularityProbe(base_point=spec.base_point, base_image_point=spec.base_image_point,
                           ball_radius=spec.ball_radius,
                           sample_radius=sample_radius or spec.sample_radius,
                           sample_count=spec.sample_count, seed=seed, cap=spec.cap,
                           decades=spec.decades)


def _modulus_stage(ctx):
    """Returns (report entry, modulus used by the certificates)."""
    scn = ctx.scn
    mod = scn.modulus
    if mod is None:
        return None, None
    if not isinstance(mod, EstimateDirective):
        return {"name": "modulus", "status": "given", "form": mod.form,
                "constant": mod.constant, "exponent": mod.exponent,
                "radius": mod.radius}, mod
    target = as_map(scn.operator)
    if mod.target == "inverse":
        target = InverseOf(target)
    probe = RegularityProbe(mod.base_point, sample_radius=mod.radii[-1],
                            sample_count=mod.sample_count, seed=ctx.seed)
    try:
        tab = estimate_modulus(target, mod.base_point, mod.radii, probe)
    except PpaLabError as exc:
        return _error("modulusEstimate", exc), None
    entry = {"name": "modulusEstimate", "target": mod.target, "radii": tab.radii,
             "values": tab.values}
    verdict = r_continuity_verdict(tab)
    entry.update(property=verdict.property, note=verdict.note)
    fitted = None
    if verdict.holds:
        fitted = fit_modulus(tab)
        entry.update(status="pass", form=fitted.form, constant=fitted.constant,
                     exponent=fitted.exponent, radius=fitted.radius,
                     degenerate=fitted.degenerate)
    else:
        entry.update(status="inconclusive", reason=verdict.note)
    if ctx.plots_on:
        plots.plot_modulus(tab.radii, tab.values, ctx.out_dir / "modulus.svg",
                           title=f"{scn.name}: modulus of {mod.target}")
    return entry, fitted


def _cert_entry(cert):
    e = {"name": cert.name, "status": cert.status, "worst": cert.worst,
         "violations": [list(v) for v in cert.violations]}
    e.update(cert.detail)
    if cert.message:
        e["reason"] = cert.message
    return e


def _lipschitz_constant(mod):
    if mod.form == "lipschitz":
        return mod.constant
    if mod.form == "powerlaw" and mod.exponent == 1.0:
        return mod.constant
    return None


def _ppa_stage(ctx, modulus, max_iter):
    scn = ctx.scn
    if scn.ppa is None:
        return None, None, [_skipped("ppa", "scenario has no ppaConfig")]
    cfg = scn.ppa
    if max_iter is not None:
        cfg = PpaConfig(cfg.gamma, cfg.start, max_iter, cfg.stop_step_norm, cfg.record_every)
    sigma = modulus.radius if modulus is not None else None
    try:
        traj = ctx.timed("ppa", run_ppa, scn.operator, cfg, scn.solution, sigma)
    except PpaLabError as exc:
        return None, None, [_error("ppa", exc)]
    write_trajectory_csv(traj, ctx.out_dir / "trajectory.csv")
    fn = scn.operator if isinstance(scn.operator, ConvexFunction) else None
    sol = scn.solution
    certs = []

    def attempt(name, needs, fn_, *args):
        if needs:
            certs.append(_skipped(name, needs))
            return None
        try:
            res = fn_(*args)
        except PpaLabError as exc:
            certs.append(_error(name, exc))
            return None
        return res

    inv = attempt("invariants", None, check_trajectory_invariants, traj, scn.operator, sol)
    if inv is not None:
        certs.append(_cert_entry(inv))

    need_fn = None if fn is not None else "operator is not a convex function"
    if need_fn is None and fn.inf_value is None:
        need_fn = "inf f is unknown"
    if need_fn is None:
        gap = fn.value(cfg.start) - fn.inf_value
        step = attempt("step_decay", None, certify_step_decay, traj, gap)
    else:
        step = attempt("step_decay", need_fn, None)
    if step is not None:
        certs.append(_cert_entry(step))

    need = "no solutionSpec" if sol is None else ("no modulusSpec" if modulus is None else None)
    dist = attempt("distance_bound", need, certify_distance_bound, traj, modulus)
    if dist is not None:
        certs.append(_cert_entry(dist))

    need = need_fn or ("no solutionSpec" if sol is None else None)
    if need is None and sol.optimal_value is None:
        need = "solutionSpec has no optimalValue"
    val = attempt("value_gap", need, certify_value_gap, traj, sol)
    if val is not None:
        certs.append(_cert_entry(val))

    lip = _lipschitz_constant(modulus) if modulus is not None else None
    need = "no solutionSpec" if sol is None else None
    if need is None and modulus is None:
        need = "no modulusSpec"
    elif need is None and lip is None:
        need = "modulus is not Lipschitz"
    rate = attempt("linear_rate", need, certify_linear_rate, traj, lip,
                   math.isinf(modulus.radius) if modulus is not None else False)
    if rate is not None:
        e = {"name": "linear_rate", "status": rate.verdicts["linear_rate"], "kappa": rate.kappa,
             "observed_contraction": rate.observed_contraction,
             "violations": [list(v) for v in rate.bound_violations]}
        if rate.message:
            e["reason"] = rate.message
        certs.append(e)

    summary = {
        "iterations": traj.iterations,
        "recorded": len(traj),
        "gamma": traj.gamma,
        "nZero": traj.n_zero,
        "finalIterate": traj.final_iterate,
        "stepSquareSum": traj.step_square_sum,
        "firstStep": traj.step_norms[0] if len(traj) else None,
        "lastStep": traj.step_norms[-1] if len(traj) else None,
        "finalDistance": traj.next_distances[-1] if traj.distances is not None else None,
        "finalValue": traj.next_function_values[-1] if fn is not None else None,
    }
    bound_violations = [v for c in certs for v in c.get("violations", [])]
    rate_report = {
        "kappa": rate.kappa if rate is not None else None,
        "observedContraction": rate.observed_contraction if rate is not None else None,
        "stepDecayExponentFit": step.detail.get("decay_exponent") if step is not None else None,
        "boundViolations": bound_violations,
        "verdicts": {c["name"]: c["status"] for c in certs},
    }
    if ctx.plots_on and traj.distances is not None:
        plots.plot_distances(traj.indices, traj.distances, ctx.out_dir / "distance.svg",
                             title=f"{scn.name}: distance to S")
    return summary, rate_report, certs


def _probe_target(scn, spec):
    model = as_map(spec.operator if spec.operator is not None else scn.operator)
    return InverseOf(model) if spec.target == "inverse" else model


def _run_probe(ctx, i, spec):
    name = spec.label or f"{spec.kind}[{i}]"
    target = _probe_target(ctx.scn, spec)
    entry = {"name": name, "kind": spec.kind, "target": spec.target, "expect": spec.expect}
    if spec.kind == "modulus":
        probe = _probe_for(spec, ctx.seed)
        tab = estimate_modulus(target, spec.base_point, spec.radii, probe)
        verdict = r_continuity_verdict(tab)
        entry.update(radii=tab.radii, values=tab.values, property=verdict.property,
                     constant=verdict.constant, note=verdict.note)
        if verdict.holds:
            fitted = fit_modulus(tab)
            entry.update(form=fitted.form, fitConstant=fitted.constant,
                         fitExponent=fitted.exponent, degenerate=fitted.degenerate)
        outcome = "holds" if verdict.holds else "fails"
        if ctx.plots_on:
            plots.plot_modulus(tab.radii, tab.values, ctx.out_dir / f"modulus-probe-{i}.svg",
                               title=f"{ctx.scn.name}: {name}")
    else:
        probe = _probe_for(spec, ctx.seed)
        if spec.kind == "metricRegularity":
            seq = spec.witness_sequence.pairs() if spec.witness_sequence is not None else []
            v = check_metric_regularity(target, probe, list(spec.witnesses) + seq)
            ratios = v.witness_ratios
            explicit = ratios[:len(spec.witnesses)]
            entry["witnessRatios"] = explicit
            if seq:
                sr = np.array([math.nan if r is None else r for r in ratios[len(spec.witnesses):]])
                n = np.arange(1, len(sr) + 1)
                entry.update(sequenceCount=len(sr), sequenceFirstRatio=sr[0],
                             sequenceLastRatio=sr[-1],
                             sequenceMinRatioOverN=float(np.nanmin(sr / n)))
        elif spec.kind == "metricSubregularity":
            v = check_metric_subregularity(target, probe)
        else:
            v = check_calm(target, probe)
        entry.update(property=v.property, constant=v.constant, samplesUsed=v.samples_used,
                     witness=v.witness, note=v.note)
        outcome = "holds" if v.holds else "fails"
    entry.update(outcome=outcome, status=_outcome_status(outcome, spec.expect))
    return entry


def _random_matrix(rng, max_dim, deficient):
    m, n = rng.integers(1, max_dim + 1, size=2)
    if deficient:
        r = int(rng.integers(0, min(m, n)))
        return rng.standard_normal((m, r)) @ rng.standard_normal((r, n))
    return rng.standard_normal((m, n))


def matrix_certificate_trial(a, rng, points):
    """Largest violations of ``|x - xbar| <= L |a x - ybar|`` and ``a xbar = ybar``
    over random x and preimage x'."""
    cert = matrix_r_lipschitz(a)
    worst_bound, worst_eq = -math.inf, 0.0
    for _ in range(points):
        x = rng.standard_normal(a.shape[1])
        xprime = rng.standard_normal(a.shape[1])
        ybar = a @ xprime
        xbar = matched_preimage(a, cert, x, ybar, xprime)
        lhs = float(np.linalg.norm(x - xbar))
        rhs = cert.lipschitz_l * float(np.linalg.norm(a @ x - ybar))
        worst_bound = max(worst_bound, lhs - rhs)
        worst_eq = max(worst_eq, float(np.linalg.norm(a @ xbar - ybar)))
    return cert, worst_bound, worst_eq


def _run_check(ctx, i, spec):
    scn = ctx.scn
    name = spec.label or f"{spec.kind}[{i}]"
    entry = {"name": name, "kind": spec.kind, "expect": spec.expect}
    op = as_map(spec.operator if spec.operator is not None else scn.operator) \
        if spec.kind not in ("sequenceRate", "matrixCertificate") else None
    seed = ctx.seed + i
    if spec.kind == "monotone":
        s = spec.samples
        v = check_monotone(op, sample_pairs(op.dim_in, s.count, s.low, s.high, seed))
        entry.update(margin=v.margin, witness=v.witness, pairsUsed=v.pairs_used,
                     undecidable=v.undecidable)
        outcome = "holds" if v.monotone else "fails"
    elif spec.kind == "pairMonotone":
        s = spec.samples
        pair = OperatorPair(op, spec.second, spec.strong_modulus)
        v = check_pair_monotone(pair, sample_pairs(op.dim_in, s.count, s.low, s.high, seed))
        entry.update(margin=v.margin, strongModulus=spec.strong_modulus, witness=v.witness,
                     monotone=v.monotone, strong=v.strong, skipped=v.skipped)
        outcome = "holds" if v.meets_declared else "fails"
    elif spec.kind == "coercive":
        s = spec.samples
        est = check_coercive(op, sample_pairs(op.dim_in, s.count, s.low, s.high, seed))
        entry.update(estimate=est, minModulus=spec.min_modulus)
        outcome = "holds" if est >= spec.min_modulus - 1e-9 else "fails"
    elif spec.kind == "hoffman":
        rep = hoffman_consistency(op, spec.modulus, spec.sigma, spec.witnesses)
        entry.update(bound=rep.bound, distances=rep.distances, margins=rep.margins,
                     violations=[list(v) for v in rep.violations])
        outcome = "holds" if rep.consistent else "fails"
    elif spec.kind == "sequenceRate":
        v = sequence_rate_check(spec.sequence)
        entry.update(length=len(spec.sequence), nonincreasing=v.nonincreasing,
                     summable=v.summable, conclusionHolds=v.conclusion_holds,
                     tailPeak=v.tail_peak, blockRatio=v.block_ratio,
                     failedHypotheses=v.failed_hypotheses, message=v.message)
        outcome = {"pass": "holds", "fail": "fails"}.get(v.status, "inconclusive")
    elif spec.kind == "matrixCertificate":
        rng = np.random.default_rng(seed)
        mats = list(spec.matrices)
        if spec.random is not None:
            rrng = np.random.default_rng(seed + spec.random.seed_offset)
            mats += [_random_matrix(rrng, spec.random.max_dim, k % 3 == 2)
                     for k in range(spec.random.count)]
        worst_bound, worst_eq, ls, ranks = -math.inf, 0.0, [], []
        for a in mats:
            cert, wb, we = matrix_certificate_trial(np.atleast_2d(a), rng, spec.points_per_matrix)
            worst_bound, worst_eq = max(worst_bound, wb), max(worst_eq, we)
            ls.append(cert.lipschitz_l)
            ranks.append(cert.rank)
        entry.update(matrices=len(mats), worstBoundExcess=worst_bound,
                     worstPreimageResidual=worst_eq, maxL=max(ls),
                     rankDeficient=sum(r < min(np.atleast_2d(a).shape) for r, a in zip(ranks, mats)))
        outcome = "holds" if worst_bound <= 1e-8 and worst_eq <= 1e-8 else "fails"
    else:
        seqs = []
        for s in spec.sequences:
            seqs.append((list(s.x.terms(s.count)), list(s.y.terms(s.count)), s.limit))
        v = check_closed_graph_at_zero(op, seqs)
        entry.update(gaps=v.gaps, violating=v.violations, note=v.note)
        outcome = "holds" if v.holds else "fails"
    entry.update(outcome=outcome, status=_outcome_status(outcome, spec.expect))
    return entry


def _guarded(fn, ctx, i, spec, kind):
    name = spec.label or f"{spec.kind}[{i}]"
    try:
        return ctx.timed(kind, fn, ctx, i, spec)
    except (PpaLabError, ValueError) as exc:
        e = _error(name, exc)
        e["expect"] = spec.expect
        return e


def run_scenario(scn, out_root=".", seed=None, max_iter=None, plots_on=True,
                 stages=("modulus", "ppa", "probes", "checks")):
    """Run `scn`, write its outputs under ``out_root/scn.output_dir`` and
    return the report as a dict (also written to ``report.json``)."""
    out_dir = Path(out_root) / scn.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = seed if seed is not None else (scn.seed if scn.seed is not None else 0)
    ctx = _Context(scn, out_dir, seed, plots_on)
    t0 = time.perf_counter()
    report = {"schemaVersion": SCHEMA_VERSION, "scenario": scn.name, "seed": seed,
              "source": scn.source}
    modulus = None
    if "modulus" in stages or "ppa" in stages:
        mod_entry, modulus = ctx.timed("modulus", _modulus_stage, ctx)
        report["modulus"] = mod_entry if mod_entry is not None else _skipped(
            "modulus", "scenario has no modulusSpec")
    if "ppa" in stages:
        summary, rate_report, certs = _ppa_stage(ctx, modulus, max_iter)
        report["trajectory"] = summary
        report["rateReport"] = rate_report
        report["certifications"] = certs
    if "probes" in stages:
        report["probes"] = [_guarded(_run_probe, ctx, i, p, "probes")
                            for i, p in enumerate(scn.probes)]
    if "checks" in stages:
        report["checks"] = [_guarded(_run_check, ctx, i, c, "checks")
                            for i, c in enumerate(scn.checks)]
    ctx.timing["total"] = time.perf_counter() - t0
    report["timing"] = ctx.timing
    report["counts"] = count_statuses(report)
    report = jsonable(report)
    with open(out_dir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report


def verdict_entries(report):
    out = []
    mod = report.get("modulus")
    if isinstance(mod, dict) and mod.get("status") not in (None, "given"):
        out.append(mod)
    for key in ("certifications", "probes", "checks"):
        out.extend(report.get(key) or [])
    return out


def count_statuses(report):
    counts = {"pass": 0, "fail": 0, "error": 0, "skipped": 0}
    for e in verdict_entries(report):
        st = e.get("status")
        counts[st if st in DECIDED else "skipped"] += 1
    return counts


def report_failed(report):
    return any(e.get("status") in FAILING for e in verdict_entries(report))
