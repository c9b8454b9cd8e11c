"""Command-line interface: validated configs, reproducible pipelines.

Every subcommand writes CSV tables plus a manifest.json into --out, and
optionally renders figures next to them with --plot.  Exit codes: 0 ok,
2 config error, 3 budget exceeded, 4 property-check failure.
"""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import click
import numpy as np

from .config import BUNDLED, ConfigError, load_system, resolve_config_path
from .measure import build_reference_nu, save_measure
from .neighbourhood import (
    CertificationError,
    WeightFlow,
    compute_weights_q,
    compute_zeta_coefficients,
    construct_b0,
    explore_automaton,
    map_key,
    maximal_system,
    verify_certificate,
)
from .normality import hypothesis_check, weyl_sums
from .report import RunManifest, write_csv
from .scenery import (
    AtomLattice,
    convergence_report,
    default_lattice_depth,
    distribution_distance,
    empirical_tangent_distribution,
    max_residual,
    required_word_length,
    return_times,
    scenery_trajectory,
)

EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_PROPERTY = 4


def _load(config, normalize=True):
    try:
        return load_system(config, normalize=normalize)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)


def _word_option(word: str):
    try:
        return tuple(int(s) for s in word.replace(",", ".").split(".") if s)
    except ValueError:
        click.echo(f"config error: cannot parse word {word!r} "
                   "(use dot-separated symbols like 1.2.2)", err=True)
        sys.exit(EXIT_CONFIG)


def _manifest(config, seed, out, **params) -> RunManifest:
    path = resolve_config_path(config)
    manifest = RunManifest(path, seed, params)
    Path(out).mkdir(parents=True, exist_ok=True)
    return manifest


@click.group()
def main():
    """Weak-separation certificates and scenery diagnostics for homothety systems."""


@main.command()
@click.option("--config", required=True, help=f"path or one of {sorted(BUNDLED)}")
def validate(config):
    """Validate a config and echo the normalized system."""
    system = _load(config)
    click.echo(system.describe())
    conj = system.normalization
    click.echo(f"  normalization: x -> {float(conj.ratio):.8g} * (x - "
               f"{float(-conj.translation[0] / conj.ratio):.8g})")


@main.command("wsc-report")
@click.option("--config", required=True)
@click.option("--out", default="out", show_default=True)
@click.option("--max-states", default=10_000, show_default=True)
@click.option("--max-depth", default=400, show_default=True)
@click.option("--geom-depth", default=6, show_default=True)
@click.option("--plot", is_flag=True)
def wsc_report(config, out, max_states, max_depth, geom_depth, plot):
    """Explore the neighbourhood-system automaton and report its states."""
    system = _load(config)
    manifest = _manifest(config, 0, out, max_states=max_states,
                         max_depth=max_depth, geom_depth=geom_depth)
    with manifest.stage("explore"):
        report = explore_automaton(system, max_states, max_depth, geom_depth)
    rows = report.rows()
    for row in rows:
        row["closed"] = report.closed
        row["geom_depth"] = geom_depth
    write_csv(out, "wsc_states.csv", rows, manifest)
    edge_rows = [{"state": s, "symbol": j, "next_state": d, "geom_depth": geom_depth}
                 for (s, j), d in sorted(report.edges.items())]
    write_csv(out, "wsc_edges.csv", edge_rows, manifest)
    if plot:
        from . import plots
        plots.plot_automaton_states(rows, out, manifest)
    manifest.write(out)
    click.echo(f"states={len(report.states)} closed={report.closed} "
               f"max_cardinality={report.max_cardinality}")
    if report.budget_exceeded:
        click.echo(f"budget exceeded: raise --max-states (={max_states}) or "
                   f"--max-depth (={max_depth})", err=True)
        sys.exit(EXIT_BUDGET)
    if not report.closed:
        click.echo("automaton not closed within --max-depth; maximality "
                   "not certified", err=True)
        sys.exit(EXIT_BUDGET)


@main.command("find-a0")
@click.option("--config", required=True)
@click.option("--out", default="out", show_default=True)
@click.option("--geom-depth", default=6, show_default=True)
def find_a0_cmd(config, out, geom_depth):
    """Locate the shortest word realizing the maximal neighbourhood system."""
    system = _load(config)
    manifest = _manifest(config, 0, out, geom_depth=geom_depth)
    report = explore_automaton(system, geom_depth=geom_depth)
    try:
        a0, n0 = maximal_system(system, report, geom_depth)
    except CertificationError as exc:
        click.echo(f"not certified: {exc}", err=True)
        sys.exit(EXIT_BUDGET)
    rows = [{"a0": ".".join(map(str, a0)), "cardinality": len(n0),
             "geom_depth": geom_depth}]
    write_csv(out, "a0.csv", rows, manifest)
    manifest.write(out)
    click.echo(f"a0={'.'.join(map(str, a0))} #N0={len(n0)}")


@main.command("b0-cert")
@click.option("--config", required=True)
@click.option("--out", default="out", show_default=True)
@click.option("--geom-depth", default=6, show_default=True)
@click.option("--no-minimize", is_flag=True, help="keep the raw recursive construction")
@click.option("--verify-file", type=click.Path(exists=True), default=None,
              help="re-verify a previously emitted certificate")
def b0_cert(config, out, geom_depth, no_minimize, verify_file):
    """Construct (or re-verify) the recurring-frame certificate."""
    system = _load(config)
    manifest = _manifest(config, 0, out, geom_depth=geom_depth,
                         minimize=not no_minimize)
    report = explore_automaton(system, geom_depth=geom_depth)
    a0, n0 = maximal_system(system, report, geom_depth)
    if verify_file:
        payload = json.loads(Path(verify_file).read_text())
        cert = _certificate_from_json(system, payload)
    else:
        with manifest.stage("construct"):
            cert = construct_b0(system, a0, n0, geom_depth,
                                minimize=not no_minimize)
    check = verify_certificate(system, cert, n0, geom_depth)
    zc = compute_zeta_coefficients(system, cert, n0, geom_depth) if check.ok else None

    payload = _certificate_to_json(system, cert, n0, zc)
    cert_path = Path(out) / "b0_certificate.json"
    cert_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    manifest.record_artifact(cert_path)
    rows = [{"a0": ".".join(map(str, cert.a0)),
             "b0": ".".join(map(str, cert.b0)),
             "family_size": len(cert.F),
             "complete": cert.complete,
             "recheck_ok": check.ok,
             "c_min": str(zc.c_min()) if zc else "",
             "geom_depth": geom_depth}]
    write_csv(out, "b0_certificate.csv", rows, manifest)
    manifest.write(out)
    click.echo(f"b0={'.'.join(map(str, cert.b0))} |F|={len(cert.F)} "
               f"complete={cert.complete} recheck={'ok' if check.ok else 'FAILED'}")
    if not cert.complete:
        click.echo(f"construction incomplete: {cert.failure_stage}", err=True)
        sys.exit(EXIT_BUDGET)
    if not check.ok:
        click.echo("; ".join(check.details), err=True)
        sys.exit(EXIT_PROPERTY)


def _similarity_to_json(f):
    return {"ratio": [str(c) for c in f.ratio.coeffs],
            "translation": [[str(c) for c in t.coeffs] for t in f.translation]}


def _similarity_from_json(system, data):
    from .ifs import Similarity
    field = system.field
    ratio = field.element([_parse_q(c) for c in data["ratio"]])
    translation = tuple(field.element([_parse_q(c) for c in t])
                        for t in data["translation"])
    return Similarity(ratio, translation)


def _parse_q(s):
    from .numfield import QQ
    return QQ(s)


def _certificate_to_json(system, cert, n0, zc=None):
    payload = {
        "a0": list(cert.a0),
        "b0": list(cert.b0),
        "via": cert.via,
        "complete": cert.complete,
        "disjointness_depth": cert.disjointness_depth,
        "family": [
            {"map": _similarity_to_json(h),
             "b_h": list(cert.word_of(h))}
            for h in cert.F
        ],
        "n0": [_similarity_to_json(f) for f in n0.maps],
    }
    if zc is not None:
        payload["coefficients"] = {
            str(i): [str(c) for c in zc.coefficients[map_key(h)]]
            for i, h in enumerate(zc.family)}
        payload["lower_bounds"] = {
            str(i): str(zc.lower_bounds[map_key(h)])
            for i, h in enumerate(zc.family)}
    return payload


def _certificate_from_json(system, payload):
    from .neighbourhood import B0Certificate
    family = [_similarity_from_json(system, entry["map"])
              for entry in payload["family"]]
    b_h = {map_key(h): tuple(entry["b_h"])
           for h, entry in zip(family, payload["family"])}
    return B0Certificate(
        a0=tuple(payload["a0"]), b0=tuple(payload["b0"]), F=family, b_h=b_h,
        disjointness_depth=payload["disjointness_depth"],
        complete=payload["complete"], via=payload.get("via", "loaded"))


@main.command()
@click.option("--config", required=True)
@click.option("--word", required=True, help="dot-separated symbols, e.g. 1.2.2")
@click.option("--out", default="out", show_default=True)
@click.option("--geom-depth", default=6, show_default=True)
def weights(config, word, out, geom_depth):
    """Exact window weights of the relative maps at a word."""
    system = _load(config)
    word_t = _word_option(word)
    manifest = _manifest(config, 0, out, word=word, geom_depth=geom_depth)
    ws = compute_weights_q(system, word_t, geom_depth)
    total = ws.total
    rows = []
    for f, w in zip(ws.base.maps, ws.weights):
        rows.append({
            "ratio": float(f.ratio),
            "translation": float(f.translation[0]) if system.dim == 1
            else str([float(t) for t in f.translation]),
            "weight_exact": str(w),
            "weight_normalized": float(w / total),
            "is_identity": f.is_identity(),
            "geom_depth": geom_depth,
        })
    write_csv(out, "weights.csv", rows, manifest)
    manifest.write(out)
    click.echo(f"{len(rows)} maps, total mass {total}")


@main.command("nu-build")
@click.option("--config", required=True)
@click.option("--out", default="out", show_default=True)
@click.option("--depth", default=12, show_default=True)
@click.option("--geom-depth", default=6, show_default=True)
@click.option("--plot", is_flag=True)
def nu_build(config, out, depth, geom_depth, plot):
    """Build and export the reference frame measure."""
    system = _load(config)
    manifest = _manifest(config, 0, out, depth=depth, geom_depth=geom_depth)
    report = explore_automaton(system, geom_depth=geom_depth)
    _, n0 = maximal_system(system, report, geom_depth)
    with manifest.stage("build"):
        nu = build_reference_nu(system, list(n0.maps), depth)
    path = Path(out) / "nu_measure.txt"
    save_measure(nu, path)
    manifest.record_artifact(path)
    rows = [{"branches": len(n0), "atoms": nu.size, "mass": nu.total_mass,
             "depth": depth, "resolution": nu.resolution}]
    write_csv(out, "nu_summary.csv", rows, manifest)
    if plot:
        from . import plots
        plots.plot_measure(nu.points, nu.weights, out, "nu_measure.png",
                           "reference frame measure", manifest)
    manifest.write(out)
    click.echo(f"nu built: {nu.size} atoms, mass {nu.total_mass:.6g}")


@main.command()
@click.option("--config", required=True)
@click.option("--out", default="out", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--t-max", default=10.0, show_default=True)
@click.option("--dt", default=None, type=float)
@click.option("--plot", is_flag=True)
def scenery(config, out, seed, t_max, dt, plot):
    """Simulate the scenery along one sampled trajectory."""
    system = _load(config)
    if dt is None:
        dt = math.log(1.0 / system.rho_max) / 8.0
    manifest = _manifest(config, seed, out, t_max=t_max, dt=dt)
    length = required_word_length(system, t_max) + 8
    word = system.sample_word(length, seed)
    with manifest.stage("frames"):
        traj = scenery_trajectory(system, word, t_max, dt)
    rows = []
    for t, frame in zip(traj.times, traj.frames):
        mean = float(frame.points[:, 0] @ frame.weights)
        var = float(((frame.points[:, 0] - mean) ** 2) @ frame.weights)
        rows.append({"t": float(t), "atoms": frame.size, "mean": mean,
                     "sd": math.sqrt(max(var, 0.0)),
                     "depth": traj.meta["lattice_depth"],
                     "resolution": frame.resolution, "dt": dt})
    write_csv(out, "scenery_frames.csv", rows, manifest)
    if plot:
        from . import plots
        last = traj.frames[-1]
        plots.plot_measure(last.points, last.weights, out, "scenery_last_frame.png",
                           f"frame at t={traj.times[-1]:.3g}", manifest)
    manifest.write(out)
    click.echo(f"{len(rows)} frames along {length} symbols")


@main.command("return-times")
@click.option("--config", required=True)
@click.option("--out", default="out", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--length", default=100_000, show_default=True)
@click.option("--geom-depth", default=6, show_default=True)
@click.option("--plot", is_flag=True)
def return_times_cmd(config, out, seed, length, geom_depth, plot):
    """Visit statistics of the certificate window along a sample."""
    system = _load(config)
    manifest = _manifest(config, seed, out, length=length, geom_depth=geom_depth)
    report = explore_automaton(system, geom_depth=geom_depth)
    a0, n0 = maximal_system(system, report, geom_depth)
    cert = construct_b0(system, a0, n0, geom_depth)
    word = system.sample_array(length, seed) + 1
    try:
        record = return_times(system, word, cert)
    except ValueError as exc:
        click.echo(str(exc), err=True)
        sys.exit(EXIT_BUDGET)
    rows = []
    for n in range(record.visits):
        rows.append({
            "n": n,
            "t_n": int(record.t_n[n]),
            "tau": int(record.tau[n - 1]) if n >= 1 else "",
            "alpha0": float(record.alpha0[n]),
            "r_n": float(record.r_n[n]),
            "window": ".".join(map(str, record.window)),
        })
    write_csv(out, "return_times.csv", rows, manifest)
    if plot:
        from . import plots
        plots.plot_return_times(rows, out, manifest)
    manifest.write(out)
    click.echo(f"{record.visits} visits, mean gap "
               f"{float(record.tau.mean()) if record.visits > 1 else float('nan'):.1f}")


@main.command("tangent-dist")
@click.option("--config", required=True)
@click.option("--out", default="out", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--points", default=4, show_default=True)
@click.option("--t-max", default=10.0, show_default=True)
@click.option("--dt", default=None, type=float)
def tangent_dist(config, out, seed, points, t_max, dt):
    """Pairwise distances between empirical tangent distributions."""
    system = _load(config)
    if dt is None:
        dt = math.log(1.0 / system.rho_max) / 8.0
    manifest = _manifest(config, seed, out, points=points, t_max=t_max, dt=dt)
    length = required_word_length(system, t_max) + 8
    lattice = AtomLattice(system, default_lattice_depth(system, max_residual(system)))
    dists = []
    for j in range(points):
        word = system.sample_word(length, seed + 1013 * j)
        traj = scenery_trajectory(system, word, t_max, dt, lattice=lattice)
        dists.append(empirical_tangent_distribution(traj))
    rows = []
    for a in range(points):
        for b in range(a + 1, points):
            d = distribution_distance(dists[a], dists[b])
            rows.append({"a": a, "b": b, "T": t_max, "distance": d, "dt": dt,
                         "depth": lattice.depth})
    write_csv(out, "tangent_distances.csv", rows, manifest)
    manifest.write(out)
    click.echo(f"{len(rows)} pairwise distances at T={t_max}")


@main.command()
@click.option("--config", required=True)
@click.option("--out", default="out", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--points", default=5, show_default=True)
@click.option("--t-list", default=None, help="comma-separated horizons")
@click.option("--dt", default=None, type=float)
@click.option("--qn-visits", default=0, show_default=True,
              help="add block-assembly-vs-direct rows over this many visits")
@click.option("--geom-depth", default=6, show_default=True)
@click.option("--plot", is_flag=True)
def converge(config, out, seed, points, t_list, dt, qn_visits, geom_depth, plot):
    """Horizon sweep of tangent-distribution distances (pairwise and self)."""
    system = _load(config)
    log_l = math.log(1.0 / system.rho_max)
    horizons = ([float(t) for t in t_list.split(",")] if t_list
                else [5 * log_l, 10 * log_l, 20 * log_l])
    manifest = _manifest(config, seed, out, t_list=horizons, points=points,
                         dt=dt or log_l / 8, qn_visits=qn_visits)
    cert = zc = flow = None
    if qn_visits > 0:
        report = explore_automaton(system, geom_depth=geom_depth)
        a0, n0 = maximal_system(system, report, geom_depth)
        cert = construct_b0(system, a0, n0, geom_depth)
        zc = compute_zeta_coefficients(system, cert, n0, geom_depth)
        flow = WeightFlow(system, report, geom_depth)
    with manifest.stage("simulate"):
        rows = convergence_report(system, points, horizons, seed, dt,
                                  cert=cert, zc=zc, flow=flow,
                                  qn_visits=qn_visits)
    for row in rows:
        row["dt"] = dt or log_l / 8
    write_csv(out, "convergence.csv", rows, manifest)
    if plot:
        from . import plots
        plots.plot_convergence(rows, out, manifest)
    manifest.write(out)
    med = {}
    for row in rows:
        med.setdefault((row["kind"], row["T"]), []).append(row["distance"])
    for (kind, T), values in sorted(med.items()):
        click.echo(f"{kind} @ T={T:.3g}: median {np.median(values):.4g}")


@main.command()
@click.option("--config", required=True)
@click.option("--out", default="out", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--s", "base", default=2, show_default=True)
@click.option("--samples", default=8, show_default=True)
@click.option("--horizon", default=2 ** 12, show_default=True)
@click.option("--freqs", default=4, show_default=True)
@click.option("--plot", is_flag=True)
def normality(config, out, seed, base, samples, horizon, freqs, plot):
    """Weyl-sum and discrepancy diagnostics plus the base hypotheses."""
    system = _load(config)
    manifest = _manifest(config, seed, out, s=base, samples=samples,
                         horizon=horizon, freqs=freqs)
    with manifest.stage("weyl"):
        rep = weyl_sums(system, base, samples, horizon, freqs, seed)
    for row in rep.weyl:
        row["samples"] = samples
    write_csv(out, "weyl.csv", rep.weyl, manifest)
    write_csv(out, "discrepancy.csv", rep.discrepancy, manifest)
    hyp = hypothesis_check(system, base)
    hyp_path = Path(out) / "hypothesis.json"
    hyp_path.write_text(json.dumps({
        "base": hyp.base_description,
        "pisot": hyp.pisot,
        "pisot_note": hyp.pisot_note,
        "per_map": hyp.ratio_rational,
        "search_bound": hyp.search_bound,
    }, indent=2, default=str) + "\n")
    manifest.record_artifact(hyp_path)
    if plot:
        from . import plots
        plots.plot_normality(rep.weyl, out, manifest)
    manifest.write(out)
    click.echo(f"weyl rows: {len(rep.weyl)}; pisot={hyp.pisot}; "
               f"irrationality unrefuted somewhere: {hyp.irrationality_holds_somewhere}")


@main.command()
@click.option("--out", default="out", show_default=True)
@click.option("--seed", default=2024, show_default=True)
@click.option("--quick", is_flag=True, help="reduced sample sizes")
@click.option("--plot", is_flag=True)
def verify(out, seed, quick, plot):
    """Run the full property suite on the three bundled systems."""
    from .acceptance import VerifyParams, run_all

    params = VerifyParams.quick() if quick else VerifyParams()
    params.seed = seed
    manifest = RunManifest(None, seed, {"quick": quick})
    Path(out).mkdir(parents=True, exist_ok=True)
    with manifest.stage("verify"):
        results = run_all(params, echo=click.echo)
    rows = [r.row() for r in results]
    write_csv(out, "verify_results.csv", rows, manifest)
    trend = next((r for r in results if r.criterion == 7), None)
    if trend is not None and "medians" in trend.details:
        trend_rows = [{"t": t, "median_tv": m}
                      for t, m in zip(trend.details["t_values"],
                                      trend.details["medians"])]
        write_csv(out, "verify_trend.csv", trend_rows, manifest)
        if plot:
            from . import plots
            plots.plot_trend(trend_rows, out, "verify_trend.png", manifest)
    manifest.write(out)
    failed = [r for r in results if not r.passed]
    if failed:
        click.echo(f"{len(failed)} checks failed", err=True)
        sys.exit(EXIT_PROPERTY)
    click.echo("all checks passed")


if __name__ == "__main__":
    main()
