"""Experiment runner.

Subcommands: dtwa, oracle-ising, oracle-ed, analyze-lightcone, compare,
crossover. Every subcommand takes --config <path> (JSON), --workers <n>,
--output <dir>, --seed <u64>. Exit codes: 0 success, 2 configuration
error, 3 runtime failure; failures print a machine-readable JSON error
record to stderr (and mirror it to error.json in the output directory
when possible). All times in files are tJ.
"""

from __future__ import annotations

import argparse
import json
import sys
import time as _time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    Contour,
    bootstrap_eta,
    contour_difference,
    extract_contour,
    fit_power_law,
    monotonic_within_error,
    read_contour_csv,
    relative_deviation,
    write_contour_csv,
)
from .config import (
    AnalysisOptions,
    ConfigError,
    _Section,
    load_json,
    resolve_analysis_options,
    resolve_run_config,
)
from .dtwa import CHUNK_SIZE, ChunkSums, IntegrationError, run_dtwa
from .lattice import coupling_matrix, write_coupling_csv
from .oracle_ed import ConvergenceError, ed_run
from .oracle_ising import dtwa_error_prediction, ising_field, ising_pair, ising_series
from .results import (
    CorrelationField,
    ObservableSeries,
    field_from_series,
    field_to_series,
    read_metadata,
    read_series_csv,
    write_metadata,
    write_series_csv,
)

SCHEMA_VERSION = 1
_SUBCOMMANDS = (
    "dtwa",
    "oracle-ising",
    "oracle-ed",
    "analyze-lightcone",
    "compare",
    "crossover",
)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dtwa-quench",
        description="quench-dynamics simulator: DTWA engine, exact oracles, "
        "light-cone analytics",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--workers", type=int, default=1, help="worker processes")
        p.add_argument("--output", default=None, help="output directory")
        p.add_argument(
            "--seed", type=int, default=None, help="override master_seed (u64)"
        )
    args = parser.parse_args(argv)

    outdir_holder: list[Path | None] = [None]
    try:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        if args.seed is not None and not (0 <= args.seed < 2**64):
            raise ConfigError("--seed must fit in an unsigned 64-bit integer")
        cfg = load_json(args.config)
        handler = {
            "dtwa": _cmd_dtwa,
            "oracle-ising": _cmd_oracle_ising,
            "oracle-ed": _cmd_oracle_ed,
            "analyze-lightcone": _cmd_analyze,
            "compare": _cmd_compare,
            "crossover": _cmd_crossover,
        }[args.command]
        handler(cfg, args, outdir_holder)
        return 0
    except ConfigError as e:
        _emit_error(e.record(), outdir_holder[0])
        return 2
    except (IntegrationError, ConvergenceError) as e:
        rec = {"type": "runtime", "message": str(e), "time": getattr(e, "time", None)}
        _emit_error(rec, outdir_holder[0])
        return 3
    except OSError as e:
        _emit_error({"type": "runtime", "message": str(e)}, outdir_holder[0])
        return 3


def _emit_error(record: dict, outdir: Path | None) -> None:
    blob = json.dumps({"error": record}, sort_keys=True)
    print(blob, file=sys.stderr)
    if outdir is not None:
        try:
            (outdir / "error.json").write_text(blob + "\n")
        except OSError:
            pass


def _prepare_outdir(args, config_dir: str | None, holder, default_name: str) -> Path:
    outdir = Path(args.output or config_dir or Path("runs") / default_name)
    outdir.mkdir(parents=True, exist_ok=True)
    holder[0] = outdir
    return outdir


def _series_tj(series: ObservableSeries, J: float) -> ObservableSeries:
    out = ObservableSeries(times=series.times * J)
    out.data = dict(series.data)
    return out


def _field_tj(field: CorrelationField, J: float) -> CorrelationField:
    return CorrelationField(
        component=field.component,
        reference=field.reference,
        axis=field.axis,
        separations=field.separations,
        times=field.times * J,
        values=field.values,
        stderr=field.stderr,
    )


def _base_metadata(subcommand: str, cfg: dict, args, resolved=None) -> dict:
    meta = {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "subcommand": subcommand,
        "config": cfg,
        "workers": args.workers,
        "seed_override": args.seed,
    }
    if resolved is not None:
        meta["derived"] = {
            "n_sites": resolved.lattice.n_sites,
            "master_seed_used": resolved.run.master_seed,
            "reference": resolved.reference,
            "partners": list(resolved.partners),
        }
    return meta


def _thr_tag(thr: float) -> str:
    return f"{thr:g}"


def _fit_record(fit) -> dict:
    return {
        "eta": fit.eta,
        "log_prefactor": fit.log_prefactor,
        "eta_stderr": fit.eta_stderr,
        "j_min": fit.j_min,
        "n_points": fit.n_points,
        "residual_rms": fit.residual_rms,
        "ok": fit.ok,
        "reason": fit.reason,
    }


def _write_summary(outdir: Path, lines: list[str]) -> None:
    (outdir / "summary.txt").write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# run subcommands

def _cmd_dtwa(cfg: dict, args, holder) -> None:
    resolved = resolve_run_config(cfg, "dtwa", seed_override=args.seed)
    outdir = _prepare_outdir(args, resolved.output_dir, holder, "dtwa")
    t0 = _time.perf_counter()
    result = run_dtwa(resolved.run, resolved.couplings, workers=args.workers)
    wall = _time.perf_counter() - t0

    series = _series_tj(result.series, resolved.J)
    write_series_csv(outdir / "series.csv", series)
    for comp in sorted(result.fields):
        fld = _field_tj(result.fields[comp], resolved.J)
        write_series_csv(outdir / f"field_{comp}.csv", field_to_series(fld))
    if result.fields and result.chunk_sums is not None:
        result.chunk_sums.save_npz(outdir / "chunk_sums.npz")
    if resolved.export_couplings:
        write_coupling_csv(outdir / "couplings.csv", resolved.couplings)

    meta = _base_metadata("dtwa", cfg, args, resolved)
    meta["oracle"] = None
    meta["derived"].update(
        {
            "chunk_size": CHUNK_SIZE,
            "n_chunks": len(result.chunk_sums.counts),
            "h_used": result.h_used,
            "h_used_tj": None if result.h_used is None else result.h_used * resolved.J,
            "halvings": result.halvings,
            "diagnostics": result.diagnostics,
        }
    )
    meta["timing"] = {"wall_time_s": wall}
    write_metadata(outdir / "metadata.json", meta)

    lines = [
        f"dtwa run: model={resolved.model} lattice={resolved.lattice.nx}x"
        f"{resolved.lattice.ny} alpha={resolved.alpha:g} J={resolved.J:g}",
        f"n_t={resolved.run.n_t} master_seed={resolved.run.master_seed}",
        f"times: {len(series.times)} samples, tJ in "
        f"[{series.times[0]:g}, {series.times[-1]:g}]",
    ]
    if "S_x" in series.data:
        sx = series.mean("S_x")
        lines.append(f"S_x range: [{sx.min():.6g}, {sx.max():.6g}]")
    for comp in sorted(result.fields):
        v = result.fields[comp].values
        lines.append(f"C_{comp}: max {v.max():.6g} at final-time row")
    lines.append(
        "drift: norm {max_norm_deviation:.3e}, energy_rel "
        "{max_energy_rel_drift:.3e}, sz {max_sz_drift:.3e}".format(
            **result.diagnostics
        )
    )
    _write_summary(outdir, lines)


def _cmd_oracle_ising(cfg: dict, args, holder) -> None:
    resolved = resolve_run_config(cfg, "oracle-ising", seed_override=args.seed)
    bad = [c for c in resolved.components if c == "zz"]
    if bad:
        raise ConfigError(
            "connected zz correlations are identically zero for this protocol "
            "and are not provided by the closed-form oracle",
            key="observables.correlations.components",
        )
    outdir = _prepare_outdir(args, resolved.output_dir, holder, "oracle-ising")
    t0 = _time.perf_counter()
    times_phys = resolved.run.sample_times
    series = ising_series(resolved.couplings, times_phys)
    corr = resolved.run.correlations
    fields = {}
    for comp in resolved.components:
        if comp in ("xx", "yy"):
            fields[comp] = ising_field(
                resolved.couplings,
                resolved.reference,
                resolved.partners,
                times_phys,
                component=comp,
                axis=corr.axis if corr is not None else "",
            )
    if any(c in ("pp", "pm") for c in resolved.components):
        zeros = np.zeros(len(times_phys))
        for k, m in enumerate(resolved.partners):
            pp, pm = ising_pair(resolved.couplings, resolved.reference, m, times_phys)
            j = k + 1
            if "pp" in resolved.components:
                series.add(f"pair_pp_re_j{j}", pp, zeros)
                series.add(f"pair_pp_im_j{j}", zeros, zeros)
            if "pm" in resolved.components:
                series.add(f"pair_pm_re_j{j}", pm, zeros)
                series.add(f"pair_pm_im_j{j}", zeros, zeros)
    wall = _time.perf_counter() - t0

    write_series_csv(outdir / "series.csv", _series_tj(series, resolved.J))
    for comp in sorted(fields):
        fld = _field_tj(fields[comp], resolved.J)
        write_series_csv(outdir / f"field_{comp}.csv", field_to_series(fld))
    if resolved.export_couplings:
        write_coupling_csv(outdir / "couplings.csv", resolved.couplings)

    meta = _base_metadata("oracle-ising", cfg, args, resolved)
    meta["oracle"] = "ising_exact"
    meta["timing"] = {"wall_time_s": wall}
    write_metadata(outdir / "metadata.json", meta)
    _write_summary(
        outdir,
        [
            f"closed-form ising oracle: lattice={resolved.lattice.nx}x"
            f"{resolved.lattice.ny} alpha={resolved.alpha:g} J={resolved.J:g}",
            f"times: {len(series.times)} samples",
            f"fields: {sorted(fields)}",
        ],
    )


def _cmd_oracle_ed(cfg: dict, args, holder) -> None:
    resolved = resolve_run_config(cfg, "oracle-ed", seed_override=args.seed)
    outdir = _prepare_outdir(args, resolved.output_dir, holder, "oracle-ed")
    t0 = _time.perf_counter()
    result = ed_run(
        resolved.couplings,
        resolved.run.sample_times,
        collective_x=resolved.collective_x,
        reference=resolved.reference,
        partners=resolved.partners,
        components=resolved.components,
        tol=resolved.ed_tol,
        m_max=resolved.ed_m_max,
    )
    wall = _time.perf_counter() - t0

    write_series_csv(outdir / "series.csv", _series_tj(result.series, resolved.J))
    for comp in sorted(result.fields):
        fld = _field_tj(result.fields[comp], resolved.J)
        write_series_csv(outdir / f"field_{comp}.csv", field_to_series(fld))
    if resolved.export_couplings:
        write_coupling_csv(outdir / "couplings.csv", resolved.couplings)

    meta = _base_metadata("oracle-ed", cfg, args, resolved)
    meta["oracle"] = "ed"
    meta["derived"]["diagnostics"] = result.diagnostics
    meta["timing"] = {"wall_time_s": wall}
    write_metadata(outdir / "metadata.json", meta)
    _write_summary(
        outdir,
        [
            f"state-vector oracle: model={resolved.model} lattice="
            f"{resolved.lattice.nx}x{resolved.lattice.ny} alpha={resolved.alpha:g}",
            f"times: {len(result.series.times)} samples",
            "drift: norm {max_norm_deviation:.3e}, energy_rel "
            "{max_energy_rel_drift:.3e}, sz {max_sz_drift:.3e}".format(
                **result.diagnostics
            ),
        ],
    )


# ---------------------------------------------------------------------------
# analysis subcommands

def _load_field_from_run(run_dir: Path, component: str) -> CorrelationField:
    path = run_dir / f"field_{component}.csv"
    if not path.exists():
        raise ConfigError(
            f"no field_{component}.csv in {run_dir}; run with correlations first",
            key="input",
        )
    return field_from_series(read_series_csv(path), component)


def _j_min_from_meta(meta: dict, requested: int | None) -> int:
    if requested is not None:
        return requested
    lat_cfg = meta.get("config", {}).get("lattice", {})
    nx = lat_cfg.get("nx", 0)
    ny = lat_cfg.get("ny", 0)
    return 1 if min(nx, ny) <= 1 else 2


def _cmd_analyze(cfg: dict, args, holder) -> None:
    root = _Section(dict(cfg))
    input_dir = Path(root.take("input", "string", required=True))
    component = root.take("component", "string", default="yy")
    analysis = resolve_analysis_options(root.section("analysis"))
    output_dir = root.take("output_dir", "string")
    root.take("note", "string")
    root.finish()
    if component not in ("xx", "yy", "zz"):
        raise ConfigError(
            f"'component' must be xx, yy, or zz, got {component!r}", key="component"
        )
    if not input_dir.is_dir():
        raise ConfigError(f"input directory not found: {input_dir}", key="input")
    outdir = _prepare_outdir(args, output_dir, holder, "analyze-lightcone")

    meta_in = {}
    meta_path = input_dir / "metadata.json"
    if meta_path.exists():
        meta_in = read_metadata(meta_path)
    field = _load_field_from_run(input_dir, component)
    j_min = _j_min_from_meta(meta_in, analysis.j_min)

    sums_path = input_dir / "chunk_sums.npz"
    chunk = None
    if sums_path.exists():
        chunk = ChunkSums.load_npz(sums_path)

    t0 = _time.perf_counter()
    fits = {}
    lines = [f"light-cone analysis of {input_dir} component={component} j_min={j_min}"]
    for thr in analysis.thresholds:
        contour = extract_contour(field, thr)
        write_contour_csv(outdir / f"contour_{component}_thr{_thr_tag(thr)}.csv", contour)
        fit = fit_power_law(contour, j_min)
        if fit.ok and chunk is not None and component in chunk.pair_sum:
            stderr, _ = bootstrap_eta(
                chunk.counts,
                chunk.site_sum[component],
                chunk.pair_sum[component],
                field.times,
                field.separations,
                component,
                thr,
                j_min,
                n_resamples=analysis.bootstrap_resamples,
                seed=analysis.bootstrap_seed,
            )
            fit.eta_stderr = stderr
        fits[_thr_tag(thr)] = _fit_record(fit)
        crossed = int(contour.crossed.sum())
        if fit.ok:
            err = "n/a" if fit.eta_stderr is None else f"{fit.eta_stderr:.4g}"
            lines.append(
                f"thr={thr:g}: {crossed} separations crossed, "
                f"eta={fit.eta:.4g} (stderr {err})"
            )
        else:
            lines.append(f"thr={thr:g}: {crossed} separations crossed, fit failed: {fit.reason}")
    wall = _time.perf_counter() - t0

    write_metadata(
        outdir / "fit.json",
        {"component": component, "j_min": j_min, "thresholds": fits},
    )
    meta = _base_metadata("analyze-lightcone", cfg, args)
    meta["timing"] = {"wall_time_s": wall}
    write_metadata(outdir / "metadata.json", meta)
    _write_summary(outdir, lines)


def _cmd_compare(cfg: dict, args, holder) -> None:
    root = _Section(dict(cfg))
    dir_a = Path(root.take("a", "string", required=True))
    dir_b = Path(root.take("b", "string", required=True))
    component = root.take("component", "string", default="yy")
    error_law = root.take("error_law", "boolean", default=False)
    analysis = resolve_analysis_options(root.section("analysis"))
    output_dir = root.take("output_dir", "string")
    root.take("note", "string")
    root.finish()
    for d in (dir_a, dir_b):
        if not d.is_dir():
            raise ConfigError(f"run directory not found: {d}", key="a" if d == dir_a else "b")
    outdir = _prepare_outdir(args, output_dir, holder, "compare")

    field_a = _load_field_from_run(dir_a, component)
    field_b = _load_field_from_run(dir_b, component)
    if not np.array_equal(field_a.times, field_b.times) or not np.array_equal(
        field_a.separations, field_b.separations
    ):
        raise ConfigError(
            "the two runs are not on the same time grid and separations"
        )
    meta_a = read_metadata(dir_a / "metadata.json") if (dir_a / "metadata.json").exists() else {}
    j_min = _j_min_from_meta(meta_a, analysis.j_min)

    t0 = _time.perf_counter()
    lines = [f"compare {dir_a} vs {dir_b}, component={component}, j_min={j_min}"]
    records = {}
    for thr in analysis.thresholds:
        ca = extract_contour(field_a, thr)
        cb = extract_contour(field_b, thr)
        js, delta = contour_difference(ca, cb, j_min)
        with open(outdir / f"delta_tau_thr{_thr_tag(thr)}.csv", "w") as f:
            f.write("j,delta_tau\n")
            for j, d in zip(js, delta):
                f.write(f"{int(j)},{repr(float(d))}\n")
        records[_thr_tag(thr)] = {
            "j": [int(j) for j in js],
            "delta_tau": [float(d) for d in delta],
            "fit_a": _fit_record(fit_power_law(ca, j_min)),
            "fit_b": _fit_record(fit_power_law(cb, j_min)),
        }
        worst = np.abs(delta).max() if len(delta) else float("nan")
        lines.append(f"thr={thr:g}: {len(js)} shared separations, max|dtau|={worst:.4g}")

    if error_law:
        cfg_a = meta_a.get("config")
        if not cfg_a:
            raise ConfigError(
                "error_law needs metadata.json with the original config in run a",
                key="error_law",
            )
        res_a = resolve_run_config(cfg_a, "oracle-ising")
        t_phys = field_a.times / res_a.J
        with open(outdir / "error_law.csv", "w") as f:
            f.write("time,j,observed,predicted\n")
            for kk, (j, m) in enumerate(
                zip(field_a.separations, res_a.partners)
            ):
                predicted = dtwa_error_prediction(
                    res_a.couplings, res_a.reference, m, t_phys
                )
                observed = relative_deviation(
                    field_a.values[:, kk], field_b.values[:, kk]
                )
                for t, o, p in zip(field_a.times, observed, predicted):
                    f.write(
                        f"{repr(float(t))},{int(j)},{repr(float(o))},{repr(float(p))}\n"
                    )
        lines.append("error_law.csv written (observed vs predicted relative deviation)")
    wall = _time.perf_counter() - t0

    write_metadata(outdir / "compare.json", {"component": component, "thresholds": records})
    meta = _base_metadata("compare", cfg, args)
    meta["timing"] = {"wall_time_s": wall}
    write_metadata(outdir / "metadata.json", meta)
    _write_summary(outdir, lines)


def _cmd_crossover(cfg: dict, args, holder) -> None:
    root = _Section(dict(cfg))
    base_raw = root.take("base", "any", required=True)
    alphas_raw = root.take("alphas", "array", required=True)
    analysis_sec = root.section("analysis")
    output_dir = root.take("output_dir", "string")
    root.take("note", "string")
    root.finish()
    if not isinstance(base_raw, dict):
        raise ConfigError("'base' must be an object", key="base")
    if "alpha" in base_raw:
        raise ConfigError(
            "'base' must not set alpha; list them in 'alphas'", key="base.alpha"
        )
    if not alphas_raw or not all(
        isinstance(a, (int, float)) and not isinstance(a, bool) and a >= 0
        for a in alphas_raw
    ):
        raise ConfigError(
            "'alphas' must be a non-empty array of numbers >= 0", key="alphas"
        )
    analysis = resolve_analysis_options(analysis_sec)
    base = resolve_run_config(base_raw, "crossover", seed_override=args.seed,
                              require_alpha=False)
    if not base.components or not any(
        c in ("xx", "yy", "zz") for c in base.components
    ):
        raise ConfigError(
            "'base' must request a correlation field component for contours",
            key="base.observables.correlations",
        )
    component = next(c for c in base.components if c in ("xx", "yy", "zz"))
    outdir = _prepare_outdir(args, output_dir, holder, "crossover")
    j_min = analysis.j_min if analysis.j_min is not None else base.j_min_default()
    thr = analysis.thresholds[0]

    t0 = _time.perf_counter()
    rows = []
    lines = [
        f"crossover: component={component} thr={thr:g} j_min={j_min} "
        f"alphas={[float(a) for a in alphas_raw]}"
    ]
    for idx, alpha in enumerate(alphas_raw):
        couplings = coupling_matrix(base.lattice, base.model, J=base.J, alpha=float(alpha))
        result = run_dtwa(base.run, couplings, workers=args.workers)
        fld = _field_tj(result.fields[component], base.J)
        adir = outdir / f"alpha_{alpha:g}"
        adir.mkdir(parents=True, exist_ok=True)
        write_series_csv(adir / f"field_{component}.csv", field_to_series(fld))
        contour = extract_contour(fld, thr)
        write_contour_csv(adir / f"contour_{component}_thr{_thr_tag(thr)}.csv", contour)
        fit = fit_power_law(contour, j_min)
        if fit.ok:
            stderr, _ = bootstrap_eta(
                result.chunk_sums.counts,
                result.chunk_sums.site_sum[component],
                result.chunk_sums.pair_sum[component],
                fld.times,
                fld.separations,
                component,
                thr,
                j_min,
                n_resamples=analysis.bootstrap_resamples,
                seed=analysis.bootstrap_seed + idx,
            )
            fit.eta_stderr = stderr
        rows.append((float(alpha), fit))
        if fit.ok:
            err = "n/a" if fit.eta_stderr is None else f"{fit.eta_stderr:.4g}"
            lines.append(f"alpha={alpha:g}: eta={fit.eta:.4g} (stderr {err})")
        else:
            lines.append(f"alpha={alpha:g}: fit failed: {fit.reason}")
    wall = _time.perf_counter() - t0

    with open(outdir / "eta_table.csv", "w") as f:
        f.write("alpha,eta,eta_stderr\n")
        for alpha, fit in rows:
            err = "nan" if fit.eta_stderr is None else repr(float(fit.eta_stderr))
            f.write(f"{repr(alpha)},{repr(fit.eta)},{err}\n")
    from .analysis import CrossoverRow

    crossover_rows = [
        CrossoverRow(alpha=a, eta=f.eta, eta_stderr=f.eta_stderr, ok=f.ok)
        for a, f in rows
    ]
    monotone = monotonic_within_error([r for r in crossover_rows if r.ok])
    lines.append(f"eta non-decreasing within error bars: {monotone}")

    write_metadata(
        outdir / "crossover.json",
        {
            "component": component,
            "threshold": thr,
            "j_min": j_min,
            "rows": [
                {"alpha": a, **_fit_record(f)} for a, f in rows
            ],
            "monotonic_within_error": monotone,
        },
    )
    meta = _base_metadata("crossover", cfg, args)
    meta["timing"] = {"wall_time_s": wall}
    write_metadata(outdir / "metadata.json", meta)
    _write_summary(outdir, lines)


if __name__ == "__main__":
    sys.exit(main())
