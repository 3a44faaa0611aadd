"""Command-line surface.

Exit codes: 0 success, 1 validation error, 2 numerical failure,
3 partial completion (some windows failed; details in the manifest).
"""

from __future__ import annotations

import datetime
import json
import sys
from dataclasses import asdict
from pathlib import Path

import click

from . import calibrate as calib
from . import grids as grids_mod
from . import ingest as ingest_mod
from . import synth as synth_mod
from .config import RunConfig, load_config
from .errors import NumericalError, ValidationError
from .gibs import fit_stock, prepare_window
from .panels import filter_assets
from .windows import make_window

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_PARTIAL = 3


def _fail(exc: Exception) -> int:
    click.echo(f"error: {exc}", err=True)
    if isinstance(exc, ValidationError):
        return EXIT_VALIDATION
    if isinstance(exc, NumericalError):
        return EXIT_NUMERICAL
    raise exc


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


config_options = [
    click.option("--config", "config_path", type=click.Path(exists=True), default=None,
                 help="key = value config file; flags override it"),
    click.option("--first-year", type=int, default=None),
    click.option("--last-year", type=int, default=None),
    click.option("--min-len", type=int, default=None),
    click.option("--min-coverage", type=float, default=None),
    click.option("--threshold-within", type=float, default=None),
    click.option("--threshold-union", type=float, default=None),
    click.option("--support-cap", type=int, default=None),
    click.option("--n-folds", type=int, default=None),
    click.option("--grid-size", type=int, default=None),
    click.option("--significance", type=float, default=None),
    click.option("--fdr-level", type=float, default=None),
    click.option("--basis-size", type=int, default=None),
    click.option("--oos-weeks", type=int, default=None),
    click.option("--seed", type=int, default=None),
    click.option("--workers", type=int, default=None),
    click.option("--out-dir", type=click.Path(), default=None, envvar="AMFKIT_OUT",
                 help="output directory (env: AMFKIT_OUT)"),
]


def with_config(fn):
    for opt in reversed(config_options):
        fn = opt(fn)
    return fn


def build_config(config_path, **flags) -> RunConfig:
    overrides = {k: v for k, v in flags.items() if v is not None}
    if config_path:
        return load_config(config_path, **overrides)
    return RunConfig(**overrides)


@click.group()
def main():
    """Adaptive multi-factor toolkit: ingest panels, select factors, and
    run rolling-window stability tests."""


@main.command()
@click.option("--spec", "spec_path", type=click.Path(exists=True), required=True,
              help="key = value scenario file")
@click.option("--seed", type=int, default=None, help="override the scenario seed")
@click.option("--out-dir", type=click.Path(), required=True, envvar="AMFKIT_OUT")
def synth(spec_path, seed, out_dir):
    """Generate a synthetic market and write it in the ingestion schemas."""
    try:
        overrides = {} if seed is None else {"seed": seed}
        spec = synth_mod.spec_from_file(spec_path, **overrides)
        prices, factors, truth = synth_mod.generate(spec)
        out = ingest_mod.write_bundle(out_dir, prices, factors,
                                      metadata={"created": _now(), "seed": spec.seed})
        truth_payload = {
            "seed": spec.seed,
            "n_weeks": spec.n_weeks,
            "noise_sd": spec.noise_sd,
            "factors": list(truth.factor_names),
            "assets": list(truth.asset_names),
            "true_betas": spec.true_betas.tolist(),
            "alpha": spec.alpha.tolist(),
            "dynamics": [asdict(d) for d in spec.beta_dynamics],
            "inception_week": spec.inception_week.tolist(),
        }
        (out / "truth.json").write_text(json.dumps(truth_payload, indent=2) + "\n")
        click.echo(f"wrote market bundle to {out}")
    except (ValidationError, NumericalError) as exc:
        sys.exit(_fail(exc))
    sys.exit(EXIT_OK)


@main.command()
@click.option("--prices", "prices_path", type=click.Path(exists=True), required=True)
@click.option("--factors", "factors_path", type=click.Path(exists=True), required=True)
@click.option("--taxonomy", "taxonomy_path", type=click.Path(exists=True), default=None)
@click.option("--out-dir", type=click.Path(), required=True, envvar="AMFKIT_OUT")
def ingest(prices_path, factors_path, taxonomy_path, out_dir):
    """Validate long-format CSVs and write a normalized panel bundle."""
    try:
        taxonomy = ingest_mod.load_taxonomy(taxonomy_path) if taxonomy_path else None
        prices = ingest_mod.read_price_csv(prices_path)
        factors = ingest_mod.read_factor_csv(factors_path, taxonomy)
        out = ingest_mod.write_bundle(out_dir, prices, factors, taxonomy,
                                      metadata={"created": _now()})
        summary = json.loads((out / ingest_mod.MANIFEST_FILE).read_text())["summary"]
        click.echo(f"bundle written to {out}: {summary}")
    except (ValidationError, NumericalError) as exc:
        sys.exit(_fail(exc))
    sys.exit(EXIT_OK)


def _load_bundle(bundle):
    return ingest_mod.read_bundle(bundle)


def _selection_payload(result) -> dict:
    return {
        "asset": result.asset,
        "window": result.window.label(),
        "selected_set": list(result.selected_set),
        "significant_set": list(result.significant_set),
        "coefficients": result.fit.coefficients.tolist(),
        "p_values": result.fit.p_values.tolist(),
        "adj_r2": result.fit.adj_r2,
        "rss": result.fit.rss,
    }


@main.command()
@click.option("--bundle", type=click.Path(exists=True), required=True)
@click.option("--start-year", type=int, required=True)
@click.option("--end-year", type=int, required=True)
@click.option("--model", type=click.Choice(grids_mod.MODEL_TAGS), default="amf")
@with_config
def gibs(bundle, start_year, end_year, model, config_path, **flags):
    """Run factor selection for one window; JSON result per stock."""
    try:
        cfg = build_config(config_path, **flags)
        prices, factors = _load_bundle(bundle)
        window = make_window(start_year, end_year)
        data = prepare_window(factors, window, cfg.threshold_within, cfg.threshold_union,
                              reduce=(model == "amf"))
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        results = {}
        failures = {}
        for asset in filter_assets(prices, window, cfg.min_coverage):
            try:
                res = fit_stock(prices, asset, data, model=model,
                                support_cap=cfg.support_cap, n_folds=cfg.n_folds,
                                grid_size=cfg.grid_size, significance=cfg.significance)
                results[asset] = _selection_payload(res)
            except (ValidationError, NumericalError) as exc:
                failures[asset] = str(exc)
        payload = {
            "window": window.label(),
            "model": model,
            "config_hash": cfg.config_hash(),
            "selections": results,
            "failures": failures,
            "metadata": {"created": _now()},
        }
        path = out / f"gibs_{model}_{window.label()}.json"
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        click.echo(f"wrote {path} ({len(results)} stocks, {len(failures)} failures)")
    except (ValidationError, NumericalError) as exc:
        sys.exit(_fail(exc))
    sys.exit(EXIT_PARTIAL if failures else EXIT_OK)


def _battery_command(test_tag: str):
    @click.option("--bundle", type=click.Path(exists=True), required=True)
    @click.option("--start-year", type=int, required=True)
    @click.option("--end-year", type=int, required=True)
    @click.option("--model", type=click.Choice(grids_mod.MODEL_TAGS), default="amf")
    @with_config
    def command(bundle, start_year, end_year, model, config_path, **flags):
        try:
            cfg = build_config(config_path, **flags)
            prices, factors = _load_bundle(bundle)
            window = make_window(start_year, end_year)
            outcome = grids_mod.evaluate_window(
                prices, factors, window, model, test_tag, cfg, workers=cfg.workers
            )
            out = Path(cfg.out_dir)
            out.mkdir(parents=True, exist_ok=True)
            path = out / f"test_{test_tag}_{model}_{window.label()}.json"
            payload = {
                "window": window.label(),
                "model": model,
                "test": test_tag,
                "cell": outcome.cell,
                "n_retained": outcome.n_retained,
                "n_tested": outcome.n_tested,
                "errors": outcome.errors,
                "config_hash": cfg.config_hash(),
                "metadata": {"created": _now()},
            }
            path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
            click.echo(f"{test_tag} [{model}] {window.label()}: cell={outcome.cell:.4f} "
                       f"({outcome.n_tested}/{outcome.n_retained} tested) -> {path}")
        except (ValidationError, NumericalError) as exc:
            sys.exit(_fail(exc))
        sys.exit(EXIT_PARTIAL if outcome.errors else EXIT_OK)

    command.__name__ = f"test_{test_tag}"
    return command


main.command(name="test-intercept")(_battery_command("intercept"))
main.command(name="test-linear")(_battery_command("linear"))
main.command(name="test-residual")(_battery_command("residual"))
main.command(name="test-spline")(_battery_command("spline"))


@main.command()
@click.option("--bundle", type=click.Path(exists=True), required=True)
@click.option("--model", type=click.Choice(grids_mod.MODEL_TAGS), required=True)
@click.option("--test", "test_tag", type=click.Choice(grids_mod.TEST_TAGS), required=True)
@click.option("--svg", is_flag=True, help="also render an SVG heatmap")
@with_config
def sweep(bundle, model, test_tag, svg, config_path, **flags):
    """Run one (model, test) pair over every admissible window."""
    try:
        cfg = build_config(config_path, **flags)
        prices, factors = _load_bundle(bundle)
        windows = grids_mod.default_windows(cfg)
        result = grids_mod.sweep(prices, factors, windows, model, test_tag, cfg,
                                 workers=cfg.workers)
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = f"grid_{model}_{test_tag}"
        (out / f"{stem}.csv").write_text(grids_mod.grid_to_csv(result.grid))
        (out / f"{stem}.json").write_text(
            grids_mod.grid_manifest(result.grid, cfg, result, {"created": _now()})
        )
        if svg:
            (out / f"{stem}.svg").write_text(grids_mod.render_svg(result.grid))
        click.echo(f"wrote {out / stem}.csv ({len(result.grid.populated())} cells)")
        if result.partial:
            click.echo(f"{len(result.failed_windows)} windows failed; see manifest", err=True)
            sys.exit(EXIT_PARTIAL)
    except (ValidationError, NumericalError) as exc:
        sys.exit(_fail(exc))
    sys.exit(EXIT_OK)


@main.command()
@click.argument("grid_a", type=click.Path(exists=True))
@click.argument("grid_b", type=click.Path(exists=True))
@click.option("--out", "out_path", type=click.Path(), required=True)
def diff(grid_a, grid_b, out_path):
    """Cellwise difference of two grid CSVs (A - B)."""
    try:
        a = grids_mod.grid_from_csv(Path(grid_a).read_text())
        b = grids_mod.grid_from_csv(Path(grid_b).read_text())
        d = grids_mod.diff_grids(a, b)
        Path(out_path).write_text(grids_mod.grid_to_csv(d))
        click.echo(f"wrote {out_path}")
    except (ValidationError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    sys.exit(EXIT_OK)


@main.command()
@click.option("--spec", "spec_path", type=click.Path(exists=True), default=None,
              help="scenario file for the null family")
@click.option("--reps", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--power", is_flag=True, help="also run the jump power ladder")
@click.option("--out-dir", type=click.Path(), required=True, envvar="AMFKIT_OUT")
def calibrate(spec_path, reps, seed, power, out_dir):
    """Size calibration of the test batteries on simulated nulls."""
    try:
        if reps < 1:
            raise ValidationError("reps must be positive")
        if spec_path:
            spec = synth_mod.spec_from_file(spec_path, seed=seed)
        else:
            spec = synth_mod.make_spec(n_weeks=157, n_stocks=10, seed=seed)
        report = calib.null_battery(spec, reps)
        text = f"null battery ({reps} reps, nominal 0.05)\n{report.format()}"
        if power:
            ladder = calib.power_ladder(spec, n_reps=max(reps // 5, 50))
            text += f"\njump power ladder\n{ladder.format()}"
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "calibration.txt").write_text(text)
        click.echo(text)
    except (ValidationError, NumericalError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
