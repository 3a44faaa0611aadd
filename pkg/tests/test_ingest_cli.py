import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from amfkit.cli import main as cli_main
from amfkit.config import RunConfig, load_config, parse_keyvalue
from amfkit.errors import ValidationError
from amfkit.grids import grid_from_csv, grid_to_csv, render_svg, TestGrid as ResultGrid
from amfkit.ingest import (
    read_bundle,
    read_factor_csv,
    read_price_csv,
    write_bundle,
    write_factor_csv,
    write_price_csv,
)
from amfkit.synth import make_spec, generate
from amfkit.taxonomy import builtin_taxonomy, load_taxonomy


@pytest.fixture(scope="module")
def market(tmp_path_factory):
    spec = make_spec(n_weeks=180, n_factors=10, n_stocks=4, noise_sd=0.5, seed=3,
                     late_fraction=0.25, late_week=40)
    return generate(spec)


class TestTaxonomy:
    def test_builtin_shape(self):
        tax = builtin_taxonomy()
        assert len(tax.classes) == 10
        assert len(tax.subclasses) == 73

    def test_class_lookup(self):
        tax = builtin_taxonomy()
        assert tax.class_of("Government Bonds") == "Bond/Fixed Income"
        assert tax.class_of("Volatility") == "Volatility"
        with pytest.raises(ValidationError):
            tax.class_of("Meme Stocks")

    def test_override_round_trip(self, tmp_path):
        path = tmp_path / "tax.csv"
        path.write_text("subclass,class\nFoo,Bar\nBaz,Bar\n")
        tax = load_taxonomy(path)
        assert tax.classes == ("Bar",)
        assert tax.class_of("Foo") == "Bar"


class TestCsvRoundTrip:
    def test_panels_round_trip_exactly(self, market, tmp_path):
        prices, factors, _ = market
        write_price_csv(prices, tmp_path / "p.csv")
        write_factor_csv(factors, tmp_path / "f.csv")
        p2 = read_price_csv(tmp_path / "p.csv")
        f2 = read_factor_csv(tmp_path / "f.csv")
        assert p2.assets == prices.assets
        assert np.array_equal(p2.dates, prices.dates)
        np.testing.assert_array_equal(p2.prices, prices.prices)
        np.testing.assert_array_equal(p2.returns, prices.returns)
        assert f2.factors == factors.factors
        assert f2.roles == factors.roles
        np.testing.assert_array_equal(f2.values, factors.values)
        assert f2.categories == factors.categories

    def test_bundle_round_trip(self, market, tmp_path):
        prices, factors, _ = market
        out = write_bundle(tmp_path / "bundle", prices, factors)
        p2, f2 = read_bundle(out)
        np.testing.assert_array_equal(p2.prices, prices.prices)
        np.testing.assert_array_equal(f2.values, factors.values)
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["summary"]["n_assets"] == 4

    def test_non_monotone_date_names_row(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text(
            "date,id,price,return\n"
            "2007-01-05,A,100.0,\n"
            "2007-01-12,A,101.0,0.01\n"
            "2007-01-12,A,102.0,0.02\n"
        )
        with pytest.raises(ValidationError, match="row 4"):
            read_price_csv(path)

    def test_bad_date_names_row(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("date,id,price,return\nnot-a-date,A,100.0,\n")
        with pytest.raises(ValidationError, match="row 2"):
            read_price_csv(path)

    def test_bad_number_names_row(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("date,id,price,return\n2007-01-05,A,hundred,\n")
        with pytest.raises(ValidationError, match="row 2"):
            read_price_csv(path)

    def test_missing_column(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("date,id,price\n2007-01-05,A,100.0\n")
        with pytest.raises(ValidationError, match="missing columns"):
            read_price_csv(path)

    def test_unknown_role_names_row(self, tmp_path):
        path = tmp_path / "f.csv"
        path.write_text(
            "date,id,value,role,class,subclass\n"
            "2007-01-05,MMA,1.0,mma,,\n"
            "2007-01-05,MKT,100.0,marketplace,,\n"
        )
        with pytest.raises(ValidationError, match="row 3"):
            read_factor_csv(path)

    def test_staggered_grids_align_on_union(self, market, tmp_path):
        prices, factors, _ = market
        # prices start four weeks after the factor history begins; alignment
        # must pad the price panel back onto the union grid
        write_price_csv(prices, tmp_path / "p.csv")
        write_factor_csv(factors, tmp_path / "f.csv")
        rows = (tmp_path / "p.csv").read_text().splitlines()
        cut = str(prices.dates[4])
        kept = [rows[0]] + [r for r in rows[1:] if r.split(",")[0] >= cut]
        (tmp_path / "p_cut.csv").write_text("\n".join(kept) + "\n")
        from amfkit.panels import align_panels
        p2 = read_price_csv(tmp_path / "p_cut.csv")
        f2 = read_factor_csv(tmp_path / "f.csv")
        ap, af = align_panels(p2, f2)
        assert np.array_equal(ap.dates, af.dates)
        assert np.array_equal(ap.dates, factors.dates)
        assert np.isnan(ap.prices[:4]).all()
        np.testing.assert_array_equal(ap.prices[4:], prices.prices[4:])
        np.testing.assert_array_equal(af.values, factors.values)

    def test_midweek_observation_maps_to_friday(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text(
            "date,id,price,return\n"
            "2007-01-04,A,100.0,\n"      # Thursday stands in for Friday 01-05
            "2007-01-12,A,110.0,0.1\n"
        )
        panel = read_price_csv(path)
        assert str(panel.dates[0]) == "2007-01-05"
        assert panel.prices[0, 0] == 100.0


class TestConfig:
    def test_keyvalue_parse(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("# comment\nfirst_year = 2008\nmin_coverage = 0.75\n\nseed = 3\n")
        raw = parse_keyvalue(path)
        assert raw == {"first_year": 2008, "min_coverage": 0.75, "seed": 3}

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("bogus = 1\n")
        with pytest.raises(ValidationError, match="unknown config keys"):
            load_config(path)

    def test_hash_ignores_non_semantic_fields(self):
        a = RunConfig(seed=1, workers=1, out_dir="x")
        b = RunConfig(seed=1, workers=8, out_dir="y")
        c = RunConfig(seed=2)
        assert a.config_hash() == b.config_hash() != c.config_hash()

    def test_invalid_bounds_rejected(self):
        with pytest.raises(ValidationError):
            RunConfig(first_year=2010, last_year=2010, min_len=3)


class TestGridSerialization:
    def _grid(self):
        grid = ResultGrid.empty(2007, 2010, 3, "amf", "linear")
        grid.set_cell(2007, 2009, 12.5)
        grid.set_cell(2007, 2010, 0.0)
        grid.set_cell(2008, 2010, 3.25)
        return grid

    def test_csv_round_trip(self):
        grid = self._grid()
        back = grid_from_csv(grid_to_csv(grid))
        assert back.populated() == grid.populated()

    def test_svg_renders(self):
        svg = render_svg(self._grid())
        assert svg.startswith("<svg") and "12.5" in svg


def _write_scenario(path: Path, **kv):
    lines = [f"{k} = {v}" for k, v in kv.items()]
    path.write_text("\n".join(lines) + "\n")


class TestCli:
    def test_synth_ingest_sweep_diff(self, tmp_path):
        runner = CliRunner()
        scenario = tmp_path / "scenario.txt"
        _write_scenario(scenario, n_weeks=240, n_factors=10, n_stocks=5,
                        noise_sd=0.6, seed=4, betas_per_stock=2)
        bundle = tmp_path / "bundle"
        res = runner.invoke(cli_main, ["synth", "--spec", str(scenario),
                                       "--out-dir", str(bundle)])
        assert res.exit_code == 0, res.output
        assert (bundle / "truth.json").exists()

        out = tmp_path / "out"
        args = ["sweep", "--bundle", str(bundle), "--model", "ff5", "--test", "linear",
                "--first-year", "2007", "--last-year", "2010", "--out-dir", str(out)]
        res = runner.invoke(cli_main, args)
        assert res.exit_code == 0, res.output
        grid_csv = (out / "grid_ff5_linear.csv").read_text()
        assert len(grid_csv.strip().splitlines()) == 1 + 3  # header + 3 windows

        res = runner.invoke(cli_main, ["diff", str(out / "grid_ff5_linear.csv"),
                                       str(out / "grid_ff5_linear.csv"),
                                       "--out", str(out / "zero.csv")])
        assert res.exit_code == 0
        zero = grid_from_csv((out / "zero.csv").read_text())
        assert all(v == 0.0 for _, _, v in zero.populated())

    def test_sweep_deterministic_across_workers(self, tmp_path):
        runner = CliRunner()
        scenario = tmp_path / "scenario.txt"
        _write_scenario(scenario, n_weeks=240, n_factors=10, n_stocks=6,
                        noise_sd=0.6, seed=5, betas_per_stock=2)
        bundle = tmp_path / "bundle"
        assert runner.invoke(cli_main, ["synth", "--spec", str(scenario),
                                        "--out-dir", str(bundle)]).exit_code == 0
        payloads = []
        for workers in (1, 4):
            out = tmp_path / f"out{workers}"
            res = runner.invoke(cli_main, [
                "sweep", "--bundle", str(bundle), "--model", "amf", "--test", "linear",
                "--first-year", "2007", "--last-year", "2010",
                "--n-folds", "5", "--grid-size", "30",
                "--workers", str(workers), "--out-dir", str(out),
            ])
            assert res.exit_code == 0, res.output
            payloads.append((out / "grid_amf_linear.csv").read_bytes())
        assert payloads[0] == payloads[1]

    def test_gibs_command(self, tmp_path):
        runner = CliRunner()
        scenario = tmp_path / "scenario.txt"
        _write_scenario(scenario, n_weeks=180, n_factors=10, n_stocks=3,
                        noise_sd=0.5, seed=6, betas_per_stock=2)
        bundle = tmp_path / "bundle"
        assert runner.invoke(cli_main, ["synth", "--spec", str(scenario),
                                        "--out-dir", str(bundle)]).exit_code == 0
        out = tmp_path / "out"
        res = runner.invoke(cli_main, [
            "gibs", "--bundle", str(bundle), "--start-year", "2007", "--end-year", "2009",
            "--n-folds", "5", "--grid-size", "30", "--out-dir", str(out),
        ])
        assert res.exit_code == 0, res.output
        payload = json.loads((out / "gibs_amf_2007-2009.json").read_text())
        assert len(payload["selections"]) == 3
        for sel in payload["selections"].values():
            assert set(sel["significant_set"]) <= set(sel["selected_set"])

    def test_battery_command(self, tmp_path):
        runner = CliRunner()
        scenario = tmp_path / "scenario.txt"
        _write_scenario(scenario, n_weeks=180, n_factors=10, n_stocks=3,
                        noise_sd=0.5, seed=7, betas_per_stock=2)
        bundle = tmp_path / "bundle"
        assert runner.invoke(cli_main, ["synth", "--spec", str(scenario),
                                        "--out-dir", str(bundle)]).exit_code == 0
        out = tmp_path / "out"
        res = runner.invoke(cli_main, [
            "test-linear", "--bundle", str(bundle), "--start-year", "2007",
            "--end-year", "2009", "--n-folds", "5", "--grid-size", "30",
            "--out-dir", str(out),
        ])
        assert res.exit_code == 0, res.output
        payload = json.loads((out / "test_linear_amf_2007-2009.json").read_text())
        assert payload["test"] == "linear" and payload["n_tested"] == 3

    def test_validation_error_exit_code(self, tmp_path):
        runner = CliRunner()
        bad = tmp_path / "bad.csv"
        bad.write_text("date,id,price,return\nnope,A,1,\n")
        res = runner.invoke(cli_main, ["ingest", "--prices", str(bad),
                                       "--factors", str(bad),
                                       "--out-dir", str(tmp_path / "b")])
        assert res.exit_code == 1

    def test_calibrate_rejects_zero_reps(self, tmp_path):
        runner = CliRunner()
        res = runner.invoke(cli_main, ["calibrate", "--reps", "0",
                                       "--out-dir", str(tmp_path)])
        assert res.exit_code == 1

    def test_calibrate_smoke(self, tmp_path):
        runner = CliRunner()
        res = runner.invoke(cli_main, ["calibrate", "--reps", "60", "--seed", "1",
                                       "--out-dir", str(tmp_path)])
        assert res.exit_code == 0, res.output
        text = (tmp_path / "calibration.txt").read_text()
        assert "intercept" in text and "anova" in text
