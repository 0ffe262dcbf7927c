import json

import pytest

from cartrec.cli import main
from cartrec.corpus import demo_catalog, load_orders
from cartrec.domain import load_catalog, save_catalog


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """One gen -> train chain shared by the read-only CLI tests."""
    tmp = tmp_path_factory.mktemp("cli")
    catalog = tmp / "menu.json"
    orders = tmp / "orders.jsonl"
    bundle = tmp / "bundle"
    assert main([
        "gen", "--catalog", str(catalog), "--orders", "800", "--seed", "11",
        "--days", "40", "--out", str(orders),
    ]) == 0
    assert main([
        "train", "--orders", str(orders), "--catalog", str(catalog),
        "--out", str(bundle), "--embed-days", "40", "--clf-days", "14",
        "--dim", "16", "--k", "8", "--epochs", "6", "--seed", "11",
    ]) == 0
    return tmp, catalog, orders, bundle


class TestGen:
    def test_writes_demo_catalog_when_missing(self, tmp_path, capsys):
        catalog = tmp_path / "menu.json"
        out = tmp_path / "orders.jsonl"
        code = main([
            "gen", "--catalog", str(catalog), "--orders", "50",
            "--seed", "1", "--days", "10", "--out", str(out),
        ])
        assert code == 0
        assert catalog.exists()
        assert load_catalog(catalog) == demo_catalog()
        assert len(load_orders(out)) == 50

    def test_existing_catalog_untouched(self, tmp_path, small_catalog):
        catalog = tmp_path / "menu.json"
        save_catalog(small_catalog, catalog)
        before = catalog.read_bytes()
        out = tmp_path / "orders.jsonl"
        code = main([
            "gen", "--catalog", str(catalog), "--orders", "30",
            "--seed", "1", "--days", "10", "--out", str(out), "--rules", "none",
        ])
        assert code == 0
        assert catalog.read_bytes() == before

    def test_seed_reproducible(self, tmp_path):
        catalog = tmp_path / "menu.json"
        outs = []
        for name in ("a.jsonl", "b.jsonl"):
            out = tmp_path / name
            assert main([
                "gen", "--catalog", str(catalog), "--orders", "100",
                "--seed", "5", "--days", "10", "--out", str(out),
            ]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_rules_file(self, tmp_path):
        catalog = tmp_path / "menu.json"
        rules = tmp_path / "rules.json"
        rules.write_text(json.dumps({
            "rec_flag_rate": 1.0,
            "rules": [{"trigger": ["burger"], "consequent": "cola", "probability": 1.0}],
        }))
        out = tmp_path / "orders.jsonl"
        assert main([
            "gen", "--catalog", str(catalog), "--orders", "60",
            "--seed", "2", "--days", "5", "--out", str(out), "--rules", str(rules),
        ]) == 0
        log = load_orders(out)
        for order in log.orders:
            ids = {l.dish_id for l in order.lines}
            if "burger" in ids:
                assert "cola" in ids


class TestEvalAndCompare:
    def test_eval_writes_report(self, pipeline, capsys):
        tmp, catalog, orders, bundle = pipeline
        report = tmp / "report.json"
        code = main([
            "eval", "--model", str(bundle), "--orders", str(orders),
            "--catalog", str(catalog), "--report", str(report),
        ])
        assert code == 0
        payload = json.loads(report.read_text())
        assert payload["n_cases"] > 0
        assert payload["map"]["1"] <= payload["map"]["4"]
        out = capsys.readouterr().out
        assert "MAP@4" in out and "rec_percent" in out

    def test_compare_prints_both_rows(self, pipeline, capsys):
        tmp, catalog, orders, bundle = pipeline
        code = main([
            "compare", "--model", str(bundle), "--orders", str(orders),
            "--catalog", str(catalog),
        ])
        assert code == 0
        out = capsys.readouterr().out
        lines = [l for l in out.splitlines() if l.strip()]
        assert any(l.startswith("model") for l in lines)
        assert any(l.startswith("baseline") for l in lines)

    def test_compare_model_beats_baseline_on_planted_rules(self, pipeline, capsys):
        tmp, catalog, orders, bundle = pipeline
        assert main([
            "compare", "--model", str(bundle), "--orders", str(orders),
            "--catalog", str(catalog),
        ]) == 0
        out = capsys.readouterr().out
        rows = {}
        for line in out.splitlines():
            parts = line.split()
            if parts and parts[0] in ("model", "baseline"):
                rows[parts[0]] = [float(x) for x in parts[1:]]
        # columns: MAP@1..4, rec%; planted pie->coffee is outside the baseline rules
        assert rows["model"][3] > rows["baseline"][3]

    def test_recommend_subcommand(self, pipeline, capsys):
        tmp, catalog, orders, bundle = pipeline
        cart = json.dumps([{"dish_id": "burger", "name": "hamburger", "qty": 1}])
        code = main([
            "recommend", "--model", str(bundle), "--catalog", str(catalog),
            "--cart", cart,
        ])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert len(payload["items"]) == 4
        assert payload["model_version"]


class TestExitCodes:
    def test_unknown_flag_is_usage_error(self, capsys):
        assert main(["gen", "--catalog", "c.json", "--out", "o.jsonl", "--bogus"]) == 1
        err = capsys.readouterr().err
        assert "--bogus" in err
        assert "usage" in err.lower()

    def test_missing_required_flag_is_usage_error(self):
        assert main(["train", "--orders", "x.jsonl"]) == 1

    def test_unknown_subcommand_is_usage_error(self):
        assert main(["explode"]) == 1

    def test_missing_model_path_is_runtime_error(self, pipeline, capsys):
        tmp, catalog, orders, _ = pipeline
        code = main([
            "eval", "--model", str(tmp / "nope"), "--orders", str(orders),
            "--catalog", str(catalog), "--report", str(tmp / "r.json"),
        ])
        assert code == 2
        assert "nope" in capsys.readouterr().err

    def test_bad_cart_json_is_runtime_error(self, pipeline, capsys):
        tmp, catalog, orders, bundle = pipeline
        code = main([
            "recommend", "--model", str(bundle), "--catalog", str(catalog),
            "--cart", "{{{",
        ])
        assert code == 2

    @pytest.mark.parametrize(
        "cmd", ["gen", "train", "eval", "compare", "serve", "recommend"]
    )
    def test_help_documents_flags(self, cmd, capsys):
        with pytest.raises(SystemExit) as exc:
            main([cmd, "--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        assert "--" in out and "default" in out.lower()
