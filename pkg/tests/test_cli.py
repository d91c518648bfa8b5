import json
import math
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from fdpkit import cli
from fdpkit.curve import (PiecewiseLinearCurve, identity, make_eps_delta, make_gaussian,
                          sup_distance)
from fdpkit.duality import eps_at_delta

SCHEMA = json.loads((Path(__file__).parents[1] / "docs" / "schema.json").read_text())


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    doc = json.loads(out.out) if code == 0 and out.out.strip() else None
    if doc is not None:
        jsonschema.validate(doc, SCHEMA)
    return code, doc, out.err


@pytest.fixture
def id_csv(tmp_path):
    path = tmp_path / "id.csv"
    cli.write_curve_csv(identity(), path)
    return path


def test_compose_gaussian(capsys):
    code, doc, _ = run(capsys, "compose", "--gaussian", 1, "--gaussian", 1, "--delta", 1e-5)
    assert code == 0
    exact = eps_at_delta(make_gaussian(math.sqrt(2)), 1e-5)
    assert doc["eps_lower"] <= exact <= doc["eps_upper"]
    assert doc["closed_form_eps"] == pytest.approx(exact)


def test_compose_closed_and_clt(capsys):
    code, doc, _ = run(capsys, "compose", "--gaussian", 0.1, "--repeat", 100, "--method", "clt")
    assert code == 0 and not doc["certified"]
    code, doc, _ = run(capsys, "compose", "--gaussian", 3, "--gaussian", 4, "--method", "closed")
    assert code == 0 and doc["closed_form_mu"] == pytest.approx(5.0)


def test_compose_closed_rejects_pure(capsys):
    code, _, err = run(capsys, "compose", "--pure", 1, "--method", "closed")
    assert code == 2 and "Gaussian" in err


def test_dpsgd_gdp(capsys):
    code, doc, _ = run(capsys, "dpsgd", "--sigma", 1, "--p", 0.01, "--T", 10000,
                       "--method", "gdp")
    assert code == 0
    assert doc["mu"] == pytest.approx(1.31083, abs=1e-5)


def test_dpsgd_fft_small(capsys, tmp_path):
    out = tmp_path / "dpsgd.csv"
    code, doc, _ = run(capsys, "dpsgd", "--sigma", 1, "--p", 0.05, "--T", 20,
                       "--method", "fft", "--cell", 1e-3, "--out-curve", out)
    assert code == 0 and doc["eps_lower"] <= doc["eps_upper"]
    curve = cli.read_curve_csv(out)
    assert curve(0.0) <= 1.0


def test_convert_identity(capsys, id_csv):
    code, doc, _ = run(capsys, "convert", "--curve", id_csv, "--eps", 1)
    assert code == 0 and doc["delta"] == 0


def test_convert_full(capsys):
    code, doc, _ = run(capsys, "convert", "--gaussian", 1, "--eps", 1, "--delta", 1e-5,
                       "--gamma", 2)
    assert code == 0
    assert doc["max_divergence"] == "inf"
    assert doc["renyi"][0]["value"] == pytest.approx(1.0)


def test_convert_needs_one_curve(capsys):
    code, _, _ = run(capsys, "convert", "--gaussian", 1, "--pure", 1, "--eps", 1)
    assert code == 2


def test_mixture(capsys, tmp_path):
    spec = {"kind": "Mixture", "weights": [0.5, 0.5],
            "components": [{"P": [0.8, 0.2], "Q": [0.2, 0.8]}, {"kind": "PureDP", "eps": 0.5}]}
    path = tmp_path / "mix.json"
    path.write_text(json.dumps(spec))
    code, doc, _ = run(capsys, "mixture", "--spec", path)
    assert code == 0 and doc["components"] == 2


def test_mixture_wrong_kind(capsys, tmp_path):
    path = tmp_path / "g.json"
    path.write_text(json.dumps({"kind": "Gaussian", "sensitivity": 1, "sigma": 1}))
    code, _, _ = run(capsys, "mixture", "--spec", path)
    assert code == 2


def test_census(capsys, tmp_path):
    path = tmp_path / "alloc.csv"
    path.write_text("level,query,sigma\n" + "".join(f"L,Q{i},5\n" for i in range(8)))
    code, doc, _ = run(capsys, "census", "--table", path, "--delta", 1e-10)
    assert code == 0 and doc["m"] == 8 and doc["eps_lower"] == doc["eps_upper"]


def test_cnd(capsys, tmp_path):
    samples = tmp_path / "z.csv"
    code, doc, _ = run(capsys, "cnd", "--gaussian", 1, "--n", 1000, "--seed", 4,
                       "--samples", samples)
    assert code == 0 and max(doc["validation"].values()) < 1e-6
    _, again, _ = run(capsys, "cnd", "--gaussian", 1, "--n", 1000, "--seed", 4)
    assert again["sample_mean"] == doc["sample_mean"]
    assert len(samples.read_text().splitlines()) == 1001


def test_cnd_rejects_identity(capsys, id_csv):
    code, _, _ = run(capsys, "cnd", "--curve", id_csv)
    assert code == 2


def test_verify(capsys):
    code, doc, _ = run(capsys, "verify", "--n", 200000, "--seed", 1)
    assert code == 0 and doc["passed"]
    code, doc, _ = run(capsys, "verify", "--discrete-gaussian", 1, "--n", 200000)
    assert code == 0 and doc["covered"] >= 19


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["compose", "--nope"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        cli.main(["dpsgd", "--sigma", "1"])
    assert exc.value.code == 1


def test_domain_error(capsys):
    code, _, err = run(capsys, "compose", "--gaussian", -1)
    assert code == 2 and err


def test_io_error(capsys, tmp_path):
    code, _, _ = run(capsys, "convert", "--curve", tmp_path / "missing.csv", "--eps", 1)
    assert code == 3


def test_bad_csv(capsys, tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,y\n0,1\n1,0\n")
    code, _, _ = run(capsys, "convert", "--curve", path, "--eps", 1)
    assert code == 2


def test_output_file(capsys, tmp_path):
    out = tmp_path / "o.json"
    code, _, _ = run(capsys, "convert", "--pure", 1, "--eps", 0.5, "--output", out)
    assert code == 0
    jsonschema.validate(json.loads(out.read_text()), SCHEMA)


def test_config_defaults(capsys, tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"delta": 1e-3}))
    monkeypatch.setenv(cli.CONFIG_ENV, str(cfg))
    code, doc, _ = run(capsys, "compose", "--pure", 0.5, "--cell", 1e-3)
    assert code == 0 and doc["delta"] == 1e-3


@pytest.mark.parametrize("curve", [make_gaussian(1.0), make_eps_delta(0.8, 0.05),
                                   PiecewiseLinearCurve([0, 0.2, 1], [1, 0.3, 0])])
def test_csv_round_trip(tmp_path, curve):
    path = tmp_path / "c.csv"
    cli.write_curve_csv(curve, path)
    back = cli.read_curve_csv(path)
    pwl = curve.to_piecewise()
    assert np.max(np.abs(back.alphas - pwl.alphas)) == 0
    assert sup_distance(back, pwl, 4000) <= 1e-15


def test_compose_curve_export_round_trip(capsys, tmp_path):
    out = tmp_path / "lower.csv"
    code, _, _ = run(capsys, "compose", "--pure", 0.5, "--pure", 0.7, "--cell", 1e-3,
                     "--out-curve", out)
    assert code == 0
    again = tmp_path / "again.csv"
    cli.write_curve_csv(cli.read_curve_csv(out), again)
    assert again.read_text() == out.read_text()


class TestPlot:
    def count(self, path):
        return Path(path).read_text().count('id="curve-')

    def test_single(self, tmp_path):
        path = tmp_path / "id.svg"
        cli.plot_curve({"Id": identity()}, path)
        text = path.read_text()
        assert self.count(path) == 1 and 'id="reference"' in text

    def test_overlay(self, tmp_path, capsys):
        path = tmp_path / "two.svg"
        code, doc, _ = run(capsys, "plot", "--gaussian", 1, "--pure", 1, "--out", path)
        assert code == 0 and doc["curves"] == ["G_1", "f_1,0"]
        assert self.count(path) == 2

    def test_deterministic(self, tmp_path):
        a, b = tmp_path / "a.svg", tmp_path / "b.svg"
        curves = [("G_1", make_gaussian(1.0)), ("f", make_eps_delta(1.0, 0.0))]
        cli.plot_curve(curves, a)
        cli.plot_curve(curves, b)
        assert a.read_bytes() == b.read_bytes()

    def test_unwritable(self, capsys, tmp_path):
        code, _, _ = run(capsys, "plot", "--gaussian", 1, "--out",
                         tmp_path / "no" / "such" / "dir.svg")
        assert code == 3

    def test_empty(self, tmp_path):
        from fdpkit.errors import DomainError
        with pytest.raises(DomainError):
            cli.plot_curve([], tmp_path / "x.svg")
