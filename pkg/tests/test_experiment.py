import xml.etree.ElementTree as ET

import numpy as np
import pytest

from privpref import losses
from privpref.exceptions import ConfigError
from privpref.experiment.checks import check_privacy, gradcheck
from privpref.experiment.cli import main
from privpref.experiment.config import ExperimentConfig, parse_config
from privpref.experiment.plot import emit_svg, render_svg
from privpref.experiment.sweep import (
    CSV_HEADER,
    ErrorRecord,
    fit_one,
    read_records_csv,
    run_sweep,
    write_records_csv,
)
from privpref.metrics import l2_error
from privpref.privacy import RngStream

SVG = "{http://www.w3.org/2000/svg}"

SMALL = """
# tiny sweep
d = 3
n_values = 50, 80
epsilon_values = 0.5, 1
estimators = mle, obj-pert, sgd-rr, debiased-rr
repetitions = 2
base_seed = 0x2A
gamma = 0.1
"""


def small_config(tmp_path, **kw):
    c = parse_config(SMALL)
    c.output_path = str(tmp_path / "out.csv")
    for k, v in kw.items():
        setattr(c, k, v)
    return c


# config


def test_parse_config():
    c = parse_config(SMALL)
    assert c.d == 3 and c.n_values == [50, 80] and c.epsilon_values == [0.5, 1.0]
    assert c.base_seed == 42 and c.gamma == 0.1 and c.kappa is None


@pytest.mark.parametrize(
    "text,key",
    [
        ("colour = red", "colour"),
        ("d = 1", "d"),
        ("d = 5\nd = 6", "d"),
        ("repetitions = 0", "repetitions"),
        ("estimators = mle, lasso", "estimators"),
        ("delta = 0", "delta"),
        ("n_values = ten", "n_values"),
        ("model = plackett-luce\nK = 3", "estimators"),
        ("model = thurstone\nestimators = sgd-rr", "gamma"),
        ("feature_mode = gaussian-clipped", "L"),
        ("step_schedule = adam", "step_schedule"),
        ("epsilon_values =", "epsilon_values"),
    ],
)
def test_config_errors_name_the_key(text, key):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.key == key


def test_config_rejects_malformed_line():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config("d = 3\nnonsense\n")


# CSV


def test_records_round_trip(tmp_path):
    g = np.random.default_rng(0)
    recs = [
        ErrorRecord("sgd-rr", 100, float(e), r, int(g.integers(0, 2**63)) * 2 + 1, float(g.random()), float(g.random() / 3))
        for r, e in enumerate([0.1, 1 / 3, 2.0])
    ]
    p = tmp_path / "r.csv"
    write_records_csv(recs, p)
    assert p.read_text().splitlines()[0] == ",".join(CSV_HEADER)
    assert read_records_csv(p) == recs


@pytest.mark.parametrize(
    "body,line",
    [
        ("mle,10,1.0,0,5,0.1\n", 2),
        ("mle,10,1.0,0,5,0.1,0.2\nmle,ten,1.0,0,5,0.1,0.2\n", 3),
    ],
)
def test_malformed_csv_reports_line(tmp_path, body, line):
    p = tmp_path / "bad.csv"
    p.write_text(",".join(CSV_HEADER) + "\n" + body)
    with pytest.raises(ValueError, match=f":{line}:"):
        read_records_csv(p)


# sweeps


def test_single_row_sweep(tmp_path):
    c = small_config(tmp_path, n_values=[40], epsilon_values=[1.0], estimators=["mle"], repetitions=1)
    recs = run_sweep(c)
    lines = (tmp_path / "out.csv").read_text().splitlines()
    assert len(recs) == 1 and len(lines) == 2


def test_sweep_deterministic_and_worker_invariant(tmp_path):
    c = small_config(tmp_path)
    run_sweep(c)
    first = (tmp_path / "out.csv").read_bytes()
    run_sweep(c)
    assert (tmp_path / "out.csv").read_bytes() == first
    run_sweep(c, workers=2)
    assert (tmp_path / "out.csv").read_bytes() == first
    recs = read_records_csv(tmp_path / "out.csv")
    keys = [r.sort_key() for r in recs]
    assert keys == sorted(keys) and len(recs) == 4 * 2 * 2 * 2
    assert all(r.l2_error >= 0 and r.seminorm_error >= 0 for r in recs)


def test_record_reproducible_from_seed(tmp_path):
    c = small_config(tmp_path)
    for r in run_sweep(c, write=False)[::5]:
        theta_hat, theta_star, _ = fit_one(c, r.estimator, r.n, r.epsilon, r.seed)
        assert l2_error(theta_hat, theta_star) == r.l2_error


def test_kwise_and_thurstone_sweeps(tmp_path):
    c = small_config(tmp_path, model="plackett-luce", K=3, estimators=["sgd-krr"])
    c.validate()
    assert len(run_sweep(c, write=False)) == 8
    c = small_config(tmp_path, model="thurstone", estimators=["sgd-rr"])
    assert len(run_sweep(c, write=False)) == 8


def test_unwritable_output_fails_early(tmp_path):
    c = small_config(tmp_path)
    c.output_path = str(tmp_path / "missing" / "out.csv")
    with pytest.raises(OSError):
        run_sweep(c)


# plots


def _records(estimators, ns, eps=(1.0,)):
    return [
        ErrorRecord(e, n, x, r, 1, 1.0 / np.sqrt(n) * (i + 1) * (1 + r), 0.1)
        for i, e in enumerate(estimators)
        for n in ns
        for x in eps
        for r in range(2)
    ]


def test_svg_structure():
    root = ET.fromstring(render_svg(_records(["mle", "obj-pert", "sgd-rr"], [1000, 2154, 4642], (0.1, 0.5, 1.0))))
    panels = root.findall(f"{SVG}g[@class='panel']")
    assert len(panels) == 3
    for p in panels:
        assert len(p.findall(f"{SVG}polyline[@class='series']")) == 3


def test_svg_single_point_has_markers():
    root = ET.fromstring(render_svg(_records(["mle", "sgd-rr"], [500])))
    assert len(root.findall(f".//{SVG}circle[@class='marker']")) == 2


def test_emit_svg_empty_writes_nothing(tmp_path):
    csv_path = tmp_path / "empty.csv"
    csv_path.write_text(",".join(CSV_HEADER) + "\n")
    out = tmp_path / "fig.svg"
    with pytest.raises(ValueError):
        emit_svg(csv_path, out)
    assert not out.exists()


# self-checks


def test_gradcheck_passes_and_is_deterministic():
    rep = gradcheck(seed=0, cases=100)
    assert rep.passed
    assert gradcheck(seed=3, cases=1).max_fd_error == gradcheck(seed=3, cases=1).max_fd_error


def test_gradcheck_catches_sign_flip():
    def flipped(X, y, theta):
        v, g = losses.nll_clear(X, y, theta)
        return losses.LossEval(v, -g)

    assert not gradcheck(cases=5, funcs={"nll_clear": flipped}).passed

    def biased(x, y, theta, eps):
        return losses.sgd_rr_gradient(x, y, theta, eps) * 1.001

    assert not gradcheck(cases=5, funcs={"sgd_rr_gradient": biased}).passed


def test_check_privacy():
    assert check_privacy(1.0, 100_000, RngStream(0)).passed
    rep = check_privacy(0.0, 100_000, RngStream(1))
    assert rep.passed and abs(rep.keep_rate - 0.5) < 0.01

    def always_keep(y, eps, rng):
        return np.asarray(y)

    def krr_keep(y, K, eps, rng):
        return np.asarray(y)

    assert not check_privacy(1.0, 100_000, RngStream(2), randomizer=always_keep).passed
    assert not check_privacy(1.0, 100_000, RngStream(2), k_randomizer=krr_keep).passed
    with pytest.raises(ValueError):
        check_privacy(1.0, 100, RngStream(0))


# CLI


def test_cli_exit_codes(tmp_path, capsys):
    cfg = tmp_path / "c.txt"
    out = tmp_path / "r.csv"
    cfg.write_text(SMALL.replace("estimators = mle, obj-pert, sgd-rr, debiased-rr", "estimators = mle") + f"output_path = {out}\n")
    assert main(["run", str(cfg)]) == 0 and out.exists()
    svg = tmp_path / "f.svg"
    assert main(["plot", str(out), str(svg)]) == 0 and svg.exists()
    assert main(["gradcheck", "--cases", "10", "--seed", "1"]) == 0
    assert main(["check-privacy", "--eps", "1", "--trials", "20000"]) == 0
    assert main(["check-privacy", "--eps", "1", "--trials", "10"]) == 2
    assert main(["check-privacy", "--eps", "-1", "--trials", "20000"]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["--help"]) == 0
    bad = tmp_path / "bad.txt"
    bad.write_text("colour = red\n")
    assert main(["run", str(bad)]) == 2
    assert "colour" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "nope.txt")]) == 2
    assert main(["plot", str(tmp_path / "nope.csv"), str(svg)]) == 2


def test_cli_reports_fail(monkeypatch):
    from privpref.experiment import cli

    class Broken:
        passed = False

        def lines(self):
            return ["FAIL"]

    monkeypatch.setattr(cli, "gradcheck", lambda seed, cases: Broken())
    assert main(["gradcheck"]) == 1
