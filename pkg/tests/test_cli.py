import os
import textwrap

import numpy as np
import pytest

from pqvar.cli import (ConfigError, load_polynomial, main, parse_config,
                       parse_integrand)
from pqvar.integrands import AxisPower, PowerNorm, Scaled, Sum

MODEL_CFG = textwrap.dedent("""\
    # anisotropic quartic model
    n = 2
    N = 1
    p = 2
    q = 4
    mu = 0
    L = 8
    integrand = power(mu=0,p=2) + axis(i=1,q=4) + axis(i=2,q=4)
    cells = 12
    epsilons = 0.5,0.25
    boundary = sine
    amplitudes = 1.0
    estimates = hd,sup
    seed = 42
""")


@pytest.fixture
def model_cfg(tmp_path):
    path = tmp_path / "model.cfg"
    path.write_text(MODEL_CFG)
    return str(path)


class TestIntegrandLanguage:
    def test_model_expression(self):
        F = parse_integrand("power(mu=0,p=2) + axis(i=1,q=4) + axis(i=2,q=4)", (1, 2))
        assert isinstance(F, Sum) and len(F.parts) == 3
        assert isinstance(F.parts[0], PowerNorm)
        assert isinstance(F.parts[1], AxisPower) and F.parts[1].i == 1

    def test_single_atom(self):
        F = parse_integrand("power(mu=1,p=2)", (1, 2))
        assert isinstance(F, PowerNorm) and F.mu == 1.0

    def test_coefficient_term(self):
        F = parse_integrand("0.25 * power(mu=0,p=4)", (1, 2))
        assert isinstance(F, Scaled) and F.coeff == 0.25

    def test_whitespace_insensitive(self):
        a = parse_integrand("power(mu=0,p=2)+axis(i=1,q=4)", (1, 2))
        b = parse_integrand("  power( mu = 0 , p = 2 )  +  axis( i = 1 , q = 4 )", (1, 2))
        z = np.random.default_rng(0).normal(size=(4, 1, 2))
        assert np.allclose(a.value(z), b.value(z))

    def test_axis_out_of_range(self):
        with pytest.raises(ConfigError) as exc:
            parse_integrand("axis(i=3,q=4)", (1, 2), line_no=7)
        assert exc.value.line == 7

    def test_syntax_error_has_position(self):
        with pytest.raises(ConfigError) as exc:
            parse_integrand("power(mu=0,p=2) % axis(i=1,q=4)", (1, 2), line_no=3)
        assert exc.value.line == 3 and exc.value.col is not None

    def test_unknown_atom(self):
        with pytest.raises(ConfigError):
            parse_integrand("exp(q=4)", (1, 2))

    def test_poly_atom(self, tmp_path):
        poly = tmp_path / "marc.poly"
        poly.write_text("1.0 1 1\n1.0 2 2\n1.0 1 1 1 1\n1.0 2 2 2 2\n")
        F = parse_integrand(f"poly({poly.name})", (1, 2), base_dir=str(tmp_path))
        z = np.array([[1.0, 0.0]])
        assert float(F.value(z)) == pytest.approx(2.0)

    def test_poly_odd_monomial_rejected(self, tmp_path):
        poly = tmp_path / "odd.poly"
        poly.write_text("1.0 1 1\n1.0 1 1 1\n")
        with pytest.raises(Exception):  # NotEvenError surfaces through the parser
            load_polynomial(str(poly), (1, 2))


class TestConfig:
    def test_full_parse(self):
        cfg = parse_config(MODEL_CFG)
        assert cfg.regime.q == 4.0 and cfg.cells == 12
        assert cfg.epsilons == [0.5, 0.25]
        assert cfg.estimates == ["hd", "sup"]
        assert cfg.seed == 42
        assert cfg.region.kind == "ball" and cfg.region.radius == 0.45

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as exc:
            parse_config("n = 2\nbogus = 3\n")
        assert exc.value.line == 2

    def test_missing_required(self):
        with pytest.raises(ConfigError):
            parse_config("n = 2\nN = 1\np = 2\nq = 4\nintegrand = power(mu=0,p=2)\n")

    def test_invalid_regime_is_config_error(self):
        bad = MODEL_CFG.replace("q = 4", "q = 1")
        with pytest.raises(ConfigError):
            parse_config(bad)

    def test_schedule_count(self):
        cfg = parse_config(MODEL_CFG.replace("epsilons = 0.5,0.25", "schedule_count = 3"))
        assert cfg.epsilons == [0.5, 0.25, 0.125]


class TestSubcommands:
    def test_gehring_prints_reference_value(self, capsys):
        assert main(["gehring", "--c0", "1", "--M", "1", "--m", "0.5"]) == 0
        assert capsys.readouterr().out.strip() == "1.5"

    def test_gehring_domain_error(self, capsys):
        assert main(["gehring", "--c0", "0.2", "--M", "1", "--m", "0.5"]) == 2

    def test_moser_table(self, capsys):
        assert main(["moser", "--gamma", "0.5", "--count", "3"]) == 0
        out = capsys.readouterr().out.strip().split("\n")
        assert out[0] == "i,alpha_i"
        assert out[1:5] == ["0,-1", "1,0", "2,2", "3,6"]
        assert out[5].startswith("bound,")

    def test_check_model(self, model_cfg, capsys, tmp_path):
        out = tmp_path / "cert.csv"
        assert main(["check", "--config", model_cfg, "--samples", "2000",
                     "--out", str(out)]) == 0
        text = out.read_text()
        assert text.startswith("quantity,value")
        assert "assf3_constant" in text

    def test_check_rejects_equal_exponents(self, tmp_path, capsys):
        cfg = tmp_path / "pq.cfg"
        cfg.write_text(MODEL_CFG.replace("q = 4", "q = 2")
                       .replace("integrand = power(mu=0,p=2) + axis(i=1,q=4) + axis(i=2,q=4)",
                                "integrand = power(mu=0,p=2)"))
        assert main(["check", "--config", str(cfg)]) == 1

    def test_conjugate_table(self, model_cfg, tmp_path):
        out = tmp_path / "conj.csv"
        assert main(["conjugate", "--config", model_cfg, "--count", "4",
                     "--out", str(out)]) == 0
        rows = out.read_text().strip().split("\n")
        assert rows[0].startswith("xi11,xi12,value,z11,z12")
        assert len(rows) == 5

    def test_solve_outputs(self, model_cfg, tmp_path, capsys):
        outdir = tmp_path / "run"
        assert main(["solve", "--config", model_cfg, "--out", str(outdir)]) == 0
        assert (outdir / "reports.csv").exists()
        assert (outdir / "field.csv").exists()
        assert (outdir / "gradients.csv").exists()

    def test_solve_deterministic(self, model_cfg, tmp_path, capsys):
        d1, d2 = tmp_path / "a", tmp_path / "b"
        assert main(["solve", "--config", model_cfg, "--out", str(d1)]) == 0
        assert main(["solve", "--config", model_cfg, "--out", str(d2)]) == 0
        for name in ("reports.csv", "field.csv", "gradients.csv"):
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes()

    def test_diagnose_writes_rows(self, model_cfg, tmp_path, capsys):
        out = tmp_path / "diag.csv"
        assert main(["diagnose", "--config", model_cfg, "--out", str(out)]) == 0
        rows = out.read_text().strip().split("\n")
        assert rows[0] == "estimate_id,lhs,rhs,ratio,fitted_exponent,grid,amplitude,epsilon"
        assert any(r.startswith("hdes,") for r in rows[1:])

    def test_diagnose_fits_amplitude_exponent(self, tmp_path, capsys):
        cfg = tmp_path / "amps.cfg"
        cfg.write_text(MODEL_CFG.replace("amplitudes = 1.0",
                                         "amplitudes = 0.5,1.0,2.0,4.0"))
        out = tmp_path / "diag.csv"
        assert main(["diagnose", "--config", str(cfg), "--out", str(out)]) == 0
        rows = [r.split(",") for r in out.read_text().strip().split("\n")[1:]]
        hdes = [r for r in rows if r[0] == "hdes"]
        assert len(hdes) == 4
        fitted = {r[4] for r in hdes}
        assert len(fitted) == 1 and fitted != {""}

    def test_sweep_marks_inadmissible(self, tmp_path, capsys):
        cfg = tmp_path / "n4.cfg"
        cfg.write_text(
            "n = 4\nN = 1\np = 2\nq = 3\nmu = 0\nL = 8\n"
            "integrand = power(mu=0,p=2) + axis(i=1,q=4)\nseed = 1\n")
        assert main(["sweep", "--config", str(cfg), "--vary", "q",
                     "--values", "3,4,5,6"]) == 0
        out = capsys.readouterr().out.strip().split("\n")
        rows = {float(r.split(",")[1]): r.split(",")[2] for r in out[1:]}
        assert rows[3.0] == "1" and rows[5.0] == "1" and rows[6.0] == "0"

    def test_sweep_amplitude_runs_solves(self, model_cfg, tmp_path, capsys):
        out = tmp_path / "amp.csv"
        assert main(["sweep", "--config", model_cfg, "--vary", "amplitude",
                     "--values", "1.0,2.0", "--out", str(out)]) == 0
        rows = out.read_text().strip().split("\n")
        assert any(",hdes," in r for r in rows[1:])

    def test_sweep_parallel_matches_serial(self, tmp_path, capsys):
        serial = tmp_path / "serial.cfg"
        serial.write_text(MODEL_CFG)
        parallel = tmp_path / "parallel.cfg"
        parallel.write_text(MODEL_CFG + "workers = 2\n")
        out1, out2 = tmp_path / "s.csv", tmp_path / "p.csv"
        assert main(["sweep", "--config", str(serial), "--vary", "amplitude",
                     "--values", "0.5,1.0", "--out", str(out1)]) == 0
        assert main(["sweep", "--config", str(parallel), "--vary", "amplitude",
                     "--values", "0.5,1.0", "--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_config_error_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("n = 2\nN = 1\np = 2\nq = 4\nL = 8\nintegrand = axis(i=9,q=4)\n")
        assert main(["check", "--config", str(bad)]) == 2
