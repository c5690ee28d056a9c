import csv
import io

import numpy as np
import pytest

from sogq2d.cli import bench_box, main, parse_values, run_bench
from sogq2d.config import (
    PLAN_KEYS,
    SELECTION_KEYS,
    SWEEP_KEYS,
    ConfigError,
    format_config,
    format_particles,
    options_from_config,
    parse_config,
    parse_particles,
    plan_from_config,
    plan_to_config,
    setup_from_config,
)
from sogq2d.geometry import ParticleSystem, random_system
from sogq2d.params import SelectionOptions, select_parameters
from sogq2d.solver import solve

TWO = "2 2.0 2.0 2.0\n0.1 0.2 0.3 1\n-0.4 0.5 -0.2 -1\n"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    body = [l for l in text.splitlines() if not l.startswith("#")]
    return list(csv.reader(io.StringIO("\n".join(body))))


def meta(text):
    out = {}
    for l in text.splitlines():
        if l.startswith("# ") and " = " in l:
            k, v = l[2:].split(" = ", 1)
            out[k] = v
    return out


# --- config parsing ----------------------------------------------------------------


def test_parse_config_values_and_comments():
    cfg = parse_config("eps = 1e-6  # tolerance\n\nwindow = es\nr_c = none\n", SELECTION_KEYS)
    assert cfg == {"eps": 1e-6, "window": "es", "r_c": None}
    eps, opts = options_from_config(cfg)
    assert eps == 1e-6 and opts.window.value == "es"


@pytest.mark.parametrize("text,msg", [
    ("eps = 1e-6\nbogus = 3\n", "<config>:2: unknown key 'bogus'"),
    ("eps = 1e-6\neps = 1e-3\n", "<config>:2: duplicate key"),
    ("eps = 1e-6\nP_max = lots\n", "<config>:2: bad value"),
    ("eps 1e-6\n", "<config>:1: expected 'key = value'"),
])
def test_parse_config_errors_carry_line_numbers(text, msg):
    with pytest.raises(ConfigError) as exc:
        parse_config(text, SELECTION_KEYS)
    assert msg in str(exc.value)


def test_plan_round_trip_is_identity():
    for box, eps in [((20.0, 20.0, 20.0), 1e-6), ((30.0, 30.0, 0.3), 1e-12)]:
        plan = select_parameters(1000, box, eps, SelectionOptions(r_c=10.0))
        text = format_config(plan_to_config(plan))
        again = plan_from_config(parse_config(text, PLAN_KEYS))
        assert format_config(plan_to_config(again)) == text
        np.testing.assert_array_equal(again.decomp.nodes, plan.decomp.nodes)
        s = random_system(1000, box, seed=0)
        np.testing.assert_array_equal(solve(s, plan=again).potentials, solve(s, plan=plan).potentials)


def test_sweep_setup_from_config():
    setup = setup_from_config(parse_config("n = 10\nbox = 1, 1, 2\nwindow = gaussian\n", SWEEP_KEYS))
    assert setup.n == 10 and setup.box == (1.0, 1.0, 2.0)
    with pytest.raises(ConfigError):
        setup_from_config({"box": (1.0, 2.0)})


def test_particles_round_trip():
    s = random_system(20, (1.0, 2.0, 3.0), seed=4)
    back = parse_particles(format_particles(s, {"seed": 4}))
    np.testing.assert_array_equal(back.positions, s.positions)
    np.testing.assert_array_equal(back.charges, s.charges)
    np.testing.assert_array_equal(back.box, s.box)


@pytest.mark.parametrize("text,msg", [
    ("3 1 1 1\n0 0 0 1\n0.1 0 0 -1\n", "header announces 3"),
    ("2 1 1 1\n0 0 0 1\n0.1 0 0\n", "<particles>:3"),
    ("2 1 1 1\n0 0 x 1\n0.1 0 0 -1\n", "<particles>:2"),
    ("# only comments\n", "missing"),
    ("2 1 1 1\n0 0 nan 1\n0.1 0 0 -1\n", "non-finite"),
])
def test_particle_errors(text, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_particles(text)


def test_parse_values():
    assert parse_values("1:3:0.5") == [1.0, 1.5, 2.0, 2.5, 3.0]
    assert parse_values("4, 8,16") == [4.0, 8.0, 16.0]
    with pytest.raises(ConfigError):
        parse_values("1:2")


def test_bench_box_keeps_density():
    box = bench_box((10.0, 10.0, 10.0), 1000, 8000, "xyz")
    assert box == pytest.approx((20.0, 20.0, 20.0))
    box = bench_box((10.0, 10.0, 1.0), 1000, 4000, "xy")
    assert box == pytest.approx((20.0, 20.0, 1.0))


# --- subcommands -----------------------------------------------------------------------


def test_solve_two_particles(tmp_path, capsys):
    f = tmp_path / "two.txt"
    f.write_text(TWO)
    code, out, _ = run(capsys, "solve", str(f), "--eps", "1e-6", "--deterministic")
    assert code == 0
    r = rows(out)
    assert r[0] == ["index", "potential"]
    assert len(r) == 3
    assert float(r[1][1]) == pytest.approx(-float(r[2][1]), rel=1e-5)
    m = meta(out)
    assert float(m["energy"]) < 0
    assert "t_total" in m and "zeta" in m and "plan.b" in m


def test_solve_validate_and_determinism(tmp_path, capsys):
    f = tmp_path / "sys.txt"
    assert run(capsys, "gen", "--n", "200", "--box", "4", "4", "2", "--seed", "3", "-o", str(f))[0] == 0
    code, out1, _ = run(capsys, "solve", str(f), "--eps", "1e-6", "--validate", "--deterministic")
    assert code == 0
    assert rows(out1)[0] == ["index", "potential", "reference", "abs_error"]
    assert float(meta(out1)["eps_r"]) <= 1e-5
    _, out2, _ = run(capsys, "solve", str(f), "--eps", "1e-6", "--validate", "--deterministic")
    assert rows(out1) == rows(out2)


def test_params_round_trip_through_cli(tmp_path, capsys):
    code, out, _ = run(capsys, "params", "--box", "20", "20", "20", "--n", "1000", "--eps", "1e-6",
                       "--set", "r_c=10")
    assert code == 0
    cfg = tmp_path / "plan.cfg"
    cfg.write_text(out)
    code, out2, _ = run(capsys, "params", "--box", "20", "20", "20", "--n", "1000", "--config", str(cfg))
    assert code == 0
    body = lambda t: [l for l in t.splitlines() if not l.startswith("#")]
    assert body(out2) == body(out)
    assert "# cost.near" in out


def test_params_presets(capsys):
    code, out, _ = run(capsys, "params", "--preset")
    assert code == 0
    r = rows(out)
    assert r[0][0] == "b" and len(r) == 7


def test_params_below_floor_exit_code(capsys):
    code, _, err = run(capsys, "params", "--box", "1", "1", "1", "--n", "10", "--eps", "2e-15")
    assert code == 2
    assert "best achievable" in err


def test_bad_config_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("eps = 1e-6\nfoo = 1\n")
    code, _, err = run(capsys, "params", "--box", "1", "1", "1", "--n", "10", "--config", str(cfg))
    assert code == 2
    assert f"{cfg}:2" in err


def test_bad_particle_file_exit_code(tmp_path, capsys):
    f = tmp_path / "p.txt"
    f.write_text("2 1 1 1\n0 0 0 1\n")
    code, _, err = run(capsys, "solve", str(f), "--eps", "1e-3")
    assert code == 2 and "header announces 2" in err
    code, _, err = run(capsys, "solve", str(tmp_path / "missing.txt"), "--eps", "1e-3")
    assert code == 2


def test_oracle_command(tmp_path, capsys):
    f = tmp_path / "two.txt"
    f.write_text(TWO)
    code, out, _ = run(capsys, "oracle", str(f), "--method", "shell")
    assert code == 0
    shell = [float(r[1]) for r in rows(out)[1:]]
    code, out, _ = run(capsys, "oracle", str(f))
    ewald = [float(r[1]) for r in rows(out)[1:]]
    np.testing.assert_allclose(shell, ewald, rtol=1e-11)


def test_sweep_command(capsys):
    code, out, _ = run(capsys, "sweep", "M", "--values", "4:10:2", "--set", "n=20", "--set", "box=1,1,1",
                       "--set", "r_c=0.3", "--set", "b=2", "--set", "oracle=shell")
    assert code == 0
    r = rows(out)
    assert r[0] == ["M", "error", "estimate", "seconds"]
    errs = [float(x[1]) for x in r[1:]]
    assert errs[0] > errs[-1]


def test_sweep_failure_sets_exit_code(capsys):
    code, out, _ = run(capsys, "sweep", "P_window", "--values", "2,9", "--set", "n=20", "--set", "box=4,4,4",
                       "--set", "r_c=1", "--set", "m=1", "--set", "I=16")
    assert "# failed 2: window support must be odd" in out
    assert len(rows(out)) == 2
    assert code == 1


def test_bench_command(capsys):
    code, out, _ = run(capsys, "bench", "--n", "200", "400", "--box", "4", "4", "4", "--eps", "1e-3")
    assert code == 0
    r = rows(out)
    assert r[0][:2] == ["n", "Lx"] and len(r) == 3
    for row in r[1:]:
        t_near, t_mid, t_long, t_total = map(float, row[4:8])
        assert abs(t_near + t_mid + t_long - t_total) <= 0.05 * t_total
    assert "exponent" in meta(out)


def test_run_bench_reports_slope():
    rows_, slope = run_bench([200, 400], (4.0, 4.0, 4.0), 1e-3)
    assert len(rows_) == 2 and np.isfinite(slope)
