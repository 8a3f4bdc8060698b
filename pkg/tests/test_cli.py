import numpy as np

from oracleopt.certificates import certificate_to_text
from oracleopt.cli import main
from oracleopt.combinatorial import (
    MatchingOracle,
    matching_initial_rows,
    parse_dimacs,
)
from oracleopt.lp_baseline import LPStopContext
from oracleopt.solver_polar import PolarMode, run_polar
from oracleopt.trace import LPStop


def test_gen_writes_parseable_instance(tmp_path, capsys):
    out = tmp_path / "g.dimacs"
    code = main(["gen", "--nodes", "9", "--triangles", "3", "--seed", "4", "--out", str(out)])
    assert code == 0
    text = out.read_text()
    assert text.startswith("c seed=4 triangles=3")
    graph = parse_dimacs(text)
    assert graph.n_nodes == 9


def test_run_exit_codes(tmp_path):
    code = main(
        [
            "run",
            "--problem", "synthetic-ball",
            "--method", "polar",
            "--dim", "2",
            "--seed", "1",
            "--out", str(tmp_path),
        ]
    )
    assert code == 0
    # an impossible budget trips the iteration cap: exit code 2
    code = main(
        [
            "run",
            "--problem", "synthetic-ball",
            "--method", "general",
            "--dim", "3",
            "--radius", "0.5",
            "--center-offset", "0.5",
            "--stop", "gap",
            "--epsilon", "0.000001",
            "--iters", "5",
            "--out", str(tmp_path),
        ]
    )
    assert code == 2
    assert main(["run", "--problem", "synthetic-ball", "--method", "cutloop",
                 "--dim", "2", "--iters", "60", "--out", str(tmp_path)]) == 0


def test_run_bad_config_is_error(tmp_path):
    config = tmp_path / "bad.conf"
    config.write_text("problem = sudoku\n")
    assert main(["run", "--config", str(config)]) == 1


def test_verify_round_trip_with_instance(tmp_path):
    main(["gen", "--nodes", "12", "--triangles", "4", "--seed", "3",
          "--out", str(tmp_path / "g.dimacs")])
    graph = parse_dimacs((tmp_path / "g.dimacs").read_text())
    oracle = MatchingOracle(graph, max_set_size=11)
    rows = matching_initial_rows(graph, "basic")
    d = graph.n_edges
    from oracleopt.combinatorial import brute_force_matching_opt

    opt = float(brute_force_matching_opt(graph))
    res = run_polar(
        oracle,
        np.ones(d),
        gamma1=1.0,
        stop=LPStop(opt_ref=opt),
        max_iters=500,
        mode=PolarMode.PACKING,
        initial_constraints=rows,
        lp_context=LPStopContext(rows=rows, lb=np.zeros(d), ub=np.ones(d)),
    )
    cert_path = tmp_path / "run.cert"
    cert_path.write_text(certificate_to_text(res.certificate))
    code = main(
        [
            "verify",
            "--certificate", str(cert_path),
            "--instance", str(tmp_path / "g.dimacs"),
            "--problem", "matching",
        ]
    )
    assert code == 0

    # tamper with the claimed bound: verification must fail
    lines = cert_path.read_text().splitlines()
    lines = [
        f"claimed-bound {float(line.split()[1]) - 0.5:.17g}" if line.startswith("claimed-bound") else line
        for line in lines
    ]
    cert_path.write_text("\n".join(lines) + "\n")
    assert main(["verify", "--certificate", str(cert_path)]) == 1
