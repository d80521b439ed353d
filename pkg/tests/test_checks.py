from dfsq import checks
from dfsq.functions import Max
from dfsq.sources import uniform_source


def test_suites_pass_small():
    for c in (checks.quasi_triangle(30, seed=3), checks.variance_bounds(30, seed=3),
              checks.allocation_optimum(10, seed=3), checks.density_optimality(6, seed=3)):
        assert c.passed, c.line()


def test_problem_checks():
    res = checks.problem_checks(Max(2), uniform_source(2), "variable", 6, grid_size=256)
    assert all(c.passed for c in res), [c.line() for c in res]


def test_check_line_format():
    c = checks.Check("x", 3, 0, "ok")
    assert c.line().startswith("PASS  x: 3 cases, 0 violations")
    assert not checks.Check("y", 0, 0).passed
