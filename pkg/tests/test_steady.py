import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from threshnet import (
    GROUND,
    IdealThreshold,
    InjectionProfile,
    Linear,
    PiecewiseThreshold,
    PolynomialThreshold,
    SolverControls,
    SolverError,
    UnsupportedEvaluationError,
    build_grid,
    dissipated_energy,
    functional_J,
    integrate,
    solve_linear_oracle,
    solve_steady,
    verify_kkt,
)
from threshnet.steady import KKTReport, cycle_basis, random_circulation, write_solution

from conftest import make_graph


def linear_grid(rows, cols, seed):
    g = build_grid(rows, cols)
    R = np.random.default_rng(seed).uniform(0.5, 2.0, g.m)
    return g.with_characteristics([Linear(float(x)) for x in R])


def threshold_grid(rows, cols, seed, r=800.0):
    g = build_grid(rows, cols)
    V = np.random.default_rng(seed).uniform(0.15, 0.85, g.m)
    return g.with_characteristics([PiecewiseThreshold(float(v), 1e-5, r) for v in V])


def test_single_link_ohm():
    g = make_graph(1, [(0, GROUND)], [Linear(3.0)])
    for solver in (solve_steady, solve_linear_oracle):
        sol = solver(g, InjectionProfile(0.4))
        assert sol.v_bar[0] == pytest.approx(1.2)
        assert sol.u_bar[0] == pytest.approx(0.4)


def test_current_divider(parallel_13):
    sol = solve_steady(parallel_13, InjectionProfile(1.0))
    np.testing.assert_allclose(sol.u_bar, [0.75, 0.25], atol=1e-12)
    assert dissipated_energy(parallel_13, sol.u_bar) == pytest.approx(0.75)


def test_mixed_grid_matches_transient():
    g = build_grid(4, 4)
    rng = np.random.default_rng(11)
    chars = []
    for k in range(g.m):
        v = float(rng.uniform(0.2, 0.8))
        chars.append(PiecewiseThreshold(v, 1e-5, 800.0) if k % 3 else PiecewiseThreshold(v, 1e-3, 50.0))
    g = g.with_characteristics(chars)
    sol = solve_steady(g, InjectionProfile(1.0))
    rec = integrate(g, InjectionProfile(1.0))
    assert np.max(np.abs(rec.currents[-1] - sol.u_bar)) <= 1e-4


def test_solution_fields():
    g = threshold_grid(5, 5, 2)
    sol = solve_steady(g, InjectionProfile(1.0))
    assert sol.kkt_residual <= 1e-10
    np.testing.assert_array_equal(sol.u_bar, g.laws.forward(g.incidence.T @ sol.v_bar))
    assert sol.J_value.value == pytest.approx(functional_J(g, sol.u_bar).value)


def test_polynomial_network():
    g = build_grid(3, 3).with_characteristics([PolynomialThreshold(0.5, 2)] * 15)
    sol = solve_steady(g, InjectionProfile(1.0))
    assert verify_kkt(g, sol).passed


def test_ideal_network_rejected():
    g = make_graph(1, [(0, GROUND)], [IdealThreshold(0.3)])
    with pytest.raises(UnsupportedEvaluationError):
        solve_steady(g, InjectionProfile(1.0))


def test_kkt_on_linear_solution():
    g = linear_grid(5, 5, 1)
    rep = verify_kkt(g, solve_linear_oracle(g, InjectionProfile(1.0)))
    assert rep.max_stationarity <= 1e-10
    assert rep.max_feasibility <= 1e-10


def test_kkt_flags_perturbation():
    g = linear_grid(4, 4, 0)
    sol = solve_linear_oracle(g, InjectionProfile(1.0))
    u = sol.u_bar.copy()
    u[7] += 1e-3
    bad = type(sol)(sol.v_bar, u, sol.kkt_residual, sol.J_value, sol.dbar)
    rep = verify_kkt(g, bad)
    assert not rep.passed
    assert rep.max_feasibility == pytest.approx(1e-3, rel=1e-6)
    assert rep.worst_link == 7


def test_kkt_threshold_grid_r800():
    g = threshold_grid(10, 10, 0)
    rep = verify_kkt(g, solve_steady(g, InjectionProfile(1.0)), tol=1e-6)
    assert rep.passed
    assert set(rep.as_dict()) == {"max_stationarity", "worst_link", "max_feasibility", "worst_node", "tol", "passed"}


def test_kkt_report_never_raises():
    rep = KKTReport(np.array([0.0, 2.0]), np.array([1.0]), 1e-8)
    assert not rep.passed and rep.worst_link == 1 and rep.worst_node == 0


def test_linear_oracle_conservation_2x2():
    g = build_grid(2, 2)
    sol = solve_linear_oracle(g, InjectionProfile(1.0))
    dbar = np.array([1.0, 0, 0, 0])
    assert np.max(np.abs(g.incidence @ sol.u_bar - dbar)) <= 1e-12


def test_linear_oracle_rejects_nonlinear():
    with pytest.raises(UnsupportedEvaluationError):
        solve_linear_oracle(threshold_grid(2, 2, 0), InjectionProfile(1.0))


@pytest.mark.parametrize("seed", range(4))
def test_newton_matches_linear_oracle(seed):
    g = linear_grid(6, 6, seed)
    a = solve_steady(g, InjectionProfile(1.0))
    b = solve_linear_oracle(g, InjectionProfile(1.0))
    np.testing.assert_allclose(a.u_bar, b.u_bar, atol=1e-9)


def test_cycle_basis_spans_null_space():
    g = build_grid(4, 3)
    Z = cycle_basis(g)
    assert Z.shape == (g.m, g.m - g.n)
    np.testing.assert_allclose(g.incidence @ Z, 0.0, atol=1e-12)
    assert np.linalg.matrix_rank(Z) == g.m - g.n


def test_tree_has_no_cycles():
    g = make_graph(2, [(0, 1), (1, GROUND)], [Linear(1)] * 2)
    assert cycle_basis(g).shape == (2, 0)
    assert np.all(random_circulation(g, np.random.default_rng(0)) == 0)


def test_linear_solution_minimises_energy():
    g = linear_grid(5, 5, 3)
    sol = solve_linear_oracle(g, InjectionProfile(1.0))
    e0 = dissipated_energy(g, sol.u_bar)
    rng = np.random.default_rng(0)
    Z = cycle_basis(g)
    for _ in range(100):
        z = random_circulation(g, rng, norm=10 ** rng.uniform(-3, 0), basis=Z)
        assert np.linalg.norm(g.incidence @ z) <= 1e-12
        assert e0 <= dissipated_energy(g, sol.u_bar + z)


def test_threshold_solution_minimises_J():
    g = threshold_grid(5, 5, 1)
    sol = solve_steady(g, InjectionProfile(1.0))
    rng = np.random.default_rng(1)
    Z = cycle_basis(g)
    for _ in range(100):
        z = random_circulation(g, rng, norm=10 ** rng.uniform(-4, -1), basis=Z)
        assert sol.J_value.value <= functional_J(g, sol.u_bar + z).value + 1e-12


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_unique_from_random_starts(seed):
    g = threshold_grid(4, 4, 7)
    ref = solve_steady(g, InjectionProfile(1.0))
    v0 = np.random.default_rng(seed).normal(scale=3.0, size=g.n)
    sol = solve_steady(g, InjectionProfile(1.0), v0=v0)
    np.testing.assert_allclose(sol.u_bar, ref.u_bar, atol=1e-8)


@settings(max_examples=20, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5))
def test_linear_superposition(a, b):
    g = linear_grid(3, 4, 0)
    ua = solve_linear_oracle(g, InjectionProfile(a)).u_bar
    ub = solve_linear_oracle(g, InjectionProfile(b)).u_bar
    uab = solve_linear_oracle(g, InjectionProfile(a + b)).u_bar
    np.testing.assert_allclose(ua + ub, uab, atol=1e-10)


def test_reverse_injection_is_odd():
    g = threshold_grid(4, 4, 2)
    a = solve_steady(g, InjectionProfile(1.0))
    b = solve_steady(g, InjectionProfile(-1.0))
    np.testing.assert_allclose(a.u_bar, -b.u_bar, atol=1e-9)


def test_fallback_after_newton_stalls():
    g = threshold_grid(4, 4, 0)
    ref = solve_steady(g, InjectionProfile(1.0))
    sol = solve_steady(g, InjectionProfile(1.0), SolverControls(max_iter=4))
    assert sol.method == "pseudo-transient+newton"
    np.testing.assert_allclose(sol.u_bar, ref.u_bar, atol=1e-8)


def test_failure_raises_with_residual():
    g = threshold_grid(4, 4, 0)
    with pytest.raises(SolverError) as info:
        solve_steady(g, InjectionProfile(1.0), SolverControls(max_iter=2, fallback=False))
    assert info.value.residual > 1e-10


def test_voltage_source_steady():
    g = make_graph(1, [(0, GROUND)], [Linear(2.0)])
    prof = InjectionProfile(1.0, source_resistance=2.0)
    for solver in (solve_steady, solve_linear_oracle):
        sol = solver(g, prof)
        assert sol.v_bar[0] == pytest.approx(1.0)
        assert sol.dbar[0] == pytest.approx(0.5)
        assert verify_kkt(g, sol).passed


def test_write_solution(tmp_path):
    import json

    g = linear_grid(2, 2, 0)
    sol = solve_steady(g, InjectionProfile(1.0))
    write_solution(g, sol, tmp_path / "s.json")
    doc = json.loads((tmp_path / "s.json").read_text())
    assert doc["kkt"]["passed"] and len(doc["currents"]) == g.m and len(doc["voltages"]) == g.n
