import json

import numpy as np
import pytest

from helpers import and_gate, copy_gate, motivational_joint, random_binary_joint, random_joint, xor_gate
from spuriq.dist_core import JointPMF3, marginalize, mutual_information
from spuriq.pid_solver import (
    FeasiblePoint,
    SolverConfig,
    brute_force_unique,
    pid_decompose,
    solve_unique_information,
)


class TestSolverConfig:
    def test_defaults(self):
        cfg = SolverConfig()
        assert cfg.gap_tol == 1e-9
        assert cfg.max_iterations == 100_000
        assert cfg.algorithm == "corrective-fw"

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"gap_tol": 0.0},
            {"gap_tol": -1e-9},
            {"max_iterations": 0},
            {"algorithm": "bogus"},
            {"init": "bogus"},
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            SolverConfig(**kwargs)


class TestSolveUniqueInformation:
    def test_motivational_unique_in_f(self):
        value, point, diag = solve_unique_information(motivational_joint(), "f")
        assert value == pytest.approx(1.0, abs=1e-4)
        assert diag.converged
        assert point.marginal_error <= 1e-10

    def test_motivational_unique_in_b(self):
        value, _, _ = solve_unique_information(motivational_joint(), "b")
        assert value == pytest.approx(0.0, abs=1e-4)

    def test_copy_gate_zero(self):
        value, _, _ = solve_unique_information(copy_gate(), "b")
        assert value == pytest.approx(0.0, abs=1e-8)

    def test_and_gate_zero(self):
        value, _, _ = solve_unique_information(and_gate(), "b")
        assert value == pytest.approx(0.0, abs=1e-4)

    def test_invalid_axis(self):
        with pytest.raises(ValueError):
            solve_unique_information(and_gate(), "y")

    def test_nonconvergence_flagged(self):
        cfg = SolverConfig(gap_tol=1e-15, max_iterations=1)
        rng = np.random.default_rng(0)
        _, _, diag = solve_unique_information(random_joint(rng, (3, 3, 3)), "b", cfg)
        assert not diag.converged
        assert diag.iterations == 1

    def test_bounded_by_marginal_mi(self):
        rng = np.random.default_rng(31)
        for i in range(40):
            j = random_joint(rng, tuple(rng.integers(2, 4, size=3)), sparsity=0.2 if i % 2 else 0.0)
            value, _, _ = solve_unique_information(j, "b")
            i_yb = mutual_information(marginalize(j, "yb"))
            assert value <= i_yb + 1e-8

    def test_feasibility_of_returned_point(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            j = random_joint(rng, (3, 2, 4))
            _, point, _ = solve_unique_information(j, "b")
            np.testing.assert_allclose(point.q.sum(axis=2), j.mass.sum(axis=2), atol=1e-10)
            np.testing.assert_allclose(point.q.sum(axis=1), j.mass.sum(axis=1), atol=1e-10)
            assert np.all(point.q >= 0)

    def test_degenerate_y_slice(self):
        mass = np.zeros((3, 2, 2))
        mass[0] = [[0.25, 0.1], [0.1, 0.05]]
        mass[2] = [[0.05, 0.1], [0.1, 0.25]]
        j = JointPMF3(mass)
        value, point, diag = solve_unique_information(j, "b")
        assert diag.converged
        assert np.all(point.q[1] == 0)


class TestFeasiblePoint:
    def test_rejects_material_negativity(self):
        with pytest.raises(ValueError):
            FeasiblePoint(np.full((2, 2, 2), -1e-3), 0.0)

    def test_clips_dust(self):
        q = np.full((2, 2, 2), 0.125)
        q[0, 0, 0] = -1e-14
        fp = FeasiblePoint(q, 0.0)
        assert fp.q[0, 0, 0] == 0.0


class TestPidDecompose:
    def test_motivational_four_terms(self):
        res = pid_decompose(motivational_joint())
        assert res.uni_f_given_b == pytest.approx(1.0, abs=1e-4)
        assert res.uni_b_given_f == pytest.approx(0.0, abs=1e-4)
        assert res.redundancy == pytest.approx(1.0, abs=1e-4)
        assert res.synergy == pytest.approx(1.0, abs=1e-4)
        assert res.total_mi == pytest.approx(3.0, abs=1e-9)
        assert res.converged

    def test_independent_target_all_zero(self):
        rng = np.random.default_rng(8)
        p_fb = rng.dirichlet(np.ones(4)).reshape(2, 2)
        mass = np.einsum("y,fb->yfb", [0.5, 0.5], p_fb)
        res = pid_decompose(JointPMF3(mass))
        for term in (res.uni_b_given_f, res.uni_f_given_b, res.redundancy, res.synergy):
            assert term == pytest.approx(0.0, abs=1e-8)

    def test_xor_pure_synergy(self):
        res = pid_decompose(xor_gate())
        assert res.uni_b_given_f == pytest.approx(0.0, abs=1e-3)
        assert res.uni_f_given_b == pytest.approx(0.0, abs=1e-3)
        assert res.redundancy == pytest.approx(0.0, abs=1e-3)
        assert res.synergy == pytest.approx(1.0, abs=1e-3)

    def test_eq1_identity_and_raw_bound(self):
        rng = np.random.default_rng(99)
        for i in range(60):
            dims = tuple(rng.integers(2, 5, size=3))
            j = random_joint(rng, dims, sparsity=0.25 if i % 3 == 0 else 0.0)
            res = pid_decompose(j)
            total = sum(res.raw_terms.values())
            assert abs(total - res.total_mi) < 1e-6
            for value in res.raw_terms.values():
                assert value >= -1e-8

    def test_redundancy_consistent_across_solves(self):
        # I(Y;F) - Uni(Y;F|B) must match I(Y;B) - Uni(Y;B|F)
        rng = np.random.default_rng(17)
        for _ in range(25):
            j = random_joint(rng, (2, 3, 2))
            res = pid_decompose(j)
            i_yf = mutual_information(marginalize(j, "yf"))
            i_yb = mutual_information(marginalize(j, "yb"))
            rd_f = i_yf - res.raw_terms["uni_f_given_b"]
            rd_b = i_yb - res.raw_terms["uni_b_given_f"]
            assert abs(rd_f - rd_b) < 1e-6

    def test_relabeling_invariance(self):
        rng = np.random.default_rng(55)
        j = random_joint(rng, (3, 3, 3))
        base = pid_decompose(j)
        for axis in range(3):
            perm = rng.permutation(3)
            mass = np.take(j.mass, perm, axis=axis)
            res = pid_decompose(JointPMF3(mass))
            assert res.uni_b_given_f == pytest.approx(base.uni_b_given_f, abs=1e-8)
            assert res.uni_f_given_b == pytest.approx(base.uni_f_given_b, abs=1e-8)
            assert res.redundancy == pytest.approx(base.redundancy, abs=1e-8)
            assert res.synergy == pytest.approx(base.synergy, abs=1e-8)

    def test_json_round_trip(self):
        res = pid_decompose(copy_gate())
        payload = json.loads(res.to_json())
        assert set(payload) == {
            "uni_b_given_f",
            "uni_f_given_b",
            "redundancy",
            "synergy",
            "total_mi",
            "gap",
            "iterations",
            "converged",
        }
        assert payload["converged"] is True


class TestBruteForceUnique:
    def test_and_gate_values(self):
        j = and_gate()
        uni_b = brute_force_unique(j, 10_000)
        assert uni_b == pytest.approx(0.0, abs=1e-6)
        i_yb = mutual_information(marginalize(j, "yb"))
        assert i_yb - uni_b == pytest.approx(0.3113, abs=1e-3)

    def test_copy_gate_zero(self):
        assert brute_force_unique(copy_gate(), 1000) == pytest.approx(0.0, abs=1e-9)

    def test_rejects_non_binary(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            brute_force_unique(random_joint(rng, (3, 2, 2)))

    def test_agrees_with_solver(self):
        rng = np.random.default_rng(41)
        for i in range(30):
            j = random_binary_joint(rng, sparsity=0.25 if i % 3 == 0 else 0.0)
            value, _, _ = solve_unique_information(j, "b")
            assert abs(value - brute_force_unique(j, 10_000)) <= 1e-4


class TestTheorem2Properties:
    def test_monotonicity_small_suite(self):
        rng = np.random.default_rng(71)
        for _ in range(30):
            mass = rng.random((2, 2, 2, 2)) ** 2
            mass /= mass.sum()
            j3 = JointPMF3(mass.sum(axis=3))
            j_bb = JointPMF3(mass.reshape(2, 2, 4))
            j_ff = JointPMF3(mass.transpose(0, 1, 3, 2).reshape(2, 4, 2))
            uni_b, _, _ = solve_unique_information(j3, "b")
            uni_bb, _, _ = solve_unique_information(j_bb, "b")
            uni_b_ff, _, _ = solve_unique_information(j_ff, "b")
            assert uni_bb >= uni_b - 1e-6
            assert uni_b_ff <= uni_b + 1e-6
