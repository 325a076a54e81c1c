import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import enerkin as ek


def make_system(pairs):
    return ek.ParticleSystem.from_particles(pairs)


class TestTypeTable:
    def test_basic(self):
        tt = ek.TypeTable(np.array([0.0, 1.5]), labels=("a", "b"))
        assert tt.count == 2
        assert tt.internal_energy(2) == 1.5

    def test_rejects_negative_internal_energy(self):
        with pytest.raises(ek.ValidationError):
            ek.TypeTable(np.array([-0.1]))

    def test_rejects_nonfinite(self):
        with pytest.raises(ek.ValidationError):
            ek.TypeTable(np.array([np.inf]))

    def test_unknown_id_names_index(self):
        tt = ek.TypeTable(np.array([0.0]))
        with pytest.raises(ek.UnknownTypeError, match="index 1"):
            tt.check_ids(np.array([1, 7]))


class TestTotalEnergy:
    def test_zero_internal(self, one_type_table):
        sys0 = make_system([(1, 0.5), (1, 1.5)])
        assert ek.total_energy(sys0, one_type_table) == 2.0

    def test_single_particle_internal_only(self):
        tt = ek.TypeTable(np.array([0.0, 3.0]))
        sys0 = make_system([(2, 0.0)])
        assert ek.total_energy(sys0, tt) == 3.0

    def test_matches_left_to_right_oracle(self):
        rng = np.random.default_rng(0)
        tt = ek.TypeTable(rng.uniform(0, 2, size=3))
        tids = rng.integers(1, 4, size=100)
        kin = rng.exponential(1.0, size=100)
        sys0 = ek.ParticleSystem(tids, kin)
        # independent plain left-to-right accumulation
        expected = 0.0
        for v, t in zip(tids, kin):
            expected += tt.internal_energies[v - 1] + t
        got = ek.total_energy(sys0, tt)
        assert abs(got - expected) <= 1e-12 * abs(expected)

    def test_unknown_type_faults(self, one_type_table):
        sys0 = make_system([(1, 0.5), (2, 0.1)])
        with pytest.raises(ek.UnknownTypeError):
            ek.total_energy(sys0, one_type_table)


class TestCollisionFeasible:
    def test_zero_internal_always(self, one_type_table):
        assert ek.collision_feasible(1, 1.0, 1, 1.0, 1, 1, one_type_table)

    def test_insufficient_energy(self):
        tt = ek.TypeTable(np.array([0.0, 1.0]))
        assert not ek.collision_feasible(1, 0.4, 1, 0.6, 2, 2, tt)

    def test_boundary_equality_is_feasible(self):
        tt = ek.TypeTable(np.array([0.0, 1.0]))
        assert ek.collision_feasible(1, 1.0, 1, 1.0, 2, 2, tt)
        assert ek.available_kinetic_energy(1, 1.0, 1, 1.0, 2, 2, tt) == 0.0

    def test_identity_channel_always_feasible(self):
        tt = ek.TypeTable(np.array([0.3, 2.0]))
        rng = np.random.default_rng(1)
        for _ in range(50):
            v, vp = rng.integers(1, 3, size=2)
            t, tp = rng.exponential(1.0, size=2)
            assert ek.collision_feasible(int(v), t, int(vp), tp, int(v), int(vp), tt)


class TestApplyCollision:
    def test_energy_arithmetic(self, one_type_table):
        sys0 = make_system([(1, 2.0), (1, 3.0)])
        out = ek.apply_collision(sys0, 0, 1, (1, 1.5, 1), one_type_table)
        assert out.multiset_equal(make_system([(1, 1.5), (1, 3.5)]))

    def test_full_energy_to_first(self, one_type_table):
        sys0 = make_system([(1, 2.0), (1, 3.0)])
        out = ek.apply_collision(sys0, 0, 1, (1, 5.0, 1), one_type_table)
        assert out.kinetic_energies[1] == 0.0

    def test_conservation_over_random_outcomes(self):
        rng = np.random.default_rng(7)
        tt = ek.TypeTable(np.array([0.0, 0.7, 1.3]))
        sys0 = ek.ParticleSystem(
            rng.integers(1, 4, size=20), rng.exponential(2.0, size=20)
        )
        e0 = ek.total_energy(sys0, tt)
        state = sys0
        for _ in range(10_000):
            i, j = rng.choice(20, size=2, replace=False)
            v_out = int(rng.integers(1, 4))
            vp_out = int(rng.integers(1, 4))
            e = ek.available_kinetic_energy(
                int(state.type_ids[i]), float(state.kinetic_energies[i]),
                int(state.type_ids[j]), float(state.kinetic_energies[j]),
                v_out, vp_out, tt,
            )
            if e < 0:
                continue
            u = rng.uniform(0, e) if e > 0 else 0.0
            state = ek.apply_collision(state, int(i), int(j), (v_out, u, vp_out), tt)
        assert state.size == 20
        assert abs(ek.total_energy(state, tt) - e0) <= 1e-9 * e0

    def test_infeasible_outcome_faults(self):
        tt = ek.TypeTable(np.array([0.0, 5.0]))
        sys0 = make_system([(1, 1.0), (1, 1.0)])
        with pytest.raises(ek.InfeasibleReactionError):
            ek.apply_collision(sys0, 0, 1, (2, 0.0, 2), tt)

    def test_out_of_range_split_faults(self, one_type_table):
        sys0 = make_system([(1, 1.0), (1, 1.0)])
        with pytest.raises(ek.InfeasibleReactionError):
            ek.apply_collision(sys0, 0, 1, (1, 2.5, 1), one_type_table)

    def test_same_index_faults(self, one_type_table):
        sys0 = make_system([(1, 1.0), (1, 1.0)])
        with pytest.raises(ek.ValidationError):
            ek.apply_collision(sys0, 1, 1, (1, 0.5, 1), one_type_table)

    def test_reverse_collision_restores_state(self):
        tt = ek.TypeTable(np.array([0.0, 0.5]))
        sys0 = make_system([(1, 2.0), (2, 1.0), (1, 0.3)])
        mid = ek.apply_collision(sys0, 0, 1, (2, 0.75, 2), tt)
        # putting the original types back with the original first energy
        back = ek.apply_collision(mid, 0, 1, (1, 2.0, 2), tt)
        assert back.multiset_equal(sys0, tol=1e-12)


class TestApplyUnary:
    def test_downhill_gains_kinetic_energy(self):
        tt = ek.TypeTable(np.array([0.0, 1.0]))
        out = ek.apply_unary(make_system([(2, 0.3)]), 0, 1, tt)
        assert out.type_ids[0] == 1
        assert out.kinetic_energies[0] == pytest.approx(1.3)

    def test_uphill_blocked(self):
        tt = ek.TypeTable(np.array([0.0, 1.0]))
        with pytest.raises(ek.InfeasibleReactionError):
            ek.apply_unary(make_system([(1, 0.5)]), 0, 2, tt)

    def test_uphill_boundary(self):
        tt = ek.TypeTable(np.array([0.0, 1.0]))
        out = ek.apply_unary(make_system([(1, 1.0)]), 0, 2, tt)
        assert out.type_ids[0] == 2
        assert out.kinetic_energies[0] == 0.0

    def test_conserves_total_energy(self):
        tt = ek.TypeTable(np.array([0.0, 1.0, 2.5]))
        sys0 = make_system([(3, 0.4), (1, 5.0)])
        e0 = ek.total_energy(sys0, tt)
        out = ek.apply_unary(sys0, 0, 1, tt)
        assert ek.total_energy(out, tt) == pytest.approx(e0, rel=1e-14)


@given(
    t=st.floats(0.0, 1e6),
    tp=st.floats(0.0, 1e6),
    u_frac=st.floats(0.0, 1.0),
)
@settings(max_examples=200, deadline=None)
def test_collision_conserves_energy_and_count(t, tp, u_frac):
    tt = ek.TypeTable(np.array([0.0]))
    sys0 = ek.ParticleSystem(np.array([1, 1]), np.array([t, tp]))
    e = t + tp
    out = ek.apply_collision(sys0, 0, 1, (1, u_frac * e, 1), tt)
    assert out.size == 2
    total = out.kinetic_energies.sum()
    assert total == pytest.approx(e, rel=1e-12, abs=1e-12)
    assert np.all(out.kinetic_energies >= 0)


@given(gap=st.floats(0.0, 10.0), t=st.floats(0.0, 20.0))
@settings(max_examples=200, deadline=None)
def test_unary_feasibility_matches_energy_rule(gap, t):
    tt = ek.TypeTable(np.array([0.0, gap]))
    sys0 = ek.ParticleSystem(np.array([1]), np.array([t]))
    if t - gap >= 0:
        out = ek.apply_unary(sys0, 0, 2, tt)
        assert out.kinetic_energies[0] == pytest.approx(t - gap, abs=1e-12)
    else:
        with pytest.raises(ek.InfeasibleReactionError):
            ek.apply_unary(sys0, 0, 2, tt)


def test_renormalize_total_energy():
    tt = ek.TypeTable(np.array([0.0, 1.0]))
    sys0 = make_system([(1, 1.0), (2, 2.0)])
    out = ek.renormalize_total_energy(sys0, tt, 5.0)
    assert ek.total_energy(out, tt) == pytest.approx(5.0, rel=1e-14)
    with pytest.raises(ek.ValidationError):
        ek.renormalize_total_energy(sys0, tt, 0.5)


def test_multiset_equality_ignores_order():
    a = make_system([(1, 0.5), (2, 1.0)])
    b = make_system([(2, 1.0), (1, 0.5)])
    assert a.multiset_equal(b)
    assert not a.multiset_equal(make_system([(1, 0.5), (2, 1.1)]))
