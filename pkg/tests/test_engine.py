import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from perkins_sep.barriers import VhBarrier, to_dbarrier
from perkins_sep.engine import (
    CriticalGrid,
    dbarrier_stopped_law,
    exact_stopped_law,
    exit_split,
    mc_stopped_law,
    perkins_tables,
    sample_event_paths,
    tables_from_predicate,
)
from perkins_sep.errors import NonTerminating
from perkins_sep.measures import DiscreteMeasure, example_pair, meet, moment
from perkins_sep.rules import (
    AzemaYor,
    HobsonPedersen,
    Perkins,
    StepFunction,
    azema_yor_boundary,
    should_stop,
)

from corpus import random_barrier, random_start
from oracles import law_dict, refined_levels, walk_oracle

TWO_ATOM = Perkins(VhBarrier(((1.0, -1.0),), ((-1.0, 1.0),)))
DIRAC0 = DiscreteMeasure.dirac(0.0)


def test_exit_split_values():
    assert exit_split(0.0, -1.0, 1.0) == (0.5, 0.5, 1.0)
    p_down, p_up, t = exit_split(0.0, -1.0, 3.0)
    assert p_up == 0.25 and p_down == 0.75 and t == 3.0
    with pytest.raises(ValueError):
        exit_split(2.0, -1.0, 1.0)


@given(st.floats(-5, 5), st.floats(0.01, 5), st.floats(0.01, 5))
def test_exit_split_is_a_martingale_split(x, da, db):
    a, b = x - da, x + db
    p_down, p_up, t = exit_split(x, a, b)
    assert p_down + p_up == pytest.approx(1.0)
    assert p_down * a + p_up * b == pytest.approx(x, abs=1e-9)
    # second moment identity for the exit time
    assert p_down * a**2 + p_up * b**2 - x**2 == pytest.approx(t, rel=1e-9, abs=1e-9)


def test_grid_deduplicates_and_snaps():
    grid = CriticalGrid([0.0, 1.0, 1.0 + 1e-14, -1.0])
    assert grid.levels.tolist() == [-1.0, 0.0, 1.0]
    assert grid.snap(1.0 + 5e-13) == 1.0
    with pytest.raises(KeyError):
        grid.index(0.5)


def test_two_atom_point_start():
    law = exact_stopped_law(TWO_ATOM, DIRAC0)
    assert law_dict(law) == {(-1.0, 0.0, -1.0): 0.5, (1.0, 1.0, 0.0): 0.5}
    assert law.expected_duration == 1.0


def test_example_v_line_depth_gives_target():
    lam, mu = example_pair(0.6)
    rule = Perkins(VhBarrier(((0.0, -5.0 / 3.0), (2.0, -2.0)), ((-2.0, 2.0),)), meet(lam, mu))
    law = exact_stopped_law(rule, lam)
    end = law.endpoint_law()
    for x, p in mu:
        assert end.mass_at(x) == pytest.approx(p, abs=1e-15)
    assert law.expected_duration == pytest.approx(4 * 0.4 - 0.5, abs=1e-14)
    assert law.atom_mass_at_zero == meet(lam, mu)


def test_empty_barrier_does_not_terminate():
    with pytest.raises(NonTerminating):
        exact_stopped_law(Perkins(), DIRAC0)


def test_one_sided_barrier_does_not_terminate():
    with pytest.raises(NonTerminating):
        exact_stopped_law(Perkins(VhBarrier(((1.0, -math.inf),))), DIRAC0)


def test_atom_stop_must_fit_start_law():
    with pytest.raises(ValueError):
        exact_stopped_law(Perkins(TWO_ATOM.barrier, DiscreteMeasure.dirac(0.0, 0.5)), DiscreteMeasure.dirac(0.5))


def test_refinement_leaves_endpoint_law_unchanged():
    lam, mu = example_pair(0.7)
    rule = Perkins(VhBarrier(((0.0, -2.0), (2.0, -2.0)), ((-2.0, 2.0), (0.0, 10.0 / 7.0))), meet(lam, mu))
    coarse = exact_stopped_law(rule, lam)
    fine = exact_stopped_law(rule, lam, extra_levels=[-1.5, -0.5, 0.5, 1.5])
    assert coarse.endpoint_law().masses == pytest.approx(fine.endpoint_law().masses, abs=1e-15)
    assert coarse.expected_duration == pytest.approx(fine.expected_duration, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_engine_matches_walk_oracle(seed):
    rng = np.random.default_rng(seed)
    barrier = random_barrier(rng)
    lam = random_start(rng)
    rule = Perkins(barrier)
    levels = refined_levels(list(lam.locations) + barrier.coordinates())
    oracle, t = walk_oracle(rule, lam, levels)
    law = exact_stopped_law(rule, lam, extra_levels=levels)
    got = law_dict(law)
    assert set(got) == set(oracle)
    for k, v in oracle.items():
        assert got[k] == pytest.approx(v, abs=1e-10)
    assert law.expected_duration == pytest.approx(t, abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ay_engine_matches_walk_oracle(seed):
    rng = np.random.default_rng(seed)
    xs = np.sort(rng.choice(np.arange(-3, 4), size=3, replace=False)).astype(float)
    ws = rng.dirichlet([1.0] * 3)
    mu = DiscreteMeasure.from_pairs(zip(xs, ws))
    rule = AzemaYor(azema_yor_boundary(mu))
    lam = DiscreteMeasure.dirac(mu.mean())
    levels = refined_levels(list(lam.locations) + rule.coordinates())
    oracle, t = walk_oracle(rule, lam, levels)
    law = exact_stopped_law(rule, lam, extra_levels=levels)
    got = law_dict(law)
    for k, v in oracle.items():
        assert got.get(k, 0.0) == pytest.approx(v, abs=1e-10)
    assert law.expected_duration == pytest.approx(t, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_engine_invariants_on_random_barriers(seed):
    rng = np.random.default_rng(seed)
    lam = random_start(rng)
    law = exact_stopped_law(Perkins(random_barrier(rng)), lam)
    end = law.endpoint_law()
    assert law.total_mass() == pytest.approx(1.0, abs=1e-12)
    assert moment(end, 1) == pytest.approx(moment(lam, 1), abs=1e-9)
    assert law.expected_duration == pytest.approx(moment(end, 2) - moment(lam, 2), abs=1e-9)
    for a in law.joint:
        assert a.min <= a.endpoint <= a.max


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_vectorized_tables_match_rule_predicate(seed):
    rng = np.random.default_rng(seed)
    barrier = random_barrier(rng, n_lines=4)
    grid = CriticalGrid(barrier.coordinates() + [0.5, -0.5])
    b = barrier.map_coordinates(grid.snap)
    fast = perkins_tables(grid, b)
    slow = tables_from_predicate(grid, lambda s: should_stop(Perkins(b), s), interior=False)
    assert np.array_equal(fast.new_max, slow.new_max)
    assert np.array_equal(fast.new_min, slow.new_min)
    assert not fast.start.any() and not slow.start.any()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_doubled_axis_law_is_bitwise_equal(seed):
    rng = np.random.default_rng(seed)
    barrier = random_barrier(rng)
    lam = random_start(rng)
    # merged levels drop a redundant v-line depth from the doubled form, so align grids
    levels = barrier.coordinates()
    a = exact_stopped_law(Perkins(barrier), lam, levels)
    b = dbarrier_stopped_law(to_dbarrier(barrier), lam, DiscreteMeasure(), levels)
    assert a.joint == b.joint
    assert a.expected_duration == b.expected_duration


def test_mirrored_rule_is_reflection():
    lam = DiscreteMeasure((-1.0, 0.5), (0.4, 0.6))
    barrier = VhBarrier(((2.0, -2.0), (0.0, -1.0)), ((-2.0, 2.0),))
    plain = exact_stopped_law(Perkins(barrier), lam.reflect())
    mirrored = exact_stopped_law(Perkins(barrier, mirrored=True), lam)
    assert mirrored.joint == plain.reflect().joint


def test_mc_is_deterministic_and_thread_independent():
    lam, mu = example_pair(0.6)
    rule = Perkins(VhBarrier(((0.0, -5.0 / 3.0), (2.0, -2.0)), ((-2.0, 2.0),)), meet(lam, mu))
    a = mc_stopped_law(rule, lam, 50_000, 7, chunk=4096)
    b = mc_stopped_law(rule, lam, 50_000, 7, chunk=4096, threads=4)
    c = mc_stopped_law(rule, lam, 50_000, 8, chunk=4096)
    assert json.dumps(a.to_json()) == json.dumps(b.to_json())
    assert a.joint != c.joint


def test_mc_close_to_exact_on_point_start():
    law = mc_stopped_law(TWO_ATOM, DIRAC0, 200_000, 1)
    for atom in law.joint:
        assert abs(atom.mass - 0.5) < 4 * math.sqrt(0.25 / 200_000)
    assert law.expected_duration == pytest.approx(1.0)


def test_mc_hobson_pedersen_dirac_level():
    # G = 1 with g stopping at -1: same stops as the two-atom barrier
    rule = HobsonPedersen(DiscreteMeasure.dirac(1.0), StepFunction((0.0,), (-1.0,)))
    law = mc_stopped_law(rule, DIRAC0, 100_000, 3)
    end = law.endpoint_law()
    assert set(end.locations) == {-1.0, 1.0}
    assert abs(end.mass_at(1.0) - 0.5) < 4 * math.sqrt(0.25 / 100_000)


def test_hp_mixture_of_levels():
    # G uniform on {1, 3}, stop at -1 below: P[end = G] = 1 / (1 + G)
    rule = HobsonPedersen(DiscreteMeasure((1.0, 3.0), (0.5, 0.5)), StepFunction((0.0,), (-1.0,)))
    law = mc_stopped_law(rule, DIRAC0, 200_000, 5)
    end = law.endpoint_law()
    se = math.sqrt(0.25 / 200_000)
    assert abs(end.mass_at(1.0) - 0.25) < 5 * se
    assert abs(end.mass_at(3.0) - 0.125) < 5 * se


def test_mc_root_rule_reaches_levels():
    from perkins_sep.barriers import TimeSpaceBarrier, TimeSpaceKind
    from perkins_sep.rules import Root

    rule = Root(TimeSpaceBarrier(TimeSpaceKind.ROOT, (-1.0, 1.0), (0.0, 0.0)))
    law = mc_stopped_law(rule, DIRAC0, 2_000, 11, dt=1e-3)
    end = law.endpoint_law()
    assert set(end.locations) == {-1.0, 1.0}
    assert abs(end.mass_at(1.0) - 0.5) < 0.06
    assert law.expected_duration == pytest.approx(1.0, abs=0.15)


def test_event_paths_stop_where_the_engine_does():
    grid = CriticalGrid([-1.0, 0.0, 1.0])
    paths = sample_event_paths(grid, DIRAC0, 1_000, 0)
    hit = paths.first_hit(perkins_tables(grid, TWO_ATOM.barrier))
    assert np.all(hit == 1)


def test_stopped_law_csv_header():
    text = exact_stopped_law(TWO_ATOM, DIRAC0).to_csv()
    assert text.splitlines()[0] == "endpoint,max,min,mass"
    assert len(text.splitlines()) == 3
