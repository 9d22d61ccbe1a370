import random
from itertools import combinations

import pytest
from hypothesis import given, settings

from conftest import A, B, G, multilogs, random_multilog, sound_random_multilog
from semcommit.multilog import (
    EMPTY,
    INIT,
    Action,
    ActionId,
    Guarantee,
    Kill,
    Multilog,
    SerialiseBefore,
    apply_decision,
    classify,
    dead,
    guaranteed,
    is_minimal,
    is_sound,
    is_sound_schedule,
    is_wf_prefix,
    prefix_closures,
    serialised,
    union,
)
from semcommit.schedules import sound_action_sets

T6, T8 = ActionId(3, 1), ActionId(3, 2)


def test_action_id_text_round_trip():
    assert str(ActionId(2, 7)) == "2.7"
    assert ActionId.parse("2.7") == ActionId(2, 7)
    assert str(INIT) == "0.0"


def test_action_rejects_init_and_bad_vector():
    with pytest.raises(ValueError):
        Action(INIT)
    with pytest.raises(ValueError):
        Action(ActionId(1, 3), submit_vv=((1, 2),))
    a = Action(ActionId(1, 3), submit_vv={1: 3, 2: 1}.items())
    assert a.vv == {1: 3, 2: 1}


def test_normalisation():
    m = Multilog.build([A], enables=[(A, A)], non_commuting=[(B, A)])
    assert INIT in m.actions
    assert m.enables == frozenset()
    assert m.non_commuting == {(A, B)}
    assert m.universe == {INIT, A, B}


def test_dict_round_trip(merged):
    assert Multilog.from_dict(merged.to_dict()) == merged


# -- union ----------------------------------------------------------------------


def test_union_identity(merged):
    assert union(merged, EMPTY) == merged


def test_union_alice_bob():
    alice = Multilog.build([A, B], not_after=[(A, B)], enables=[(A, B)])
    bob = Multilog.build([G])
    site1 = union(alice, bob).add(not_after=[(B, G), (G, B)])
    assert site1.actions == {INIT, A, B, G}
    assert site1.not_after == {(A, B), (B, G), (G, B)}
    assert site1.enables == {(A, B)}


def test_union_commutes_on_random_pairs():
    rng = random.Random(7)
    for _ in range(100):
        a = random_multilog(rng, rng.randint(0, 5), rng.randint(0, 8))
        b = random_multilog(rng, rng.randint(0, 5), rng.randint(0, 8))
        assert union(a, b) == union(b, a)
        assert a <= union(a, b) and b <= union(a, b)


@given(multilogs(), multilogs(), multilogs())
def test_union_is_a_join(a, b, c):
    assert (a | b) | c == a | (b | c)
    assert a | a == a
    if a <= c and b <= c:
        assert a | b <= c


# -- classifications ---------------------------------------------------------------


def test_empty_classification():
    c = classify(EMPTY)
    assert c.guaranteed == {INIT}
    assert c.dead == frozenset()
    assert c.serialised == {INIT}
    assert c.decided == {INIT}
    assert c.stable == {INIT}
    assert c.sound


def test_guaranteed_follows_enables(merged):
    assert guaranteed(merged) == {INIT}
    assert guaranteed(merged.add(enables=[(B, INIT)])) == {INIT, A, B}


def test_dead_self_loop():
    m = Multilog.build([A], not_after=[(A, A)])
    assert dead(m) == {A}


def test_dead_cycle_through_guaranteed(merged):
    assert dead(merged.add(enables=[(B, INIT)])) == {G}
    assert dead(merged) == frozenset()


def test_dead_propagates_along_enables():
    m = Multilog.build([A, B], not_after=[(A, A)], enables=[(A, B)])
    assert dead(m) == {A, B}


def test_dead_needs_joint_closure():
    # alpha needs delta, and each must precede the other: alpha can never run,
    # although no cycle passes through a guaranteed action
    d = ActionId(2, 1)
    m = Multilog.build([A, d], not_after=[(A, d), (d, A)], enables=[(d, A)])
    assert dead(m) == {A}
    assert {frozenset(s) for s, _ in sound_action_sets(m)} == {frozenset({INIT}), frozenset({INIT, d})}


def test_serialised():
    assert serialised(Multilog.build([A, B])) == {INIT, A, B}
    nc = Multilog.build([T6, T8], non_commuting=[(T6, T8)])
    assert serialised(nc) == {INIT}
    assert serialised(nc.add(not_after=[(T6, T8)])) == {INIT, T6, T8}
    assert serialised(nc.add(not_after=[(T8, T8)])) == {INIT, T6, T8}


def test_booking_decision_all_decided_and_stable(merged):
    c = classify(merged.add(enables=[(B, INIT)]))
    assert c.decided == c.stable == {INIT, A, B, G}


def test_stable_requires_stable_predecessors():
    # beta is decided but alpha, its NotAfter predecessor, is not
    m = Multilog.build([A, B], not_after=[(A, B)], enables=[(B, INIT)])
    c = classify(m)
    assert B in c.decided and A not in c.decided
    assert B not in c.stable


def test_soundness_examples():
    assert is_sound(EMPTY)
    assert not is_sound(Multilog.build([A], not_after=[(A, A)], enables=[(A, INIT)]))


def test_guaranteed_outside_k_is_unsound():
    assert not is_sound(Multilog.build([], enables=[(A, INIT)]))


def test_classification_invariants_random():
    rng = random.Random(3)
    for _ in range(500):
        m = random_multilog(rng, rng.randint(0, 7), rng.randint(0, 12))
        c = classify(m)
        assert c.decided == c.dead | (c.guaranteed & c.serialised)
        assert c.stable <= c.decided
        assert c.dead <= c.stable or not c.sound
        assert c.sound == (not (c.guaranteed & c.dead) and c.guaranteed <= m.actions)


@settings(max_examples=200)
@given(multilogs(), multilogs())
def test_fixpoints_monotone(a, b):
    big = a | b
    assert guaranteed(a) <= guaranteed(big)
    assert dead(a) <= dead(big)


def test_fixpoints_match_schedule_sets_random():
    rng = random.Random(11)
    checked = 0
    for _ in range(1500):
        m = random_multilog(rng, rng.randint(0, 7), rng.randint(0, 10))
        sets = [s for s, _ in sound_action_sets(m)]
        assert is_sound(m) == bool(sets)
        if sets:
            checked += 1
            assert guaranteed(m) == frozenset.intersection(*sets)
            assert dead(m) & m.actions == m.actions - frozenset.union(*sets)
    assert checked > 500


# -- schedules and prefixes ------------------------------------------------------------


def test_sound_schedule_examples(merged):
    assert is_sound_schedule([INIT], EMPTY)
    assert is_sound_schedule([INIT, A, B], merged)
    assert is_sound_schedule([INIT, A, G], merged)
    assert not is_sound_schedule([INIT, A, B, G], merged)
    assert not is_sound_schedule([INIT, B], merged)
    assert not is_sound_schedule([A, INIT], merged)
    assert not is_sound_schedule([INIT, A, A], merged)


def test_wf_prefix_examples(merged):
    p = merged.add(enables=[(B, INIT)])
    assert is_wf_prefix(EMPTY, merged)
    assert is_wf_prefix(p, p)
    cycle = Multilog.build([A, G], not_after=[(A, G), (G, A), (A, A)], enables=[(G, INIT)])
    half = Multilog.build([G], enables=[(G, INIT)])
    assert not is_wf_prefix(half, cycle)


def test_wf_prefix_requires_edge_closure():
    m = Multilog.build([A, B], enables=[(A, INIT), (B, INIT)])
    x = Multilog.build([A], not_after=[(A, B)], enables=[(A, INIT)])
    assert not is_wf_prefix(x, m)


def _all_prefixes(m):
    acts = sorted(m.actions - {INIT})
    out = []
    for r in range(len(acts) + 1):
        for keep in combinations(acts, r):
            x = m.restrict(keep)
            if is_wf_prefix(x, m):
                out.append(x)
    return out


def test_wf_prefix_transitive_random():
    rng = random.Random(5)
    from semcommit.proposer import propose_optimizing

    for _ in range(60):
        m = propose_optimizing(sound_random_multilog(rng, rng.randint(1, 5), rng.randint(0, 8)))
        prefixes = _all_prefixes(m)
        for y in prefixes:
            for x in _all_prefixes(y):
                assert is_wf_prefix(x, m)


def test_minimality_examples():
    assert is_minimal(EMPTY)
    cycle = Multilog.build([A, G], not_after=[(A, G), (G, A), (A, A)], enables=[(G, INIT)])
    assert is_minimal(cycle)
    two = Multilog.build([A, G], enables=[(A, INIT), (G, INIT)])
    assert not is_minimal(two)


def test_minimality_agrees_with_subset_scan():
    rng = random.Random(9)
    from semcommit.proposer import propose_optimizing

    for _ in range(300):
        m = propose_optimizing(sound_random_multilog(rng, rng.randint(1, 5), rng.randint(0, 8)))
        scan = all(x.actions in (frozenset({INIT}), m.actions) for x in _all_prefixes(m))
        assert is_minimal(m) == scan


def test_prefix_closures_are_prefixes():
    rng = random.Random(13)
    from semcommit.proposer import propose_conservative

    for _ in range(200):
        m = propose_conservative(sound_random_multilog(rng, rng.randint(1, 6), rng.randint(0, 9)))
        for a in m.actions - {INIT}:
            for x in prefix_closures(m, [a]):
                assert a in x.actions and is_wf_prefix(x, m)


# -- decisions --------------------------------------------------------------------------


def test_apply_decisions(merged):
    assert dead(apply_decision(Multilog.build([A]), Kill(A))) == {A}
    c = classify(apply_decision(merged, Guarantee(B)))
    assert c.guaranteed == {INIT, A, B} and c.dead == {G}
    nc = Multilog.build([T6, T8], non_commuting=[(T6, T8)])
    assert serialised(apply_decision(nc, SerialiseBefore(T6, T8))) >= {T6, T8}


@given(multilogs())
def test_decisions_only_add(m):
    for d in (Guarantee(A), Kill(B), SerialiseBefore(A, B)):
        out = apply_decision(m, d)
        assert m <= out
        assert out.actions == m.actions
