import random

import pytest
from hypothesis import strategies as st

from semcommit.multilog import INIT, ActionId, Multilog

A = ActionId(1, 1)  # alpha
B = ActionId(1, 2)  # beta
G = ActionId(2, 1)  # gamma


def ids(n):
    """n distinct non-INIT action ids spread over a few sites."""
    return [ActionId(1 + i % 3, 1 + i // 3) for i in range(n)]


def random_multilog(rng, n_actions, n_edges, nc_rate=0.2, into_init=0.05):
    """Random multilog whose edges stay inside K (INIT included)."""
    acts = ids(n_actions)
    nodes = [INIT] + acts
    na, en, nc = set(), set(), set()
    for _ in range(n_edges):
        r = rng.random()
        if r < into_init:
            a = rng.choice(acts) if acts else INIT
            if rng.random() < 0.5:
                en.add((a, INIT))
            else:
                na.add((a, INIT))
            continue
        a, b = rng.choice(nodes), rng.choice(nodes)
        r = rng.random()
        if r < nc_rate:
            if a != b:
                nc.add((a, b))
        elif r < nc_rate + (1 - nc_rate) / 2:
            na.add((a, b))
        elif a != b:
            en.add((a, b))
    return Multilog.build(acts, na, en, nc)


def sound_random_multilog(rng, n_actions, n_edges, **kw):
    from semcommit.multilog import is_sound

    while True:
        m = random_multilog(rng, n_actions, n_edges, **kw)
        if is_sound(m):
            return m


@st.composite
def multilogs(draw, max_actions=6, max_edges=10):
    n = draw(st.integers(0, max_actions))
    acts = ids(n)
    nodes = [INIT] + acts
    node = st.sampled_from(nodes)
    pairs = st.tuples(node, node)
    na = draw(st.lists(pairs, max_size=max_edges))
    en = draw(st.lists(pairs, max_size=max_edges))
    nc = draw(st.lists(pairs, max_size=max_edges // 2))
    return Multilog.build(acts, na, [e for e in en if e[0] != e[1]], [e for e in nc if e[0] != e[1]])


@pytest.fixture
def rng():
    return random.Random(12345)


@pytest.fixture
def merged():
    """Alice/Bob merged multilog: alpha causes beta, beta and gamma antagonistic."""
    return Multilog.build([A, B, G], not_after=[(A, B), (B, G), (G, B)], enables=[(A, B)])


def db_action(aid, reads=(), writes=(), increments=(), knows=(), label=""):
    """Transaction with id ``aid`` whose submitter had already seen the ids in ``knows``."""
    from semcommit.multilog import Action
    from semcommit.semantics import DbPayload

    vv = {aid.site: aid.seq}
    for k in knows:
        vv[k.site] = max(vv.get(k.site, 0), k.seq)
    return Action(aid, DbPayload(frozenset(reads), frozenset(writes), frozenset(increments)), tuple(sorted(vv.items())), label)


def table_cells():
    """Hand-written expectations for every (conflict pattern, ordering) pair.

    T is 1.1 and U is 2.1. Patterns: T reads what U writes, U reads what T
    writes, both write the same object, and no overlap.
    """
    t, u = ActionId(1, 1), ActionId(2, 1)
    patterns = {
        "rs(T)&ws(U)": (dict(reads={"x"}), dict(writes={"x"})),
        "ws(T)&rs(U)": (dict(writes={"x"}), dict(reads={"x"})),
        "ws(T)&ws(U)": (dict(writes={"x"}), dict(writes={"x"})),
        "disjoint": (dict(reads={"x"}, writes={"y"}), dict(reads={"z"}, writes={"u"})),
    }
    na, en, nc = "not_after", "enables", "non_commuting"
    expect = {
        ("rs(T)&ws(U)", "T->U"): {(na, (t, u))},
        ("rs(T)&ws(U)", "T||U"): {(na, (t, u))},
        ("rs(T)&ws(U)", "U->T"): {(na, (u, t)), (en, (u, t))},
        ("ws(T)&rs(U)", "T->U"): {(na, (t, u)), (en, (t, u))},
        ("ws(T)&rs(U)", "T||U"): {(na, (u, t))},
        ("ws(T)&rs(U)", "U->T"): {(na, (u, t))},
        ("ws(T)&ws(U)", "T->U"): {(na, (t, u))},
        ("ws(T)&ws(U)", "T||U"): {(nc, (t, u))},
        ("ws(T)&ws(U)", "U->T"): {(na, (u, t))},
        ("disjoint", "T->U"): set(),
        ("disjoint", "T||U"): set(),
        ("disjoint", "U->T"): set(),
    }
    cells = []
    for (pat, order), want in expect.items():
        pt, pu = patterns[pat]
        a = db_action(t, knows=[u] if order == "U->T" else [], **pt)
        b = db_action(u, knows=[t] if order == "T->U" else [], **pu)
        cells.append((f"{pat} {order}", a, b, frozenset(want)))
    return cells


def bank_transactions():
    """T1..T8 from the bank/database example, with T1 known to T4's submitter."""
    T = {i: ActionId(1 + (i - 1) % 3, 1 + (i - 1) // 3) for i in range(1, 9)}
    return {
        1: db_action(T[1], reads={"x"}, writes={"z"}, label="T1"),
        2: db_action(T[2], writes={"x"}, label="T2"),
        3: db_action(T[3], reads={"z"}, writes={"x"}, label="T3"),
        4: db_action(T[4], reads={"z"}, knows=[T[1]], label="T4"),
        5: db_action(T[5], reads={"y"}, label="T5"),
        6: db_action(T[6], increments={"acct"}, label="T6"),
        7: db_action(T[7], increments={"acct"}, label="T7"),
        8: db_action(T[8], writes={"acct"}, label="T8"),
    }


def maximal_schedules(m):
    """Sound schedules of ``m`` that no other sound schedule strictly extends (as a set)."""
    from semcommit.schedules import enumerate_sound_schedules

    scheds = enumerate_sound_schedules(m)
    sets = {frozenset(s) for s in scheds}
    return [s for s in scheds if not any(frozenset(s) < t for t in sets)]


def has_unique_schedule(m):
    """One maximal action set, and its schedules agree on every non-commuting pair.

    Schedules that differ only in the order of commuting actions are equivalent.
    """
    top = maximal_schedules(m)
    if len({frozenset(s) for s in top}) != 1:
        return False
    orders = set()
    for s in top:
        pos = {a: i for i, a in enumerate(s)}
        orders.add(tuple(pos[a] < pos[b] for a, b in sorted(m.non_commuting) if a in pos and b in pos))
    return len(orders) == 1


def t1_t3_t4():
    """T1 and T3 antagonistic, T4 caused by T1. Ids put T3 first in canonical order."""
    T3, T1, T4 = ActionId(1, 1), ActionId(2, 1), ActionId(2, 2)
    m = Multilog.build([T1, T3, T4], not_after=[(T1, T3), (T3, T1), (T1, T4)], enables=[(T1, T4)])
    return m, T1, T3, T4


_ACCEPTANCE: list = []


@pytest.fixture
def verdict():
    """Record one acceptance line, print it, and fail the test when it did not pass."""

    def record(number, name, ok, detail):
        line = f"criterion {number} {name}: {'PASS' if ok else 'FAIL'} ({detail})"
        _ACCEPTANCE.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
