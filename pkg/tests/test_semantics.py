import pytest

from conftest import db_action, bank_transactions, table_cells
from semcommit.multilog import INIT, Action, ActionId, classify
from semcommit.semantics import (
    CalendarOracle,
    DbPayload,
    IndependentOracle,
    SerializableDbOracle,
    happens_before,
    induced_multilog,
    make_oracle,
    oracle_constraints,
)

NA, EN, NC = "not_after", "enables", "non_commuting"
DB = SerializableDbOracle()


@pytest.mark.parametrize("name,a,b,want", table_cells(), ids=[c[0] for c in table_cells()])
def test_db_table_cell(name, a, b, want):
    assert oracle_constraints(DB, a, b) == want
    assert oracle_constraints(DB, b, a) == want


def test_happens_before():
    t = db_action(ActionId(1, 1))
    u = db_action(ActionId(2, 1), knows=[ActionId(1, 1)])
    assert happens_before(t, u) and not happens_before(u, t)
    assert not happens_before(t, t)
    later = db_action(ActionId(1, 2))
    assert happens_before(t, later)


def test_t1_t2_not_after():
    T = bank_transactions()
    assert oracle_constraints(DB, T[1], T[2]) == {(NA, (T[1].id, T[2].id))}


def test_t1_t3_antagonism():
    T = bank_transactions()
    assert oracle_constraints(DB, T[1], T[3]) == {(NA, (T[1].id, T[3].id)), (NA, (T[3].id, T[1].id))}


def test_t1_t4_cause():
    T = bank_transactions()
    assert oracle_constraints(DB, T[1], T[4]) == {(NA, (T[1].id, T[4].id)), (EN, (T[1].id, T[4].id))}


def test_credits_commute_debit_does_not():
    T = bank_transactions()
    assert oracle_constraints(DB, T[6], T[7]) == frozenset()
    a, b = sorted((T[6].id, T[8].id))
    assert oracle_constraints(DB, T[6], T[8]) == {(NC, (a, b))}


def test_t1_t5_commute():
    T = bank_transactions()
    assert oracle_constraints(DB, T[1], T[5]) == frozenset()


def test_missing_payload_is_empty():
    a = db_action(ActionId(1, 1))
    a = Action(a.id, None, a.submit_vv)
    b = Action(ActionId(2, 1), {"writes": ["x"]}, ((2, 1),))
    assert oracle_constraints(DB, a, b) == frozenset()


def test_dict_payload_accepted():
    a = Action(ActionId(1, 1), {"reads": ["x"]}, ((1, 1),))
    b = Action(ActionId(2, 1), {"writes": ["x"]}, ((2, 1),))
    assert oracle_constraints(DB, a, b) == {(NA, (a.id, b.id))}
    assert DbPayload.from_mapping({"increments": ["q"]}).write_set == {"q"}


def test_same_action_rejected():
    a = db_action(ActionId(1, 1))
    with pytest.raises(ValueError):
        oracle_constraints(IndependentOracle(), a, a)


def test_independent():
    assert oracle_constraints(IndependentOracle(), db_action(ActionId(1, 1)), db_action(ActionId(2, 1))) == frozenset()


def test_calendar_examples():
    cal = CalendarOracle.parse(["alpha cause beta", "beta antagonism gamma"])
    al = db_action(ActionId(1, 1), label="alpha")
    be = db_action(ActionId(1, 2), label="beta")
    ga = db_action(ActionId(2, 1), label="gamma")
    assert oracle_constraints(cal, al, be) == {(NA, (al.id, be.id)), (EN, (al.id, be.id))}
    assert oracle_constraints(cal, be, ga) == {(NA, (be.id, ga.id)), (NA, (ga.id, be.id))}
    assert oracle_constraints(cal, ga, al) == frozenset()
    assert cal.static_predecessors(be) == {"alpha", "gamma"}
    assert cal.static_predecessors(al) == frozenset()


def test_calendar_rejects_bad_entries():
    with pytest.raises(ValueError):
        CalendarOracle.parse(["alpha beta"])
    with pytest.raises(ValueError):
        CalendarOracle((("loves", "a", "b"),))


def test_make_oracle():
    assert isinstance(make_oracle("independent"), IndependentOracle)
    assert isinstance(make_oracle("calendar", [("cause", "a", "b")]), CalendarOracle)
    assert isinstance(make_oracle("calendar", ["a cause b"]), CalendarOracle)
    assert isinstance(make_oracle("serializable-db"), SerializableDbOracle)
    with pytest.raises(ValueError):
        make_oracle("crystal-ball")


def test_induced_multilog_of_bank_transactions():
    T = bank_transactions()
    m = induced_multilog(DB, T.values())
    c = classify(m)
    assert c.sound
    assert c.guaranteed == {INIT}
    assert (T[1].id, T[4].id) in m.enables
    assert not c.dead


def test_deterministic():
    T = bank_transactions()
    for i in T:
        for j in T:
            if i != j:
                assert oracle_constraints(DB, T[i], T[j]) == oracle_constraints(DB, T[i], T[j])
