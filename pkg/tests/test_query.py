import itertools

import pytest

from planlab.errors import ContractViolation, InvalidQueryError, SchemaError
from planlab.query import (
    JoinAction,
    JoinPredicate,
    QuerySpec,
    SelectionAction,
    actions_of,
    advance,
    fold_prefix,
    initial_prefix_state,
    join_components,
    legal_actions,
    query_from_dict,
    query_to_dict,
    subquery_of,
    touched_component,
)


class TestQuerySpecValidation:
    def test_duplicate_filter_on_attribute(self):
        q = QuerySpec.make({"r"}, [("r", "a", 1.0), ("r", "a", 2.0)])
        with pytest.raises(InvalidQueryError, match="more than one"):
            q.validate()

    def test_selection_outside_relations(self):
        q = QuerySpec.make({"r"}, [("s", "a", 1.0)])
        with pytest.raises(InvalidQueryError):
            q.validate()

    def test_disconnected_graph_rejected(self):
        q = QuerySpec.make({"r", "s"})
        with pytest.raises(InvalidQueryError, match="disconnected"):
            q.validate()

    def test_cyclic_graph_rejected(self):
        q = QuerySpec.make(
            {"r", "s", "t"},
            joins=[
                (("r", "k"), ("s", "k")),
                (("s", "k"), ("t", "k")),
                (("t", "k"), ("r", "k")),
            ],
        )
        with pytest.raises(InvalidQueryError, match="tree"):
            q.validate()

    def test_unknown_names_against_db(self, two_table_db):
        q = QuerySpec.make({"r"}, [("r", "nope", 1.0)])
        with pytest.raises(SchemaError):
            q.validate(two_table_db)

    def test_valid_query_passes(self, two_table_db, two_table_query):
        two_table_query.validate(two_table_db)


class TestLegality:
    def test_fresh_two_relation_query_offers_both_selections(self, two_table_query):
        state = initial_prefix_state(two_table_query)
        opts = legal_actions(state)
        assert all(isinstance(a, SelectionAction) for a in opts)
        assert {a.relation for a in opts} == {"r", "s"}

    def test_after_both_selections_only_the_join(self, two_table_query):
        state = initial_prefix_state(two_table_query)
        for a in list(legal_actions(state)):
            state = advance(state, a)
        opts = legal_actions(state)
        assert len(opts) == 1 and isinstance(opts[0], JoinAction)

    def test_join_before_filters_is_illegal(self, two_table_query):
        state = initial_prefix_state(two_table_query)
        join = JoinAction(two_table_query.joins[0])
        with pytest.raises(ContractViolation, match="filter"):
            advance(state, join)

    def test_chain_second_join_must_connect(self, chain_query):
        # Hand-enumerated: after all selections and the r0-r1 join, the only
        # legal action is the r1-r2 predicate (it touches the chain).
        sels = [a for a in actions_of(chain_query) if isinstance(a, SelectionAction)]
        j01 = JoinAction(JoinPredicate.make("r0", "k0", "r1", "k0"))
        j12 = JoinAction(JoinPredicate.make("r1", "k1", "r2", "k1"))
        state = fold_prefix(chain_query, sels + [j01])
        assert legal_actions(state) == [j12]
        assert state.joined == {"r0", "r1"}
        state = advance(state, j12)
        assert state.joined == {"r0", "r1", "r2"}
        assert legal_actions(state) == []

    def test_first_join_anchors_either_predicate(self, chain_query):
        sels = [a for a in actions_of(chain_query) if isinstance(a, SelectionAction)]
        state = fold_prefix(chain_query, sels)
        opts = legal_actions(state)
        assert len(opts) == 2 and all(isinstance(a, JoinAction) for a in opts)

    def test_every_legal_order_consumes_each_action_once(self, two_table_query):
        all_actions = actions_of(two_table_query)

        def orders(state, prefix):
            opts = legal_actions(state)
            if not opts:
                yield list(prefix)
                return
            for a in opts:
                prefix.append(a)
                yield from orders(advance(state, a), prefix)
                prefix.pop()

        seqs = list(orders(initial_prefix_state(two_table_query), []))
        assert len(seqs) == 2  # two selection orders, then the join
        for seq in seqs:
            assert sorted(map(str, seq)) == sorted(map(str, all_actions))


class TestSubqueryOf:
    def test_single_selection_prefix(self, two_table_query):
        sel = SelectionAction("r", (("a", 5.0),))
        sub = subquery_of(two_table_query, [sel])
        assert sub.relations == frozenset({"r"})
        assert [(s.relation, s.attribute, s.bound) for s in sub.selections] == [
            ("r", "a", 5.0)
        ]
        assert sub.joins == ()

    def test_empty_prefix_is_empty_query(self, two_table_query):
        sub = subquery_of(two_table_query, [])
        assert sub.relations == frozenset()
        assert sub.selections == () and sub.joins == ()

    def test_illegal_prefix_raises(self, two_table_query):
        bogus = SelectionAction("r", (("a", 99.0),))  # wrong bound, not pending
        with pytest.raises(ContractViolation):
            subquery_of(two_table_query, [bogus])

    def test_two_relation_prefix_spans_join(self, two_table_query):
        sel_r = SelectionAction("r", (("a", 5.0),))
        sel_s = SelectionAction("s", (("b", 7.0),))
        join = JoinAction(two_table_query.joins[0])
        sub = subquery_of(two_table_query, [sel_r, sel_s, join])
        assert sub.relations == frozenset({"r", "s"})
        assert len(sub.joins) == 1

    def test_touched_component_tracks_last_action(self, two_table_query):
        sel_r = SelectionAction("r", (("a", 5.0),))
        sel_s = SelectionAction("s", (("b", 7.0),))
        comp = touched_component(two_table_query, [sel_r, sel_s])
        assert comp.relations == frozenset({"s"})
        comp = touched_component(
            two_table_query, [sel_r, sel_s, JoinAction(two_table_query.joins[0])]
        )
        assert comp.relations == frozenset({"r", "s"})


class TestComponents:
    def test_join_components(self):
        q = QuerySpec.make(
            {"a", "b", "c"}, joins=[(("a", "k"), ("b", "k"))]
        )
        comps = sorted(join_components(q), key=sorted)
        assert comps == [frozenset({"a", "b"}), frozenset({"c"})]


class TestSerialization:
    def test_query_roundtrip(self, two_table_query):
        assert query_from_dict(query_to_dict(two_table_query)) == two_table_query

    def test_malformed_document(self):
        with pytest.raises(InvalidQueryError):
            query_from_dict({"selections": [["r", "a", 1.0]]})
