"""The 13 star-schema benchmark queries as executor plans.

Flight 1 filters LINEORDER and sums extendedprice*discount over a DATE
join.  Flights 2-4 are multi-join group-bys over the dimension tables.
Dimension inputs sit on the build side of every hash join; the fact-table
stream is the probe side throughout.
"""

from __future__ import annotations

from .executor import (
    AggregateMaterialize,
    Col,
    DataSource,
    Filter,
    HashJoin,
    Mul,
    Predicate,
    SortLimit,
    Sub,
)

QUERY_IDS = (
    "Q1.1", "Q1.2", "Q1.3",
    "Q2.1", "Q2.2", "Q2.3",
    "Q3.1", "Q3.2", "Q3.3", "Q3.4",
    "Q4.1", "Q4.2", "Q4.3",
)


class QueryError(Exception):
    pass


def _lo(column: str) -> Col:
    return Col("lineorder", column)


def _filtered(table: str, *predicates: Predicate):
    source = DataSource(table)
    return Filter(source, tuple(predicates)) if predicates else source


def _join(probe, table: str, fact_key: str, dim_key: str, *predicates: Predicate):
    return HashJoin(probe, _filtered(table, *predicates), _lo(fact_key), Col(table, dim_key))


def _flight1(year_preds, discount_low, discount_high, quantity_pred):
    probe = _filtered(
        "lineorder",
        Predicate(_lo("discount"), "between", low=discount_low, high=discount_high),
        quantity_pred,
    )
    joined = HashJoin(
        probe, _filtered("date", *year_preds), _lo("orderdate"), Col("date", "datekey")
    )
    agg = AggregateMaterialize(
        joined, (), ((Mul(_lo("extendedprice"), _lo("discount")), "revenue"),)
    )
    return SortLimit(agg, ())


def _grouped(joined, group_by, aggregate, sort):
    return SortLimit(AggregateMaterialize(joined, tuple(group_by), (aggregate,)), tuple(sort))


def _flight2(part_pred, supplier_region):
    joined = _join(
        _join(
            _join(DataSource("lineorder"), "part", "partkey", "partkey", part_pred),
            "supplier", "suppkey", "suppkey",
            Predicate(Col("supplier", "region"), "=", supplier_region),
        ),
        "date", "orderdate", "datekey",
    )
    return _grouped(
        joined,
        [(Col("date", "year"), "year"), (Col("part", "brand1"), "brand1")],
        (_lo("revenue"), "revenue"),
        [("year", "asc"), ("brand1", "asc")],
    )


def _flight3(customer_pred, supplier_pred, date_preds, geo_column):
    joined = _join(
        _join(
            _join(DataSource("lineorder"), "customer", "custkey", "custkey", customer_pred),
            "supplier", "suppkey", "suppkey", supplier_pred,
        ),
        "date", "orderdate", "datekey", *date_preds,
    )
    return _grouped(
        joined,
        [
            (Col("customer", geo_column), "c_%s" % geo_column),
            (Col("supplier", geo_column), "s_%s" % geo_column),
            (Col("date", "year"), "year"),
        ],
        (_lo("revenue"), "revenue"),
        [("year", "asc"), ("revenue", "desc")],
    )


def _flight4(customer_pred, supplier_pred, part_pred, date_preds, group_by):
    joined = _join(
        _join(
            _join(
                _join(DataSource("lineorder"), "customer", "custkey", "custkey", customer_pred),
                "supplier", "suppkey", "suppkey", supplier_pred,
            ),
            "part", "partkey", "partkey", part_pred,
        ),
        "date", "orderdate", "datekey", *date_preds,
    )
    return _grouped(
        joined,
        group_by,
        (Sub(_lo("revenue"), _lo("supplycost")), "profit"),
        [(name, "asc") for _, name in group_by],
    )


def build_query(query_id: str):
    """Return the plan for one of Q1.1..Q4.3."""
    if query_id == "Q1.1":
        return _flight1(
            (Predicate(Col("date", "year"), "=", 1993),),
            1, 3,
            Predicate(_lo("quantity"), "<", 25),
        )
    if query_id == "Q1.2":
        return _flight1(
            (Predicate(Col("date", "yearmonthnum"), "=", 199401),),
            4, 6,
            Predicate(_lo("quantity"), "between", low=26, high=35),
        )
    if query_id == "Q1.3":
        return _flight1(
            (
                Predicate(Col("date", "weeknuminyear"), "=", 6),
                Predicate(Col("date", "year"), "=", 1994),
            ),
            5, 7,
            Predicate(_lo("quantity"), "between", low=26, high=35),
        )
    if query_id == "Q2.1":
        return _flight2(Predicate(Col("part", "category"), "=", b"MFGR#12"), b"AMERICA")
    if query_id == "Q2.2":
        return _flight2(
            Predicate(Col("part", "brand1"), "between", low=b"MFGR#2221", high=b"MFGR#2228"),
            b"ASIA",
        )
    if query_id == "Q2.3":
        return _flight2(Predicate(Col("part", "brand1"), "=", b"MFGR#2239"), b"EUROPE")
    if query_id == "Q3.1":
        return _flight3(
            Predicate(Col("customer", "region"), "=", b"ASIA"),
            Predicate(Col("supplier", "region"), "=", b"ASIA"),
            (
                Predicate(Col("date", "year"), ">=", 1992),
                Predicate(Col("date", "year"), "<=", 1997),
            ),
            "nation",
        )
    if query_id == "Q3.2":
        return _flight3(
            Predicate(Col("customer", "nation"), "=", b"UNITED STATES"),
            Predicate(Col("supplier", "nation"), "=", b"UNITED STATES"),
            (
                Predicate(Col("date", "year"), ">=", 1992),
                Predicate(Col("date", "year"), "<=", 1997),
            ),
            "city",
        )
    if query_id == "Q3.3":
        return _flight3(
            Predicate(Col("customer", "city"), "in", values=(b"UNITED KI1", b"UNITED KI5")),
            Predicate(Col("supplier", "city"), "in", values=(b"UNITED KI1", b"UNITED KI5")),
            (
                Predicate(Col("date", "year"), ">=", 1992),
                Predicate(Col("date", "year"), "<=", 1997),
            ),
            "city",
        )
    if query_id == "Q3.4":
        return _flight3(
            Predicate(Col("customer", "city"), "in", values=(b"UNITED KI1", b"UNITED KI5")),
            Predicate(Col("supplier", "city"), "in", values=(b"UNITED KI1", b"UNITED KI5")),
            (Predicate(Col("date", "yearmonth"), "=", b"Dec1997"),),
            "city",
        )
    if query_id == "Q4.1":
        return _flight4(
            Predicate(Col("customer", "region"), "=", b"AMERICA"),
            Predicate(Col("supplier", "region"), "=", b"AMERICA"),
            Predicate(Col("part", "mfgr"), "in", values=(b"MFGR#1", b"MFGR#2")),
            (),
            [(Col("date", "year"), "year"), (Col("customer", "nation"), "c_nation")],
        )
    if query_id == "Q4.2":
        return _flight4(
            Predicate(Col("customer", "region"), "=", b"AMERICA"),
            Predicate(Col("supplier", "region"), "=", b"AMERICA"),
            Predicate(Col("part", "mfgr"), "in", values=(b"MFGR#1", b"MFGR#2")),
            (Predicate(Col("date", "year"), "in", values=(1997, 1998)),),
            [
                (Col("date", "year"), "year"),
                (Col("supplier", "nation"), "s_nation"),
                (Col("part", "category"), "category"),
            ],
        )
    if query_id == "Q4.3":
        return _flight4(
            Predicate(Col("customer", "region"), "=", b"AMERICA"),
            Predicate(Col("supplier", "nation"), "=", b"UNITED STATES"),
            Predicate(Col("part", "category"), "=", b"MFGR#14"),
            (Predicate(Col("date", "year"), "in", values=(1997, 1998)),),
            [
                (Col("date", "year"), "year"),
                (Col("supplier", "city"), "s_city"),
                (Col("part", "brand1"), "brand1"),
            ],
        )
    raise QueryError("unknown query id %r (valid: %s)" % (query_id, ", ".join(QUERY_IDS)))
