"""Brute-force reference evaluator for the 13 benchmark queries.

Implemented independently of the engine: plain python loops and dicts over
the in-memory tables from ssb.generate_tables.  Returns (columns, rows)
with the same ordering rules the engine result applies: rows fully sorted
lexicographically, then stable-sorted by each sort key in reverse spec
order.
"""

from operator import itemgetter


def _ordered(columns, rows, sort_spec):
    rows = sorted(rows)
    for name, direction in reversed(sort_spec):
        rows.sort(key=itemgetter(columns.index(name)), reverse=(direction == "desc"))
    return rows


def _ints(table, column):
    return table[column].tolist()


class _Oracle:
    def __init__(self, tables):
        self.lo = tables["lineorder"]
        date = tables["date"]
        self.date_year = dict(zip(_ints(date, "datekey"), _ints(date, "year")))
        self.date_rows = {
            dk: (y, ymn, wk, ym)
            for dk, y, ymn, wk, ym in zip(
                _ints(date, "datekey"),
                _ints(date, "year"),
                _ints(date, "yearmonthnum"),
                _ints(date, "weeknuminyear"),
                date["yearmonth"],
            )
        }
        cust = tables["customer"]
        self.cust_rows = {
            k: (city, nation, region)
            for k, city, nation, region in zip(
                _ints(cust, "custkey"), cust["city"], cust["nation"], cust["region"]
            )
        }
        supp = tables["supplier"]
        self.supp_rows = {
            k: (city, nation, region)
            for k, city, nation, region in zip(
                _ints(supp, "suppkey"), supp["city"], supp["nation"], supp["region"]
            )
        }
        part = tables["part"]
        self.part_rows = {
            k: (mfgr, category, brand1)
            for k, mfgr, category, brand1 in zip(
                _ints(part, "partkey"), part["mfgr"], part["category"], part["brand1"]
            )
        }

    # --- flight 1: filtered scans, ungrouped revenue sums ---------------------

    def _flight1(self, date_ok, disc_lo, disc_hi, qty_ok):
        total = 0
        for od, disc, qty, ep in zip(
            _ints(self.lo, "orderdate"),
            _ints(self.lo, "discount"),
            _ints(self.lo, "quantity"),
            _ints(self.lo, "extendedprice"),
        ):
            if not (disc_lo <= disc <= disc_hi):
                continue
            if not qty_ok(qty):
                continue
            if not date_ok(self.date_rows[od]):
                continue
            total += ep * disc
        return ["revenue"], [(total,)]

    def q1_1(self):
        return self._flight1(lambda d: d[0] == 1993, 1, 3, lambda q: q < 25)

    def q1_2(self):
        return self._flight1(lambda d: d[1] == 199401, 4, 6, lambda q: 26 <= q <= 35)

    def q1_3(self):
        return self._flight1(
            lambda d: d[2] == 6 and d[0] == 1994, 5, 7, lambda q: 26 <= q <= 35
        )

    # --- flight 2: part/supplier joins grouped by year and brand --------------

    def _flight2(self, part_ok, supplier_region):
        good_parts = {k: v[2] for k, v in self.part_rows.items() if part_ok(v)}
        good_supps = {k for k, v in self.supp_rows.items() if v[2] == supplier_region}
        acc = {}
        for pk, sk, od, rev in zip(
            _ints(self.lo, "partkey"),
            _ints(self.lo, "suppkey"),
            _ints(self.lo, "orderdate"),
            _ints(self.lo, "revenue"),
        ):
            brand = good_parts.get(pk)
            if brand is None or sk not in good_supps:
                continue
            key = (self.date_year[od], brand)
            acc[key] = acc.get(key, 0) + rev
        rows = [k + (v,) for k, v in acc.items()]
        columns = ["year", "brand1", "revenue"]
        return columns, _ordered(columns, rows, [("year", "asc"), ("brand1", "asc")])

    def q2_1(self):
        return self._flight2(lambda p: p[1] == b"MFGR#12", b"AMERICA")

    def q2_2(self):
        return self._flight2(lambda p: b"MFGR#2221" <= p[2] <= b"MFGR#2228", b"ASIA")

    def q2_3(self):
        return self._flight2(lambda p: p[2] == b"MFGR#2239", b"EUROPE")

    # --- flight 3: customer/supplier geography, grouped revenue ---------------

    def _flight3(self, cust_ok, supp_ok, date_ok, geo_idx, geo_name):
        good_custs = {k: v[geo_idx] for k, v in self.cust_rows.items() if cust_ok(v)}
        good_supps = {k: v[geo_idx] for k, v in self.supp_rows.items() if supp_ok(v)}
        acc = {}
        for ck, sk, od, rev in zip(
            _ints(self.lo, "custkey"),
            _ints(self.lo, "suppkey"),
            _ints(self.lo, "orderdate"),
            _ints(self.lo, "revenue"),
        ):
            c = good_custs.get(ck)
            s = good_supps.get(sk)
            if c is None or s is None:
                continue
            d = self.date_rows[od]
            if not date_ok(d):
                continue
            key = (c, s, d[0])
            acc[key] = acc.get(key, 0) + rev
        rows = [k + (v,) for k, v in acc.items()]
        columns = ["c_%s" % geo_name, "s_%s" % geo_name, "year", "revenue"]
        return columns, _ordered(columns, rows, [("year", "asc"), ("revenue", "desc")])

    def q3_1(self):
        return self._flight3(
            lambda c: c[2] == b"ASIA",
            lambda s: s[2] == b"ASIA",
            lambda d: 1992 <= d[0] <= 1997,
            1, "nation",
        )

    def q3_2(self):
        return self._flight3(
            lambda c: c[1] == b"UNITED STATES",
            lambda s: s[1] == b"UNITED STATES",
            lambda d: 1992 <= d[0] <= 1997,
            0, "city",
        )

    def q3_3(self):
        cities = (b"UNITED KI1", b"UNITED KI5")
        return self._flight3(
            lambda c: c[0] in cities,
            lambda s: s[0] in cities,
            lambda d: 1992 <= d[0] <= 1997,
            0, "city",
        )

    def q3_4(self):
        cities = (b"UNITED KI1", b"UNITED KI5")
        return self._flight3(
            lambda c: c[0] in cities,
            lambda s: s[0] in cities,
            lambda d: d[3] == b"Dec1997",
            0, "city",
        )

    # --- flight 4: profit = revenue - supplycost ------------------------------

    def _flight4(self, cust_ok, supp_ok, part_ok, date_ok, key_of, columns, sort):
        good_custs = {k: v for k, v in self.cust_rows.items() if cust_ok(v)}
        good_supps = {k: v for k, v in self.supp_rows.items() if supp_ok(v)}
        good_parts = {k: v for k, v in self.part_rows.items() if part_ok(v)}
        acc = {}
        for ck, sk, pk, od, rev, cost in zip(
            _ints(self.lo, "custkey"),
            _ints(self.lo, "suppkey"),
            _ints(self.lo, "partkey"),
            _ints(self.lo, "orderdate"),
            _ints(self.lo, "revenue"),
            _ints(self.lo, "supplycost"),
        ):
            c = good_custs.get(ck)
            s = good_supps.get(sk)
            p = good_parts.get(pk)
            if c is None or s is None or p is None:
                continue
            d = self.date_rows[od]
            if not date_ok(d):
                continue
            key = key_of(c, s, p, d)
            acc[key] = acc.get(key, 0) + (rev - cost)
        rows = [k + (v,) for k, v in acc.items()]
        return columns, _ordered(columns, rows, sort)

    def q4_1(self):
        return self._flight4(
            lambda c: c[2] == b"AMERICA",
            lambda s: s[2] == b"AMERICA",
            lambda p: p[0] in (b"MFGR#1", b"MFGR#2"),
            lambda d: True,
            lambda c, s, p, d: (d[0], c[1]),
            ["year", "c_nation", "profit"],
            [("year", "asc"), ("c_nation", "asc")],
        )

    def q4_2(self):
        return self._flight4(
            lambda c: c[2] == b"AMERICA",
            lambda s: s[2] == b"AMERICA",
            lambda p: p[0] in (b"MFGR#1", b"MFGR#2"),
            lambda d: d[0] in (1997, 1998),
            lambda c, s, p, d: (d[0], s[1], p[1]),
            ["year", "s_nation", "category", "profit"],
            [("year", "asc"), ("s_nation", "asc"), ("category", "asc")],
        )

    def q4_3(self):
        return self._flight4(
            lambda c: c[2] == b"AMERICA",
            lambda s: s[1] == b"UNITED STATES",
            lambda p: p[1] == b"MFGR#14",
            lambda d: d[0] in (1997, 1998),
            lambda c, s, p, d: (d[0], s[0], p[2]),
            ["year", "s_city", "brand1", "profit"],
            [("year", "asc"), ("s_city", "asc"), ("brand1", "asc")],
        )


def run_oracle(tables, query_id):
    """Evaluate one query id against in-memory tables; (columns, rows)."""
    method = "q" + query_id[1:].replace(".", "_")
    return getattr(_Oracle(tables), method)()
