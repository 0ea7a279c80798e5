"""Star-schema benchmark dataset generator.

Produces the LINEORDER fact table plus DATE, CUSTOMER, SUPPLIER and PART
dimensions as Raw column files with a catalog.  All value distributions are
drawn from a single seeded generator in a fixed table order, so a given
(scale_factor, seed) pair always yields byte-identical files.

LINEORDER has 17 columns.  The ten u32 measure/key columns (custkey,
partkey, suppkey, orderdate, commitdate, quantity, extendedprice, discount,
revenue, supplycost) are the compression targets; the remaining seven are
raw-bytes columns that queries never touch.
"""

from __future__ import annotations

import datetime

import numpy as np

from . import storage
from .codec import CodecId

BASE_LINEORDER_ROWS = 6_000_000
BASE_CUSTOMER_ROWS = 30_000
BASE_SUPPLIER_ROWS = 2_000
BASE_PART_ROWS = 200_000
DATE_ROWS = 2556
DATE_START = datetime.date(1992, 1, 1)

LINEORDER_U32_COLUMNS = (
    "custkey",
    "partkey",
    "suppkey",
    "orderdate",
    "commitdate",
    "quantity",
    "extendedprice",
    "discount",
    "revenue",
    "supplycost",
)

LINEORDER_BYTES_COLUMNS = (
    "orderkey",
    "linenumber",
    "orderpriority",
    "shippriority",
    "ordtotalprice",
    "tax",
    "shipmode",
)

# nation -> region, 25 nations over 5 regions
NATIONS = (
    (b"ALGERIA", b"AFRICA"),
    (b"ARGENTINA", b"AMERICA"),
    (b"BRAZIL", b"AMERICA"),
    (b"CANADA", b"AMERICA"),
    (b"EGYPT", b"MIDDLE EAST"),
    (b"ETHIOPIA", b"AFRICA"),
    (b"FRANCE", b"EUROPE"),
    (b"GERMANY", b"EUROPE"),
    (b"INDIA", b"ASIA"),
    (b"INDONESIA", b"ASIA"),
    (b"IRAN", b"MIDDLE EAST"),
    (b"IRAQ", b"MIDDLE EAST"),
    (b"JAPAN", b"ASIA"),
    (b"JORDAN", b"MIDDLE EAST"),
    (b"KENYA", b"AFRICA"),
    (b"MOROCCO", b"AFRICA"),
    (b"MOZAMBIQUE", b"AFRICA"),
    (b"PERU", b"AMERICA"),
    (b"CHINA", b"ASIA"),
    (b"ROMANIA", b"EUROPE"),
    (b"SAUDI ARABIA", b"MIDDLE EAST"),
    (b"VIETNAM", b"ASIA"),
    (b"RUSSIA", b"EUROPE"),
    (b"UNITED KINGDOM", b"EUROPE"),
    (b"UNITED STATES", b"AMERICA"),
)

MONTH_ABBR = (b"Jan", b"Feb", b"Mar", b"Apr", b"May", b"Jun",
              b"Jul", b"Aug", b"Sep", b"Oct", b"Nov", b"Dec")

ORDER_PRIORITIES = (b"1-URGENT", b"2-HIGH", b"3-MEDIUM", b"4-NOT SPECIFIED", b"5-LOW")
SHIP_MODES = (b"REG AIR", b"AIR", b"RAIL", b"SHIP", b"TRUCK", b"MAIL", b"FOB")


class GenError(Exception):
    pass


def table_rows(scale_factor: float) -> dict[str, int]:
    """Row counts for every table at a given scale."""
    if scale_factor <= 0:
        raise GenError("scale_factor must be positive, got %r" % (scale_factor,))

    def scaled(base):
        return max(1, round(base * scale_factor))

    return {
        "lineorder": scaled(BASE_LINEORDER_ROWS),
        "date": DATE_ROWS,
        "customer": scaled(BASE_CUSTOMER_ROWS),
        "supplier": scaled(BASE_SUPPLIER_ROWS),
        "part": scaled(BASE_PART_ROWS),
    }


def _city_of(nation: bytes, digit: int) -> bytes:
    return nation[:9].ljust(9) + b"%d" % digit


def _make_date_table() -> dict[str, object]:
    datekey, year, yearmonthnum, weeknuminyear, yearmonth = [], [], [], [], []
    day = DATE_START
    one = datetime.timedelta(days=1)
    for _ in range(DATE_ROWS):
        datekey.append(day.year * 10000 + day.month * 100 + day.day)
        year.append(day.year)
        yearmonthnum.append(day.year * 100 + day.month)
        weeknuminyear.append((day.timetuple().tm_yday - 1) // 7 + 1)
        yearmonth.append(MONTH_ABBR[day.month - 1] + b"%d" % day.year)
        day += one
    return {
        "datekey": np.array(datekey, dtype=np.uint32),
        "year": np.array(year, dtype=np.uint32),
        "yearmonthnum": np.array(yearmonthnum, dtype=np.uint32),
        "weeknuminyear": np.array(weeknuminyear, dtype=np.uint32),
        "yearmonth": yearmonth,
    }


def _make_geo_table(rng: np.random.Generator, rows: int, key_name: str) -> dict[str, object]:
    nation_idx = rng.integers(0, len(NATIONS), rows)
    digits = rng.integers(0, 10, rows)
    return {
        key_name: np.arange(1, rows + 1, dtype=np.uint32),
        "city": [_city_of(NATIONS[n][0], d) for n, d in zip(nation_idx.tolist(), digits.tolist())],
        "nation": [NATIONS[n][0] for n in nation_idx.tolist()],
        "region": [NATIONS[n][1] for n in nation_idx.tolist()],
    }


def _make_part_table(rng: np.random.Generator, rows: int) -> dict[str, object]:
    mfgr_num = rng.integers(1, 6, rows).tolist()
    cat_num = rng.integers(1, 6, rows).tolist()
    brand_num = rng.integers(1, 41, rows).tolist()
    mfgr = [b"MFGR#%d" % m for m in mfgr_num]
    category = [b"%s%d" % (m, c) for m, c in zip(mfgr, cat_num)]
    brand1 = [b"%s%d" % (c, b) for c, b in zip(category, brand_num)]
    return {
        "partkey": np.arange(1, rows + 1, dtype=np.uint32),
        "mfgr": mfgr,
        "category": category,
        "brand1": brand1,
    }


def _make_lineorder_table(
    rng: np.random.Generator, rows: int, counts: dict[str, int], datekeys: np.ndarray
) -> dict[str, object]:
    custkey = rng.integers(1, counts["customer"] + 1, rows, dtype=np.uint32)
    partkey = rng.integers(1, counts["part"] + 1, rows, dtype=np.uint32)
    suppkey = rng.integers(1, counts["supplier"] + 1, rows, dtype=np.uint32)
    orderdate = datekeys[rng.integers(0, DATE_ROWS, rows)]
    commitdate = datekeys[rng.integers(0, DATE_ROWS, rows)]
    quantity = rng.integers(1, 51, rows, dtype=np.uint32)
    extendedprice = rng.integers(10_000, 10_000_000, rows, dtype=np.uint32)
    discount = rng.integers(0, 11, rows, dtype=np.uint32)
    revenue = (
        extendedprice.astype(np.uint64) * (100 - discount.astype(np.uint64)) // 100
    ).astype(np.uint32)
    supplycost = rng.integers(1_000, 100_000, rows, dtype=np.uint32)
    priorities = rng.integers(0, len(ORDER_PRIORITIES), rows).tolist()
    modes = rng.integers(0, len(SHIP_MODES), rows).tolist()
    taxes = rng.integers(0, 9, rows)
    ordtotal = extendedprice.astype(np.uint64) * quantity
    return {
        "custkey": custkey,
        "partkey": partkey,
        "suppkey": suppkey,
        "orderdate": orderdate,
        "commitdate": commitdate,
        "quantity": quantity,
        "extendedprice": extendedprice,
        "discount": discount,
        "revenue": revenue,
        "supplycost": supplycost,
        "orderkey": np.arange(1, rows + 1).astype("S10").tolist(),
        "linenumber": (np.arange(rows) % 7 + 1).astype("S1").tolist(),
        "orderpriority": [ORDER_PRIORITIES[i] for i in priorities],
        "shippriority": [b"0"] * rows,
        "ordtotalprice": ordtotal.astype("S16").tolist(),
        "tax": taxes.astype("S1").tolist(),
        "shipmode": [SHIP_MODES[i] for i in modes],
    }


def generate_tables(scale_factor: float, seed: int) -> dict[str, dict[str, object]]:
    """Build all five tables in memory.

    u32 columns come back as numpy uint32 arrays, raw-bytes columns as
    lists of bytes.  Tables are generated in a fixed order from one seeded
    stream, so results are reproducible.
    """
    counts = table_rows(scale_factor)
    rng = np.random.default_rng(seed)
    date = _make_date_table()
    customer = _make_geo_table(rng, counts["customer"], "custkey")
    supplier = _make_geo_table(rng, counts["supplier"], "suppkey")
    part = _make_part_table(rng, counts["part"])
    lineorder = _make_lineorder_table(rng, counts["lineorder"], counts, date["datekey"])
    return {
        "lineorder": lineorder,
        "date": date,
        "customer": customer,
        "supplier": supplier,
        "part": part,
    }


def write_tables(tables, out_dir, page_size_bytes: int = storage.DEFAULT_PAGE_SIZE):
    """Write in-memory tables as Raw column files plus a catalog."""
    out_dir.mkdir(parents=True, exist_ok=True)
    if any(out_dir.iterdir()):
        raise GenError("output directory %s is not empty" % (out_dir,))
    catalog = storage.Catalog(out_dir)
    for table, columns in tables.items():
        for column, values in columns.items():
            path = out_dir / ("%s.%s.pcf" % (table, column))
            if isinstance(values, np.ndarray):
                entry = storage.write_column(values, CodecId.Raw, page_size_bytes, path)
            else:
                entry = storage.write_string_column(values, page_size_bytes, path)
            catalog.add(entry)
    storage.save_catalog(catalog)
    return catalog


def generate_dataset(
    scale_factor: float,
    seed: int,
    out_dir,
    page_size_bytes: int = storage.DEFAULT_PAGE_SIZE,
):
    """Generate and persist a full dataset; returns the catalog."""
    tables = generate_tables(scale_factor, seed)
    return write_tables(tables, out_dir, page_size_bytes)
