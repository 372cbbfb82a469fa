"""Denormalized orders/lineitem-style benchmark table generator.

A reproducible stand-in for a warehouse fact table: order-level fields are
repeated once per line item (long runs, duplicated popular keys), dates are
nearly sorted, several columns drift in distribution across the table so
that slice-level and column-level encoding choices genuinely differ.
"""

from __future__ import annotations

import numpy as np

from .colstore import TableColumn, TableData, slice_row_counts
from .slices import Dtype, Slice

_NATIONS = [
    "algeria", "argentina", "brazil", "canada", "egypt", "ethiopia", "france",
    "germany", "india", "indonesia", "iran", "iraq", "japan", "jordan", "kenya",
    "morocco", "mozambique", "peru", "china", "romania", "saudi arabia",
    "vietnam", "russia", "united kingdom", "united states",
]
_SEGMENTS = ["automobile", "building", "furniture", "household", "machinery"]
_PRIORITIES = ["1-urgent", "2-high", "3-medium", "4-not specified", "5-low"]
_INSTRUCTIONS = ["deliver in person", "collect cod", "none", "take back return"]
_MODES = ["air", "fob", "mail", "rail", "reg air", "ship", "truck"]
_TYPE_A = ["economy", "large", "medium", "promo", "small", "standard"]
_TYPE_B = ["anodized", "brushed", "burnished", "plated", "polished"]
_TYPE_C = ["brass", "copper", "nickel", "steel", "tin"]

_ALPHABET = np.frombuffer(b"abcdefghijklmnopqrstuvwxyz", dtype=np.uint8)


def _random_strings(rng: np.random.Generator, lengths: np.ndarray) -> np.ndarray:
    offsets = np.concatenate(([0], np.cumsum(lengths)))
    blob = _ALPHABET[rng.integers(0, 26, size=int(offsets[-1]))].tobytes().decode()
    out = np.empty(len(lengths), dtype=object)
    for i in range(len(lengths)):
        out[i] = blob[offsets[i] : offsets[i + 1]]
    return out


def _pick(rng: np.random.Generator, pool: list[str], n: int, p=None) -> np.ndarray:
    idx = rng.choice(len(pool), size=n, p=p)
    return np.array(pool, dtype=object)[idx]


def generate_benchmark_table(
    n_rows: int, rows_per_slice: int, seed: int = 0
) -> TableData:
    rng = np.random.default_rng(seed)

    # orders: enough to cover n_rows line items at 1..7 lines each
    est_orders = max(1, int(n_rows / 4 * 1.2) + 8)
    lines = rng.integers(1, 8, size=est_orders)
    while lines.sum() < n_rows:
        lines = np.concatenate([lines, rng.integers(1, 8, size=est_orders // 4 + 1)])
    cut = int(np.searchsorted(np.cumsum(lines), n_rows)) + 1
    lines = lines[:cut]
    n_orders = len(lines)

    orderkey = np.arange(1, n_orders + 1, dtype=np.int64) * 4
    orderdate = (
        8000
        + (orderkey // 16)
        + rng.integers(-30, 31, size=n_orders)
    ).astype(np.int64)
    totalprice = np.rint(np.exp(rng.normal(10.5, 0.8, size=n_orders)) + 900).astype(np.int64)
    custkey = np.minimum(rng.zipf(1.35, size=n_orders), 30_000).astype(np.int64)
    orderstatus = _pick(rng, ["f", "o", "p"], n_orders, p=[0.49, 0.49, 0.02])
    orderpriority = _pick(rng, _PRIORITIES, n_orders)
    clerk_ids = rng.integers(1, 1001, size=n_orders)
    clerk = np.array([f"clerk{int(c):06d}" for c in clerk_ids], dtype=object)
    nationname = _pick(rng, _NATIONS, n_orders)
    mktsegment = _pick(rng, _SEGMENTS, n_orders)

    def per_line(arr: np.ndarray) -> np.ndarray:
        return np.repeat(arr, lines)[:n_rows]

    row_order = per_line(np.arange(n_orders))
    l_orderkey = per_line(orderkey)
    o_orderdate = per_line(orderdate)
    rows = n_rows

    linenumber = (np.arange(rows) - np.repeat(np.cumsum(lines) - lines, lines)[:rows] + 1).astype(np.int64)
    partkey = rng.integers(1, 200_001, size=rows).astype(np.int64)
    suppkey = rng.integers(1, 10_001, size=rows).astype(np.int64)
    quantity = rng.integers(1, 51, size=rows).astype(np.int64)
    extendedprice = np.rint(quantity * np.exp(rng.normal(7.0, 0.6, size=rows))).astype(np.int64)
    tax = rng.integers(0, 9, size=rows).astype(np.int64)

    # discount regime switch: a long promo era of zero discounts up front
    discount = rng.integers(0, 11, size=rows).astype(np.int64)
    promo_end = int(rows * 0.4)
    discount[:promo_end] = 0

    shipdate = o_orderdate + rng.integers(1, 122, size=rows)
    commitdate = o_orderdate + rng.integers(30, 91, size=rows)
    receiptdate = shipdate + rng.integers(1, 31, size=rows)
    commit_valid = rng.random(rows) >= 0.02  # occasional missing commit date

    returnflag = np.empty(rows, dtype=object)
    old = shipdate < np.quantile(shipdate, 0.45)
    returnflag[old] = _pick(rng, ["a", "r"], int(old.sum()))
    returnflag[~old] = "n"
    linestatus = np.where(old, "f", "o").astype(object)

    shipinstruct = _pick(rng, _INSTRUCTIONS, rows)
    shipmode = _pick(rng, _MODES, rows)

    # comments drift from terse to verbose across the table
    comment_len = np.where(
        np.arange(rows) < rows // 2,
        rng.integers(6, 15, size=rows),
        rng.integers(24, 44, size=rows),
    )
    comment = _random_strings(rng, comment_len)

    brand = np.array(
        [f"brand{int(b):02d}" for b in rng.integers(11, 56, size=rows)], dtype=object
    )
    ptype = np.array(
        [
            f"{_TYPE_A[a]} {_TYPE_B[b]} {_TYPE_C[c]}"
            for a, b, c in zip(
                rng.integers(0, 6, size=rows),
                rng.integers(0, 5, size=rows),
                rng.integers(0, 5, size=rows),
            )
        ],
        dtype=object,
    )

    int_cols = [
        ("l_orderkey", l_orderkey, None),
        ("l_partkey", partkey, None),
        ("l_suppkey", suppkey, None),
        ("l_linenumber", linenumber, None),
        ("l_quantity", quantity, None),
        ("l_extendedprice", extendedprice, None),
        ("l_discount", discount, None),
        ("l_tax", tax, None),
        ("l_shipdate", shipdate, None),
        ("l_commitdate", commitdate, commit_valid),
        ("l_receiptdate", receiptdate, None),
        ("o_totalprice", per_line(totalprice), None),
        ("o_orderdate", o_orderdate, None),
        ("c_custkey", per_line(custkey), None),
    ]
    str_cols = [
        ("l_returnflag", returnflag),
        ("l_linestatus", linestatus),
        ("l_shipinstruct", shipinstruct),
        ("l_shipmode", shipmode),
        ("l_comment", comment),
        ("o_orderstatus", orderstatus[row_order]),
        ("o_orderpriority", orderpriority[row_order]),
        ("o_clerk", clerk[row_order]),
        ("c_nationname", nationname[row_order]),
        ("c_mktsegment", mktsegment[row_order]),
        ("p_brand", brand),
        ("p_type", ptype),
    ]

    counts = slice_row_counts(rows, rows_per_slice)
    columns = []
    for name, values, validity in int_cols:
        valid = np.ones(rows, dtype=bool) if validity is None else validity
        slices, pos = [], 0
        for c in counts:
            slices.append(
                Slice(Dtype.INT64, values[pos : pos + c], valid[pos : pos + c])
            )
            pos += c
        columns.append(TableColumn(name, Dtype.INT64, slices))
    for name, values in str_cols:
        slices, pos = [], 0
        for c in counts:
            slices.append(
                Slice(
                    Dtype.STRING,
                    values[pos : pos + c],
                    np.ones(c, dtype=bool),
                )
            )
            pos += c
        columns.append(TableColumn(name, Dtype.STRING, slices))
    return TableData(columns)
