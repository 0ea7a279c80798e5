"""Positional query executor.

Below the materialization point, operators exchange JoinIndexBlocks:
aligned vectors of 0-based row positions, one per joined table. No
values flow between position operators; when an operator needs values
(a filter predicate, a join key) it invokes a reader, which fetches
pages through the buffer manager and releases its pins before
returning. AggregateMaterialize is the single materialization point
that turns positions into value tuples; above it only tuple operators
(SortLimit) run.

Plans are trees of PlanNode dataclasses; Engine.run validates the
shape, executes the position pipeline block by block, and renders a
deterministic tab-separated Result.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import storage
from .buffer import BufferManager, QueryIoContext
from .storage import PageRef

BLOCK_ROWS = 4096
INT64_MAX = (1 << 63) - 1

_PRED_OPS = ("=", "<", "<=", ">", ">=", "between", "in")


class ExecError(Exception):
    """Invalid plan or a contract violation during execution."""


@dataclass(frozen=True)
class Col:
    table: str
    column: str


# Aggregate expressions: col, col*col, col-col, col*(col-col).
@dataclass(frozen=True)
class Mul:
    a: "Col"
    b: "Col | Sub"


@dataclass(frozen=True)
class Sub:
    a: Col
    b: Col


@dataclass(frozen=True)
class Predicate:
    column: Col
    op: str  # =, <, <=, >, >=, between, in
    value: object = None
    low: object = None
    high: object = None
    values: tuple = ()


# --- plan nodes -----------------------------------------------------------------


@dataclass(frozen=True)
class DataSource:
    table: str


@dataclass(frozen=True)
class Filter:
    child: "PositionNode"
    predicates: tuple[Predicate, ...]


@dataclass(frozen=True)
class HashJoin:
    left: "PositionNode"
    right: "PositionNode"
    left_key: Col
    right_key: Col


PositionNode = DataSource | Filter | HashJoin


@dataclass(frozen=True)
class AggregateMaterialize:
    child: PositionNode
    group_by: tuple[tuple[Col, str], ...]  # (column, output name)
    aggregates: tuple[tuple[object, str], ...]  # (expression, output name)


@dataclass(frozen=True)
class SortLimit:
    child: AggregateMaterialize
    sort: tuple[tuple[str, str], ...]  # (output column, asc|desc)
    limit: int | None = None


PlanNode = SortLimit | AggregateMaterialize | PositionNode


@dataclass
class JoinIndexBlock:
    tables: tuple[str, ...]
    positions: dict[str, np.ndarray]

    def __len__(self) -> int:
        return len(self.positions[self.tables[0]]) if self.tables else 0

    def validate(self, row_counts: dict[str, int]) -> None:
        if tuple(self.positions) != self.tables:
            raise ExecError("join index tables/positions mismatch")
        sizes = {len(p) for p in self.positions.values()}
        if len(sizes) > 1:
            raise ExecError("join index position vectors differ in length")
        for table, pos in self.positions.items():
            if len(pos) and int(pos.max()) >= row_counts[table]:
                raise ExecError(
                    "position %d out of range for %s (%d rows)"
                    % (int(pos.max()), table, row_counts[table])
                )
            if len(pos) and int(pos.min()) < 0:
                raise ExecError("negative position for %s" % table)


class AccessMethod(enum.Enum):
    Range = "range"
    Sorted = "sorted"
    Jive = "jive"


def select_access_method(positions: np.ndarray) -> AccessMethod:
    """Range: dense ascending run. Sorted: ascending with gaps. Jive: anything."""
    if len(positions) == 0:
        raise ExecError("access method undefined for empty positions")
    diffs = np.diff(positions)
    if np.all(diffs == 1):
        return AccessMethod.Range
    if np.all(diffs >= 1):
        return AccessMethod.Sorted
    return AccessMethod.Jive


# --- readers ----------------------------------------------------------------------


def _concat_values(pieces: list[np.ndarray]) -> np.ndarray:
    if not pieces:
        return np.zeros(0, dtype=np.uint32)
    if len(pieces) == 1:
        return pieces[0]
    if pieces[0].dtype.kind == "S":
        width = max(p.dtype.itemsize for p in pieces)
        pieces = [p.astype("S%d" % width) for p in pieces]
    return np.concatenate(pieces)


class ColumnReader:
    """Fetches one column's values for a block's positions."""

    def __init__(self, engine: "Engine", col: Col):
        self.engine = engine
        self.col = col
        self.entry = engine.store.entry(col.table, col.column)

    def read(self, positions: np.ndarray, force_method: AccessMethod | None = None) -> np.ndarray:
        if len(positions) == 0:
            if self.entry.logical_type == storage.U32:
                return np.zeros(0, dtype=np.uint32)
            return np.zeros(0, dtype="S1")
        method = force_method or select_access_method(positions)
        if method == AccessMethod.Jive:
            order = np.argsort(positions, kind="stable")
            gathered = self._read_ascending(positions[order])
            out = np.empty_like(gathered)
            out[order] = gathered
            return out
        return self._read_ascending(positions)

    def _read_ascending(self, positions: np.ndarray) -> np.ndarray:
        """Positions ascending (not necessarily dense); one visit per page."""
        vpp = self.entry.values_per_page
        engine = self.engine
        pages = positions // vpp
        bounds = np.nonzero(np.diff(pages))[0] + 1
        starts = np.concatenate(([0], bounds, [len(positions)]))
        pieces = []
        for s, e in zip(starts[:-1], starts[1:]):
            page_no = int(pages[s])
            handle = engine.buffer.fetch(
                PageRef(self.col.table, self.col.column, page_no), engine.ctx
            )
            try:
                local = positions[s:e] - page_no * vpp
                pieces.append(handle.block.data[local])
            finally:
                engine.buffer.unpin(handle)
        return _concat_values(pieces)


class SyncReader:
    """Aligned multi-column reads over one block."""

    def __init__(self, engine: "Engine", cols: list[Col]):
        self.readers = [ColumnReader(engine, c) for c in cols]

    def read(self, block: JoinIndexBlock) -> list[np.ndarray]:
        return [r.read(block.positions[r.col.table]) for r in self.readers]


def read_values(reader, block: JoinIndexBlock, force_method: AccessMethod | None = None):
    """Reader entry point used by operators (and tests)."""
    if isinstance(reader, SyncReader):
        return reader.read(block)
    return reader.read(block.positions[reader.col.table], force_method)


# --- engine -------------------------------------------------------------------------


@dataclass
class Result:
    columns: list[str]
    rows: list[tuple]

    def to_tsv(self) -> str:
        lines = ["\t".join(self.columns)]
        for row in self.rows:
            lines.append(
                "\t".join(
                    v.decode("utf-8", "replace") if isinstance(v, bytes) else str(v) for v in row
                )
            )
        return "\n".join(lines) + "\n"

    def checksum(self) -> str:
        return hashlib.sha256(self.to_tsv().encode()).hexdigest()


class Engine:
    """Runs plans against one store + buffer; safe to share across queries
    as long as each run gets its own ctx (operator state is per-run)."""

    def __init__(
        self,
        store: storage.ColumnStore,
        buffer: BufferManager,
        block_rows: int = BLOCK_ROWS,
        validate_blocks: bool = True,
    ):
        self.store = store
        self.buffer = buffer
        self.block_rows = block_rows
        self.validate_blocks = validate_blocks
        self.ctx: QueryIoContext | None = None

    # The engine object itself is stateless across runs except for ctx,
    # which must not be shared; for concurrent queries create one Engine
    # per worker over the shared store/buffer.

    def run(self, plan: PlanNode, ctx: QueryIoContext | None = None) -> Result:
        self.ctx = ctx
        try:
            _validate_plan(plan)
            node = plan
            sorts: list[SortLimit] = []
            while isinstance(node, SortLimit):
                sorts.append(node)
                node = node.child
            result = self._run_aggregate(node)
            for s in reversed(sorts):
                result = _apply_sort_limit(result, s)
            if not sorts:
                result = _apply_sort_limit(result, None)
            return result
        finally:
            self.ctx = None

    # --- position operators ---------------------------------------------------

    def _columns_by_table(self, node) -> dict[str, list[str]]:
        cols: dict[str, list[str]] = {}

        def note(col: Col):
            cols.setdefault(col.table, [])
            if col.column not in cols[col.table]:
                cols[col.table].append(col.column)

        def walk(n):
            if isinstance(n, DataSource):
                return
            if isinstance(n, Filter):
                for p in n.predicates:
                    note(p.column)
                walk(n.child)
            elif isinstance(n, HashJoin):
                note(n.left_key)
                note(n.right_key)
                walk(n.left)
                walk(n.right)
            elif isinstance(n, AggregateMaterialize):
                for c, _ in n.group_by:
                    note(c)
                for expr, _ in n.aggregates:
                    for c in _expr_cols(expr):
                        note(c)
                walk(n.child)
            elif isinstance(n, SortLimit):
                walk(n.child)

        walk(node)
        return cols

    def _row_counts(self, tables) -> dict[str, int]:
        return {t: self.store.catalog.row_count(t) for t in tables}

    def _check(self, block: JoinIndexBlock, row_counts: dict[str, int]) -> JoinIndexBlock:
        if self.validate_blocks:
            block.validate(row_counts)
        return block

    def _op_datasource(self, table: str, declared: dict[str, list[str]], row_counts):
        n = row_counts[table]
        columns = declared.get(table, [])
        vpp = None
        if columns:
            vpp = self.store.entry(table, columns[0]).values_per_page
        window = self.buffer.config.prefetch_window
        for start in range(0, n, self.block_rows):
            end = min(start + self.block_rows, n)
            if columns and window:
                last_needed = (end - 1) // vpp
                total_pages = -(-n // vpp)
                hi = min(last_needed + window + 1, total_pages)
                refs = [
                    PageRef(table, c, p)
                    for p in range(start // vpp, hi)
                    for c in columns
                ]
                self.buffer.prefetch(refs, self.ctx)
            yield self._check(
                JoinIndexBlock((table,), {table: np.arange(start, end, dtype=np.int64)}),
                row_counts,
            )

    def _op_filter(self, node: Filter, child_stream, row_counts):
        readers = {p.column: ColumnReader(self, p.column) for p in node.predicates}
        for block in child_stream:
            mask = None
            for p in node.predicates:
                values = readers[p.column].read(block.positions[p.column.table])
                m = _apply_predicate(values, p, readers[p.column].entry.logical_type)
                mask = m if mask is None else (mask & m)
            if mask is None or mask.all():
                yield block
                continue
            if not mask.any():
                continue
            yield self._check(
                JoinIndexBlock(
                    block.tables, {t: pos[mask] for t, pos in block.positions.items()}
                ),
                row_counts,
            )

    def _op_hash_join(self, node: HashJoin, left_stream, right_stream, row_counts):
        # build side: the right input, drained fully
        right_tables: tuple[str, ...] = ()
        build_positions: list[np.ndarray] = []
        build_keys: list[np.ndarray] = []
        key_reader = None
        for block in right_stream:
            if key_reader is None:
                right_tables = block.tables
                key_reader = ColumnReader(self, node.right_key)
            build_keys.append(key_reader.read(block.positions[node.right_key.table]))
            build_positions.append(
                np.stack([block.positions[t] for t in block.tables], axis=1)
            )
        if not build_keys:
            return  # empty build side: inner join emits nothing, skip the probe reads
        keys = _concat_values(build_keys)
        matrix = np.concatenate(build_positions, axis=0)
        unique = len(np.unique(keys)) == len(keys)
        if unique:
            order = np.argsort(keys, kind="stable")
            sorted_keys = keys[order]
        else:
            table_map: dict[object, list[int]] = {}
            for i, k in enumerate(keys.tolist()):
                table_map.setdefault(k, []).append(i)
        left_reader = ColumnReader(self, node.left_key)
        for block in left_stream:
            probe = left_reader.read(block.positions[node.left_key.table])
            if unique:
                idx = np.searchsorted(sorted_keys, probe)
                idx = np.minimum(idx, len(sorted_keys) - 1)
                hit = sorted_keys[idx] == probe
                if not hit.any():
                    continue
                left_sel = np.nonzero(hit)[0]
                right_rows = matrix[order[idx[left_sel]]]
            else:
                left_idx: list[int] = []
                right_idx: list[int] = []
                for i, k in enumerate(probe.tolist()):
                    for j in table_map.get(k, ()):
                        left_idx.append(i)
                        right_idx.append(j)
                if not left_idx:
                    continue
                left_sel = np.asarray(left_idx, dtype=np.int64)
                right_rows = matrix[np.asarray(right_idx, dtype=np.int64)]
            positions = {t: block.positions[t][left_sel] for t in block.tables}
            for ti, t in enumerate(right_tables):
                positions[t] = right_rows[:, ti]
            yield self._check(
                JoinIndexBlock(block.tables + right_tables, positions), row_counts
            )

    def _run_positions(self, node: PositionNode, declared, row_counts):
        if isinstance(node, DataSource):
            return self._op_datasource(node.table, declared, row_counts)
        if isinstance(node, Filter):
            return self._op_filter(node, self._run_positions(node.child, declared, row_counts), row_counts)
        if isinstance(node, HashJoin):
            return self._op_hash_join(
                node,
                self._run_positions(node.left, declared, row_counts),
                self._run_positions(node.right, declared, row_counts),
                row_counts,
            )
        raise ExecError("not a position operator: %r" % (node,))

    # --- materialization -------------------------------------------------------

    def _run_aggregate(self, node: AggregateMaterialize) -> Result:
        declared = self._columns_by_table(node)
        tables = _tables_of(node.child)
        row_counts = self._row_counts(tables)
        group_cols = [c for c, _ in node.group_by]
        expr_cols = [list(_expr_cols(expr)) for expr, _ in node.aggregates]
        groups: dict[tuple, list[int]] = {}
        for block in self._run_positions(node.child, declared, row_counts):
            if len(block) == 0:
                continue
            key_arrays = [ColumnReader(self, c).read(block.positions[c.table]) for c in group_cols]
            sums = [
                _eval_expr(expr, self, block) for expr, _ in node.aggregates
            ]
            if group_cols:
                key_matrix = list(zip(*(a.tolist() for a in key_arrays)))
                order = {}
                for i, k in enumerate(key_matrix):
                    order.setdefault(k, []).append(i)
                for k, idxs in order.items():
                    acc = groups.setdefault(k, [0] * len(node.aggregates))
                    for a, per_row in enumerate(sums):
                        acc[a] += int(per_row[idxs].sum())
            else:
                acc = groups.setdefault((), [0] * len(node.aggregates))
                for a, per_row in enumerate(sums):
                    acc[a] += int(per_row.sum())
        if not group_cols and not groups:
            groups[()] = [0] * len(node.aggregates)
        for acc in groups.values():
            for total in acc:
                if not -INT64_MAX - 1 <= total <= INT64_MAX:
                    raise ExecError("aggregate accumulator overflow beyond 64 bits")
        columns = [name for _, name in node.group_by] + [name for _, name in node.aggregates]
        rows = [tuple(k) + tuple(acc) for k, acc in groups.items()]
        return Result(columns, rows)


# --- helpers -----------------------------------------------------------------------


def _tables_of(node: PositionNode) -> list[str]:
    if isinstance(node, DataSource):
        return [node.table]
    if isinstance(node, Filter):
        return _tables_of(node.child)
    if isinstance(node, HashJoin):
        return _tables_of(node.left) + _tables_of(node.right)
    raise ExecError("not a position operator: %r" % (node,))


def _expr_cols(expr) -> list[Col]:
    if isinstance(expr, Col):
        return [expr]
    if isinstance(expr, Sub):
        return [expr.a, expr.b]
    if isinstance(expr, Mul):
        return [expr.a] + _expr_cols(expr.b)
    raise ExecError("unsupported aggregate expression %r" % (expr,))


def _eval_expr(expr, engine: Engine, block: JoinIndexBlock) -> np.ndarray:
    """Evaluate an aggregate expression to per-row int64 values."""

    def col_values(c: Col) -> np.ndarray:
        values = ColumnReader(engine, c).read(block.positions[c.table])
        if values.dtype.kind == "S":
            raise ExecError("aggregate over raw-bytes column %s.%s" % (c.table, c.column))
        return values.astype(np.int64)

    if isinstance(expr, Col):
        return col_values(expr)
    if isinstance(expr, Sub):
        return col_values(expr.a) - col_values(expr.b)
    if isinstance(expr, Mul):
        a = col_values(expr.a)
        b = _eval_expr(expr.b, engine, block) if isinstance(expr.b, Sub) else col_values(expr.b)
        if len(a) and int(a.max()) * int(np.abs(b).max() if len(b) else 0) > INT64_MAX:
            # exact fallback for products that could exceed 64 bits per row
            return np.array([int(x) * int(y) for x, y in zip(a.tolist(), b.tolist())], dtype=object)
        return a * b
    raise ExecError("unsupported aggregate expression %r" % (expr,))


def _apply_predicate(values: np.ndarray, p: Predicate, logical_type: str) -> np.ndarray:
    is_bytes = values.dtype.kind == "S"

    def coerce(v):
        if is_bytes:
            if isinstance(v, str):
                v = v.encode()
            if not isinstance(v, bytes):
                raise ExecError(
                    "predicate on %s.%s needs bytes, got %r" % (p.column.table, p.column.column, v)
                )
            return v
        if isinstance(v, (bytes, str)):
            raise ExecError(
                "predicate on %s.%s needs an integer, got %r" % (p.column.table, p.column.column, v)
            )
        return int(v)

    if p.op == "=":
        return values == coerce(p.value)
    if p.op == "<":
        return values < coerce(p.value)
    if p.op == "<=":
        return values <= coerce(p.value)
    if p.op == ">":
        return values > coerce(p.value)
    if p.op == ">=":
        return values >= coerce(p.value)
    if p.op == "between":
        return (values >= coerce(p.low)) & (values <= coerce(p.high))
    if p.op == "in":
        members = [coerce(v) for v in p.values]
        mask = np.zeros(len(values), dtype=bool)
        for m in members:
            mask |= values == m
        return mask
    raise ExecError("unknown predicate op %r (valid: %s)" % (p.op, ", ".join(_PRED_OPS)))


def _apply_sort_limit(result: Result, node: SortLimit | None) -> Result:
    rows = sorted(result.rows)  # full-tuple lexicographic tiebreak
    if node is not None:
        for name, direction in reversed(node.sort):
            if name not in result.columns:
                raise ExecError("sort key %r not in result columns %s" % (name, result.columns))
            idx = result.columns.index(name)
            rows.sort(key=lambda r: r[idx], reverse=(direction == "desc"))
        if node.limit is not None:
            rows = rows[: node.limit]
    return Result(result.columns, rows)


def _validate_plan(plan) -> None:
    """Exactly one materialization point per path; tuple ops only above it."""
    node = plan
    while isinstance(node, SortLimit):
        node = node.child
    if not isinstance(node, AggregateMaterialize):
        raise ExecError("plan root must reach an AggregateMaterialize materialization point")

    def check_positions(n):
        if isinstance(n, DataSource):
            return
        if isinstance(n, Filter):
            check_positions(n.child)
            return
        if isinstance(n, HashJoin):
            check_positions(n.left)
            check_positions(n.right)
            return
        if isinstance(n, (AggregateMaterialize, SortLimit)):
            raise ExecError("second materialization point below the first")
        raise ExecError("unknown operator %r" % (n,))

    check_positions(node.child)
