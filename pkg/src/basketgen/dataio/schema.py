"""CSV schemas for catalogs, transactions and generated output."""
import csv
import os
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

CATALOG_COLUMNS = ["product_id", "name", "description", "category", "subcategory", "brand", "price"]
TRANSACTION_COLUMNS = ["customer_id", "week", "product_id", "quantity"]
GENERATED_COLUMNS = TRANSACTION_COLUMNS + ["generated"]


class SchemaError(ValueError):
    pass


class DanglingProductError(SchemaError):
    pass


@dataclass(frozen=True)
class CatalogRecord:
    product_id: str
    name: str
    description: str
    category: str
    subcategory: str
    brand: str
    price: float


@dataclass
class Basket:
    customer_id: str
    week: int
    products: list

    def __len__(self):
        return len(self.products)


@dataclass
class CustomerHistory:
    customer_id: str
    baskets: list = field(default_factory=list)

    @property
    def last_week(self):
        return self.baskets[-1].week

    def products(self):
        return [p for b in self.baskets for p in b.products]


@contextmanager
def atomic_open(path, mode="w"):
    """Write to a temp file next to ``path`` and rename it into place on success."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, mode, newline="" if "b" not in mode else None) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_float(x):
    return repr(float(x))


def _reader(path, expected):
    fh = open(path, newline="")
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None or header[:len(expected)] != expected:
        fh.close()
        raise SchemaError(f"{path}: header {header} does not match {expected}")
    return fh, reader, header


def read_catalog(path):
    fh, reader, _ = _reader(path, CATALOG_COLUMNS)
    records = []
    seen = set()
    with fh:
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(CATALOG_COLUMNS):
                raise SchemaError(f"{path}:{lineno}: expected {len(CATALOG_COLUMNS)} fields")
            pid, name, desc, cat, sub, brand, price = row
            if not pid or pid in seen:
                raise SchemaError(f"{path}:{lineno}: missing or duplicate product_id {pid!r}")
            if not (cat and sub and brand):
                raise SchemaError(f"{path}:{lineno}: empty category/subcategory/brand")
            try:
                value = float(price)
            except ValueError:
                raise SchemaError(f"{path}:{lineno}: bad price {price!r}") from None
            if not value >= 0:
                raise SchemaError(f"{path}:{lineno}: negative price")
            seen.add(pid)
            records.append(CatalogRecord(pid, name, desc, cat, sub, brand, value))
    return records


def write_catalog(path, records):
    with atomic_open(path) as fh:
        # quote all text: a bare "\r" inside free text would otherwise split the row
        w = csv.writer(fh, lineterminator="\n", quoting=csv.QUOTE_NONNUMERIC)
        w.writerow(CATALOG_COLUMNS)
        for r in records:
            w.writerow([r.product_id, r.name, r.description, r.category, r.subcategory,
                        r.brand, float(r.price)])


def _group(rows):
    """rows: (customer, week, product) in file order -> sorted histories."""
    by_customer = {}
    for cust, week, pid in rows:
        by_customer.setdefault(cust, {}).setdefault(week, []).append(pid)
    histories = []
    for cust in sorted(by_customer):
        weeks = by_customer[cust]
        histories.append(CustomerHistory(cust, [Basket(cust, w, weeks[w]) for w in sorted(weeks)]))
    return histories


def _parse_rows(path, reader, known, with_flag):
    rows = []
    for lineno, row in enumerate(reader, start=2):
        width = len(GENERATED_COLUMNS) if with_flag else len(TRANSACTION_COLUMNS)
        if len(row) != width:
            raise SchemaError(f"{path}:{lineno}: expected {width} fields, got {len(row)}")
        cust, week, pid, qty = row[:4]
        try:
            week_i, qty_i = int(week), int(qty)
        except ValueError:
            raise SchemaError(f"{path}:{lineno}: week and quantity must be integers") from None
        if week_i < 0 or qty_i < 1 or not cust:
            raise SchemaError(f"{path}:{lineno}: invalid week/quantity/customer")
        if known is not None and pid not in known:
            raise DanglingProductError(f"{path}:{lineno}: unknown product_id {pid!r}")
        flag = int(row[4]) if with_flag else 0
        rows.extend([(cust, week_i, pid, flag)] * qty_i)
    return rows


def read_transactions(path, catalog=None):
    """Histories grouped by customer and week; quantity q expands to q copies."""
    known = None if catalog is None else {r.product_id for r in catalog}
    fh, reader, _ = _reader(path, TRANSACTION_COLUMNS)
    with fh:
        rows = _parse_rows(path, reader, known, with_flag=False)
    return _group((c, w, p) for c, w, p, _ in rows)


def load_transactions(transactions_path, catalog_path):
    catalog = read_catalog(catalog_path)
    return read_transactions(transactions_path, catalog), catalog


def _history_rows(histories):
    for h in histories:
        for b in h.baskets:
            for pid in b.products:
                yield h.customer_id, b.week, pid


def write_transactions(path, histories):
    """One row per product occurrence (quantity 1), so reading back is exact."""
    with atomic_open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRANSACTION_COLUMNS)
        for cust, week, pid in _history_rows(histories):
            w.writerow([cust, week, pid, 1])


def write_generated(path, real_histories, generated_histories):
    with atomic_open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GENERATED_COLUMNS)
        for flag, hs in ((0, real_histories), (1, generated_histories)):
            for cust, week, pid in _history_rows(hs):
                w.writerow([cust, week, pid, 1, flag])


def read_generated(path, catalog=None):
    """Return ``(real_histories, generated_histories)`` from a generated.csv."""
    known = None if catalog is None else {r.product_id for r in catalog}
    fh, reader, _ = _reader(path, GENERATED_COLUMNS)
    with fh:
        rows = _parse_rows(path, reader, known, with_flag=True)
    real = _group((c, w, p) for c, w, p, f in rows if f == 0)
    gen = _group((c, w, p) for c, w, p, f in rows if f == 1)
    return real, gen


def write_vectors(path, ids, matrix, id_column="product_id"):
    matrix = np.asarray(matrix)
    with atomic_open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([id_column] + [f"d{j}" for j in range(matrix.shape[1])])
        for pid, row in zip(ids, matrix):
            w.writerow([pid] + [format_float(v) for v in row])


def read_vectors(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        ids, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise SchemaError(f"{path}:{lineno}: expected {len(header)} fields")
            ids.append(row[0])
            rows.append([float(v) for v in row[1:]])
    return ids, np.array(rows, dtype=np.float64).reshape(len(ids), len(header) - 1)


def write_rows(path, header, rows):
    with atomic_open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])

