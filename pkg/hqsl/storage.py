import csv
import io
import logging
import os
import pathlib
import typing as t
from abc import ABC, abstractmethod
from dataclasses import dataclass

from pydantic import BaseModel

Cell = int | float | str


def format_cell(value: Cell) -> str:
    # repr of a float is its shortest round-trip form
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_cell(text: str) -> Cell:
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


@dataclass(frozen=True)
class Table:
    columns: tuple[str, ...]
    rows: tuple[tuple[Cell, ...], ...]

    def __post_init__(self):
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValueError(
                    f"Row {row} has {len(row)} cells for {len(self.columns)} columns"
                )

    @classmethod
    def from_records(
        cls, columns: t.Sequence[str], records: t.Iterable[t.Mapping[str, t.Any]]
    ) -> "Table":
        rows = tuple(tuple(_plain(record[c]) for c in columns) for record in records)
        return cls(columns=tuple(columns), rows=rows)

    def to_csv(self) -> str:
        """UTF-8 text, comma separated, header row, LF line endings."""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([format_cell(cell) for cell in row])
        return buffer.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Table":
        reader = csv.reader(io.StringIO(text))
        try:
            columns = tuple(next(reader))
        except StopIteration:
            raise ValueError("CSV text has no header row")
        rows = tuple(tuple(parse_cell(cell) for cell in row) for row in reader if row)
        return cls(columns=columns, rows=rows)

    def records(self) -> list[dict[str, Cell]]:
        return [dict(zip(self.columns, row)) for row in self.rows]

    def column(self, name: str) -> list[Cell]:
        k = self.columns.index(name)
        return [row[k] for row in self.rows]


def _plain(value: t.Any) -> Cell:
    """Numpy scalars, enums, bools and None down to int / float / str."""
    if hasattr(value, "item"):
        value = value.item()
    if value is None or isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return int(value)
    if isinstance(value, float):
        return float(value)
    return str(value)


@dataclass(frozen=True)
class OutputBundle:
    name: str
    table: Table
    summary: BaseModel
    svg: str | None = None


class IResultsStorage(ABC):
    @abstractmethod
    def __init__(self, results_path: pathlib.Path) -> None: ...

    @abstractmethod
    def get_table_path(self, name: str) -> pathlib.Path:
        """Default location of a named table."""
        ...

    @abstractmethod
    def save_table(self, table: Table, path: pathlib.Path) -> pathlib.Path:
        """Write the table as CSV and return its path."""
        ...

    @abstractmethod
    def load_table(self, path: pathlib.Path) -> Table:
        """Read a CSV table written by save_table."""
        ...

    @abstractmethod
    def save_summary(self, summary: BaseModel, path: pathlib.Path) -> pathlib.Path:
        """Write the run summary as one JSON object."""
        ...

    @abstractmethod
    def save_svg(self, svg: str, path: pathlib.Path) -> pathlib.Path:
        """Write an SVG document."""
        ...


class LocalResultsStorage(IResultsStorage):
    results_path: pathlib.Path  # Default directory for tables without an explicit path

    def __init__(self, results_path: pathlib.Path) -> None:
        self.results_path = results_path

    def get_table_path(self, name: str) -> pathlib.Path:
        return self.results_path / f"{name}.csv"

    def save_table(self, table: Table, path: pathlib.Path) -> pathlib.Path:
        return self._write(path, table.to_csv())

    def load_table(self, path: pathlib.Path) -> Table:
        with open(path, "r", encoding="utf-8", newline="") as f:
            return Table.from_csv(f.read())

    def save_summary(self, summary: BaseModel, path: pathlib.Path) -> pathlib.Path:
        return self._write(path, summary.model_dump_json(indent=4) + "\n")

    def save_svg(self, svg: str, path: pathlib.Path) -> pathlib.Path:
        return self._write(path, svg)

    def _write(self, path: pathlib.Path, text: str) -> pathlib.Path:
        os.makedirs(pathlib.Path(path).parent, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        logging.info(f"Wrote {path}")
        return path
