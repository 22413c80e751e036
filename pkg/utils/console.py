"""
Terminal UI Utilities
Helper functions for pretty terminal output
"""

from typing import Any, Optional, Sequence

import pandas as pd
from rich.console import Console
from rich.markup import escape
from rich.table import Table

console = Console()


def print_header(text: str) -> None:
    """Print a formatted header"""
    console.rule(f"[bold]{text}")


def print_success(message: str) -> None:
    console.print(f"[green]✓[/green] {escape(message)}")


def print_error(message: str) -> None:
    console.print(f"[red]✗[/red] {escape(message)}")


def print_info(message: str) -> None:
    console.print(f"→ {escape(message)}")


def _cell(value: Any) -> str:
    if value is None or (isinstance(value, float) and pd.isna(value)):
        return "-"
    if isinstance(value, float):
        return f"{value:.4g}"
    return str(value)


def print_table(headers: Sequence[str], rows: Sequence[Sequence[Any]], title: Optional[str] = None,
                highlight: Optional[int] = None) -> None:
    """
    Print a formatted table

    Args:
        headers: List of column headers
        rows: List of lists containing row data
        title: Optional caption above the table
        highlight: Index of a row to render in bold
    """
    table = Table(title=title)
    for header in headers:
        table.add_column(str(header), justify="right")
    for idx, row in enumerate(rows):
        table.add_row(*(_cell(cell) for cell in row), style="bold" if idx == highlight else None)
    console.print(table)


def print_frame(frame: pd.DataFrame, title: Optional[str] = None, highlight: Optional[int] = None) -> None:
    """Print a DataFrame through `print_table`"""
    print_table(list(frame.columns), list(frame.itertuples(index=False, name=None)), title=title, highlight=highlight)
