"""Composition of discrete Gaussian counting queries from an allocation table."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

from .account import ComposeReport, compose_tensor
from .errors import DomainError
from .mech import discrete_gaussian_curve
from .pld import DEFAULT_CELL, DEFAULT_SPAN


@dataclass(frozen=True)
class AllocationTable:
    rows: tuple  # (level, query, sigma)

    def __post_init__(self):
        rows = tuple((str(level), str(query), float(sigma)) for level, query, sigma in self.rows)
        seen = set()
        for level, query, sigma in rows:
            if not (sigma > 0 and math.isfinite(sigma)):
                raise DomainError(f"sigma must be positive for {level}/{query}")
            if (level, query) in seen:
                raise DomainError(f"duplicate row {level}/{query}")
            seen.add((level, query))
        object.__setattr__(self, "rows", rows)

    @property
    def sigmas(self) -> list:
        return [sigma for _, _, sigma in self.rows]

    @classmethod
    def from_csv(cls, path) -> "AllocationTable":
        """Reads a CSV with header ``level,query,sigma``."""
        with open(Path(path), newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or set(reader.fieldnames) < {"level", "query", "sigma"}:
                raise DomainError("allocation CSV needs the header level,query,sigma")
            try:
                rows = [(r["level"], r["query"], float(r["sigma"])) for r in reader]
            except ValueError as err:
                raise DomainError(f"bad sigma value: {err}") from None
        return cls(tuple(rows))


@dataclass
class CensusResult:
    eps_lower: float
    eps_upper: float
    delta: float
    m: int
    cell: float
    report: ComposeReport

    def to_json(self) -> dict:
        return {"eps_lower": self.eps_lower, "eps_upper": self.eps_upper,
                "delta": self.delta, "m": self.m, "method": "FFT", "cell": self.cell}


def census_compose(table: AllocationTable, delta: float, cell: float = DEFAULT_CELL,
                   span: float = DEFAULT_SPAN) -> CensusResult:
    """Certified (eps_lower, eps_upper) at ``delta`` for all queries in ``table``.

    Each query is a sensitivity-1 counting query with discrete Gaussian noise.
    When every sigma is equal the losses (1 - 2x) / (2 sigma^2) already sit on
    a lattice, which is then used as the cell, so rounding is exact.
    """
    if not table.rows:
        raise DomainError("allocation table is empty")
    delta = float(delta)
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    sigmas = table.sigmas
    if len(set(sigmas)) == 1:
        cell = 1.0 / (2.0 * sigmas[0] ** 2)
    curves = {}
    for sigma in sigmas:
        if sigma not in curves:
            curves[sigma] = discrete_gaussian_curve(sigma, 1)
    report = compose_tensor([curves[s] for s in sigmas], cell=cell, span=span)
    lo, hi = report.eps_bounds(delta)
    return CensusResult(lo, hi, delta, len(sigmas), float(cell), report)
