"""Exception hierarchy shared across the package.

Each error carries a short machine-parsable ``code`` used by the CLI to emit
single-line diagnostics with a stable prefix.
"""

from __future__ import annotations


class GcstarError(Exception):
    """Base class for all package errors."""

    code = "E_GENERIC"


class DomainError(GcstarError, ValueError):
    """Numeric argument outside a function's domain (also a ValueError so
    numeric call sites can keep their usual handling)."""

    code = "E_DOMAIN"


class ConvergenceError(GcstarError):
    """A series or iterative solver failed to converge within its cap."""

    code = "E_CONVERGENCE"


class CalibrationError(GcstarError):
    """Infeasible prior calibration request (e.g. tail mass >= 1)."""

    code = "E_CALIBRATION"


class DesignError(GcstarError):
    """Degenerate or collinear design matrix in a predictor component."""

    code = "E_DESIGN"


class GraphFormatError(GcstarError):
    """Malformed adjacency structure or graph file."""

    code = "E_GRAPH"


class DataFormatError(GcstarError):
    """Malformed CSV data or missing/invalid columns."""

    code = "E_DATA"


class ConfigError(GcstarError):
    """Invalid or incomplete run configuration."""

    code = "E_CONFIG"
