"""Figure rendering for perpsim CSV reports."""

from .figures import EXPECTED_HEADERS, KINDS, FigureError, FigureSpec, render

__version__ = "0.1.0"
