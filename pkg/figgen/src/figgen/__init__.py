"""Figure generation for csrg exports."""

from .render import FigureSpec, FiggenError, render

__version__ = "0.1.0"
