"""Lexer, parser and elaborator for the source language."""

from .elaborate import elaborate
from .parser import parse
from .pretty import pretty

__all__ = ["elaborate", "parse", "pretty"]
