"""Command-line surface: python -m cli <command>."""

from cli.commands import build_parser, main

__all__ = ["build_parser", "main"]
