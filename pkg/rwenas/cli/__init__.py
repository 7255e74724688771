"""Command-line surface: commands, progress display and helpers."""
