"""Command-line layer: subcommand dispatch and verification suites."""
