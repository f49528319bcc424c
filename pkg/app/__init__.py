"""Settings, scenario schemas, metrics and the command-line entry point."""
