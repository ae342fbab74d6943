"""Decision procedure for bi-reachability in data vector addition systems with states."""

__version__ = "0.1.0"
