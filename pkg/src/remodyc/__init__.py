"""remodyc: an agent-based modeling language with measurement-unit
checking, a full-trace synchronous interpreter and deterministic replay."""

__version__ = "0.1.0"

# Version stamp for the on-disk trace layout, recorded in run metadata.
TRACE_FORMAT_VERSION = "1"
