"""Exception types shared across the package."""

from __future__ import annotations


class ShapeError(ValueError):
    """Image or mask dimensions do not satisfy an operation's contract."""


class MosaicError(ValueError):
    """A tile rectangle is incomplete; ``missing`` lists the absent coords."""

    def __init__(self, message, missing=()):
        super().__init__(message)
        self.missing = tuple(missing)


class ConfigError(ValueError):
    """Invalid run/registry configuration. ``missing_edges`` names absent
    pipeline edges when that is the cause."""

    def __init__(self, message, missing_edges=()):
        super().__init__(message)
        self.missing_edges = tuple(missing_edges)


class BackendError(RuntimeError):
    """A generator backend failed. Carries the edge id and any diagnostics
    captured from an external plugin."""

    def __init__(self, message, edge=None, diagnostics=""):
        super().__init__(message)
        self.edge = edge
        self.diagnostics = diagnostics


class PluginProtocolError(BackendError):
    """The plugin wire protocol was violated (bad handshake or framing)."""


class PluginTimeoutError(BackendError):
    """The plugin did not answer within the per-tile timeout."""


class FetchError(RuntimeError):
    """Tile download failed for some coords after exhausting retries."""

    def __init__(self, message, failed=()):
        super().__init__(message)
        self.failed = tuple(failed)


class IntegrityError(RuntimeError):
    """On-disk tile content does not match its recorded checksum."""


class CoverageError(ValueError):
    """Evaluation inputs do not cover a requested zoom. ``gaps`` maps each
    affected zoom to a short description of what is missing there."""

    def __init__(self, message, gaps=None):
        super().__init__(message)
        self.gaps = dict(gaps or {})
