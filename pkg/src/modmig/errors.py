"""Exception hierarchy shared by all modmig modules."""


class ModmigError(Exception):
    """Base class for every error raised deliberately by modmig."""


class ManifestError(ModmigError):
    pass


class ScanError(ModmigError):
    """A file that must be read (TU root, interface header) could not be."""


class UnknownNodeError(ModmigError, LookupError):
    def __init__(self, path: str):
        super().__init__(f"not a node of the include graph: {path}")
        self.path = path


class SanitizerError(ModmigError):
    pass


class ModulemapError(ModmigError):
    pass


class LayeringViolationError(ModulemapError):
    """Members of one include cycle belong to different libraries."""

    def __init__(self, scc, libraries):
        self.scc = tuple(sorted(scc))
        self.libraries = tuple(sorted(libraries))
        super().__init__(
            "layering violation: include cycle {%s} spans libraries %s"
            % (", ".join(self.scc), ", ".join(self.libraries))
        )


class ModulemapParseError(ModulemapError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class OverlayError(ModmigError):
    pass


class PlanError(ModmigError):
    pass
