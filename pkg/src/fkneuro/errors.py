"""Exception types shared across the package."""


class FkneuroError(Exception):
    """Base class for all package-specific errors."""


class MeshFormatError(FkneuroError):
    """Mesh file cannot be parsed.

    Carries the offending line number when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class MeshTopologyError(FkneuroError):
    """Mesh connectivity is inconsistent (e.g. a face owned by >2 elements)."""


class GraphFormatError(FkneuroError):
    """Connectome file cannot be parsed."""


class GraphConnectivityError(FkneuroError):
    """Connectome graph is not connected."""

    def __init__(self, components):
        self.components = components
        parts = "; ".join(
            "{" + ", ".join(str(r) for r in sorted(comp)) + "}" for comp in components
        )
        super().__init__(
            f"graph is disconnected: {len(components)} components: {parts}"
        )


class AtlasError(FkneuroError):
    """Atlas construction failed (unresolved names or empty stage groups)."""


class ConfigError(FkneuroError):
    """Invalid simulation configuration."""


class LinearSolverError(FkneuroError):
    """Linear solve did not reach the requested residual.

    ``residual_history`` holds the relative residuals seen during the
    iterative attempts (and the final direct-solve residual, if any).
    """

    def __init__(self, message, residual_history=()):
        super().__init__(message)
        self.residual_history = list(residual_history)


class RegionVocabularyError(FkneuroError):
    """Two domains do not share the region-id vocabulary needed to compare them."""

    def __init__(self, missing_in_mesh=(), missing_in_graph=()):
        self.missing_in_mesh = sorted(missing_in_mesh)
        self.missing_in_graph = sorted(missing_in_graph)
        parts = []
        if self.missing_in_mesh:
            parts.append(f"ids absent from mesh: {self.missing_in_mesh}")
        if self.missing_in_graph:
            parts.append(f"ids absent from graph: {self.missing_in_graph}")
        super().__init__("region vocabulary mismatch: " + "; ".join(parts))
