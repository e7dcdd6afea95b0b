class BiconnectError(Exception):
    """Base class for every error raised by the library"""


class ConfigStructureError(BiconnectError, ValueError):
    """Vertex or edge ids that cannot be resolved"""


class PFInconsistencyError(BiconnectError):
    def __init__(self, message, worst_residual):
        super().__init__(f"{message} (worst residual {worst_residual:.3e})")
        self.worst_residual = worst_residual


class PFConvergenceError(BiconnectError):
    pass


class MissingPFDataError(BiconnectError):
    pass


class GraphMismatchError(BiconnectError, ValueError):
    pass


class GaugeError(BiconnectError, ValueError):
    pass


class SystemSizeError(BiconnectError):
    def __init__(self, what, size, cap):
        super().__init__(f"{what} has size {size}, above the cap {cap}")
        self.size = size
        self.cap = cap


class OpenWordError(BiconnectError, ValueError):
    pass


class FixtureError(BiconnectError):
    """Malformed fixture; `location` points at the offending spot"""

    def __init__(self, message, location=None):
        where = f" at {location}" if location else ""
        super().__init__(f"{message}{where}")
        self.location = location
