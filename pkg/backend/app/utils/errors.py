"""
Error types shared by every service.

Each error knows how the two front ends report it: `exit_code` for the CLI
(2 input, 3 no result, 4 numerical failure) and `status_code` for the HTTP layer.
"""


class CTError(Exception):
    exit_code = 4
    status_code = 500

    def __init__(self, message: str = ""):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__


# ==========================================
# 1. INPUT ERRORS (exit 2 / HTTP 400)
# ==========================================

class InputError(CTError):
    exit_code = 2
    status_code = 400


class DimensionError(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class ZeroVarianceColumn(InputError):
    def __init__(self, column: int):
        super().__init__(f"Column {column} has zero sample variance.")
        self.column = column


class EmptyGrid(InputError):
    pass


class StructureError(InputError):
    pass


class InfeasibleScheme(InputError):
    pass


# ==========================================
# 2. NO RESULT (exit 3 / HTTP 422)
# ==========================================

class NoCandidates(CTError):
    exit_code = 3
    status_code = 422


# ==========================================
# 3. NUMERICAL FAILURES (exit 4 / HTTP 500)
# ==========================================

class NotPositiveDefinite(CTError):
    pass


class NonConvergence(CTError):
    pass


class DegenerateBaseline(CTError):
    pass


class NegativeErrorVariance(CTError):
    pass
