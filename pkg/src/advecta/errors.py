"""Exception hierarchy shared by all advecta modules."""


class AdvectaError(Exception):
    """Base class for every error raised by the package."""


class SingularMatrix(AdvectaError, ArithmeticError):
    pass


class Overflow(AdvectaError, ArithmeticError):
    pass


class EvalError(AdvectaError, ArithmeticError):
    """Domain violation while evaluating an expression (log of 0, x/0, ...)."""


class ExprSyntaxError(AdvectaError, SyntaxError):
    """Malformed expression text.  ``offset`` is the 0-based character index."""

    def __init__(self, message, text="", offset=0):
        super().__init__(f"{message} at offset {offset}")
        self.msg = message
        self.text = text
        self.offset = offset

    def __str__(self):
        return f"{self.msg} at offset {self.offset}"


class NegativeAdvance(AdvectaError, ValueError):
    def __init__(self, message, term=None, t=None):
        super().__init__(message)
        self.term = term
        self.t = t


class OutOfDomain(AdvectaError, ValueError):
    pass


class OffGrid(AdvectaError, ValueError):
    pass


class NotConverged(AdvectaError):
    """Picard iteration hit ``max_iter``; ``result`` holds the last iterate."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class NotDecaying(AdvectaError):
    pass


class InvalidCertificate(AdvectaError, ValueError):
    pass


class DegenerateWindow(AdvectaError, ValueError):
    pass


class SchemaError(AdvectaError, ValueError):
    """Scenario document failed validation; ``path`` is a JSON pointer."""

    def __init__(self, message, path=""):
        super().__init__(f"{path or '/'}: {message}")
        self.path = path
