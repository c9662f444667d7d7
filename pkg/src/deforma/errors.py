"""Exception hierarchy shared by every layer of the engine."""


class DeformaError(Exception):
    """Base class for all engine errors."""


class StructuralError(DeformaError):
    """Operands live on different variable sets or have incompatible shapes."""


class DomainError(DeformaError):
    """A transcendental operation was asked for outside its exact domain."""


class TruncationError(DeformaError):
    """Jets are not deep enough for the requested order.

    ``required`` carries the jet degree that would have sufficed, when known.
    """

    def __init__(self, message, required=None):
        super().__init__(message)
        self.required = required


class DivergenceError(DeformaError):
    """An exponential series failed to terminate within its grading bound."""


class DegenerateChartError(DeformaError):
    """The potential's mixed Hessian is singular at the base point."""


class NotASymbolError(DeformaError):
    """An operator is not in the image of the quantization map at this depth."""


class FiltrationError(DeformaError):
    """A formal element or operator violates its declared filtration bound."""


class InternalConsistencyError(DeformaError):
    """An overdetermined system that theory says is solvable turned out not to be."""
