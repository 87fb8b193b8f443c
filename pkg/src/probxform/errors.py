"""Exception hierarchy.

Every error raised by a transformation derives from :class:`TransformError`;
runtime failures of the sampler derive from :class:`EvalError`.
"""


class ProbxformError(Exception):
    pass


class ParseError(ProbxformError):
    """Parse failure; ``span`` is a :class:`~probxform.syntax.SourceSpan`."""

    def __init__(self, message, span=None):
        self.span = span
        where = f" at {span}" if span is not None else ""
        super().__init__(f"{message}{where}")


class UnknownPrimitive(ParseError):
    pass


class TypeCheckError(ProbxformError):
    pass


class UnboundVariable(TypeCheckError):
    pass


class TypeMismatch(TypeCheckError):
    def __init__(self, message, path=()):
        self.path = tuple(path)
        super().__init__(f"{message} (at {'/'.join(map(str, self.path)) or 'root'})")


class TransformError(ProbxformError):
    pass


class Unsupported(TransformError):
    pass


class Unhandled(TransformError):
    pass


class NotInvertible(TransformError):
    pass


class NotPairMeasure(TransformError):
    pass


class ZeroMass(TransformError):
    pass


class EvalError(ProbxformError):
    pass


class NonMeasure(EvalError):
    pass


class ZeroMeasure(EvalError):
    pass


class QuadratureFailure(EvalError):
    pass


class DegenerateChain(ProbxformError):
    pass


class ValidationError(ProbxformError):
    """Invalid arguments to a command or experiment."""
