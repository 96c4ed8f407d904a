"""Exception hierarchy shared by the solvers, readers and the CLI."""


class ValidationError(ValueError):
    """Bad user input: shapes, negative data, inconsistent parameters."""


class ShapeMismatchError(ValidationError):
    def __init__(self, message, *shapes):
        self.shapes = tuple(tuple(s) for s in shapes)
        super().__init__(message)


class NegativeEntryError(ValidationError):
    """Raised when a matrix that must be non-negative is not.

    ``row`` and ``col`` locate the first offending entry (0-based).
    """

    def __init__(self, name, row, col, value):
        self.name = name
        self.row = int(row)
        self.col = int(col)
        self.value = float(value)
        super().__init__(
            f"{name} has a negative entry {value!r} at (row={row}, col={col})"
        )


class ParseError(ValidationError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class NumericalError(ArithmeticError):
    """Non-finite values appeared during an iteration."""

    def __init__(self, message, iteration=None):
        self.iteration = iteration
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)


class ConvergenceError(NumericalError):
    """Iteration cap hit; ``partial`` carries the last iterate."""

    def __init__(self, message, partial=None, iteration=None):
        self.partial = partial
        super().__init__(message, iteration=iteration)
