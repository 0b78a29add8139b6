"""Exception hierarchy. Every error raised by the package derives from FinexError."""


class FinexError(Exception):
    pass


class InvalidParameterError(FinexError, ValueError):
    pass


class InsufficientPointsError(FinexError, ValueError):
    pass


class InvalidConfigError(FinexError, ValueError):
    pass


class InfeasibleClassingError(FinexError, ValueError):
    pass


class MissingLookupError(FinexError, KeyError):
    def __str__(self):
        # KeyError repr-quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class WardSetMismatchError(FinexError, ValueError):
    pass


class MissingBaselineError(FinexError, ValueError):
    pass


class SchemaError(FinexError, ValueError):
    """Malformed input file. Carries file/row/column for diagnostics."""

    def __init__(self, message, file=None, row=None, column=None):
        self.file = file
        self.row = row
        self.column = column
        where = []
        if file is not None:
            where.append(f"file={file}")
        if row is not None:
            where.append(f"row={row}")
        if column is not None:
            where.append(f"column={column}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class StageError(FinexError):
    """Wraps any failure inside a pipeline stage with the stage name."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
