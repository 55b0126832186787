"""Exception hierarchy shared across the package."""


class LearnwareError(Exception):
    """Base class for every error raised by this package."""


class InputError(LearnwareError, ValueError):
    """Malformed or inconsistent user input (shapes, sizes, ranges)."""


class KernelMismatchError(LearnwareError, ValueError):
    """Two embeddings built with different kernels were compared."""


class SingularityError(LearnwareError, ArithmeticError):
    """A quantity is undefined at the given point (e.g. a kink of the kernel)."""


class SolverError(LearnwareError, ArithmeticError):
    """A linear system could not be solved."""


class DivergenceError(LearnwareError, ArithmeticError):
    """An iterative procedure produced a non-finite objective."""


class ConflictError(LearnwareError):
    """An entry with the same id already exists."""


class NotFoundError(LearnwareError, KeyError):
    """The requested entry does not exist."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class IntegrityError(LearnwareError):
    """Stored data failed validation against the manifest."""


class InaccessibilityError(LearnwareError):
    """A raw training row would leak into stored artifacts."""


class ModelRuntimeError(LearnwareError, RuntimeError):
    """An external model process failed; carries captured diagnostics."""

    def __init__(self, message: str, stderr: str = "") -> None:
        super().__init__(message)
        self.stderr = stderr

    def __str__(self) -> str:
        base = super().__str__()
        return f"{base}\n--- stderr ---\n{self.stderr}" if self.stderr else base
