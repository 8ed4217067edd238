"""
Error types shared by the model, optimizer and CLI layers.
"""

from typing import Optional


class AccessModelError(Exception):
    """Base error for the access-policy toolkit"""

    def __init__(self, message: str):
        """
        Initializes a new instance of the class.

        Args:
            message (str): The error message.
        """
        self.message = message
        super().__init__(message)


class UnstableQueueError(AccessModelError):
    """The primary queue cannot be stable: arrival rate exceeds service rate"""

    def __init__(self, lambda_p: float, mu_p: float):
        self.lambda_p = lambda_p
        self.mu_p = mu_p
        super().__init__(
            f"primary queue unstable: lambda_p={lambda_p!r} exceeds mu_p={mu_p!r}"
        )


class InfeasibleProblemError(AccessModelError):
    """No access policy satisfies the constraint set"""


class ConfigError(AccessModelError):
    """Configuration document could not be turned into valid inputs"""

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        self.key = key
        self.line = line
        where = ""
        if key is not None:
            where = f" (key '{key}'" + (f", line {line})" if line is not None else ")")
        super().__init__(f"{message}{where}")
