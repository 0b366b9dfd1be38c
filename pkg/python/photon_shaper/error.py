class Error(Exception):
    """
    An error emitted by photon-shaper.
    """

    def __init__(self, message: str):
        super().__init__(message)
        self._message = message

    def message(self) -> str:
        """
        A string describing the error.
        """
        return self._message

    def __str__(self) -> str:
        return self.message()


class ValidationError(Error):
    """
    A precondition of an operation or the schema of a scenario file has been violated. The command
    line interface reports these with exit code 2, all other errors with exit code 1.
    """


def raise_on_invalid(condition: bool, message: str):
    """
    Raises a ``ValidationError`` carrying ``message`` unless ``condition`` holds.
    """
    if not condition:
        raise ValidationError(message)
