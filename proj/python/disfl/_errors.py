class DisflError(RuntimeError):
    """Library failure; `code` is the error name, e.g. "VOCAB_MISMATCH"."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
