class ManifoldTestError(ValueError):
    """Error raised by the analysis pipeline.

    ``code`` is a short stable identifier (e.g. ``"empty-set"``) that callers
    and tests can match on; the message carries the human-readable detail.
    """

    def __init__(self, code, message=None, **context):
        self.code = code
        self.context = context
        text = code if message is None else f"{code}: {message}"
        if context:
            extra = ", ".join(f"{k}={v}" for k, v in context.items())
            text = f"{text} ({extra})"
        super().__init__(text)
