class SftAdapterError(Exception):
    """Base class for adapter failures."""


class OffsetUnavailable(SftAdapterError):
    def __init__(self, tokenizer_id: str):
        super().__init__(f"tokenizer {tokenizer_id!r} does not expose byte offsets")
        self.tokenizer_id = tokenizer_id


class SpanOutOfRange(SftAdapterError):
    def __init__(self, detail: str):
        super().__init__(f"mask block out of range: {detail}")


class SchemaError(SftAdapterError):
    def __init__(self, detail: str):
        super().__init__(f"bad SFT record: {detail}")


class ModelLoadError(SftAdapterError):
    pass


class EmptyDataset(SftAdapterError):
    def __init__(self, path):
        super().__init__(f"dataset {path} contains no records")
