class HierarchyError(ValueError):
    """Base class for every domain error raised by hierarchyrank."""


class InputFormatError(HierarchyError):
    """An input file does not follow its documented format."""


class RecordFormatError(InputFormatError):
    pass


class RecordRowError(InputFormatError):
    def __init__(self, line, message):
        self.line = line
        super().__init__(f"Row {line}: {message}")


class ContractError(HierarchyError):
    """An operation was called with arguments violating its preconditions."""


class EmptyNetworkError(HierarchyError):
    pass


class UndefinedRhoError(HierarchyError):
    pass


class SizeLimitError(HierarchyError):
    pass


class DegenerateTestError(HierarchyError):
    pass


class UndefinedGiniError(HierarchyError):
    pass
