"""Exception hierarchy shared by every module of the package."""


class BridgeScopeError(Exception):
    """Base class for all errors raised by bridgescope."""


class MalformedAddress(BridgeScopeError, ValueError):
    pass


class MalformedHash(BridgeScopeError, ValueError):
    pass


class AmountOverflow(BridgeScopeError, ValueError):
    pass


class InvalidState(BridgeScopeError, ValueError):
    """A state object violates its chain-consistency invariants."""


class MissingRouterConfig(BridgeScopeError, KeyError):
    def __init__(self, chain: str):
        super().__init__(chain)
        self.chain = chain

    def __str__(self) -> str:
        return f"no router configured for chain {self.chain!r}"


class TraceMismatch(BridgeScopeError, ValueError):
    pass


class DuplicateEvent(BridgeScopeError, ValueError):
    pass


class ConfigParse(BridgeScopeError, ValueError):
    pass


class ConfigInvalid(BridgeScopeError, ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class RecordParse(BridgeScopeError, ValueError):
    def __init__(self, line: int, message: str, source: str = ""):
        where = f"{source}:{line}" if source else f"line {line}"
        super().__init__(f"{where}: {message}")
        self.line = line
        self.source = source


class IncompleteSequence(BridgeScopeError, ValueError):
    pass


class UnknownVariant(BridgeScopeError, ValueError):
    pass


class SpecParse(BridgeScopeError, ValueError):
    pass


class BadFlag(BridgeScopeError, ValueError):
    pass
