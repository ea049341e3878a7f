"""Exception hierarchy shared by all splac modules."""


class SplacError(Exception):
    """Base class for all errors raised by splac."""


class AlphabetError(SplacError):
    """A formula or configuration mentions a feature outside the declared alphabet."""


class CapacityError(SplacError):
    """An exhaustive operation was requested beyond the enumeration guard."""


class FormulaParseError(SplacError):
    """A textual feature expression could not be parsed."""


class DerivationError(SplacError):
    """A product was requested under a configuration that does not admit it."""


class StructureError(SplacError):
    """An explicit product-line value violates its disjointness/coverage invariants."""


class SchemaError(SplacError):
    """A goal predicate or template was used against the wrong schema."""


class ProvenanceError(SplacError):
    """A strategy references an unknown template or malformed instantiation record."""


class LedgerError(SplacError):
    """An evidence reference does not resolve in the ledger."""


class InstantiationError(SplacError):
    """A template instantiation was rejected by its correctness criterion."""


class WorkspaceError(SplacError):
    """A workspace file set does not parse or cross-resolve."""
