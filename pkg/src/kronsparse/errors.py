"""Exception hierarchy shared by every module.

Each class carries a short machine-readable ``code`` that the CLI prints on
failure.
"""


class KronsparseError(Exception):
    code = "error"


class InvalidInputError(KronsparseError, ValueError):
    code = "invalid-input"


class DegenerateBeliefsError(KronsparseError, ValueError):
    code = "degenerate-beliefs"


class ContractError(KronsparseError, ValueError):
    code = "contract"


class SizeGuardError(KronsparseError, ValueError):
    code = "size-guard"


class DimensionError(KronsparseError, ValueError):
    code = "dimension"


class ParseError(KronsparseError, ValueError):
    code = "parse"


class CorruptFileError(KronsparseError, ValueError):
    code = "corrupt-file"
