from __future__ import annotations

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_SUPPORT_MISMATCH = 3


class KmsGraphError(Exception):
    pass


class GraphInputError(KmsGraphError, ValueError):
    pass


class SpectralError(KmsGraphError, ValueError):
    pass


class ConvergenceError(SpectralError):
    pass


class DivergenceError(KmsGraphError, ValueError):
    pass


class TemperatureError(KmsGraphError, ValueError):
    pass


class HarmonicError(KmsGraphError, ValueError):
    pass


class ConfigurationError(KmsGraphError, RuntimeError):
    pass


class ExtrapolationError(KmsGraphError):
    def __init__(self, message: str, diagnostics: object | None = None) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics


class OracleCheckError(KmsGraphError):
    pass


class SupportMismatchError(KmsGraphError):
    def __init__(
        self,
        predicted: frozenset[tuple[str, ...]],
        numeric: frozenset[tuple[str, ...]],
    ) -> None:
        self.predicted = predicted
        self.numeric = numeric
        super().__init__(
            "support mismatch between maximal-path prediction and numeric coefficients: "
            f"predicted={_format_components(predicted)} numeric={_format_components(numeric)}"
        )


def _format_components(components: frozenset[tuple[str, ...]]) -> str:
    labels = sorted("{" + ",".join(component) + "}" for component in components)
    return "[" + ", ".join(labels) + "]"


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, SupportMismatchError):
        return EXIT_SUPPORT_MISMATCH
    return EXIT_INVALID
