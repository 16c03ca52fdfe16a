"""Exception hierarchy shared by the algebra, optimisation and CLI layers."""


class NcsError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for it."""

    exit_code = 4


class ConfigError(NcsError):
    exit_code = 2


class StructuralError(NcsError):
    """Unstabilizable or degenerate plant/channel structure."""

    exit_code = 3


class UnstabilizableError(StructuralError):
    def __init__(self, zero, pole):
        self.zero = zero
        self.pole = pole
        super().__init__(f"right half-plane pole {pole:.6g} cancels zero {zero:.6g}; not stabilizable")


class PerformanceUnbounded(StructuralError):
    def __init__(self, zero, pole):
        self.zero = zero
        self.pole = pole
        super().__init__(f"performance unbounded: NMP zero {zero:.6g} nearly cancels unstable pole {pole:.6g}")


class DegenerateError(StructuralError):
    pass


class NotStableError(NcsError):
    def __init__(self, msg, offending):
        self.offending = list(offending)
        super().__init__(f"{msg}; offending poles: {[complex(p) for p in self.offending]}")


class PoleHitError(NcsError):
    def __init__(self, pole):
        self.pole = pole
        super().__init__(f"evaluation at pole {pole}")


class SynthesisError(NcsError):
    def __init__(self, factor, reason):
        self.factor = factor
        self.reason = reason
        super().__init__(f"controller parameter {factor} not in RH-infinity: {reason}")


class NumericFailure(NcsError):
    exit_code = 4
