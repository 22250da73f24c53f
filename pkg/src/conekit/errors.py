"""Exception taxonomy, grouped by how the CLI maps failures to exit codes."""


class ConekitError(Exception):
    """Base class for all library errors."""


class ConfigError(ConekitError):
    """Bad user input: unknown system, malformed config, invalid parameter."""


class DimensionMismatch(ConfigError):
    """Operands with incompatible split dimensions."""


class UnboundedDomain(ConfigError):
    """An operation that needs a bounded a-extent met an unbounded one."""


class UnsupportedDimension(ConfigError):
    """Operation restricted to a specific block dimension (e.g. scalar a)."""


class NonJordanInput(ConfigError):
    """Matrix handed to the Jordan rescaler is not in real Jordan form."""


class HypothesisError(ConekitError):
    """A rate or cone hypothesis failed, or a precondition built on one."""


class LipschitzPrecondition(HypothesisError):
    """Graph intersection refused: sampled Lipschitz bound exceeds 1/2."""


class NumericError(ConekitError):
    """Numerical procedure failed (divergence, underflow, no convergence)."""


class IntegrationError(NumericError):
    """Step-size underflow or non-finite state during time stepping."""


class RiccatiBlowup(IntegrationError):
    """Derivative-candidate matrix left the trust region (finite-time escape)."""


class GraphComputationError(NumericError):
    """Graph solver could not resolve every node (non-monotone exits, stalls)."""
