"""Exception hierarchy shared by all modules.

Every error carries a stable machine-readable ``category`` string; the CLI
prints ``<category>: <message>`` on stderr and exits nonzero, so scripted
pipelines can branch on the category without parsing prose.
"""


class ParallaxError(Exception):
    category = "error"


class InputError(ParallaxError):
    """Rejected input: shape/width mismatch, malformed argument."""

    category = "input-error"


class ConfigError(ParallaxError):
    """Inconsistent configuration (mask budget, empty ACS, bad flag combo)."""

    category = "config-error"


class CalibrationError(ParallaxError):
    """Under-determined GRAPPA calibration system."""

    category = "calibration-error"


class SolverError(ParallaxError):
    """Rank-deficient or otherwise unsolvable linear system."""

    category = "solver-error"


class StrideMismatchError(ParallaxError):
    """Mask does not contain the stride lattice a kernel was calibrated for."""

    category = "stride-mismatch"


class NumericalError(ParallaxError):
    """Divergence or non-finite values in an iterative procedure."""

    category = "numerical-error"


class TrainingError(ParallaxError):
    """Non-finite gradients or loss during optimization."""

    category = "training-error"


class FileFormatError(ParallaxError):
    """Missing, truncated, or malformed data file."""

    category = "io-error"
