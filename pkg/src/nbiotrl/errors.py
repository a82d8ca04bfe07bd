"""Exception types shared across the simulator."""


class ConfigError(Exception):
    """Invalid configuration (bad value, malformed config file, unknown key)."""


class ContractViolation(Exception):
    """A caller broke an API precondition (e.g. stepping a finished episode)."""
