"""Exception types shared across the simulator."""


class UcmimoError(Exception):
    """Base class for all simulator errors."""


class ScenarioError(UcmimoError):
    """Scenario file is malformed or violates a validation rule."""


class ZeroChannelError(UcmimoError):
    """A precoder was requested for an all-zero channel vector."""


class NegativeInterferenceError(UcmimoError):
    """Interference came out negative beyond the floating-point guard."""


class PlacementError(UcmimoError):
    """No outdoor ground is available to place users on."""


class CampaignMismatchError(UcmimoError):
    """Mode comparison was asked for incompatible sample sets."""


class SimulationError(UcmimoError):
    """A run aborted; the message names the slot/RB/user involved."""
