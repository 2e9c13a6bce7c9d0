"""
Error types shared by the protocol layers
"""


class PPODError(Exception):
    """Base class for every error raised by the engine"""


class ParameterError(PPODError, ValueError):
    """Invalid configuration or call parameters"""


class RangeError(PPODError, ValueError):
    """A value lies outside its admissible range"""


class WidthMismatchError(PPODError, ValueError):
    """Bit widths, bundle widths or dimensions do not agree"""


class ProtocolError(PPODError):
    """The two parties left the protocol's expected message flow"""


class PoolExhaustedError(ProtocolError):
    """The multiplication triple pool could not be refilled"""


class TransportError(PPODError):
    """Channel failure: disconnect, timeout or oversize frame"""


class IntegrityError(ProtocolError):
    """A garbled row or an output label failed its integrity check"""


class PairingIntegrityError(IntegrityError):
    """Derandomise did not produce a permutation matrix"""


class AccessError(PPODError):
    """Decode requested for a bundle the caller may not see"""


class UnsupportedModeError(PPODError):
    """Requested execution mode is not enabled"""


class NoSessionError(PPODError):
    """A gateway request arrived before a session was started"""
