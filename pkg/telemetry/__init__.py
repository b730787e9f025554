from .link import TelemetryLink, record_to_messages
from .station import GroundStation, message_to_record, serve
from .wire import (
    Ack,
    AssayResultMsg,
    BadMagic,
    CmdAbort,
    CmdStart,
    CrcMismatch,
    FrameDecoder,
    FrameError,
    IncompleteFrame,
    LifeVerdictMsg,
    LogEventMsg,
    Message,
    PayloadError,
    PayloadTooLarge,
    SensorFrameMsg,
    UnknownMessageType,
    UnsupportedVersion,
    crc32,
    decode,
    encode,
)

__all__ = [
    "Ack",
    "AssayResultMsg",
    "BadMagic",
    "CmdAbort",
    "CmdStart",
    "CrcMismatch",
    "FrameDecoder",
    "FrameError",
    "GroundStation",
    "IncompleteFrame",
    "LifeVerdictMsg",
    "LogEventMsg",
    "Message",
    "PayloadError",
    "PayloadTooLarge",
    "SensorFrameMsg",
    "TelemetryLink",
    "UnknownMessageType",
    "UnsupportedVersion",
    "crc32",
    "decode",
    "encode",
    "message_to_record",
    "record_to_messages",
    "serve",
]
