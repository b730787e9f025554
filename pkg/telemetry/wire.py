"""Framed wire protocol between rover and ground station.

Frame layout, all scalars big-endian::

    magic   2 bytes  b"MR"
    version 1 byte   0x01
    type    1 byte   message type
    length  4 bytes  payload size, at most 65,536
    payload length bytes
    crc     4 bytes  CRC-32/IEEE over every preceding byte of the frame

Strings are a u16 byte count followed by UTF-8. Booleans are one byte, 0 or 1.
Every message has exactly one encoding; decoders reject anything else.
"""
from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass
from typing import Union

from rover.types import AssayKind, LifeClass

MAGIC = b"MR"
VERSION = 0x01
MAX_PAYLOAD = 65_536

HEADER = struct.Struct(">2sBBI")
CRC = struct.Struct(">I")
FRAME_OVERHEAD = HEADER.size + CRC.size

_U8 = struct.Struct(">B")
_U16 = struct.Struct(">H")
_U32 = struct.Struct(">I")
_U64 = struct.Struct(">Q")
_SENSOR = struct.Struct(">Q3BBH6d")

# Fault mask bits; a set bit means the channel has no reading.
FAULT_CO2 = 1 << 0
FAULT_FORMALDEHYDE = 1 << 1
FAULT_AMMONIA = 1 << 2
PH_ABSENT = 1 << 3
_MASK_ALL = FAULT_CO2 | FAULT_FORMALDEHYDE | FAULT_AMMONIA | PH_ABSENT

KIND_CODES = {AssayKind.CARBOHYDRATE: 0, AssayKind.PROTEIN: 1, AssayKind.AMMONIA: 2}
VERDICT_CODES = {LifeClass.EXTANT: 0, LifeClass.EXTINCT: 1, LifeClass.NO_PRESENCE_OF_LIFE: 2}


class FrameError(Exception):
    pass


class BadMagic(FrameError):
    pass


class UnsupportedVersion(FrameError):
    pass


class CrcMismatch(FrameError):
    pass


class UnknownMessageType(FrameError):
    pass


class PayloadTooLarge(FrameError):
    pass


class PayloadError(FrameError):
    pass


class IncompleteFrame(Exception):
    """Not an error: the buffer holds a valid prefix and ``needed`` more bytes are required."""

    def __init__(self, needed: int) -> None:
        self.needed = needed
        super().__init__(f"need {needed} more bytes")


def crc32(data: bytes) -> int:
    return zlib.crc32(data) & 0xFFFFFFFF


# Messages --------------------------------------------------------------------


@dataclass(frozen=True)
class SensorFrameMsg:
    t_ms: int
    rgb: tuple[int, int, int]
    alcohol: bool
    co2_ppm: float | None
    formaldehyde_ppm: float | None
    humidity_pct: float
    ammonia_ppm: float | None
    soil_moisture_pct: float
    ph: float | None

    msg_type = 0x01


@dataclass(frozen=True)
class AssayResultMsg:
    t_ms: int
    target: str
    kind: AssayKind
    detected: bool
    bin_index: int
    elapsed_ms: int
    contaminated: bool

    msg_type = 0x02


@dataclass(frozen=True)
class LifeVerdictMsg:
    t_ms: int
    target: str
    verdict: LifeClass
    contaminated: bool
    protein: bool
    carbohydrate: bool
    ammonia: bool

    msg_type = 0x03


@dataclass(frozen=True)
class LogEventMsg:
    t_ms: int
    seq: int
    event: str
    payload: str

    msg_type = 0x04


@dataclass(frozen=True)
class Ack:
    seq: int

    msg_type = 0x05


@dataclass(frozen=True)
class CmdStart:
    mission: str

    msg_type = 0x81


@dataclass(frozen=True)
class CmdAbort:
    reason: str

    msg_type = 0x82


Message = Union[SensorFrameMsg, AssayResultMsg, LifeVerdictMsg, LogEventMsg, Ack, CmdStart, CmdAbort]
MESSAGE_TYPES: dict[int, type] = {
    cls.msg_type: cls for cls in (SensorFrameMsg, AssayResultMsg, LifeVerdictMsg, LogEventMsg, Ack, CmdStart, CmdAbort)
}


# Payload codecs --------------------------------------------------------------


def _pack(fmt: struct.Struct, *values) -> bytes:
    try:
        return fmt.pack(*values)
    except struct.error as exc:
        raise PayloadError(str(exc)) from exc


def _str(text: str) -> bytes:
    raw = text.encode("utf-8")
    return _pack(_U16, len(raw)) + raw


def _bool(flag: bool) -> bytes:
    return b"\x01" if flag else b"\x00"


def _finite(value: float, name: str) -> float:
    if not math.isfinite(value):
        raise PayloadError(f"{name} must be finite")
    # -0.0 encodes as +0.0
    return float(value) + 0.0


def _canonical(value: float) -> float:
    if not math.isfinite(value):
        raise PayloadError("readings must be finite")
    if value == 0.0 and math.copysign(1.0, value) < 0:
        raise PayloadError("negative zero is not a canonical reading")
    return value


class _Reader:
    def __init__(self, payload: bytes) -> None:
        self.payload = payload
        self.offset = 0

    def take(self, fmt: struct.Struct) -> tuple:
        end = self.offset + fmt.size
        if end > len(self.payload):
            raise PayloadError("payload ends early")
        values = fmt.unpack_from(self.payload, self.offset)
        self.offset = end
        return values

    def u8(self) -> int:
        return self.take(_U8)[0]

    def u32(self) -> int:
        return self.take(_U32)[0]

    def u64(self) -> int:
        return self.take(_U64)[0]

    def flag(self) -> bool:
        value = self.u8()
        if value > 1:
            raise PayloadError(f"boolean byte {value}")
        return value == 1

    def text(self) -> str:
        (size,) = self.take(_U16)
        end = self.offset + size
        if end > len(self.payload):
            raise PayloadError("string runs past payload")
        raw = self.payload[self.offset:end]
        self.offset = end
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise PayloadError("string is not UTF-8") from exc

    def done(self) -> None:
        if self.offset != len(self.payload):
            raise PayloadError(f"{len(self.payload) - self.offset} trailing payload bytes")


def _encode_sensor(msg: SensorFrameMsg) -> bytes:
    mask = 0
    readings = []
    for value, bit, name in (
        (msg.co2_ppm, FAULT_CO2, "co2_ppm"),
        (msg.formaldehyde_ppm, FAULT_FORMALDEHYDE, "formaldehyde_ppm"),
        (msg.ammonia_ppm, FAULT_AMMONIA, "ammonia_ppm"),
        (msg.ph, PH_ABSENT, "ph"),
    ):
        if value is None:
            mask |= bit
            readings.append(0.0)
        else:
            readings.append(_finite(value, name))
    co2, formaldehyde, ammonia, ph = readings
    return _pack(
        _SENSOR,
        msg.t_ms,
        *msg.rgb,
        1 if msg.alcohol else 0,
        mask,
        co2,
        formaldehyde,
        _finite(msg.humidity_pct, "humidity_pct"),
        ammonia,
        _finite(msg.soil_moisture_pct, "soil_moisture_pct"),
        ph,
    )


def _decode_sensor(reader: _Reader) -> SensorFrameMsg:
    t_ms, r, g, b, alcohol, mask, co2, formaldehyde, humidity, ammonia, moisture, ph = reader.take(_SENSOR)
    if alcohol > 1:
        raise PayloadError(f"boolean byte {alcohol}")
    if mask & ~_MASK_ALL:
        raise PayloadError(f"unknown fault bits {mask:#06x}")

    def reading(value: float, bit: int) -> float | None:
        if mask & bit:
            # canonical form of an absent reading is +0.0
            if struct.pack(">d", value) != struct.pack(">d", 0.0):
                raise PayloadError("absent reading must be encoded as zero")
            return None
        return _canonical(value)

    return SensorFrameMsg(
        t_ms=t_ms,
        rgb=(r, g, b),
        alcohol=alcohol == 1,
        co2_ppm=reading(co2, FAULT_CO2),
        formaldehyde_ppm=reading(formaldehyde, FAULT_FORMALDEHYDE),
        humidity_pct=_canonical(humidity),
        ammonia_ppm=reading(ammonia, FAULT_AMMONIA),
        soil_moisture_pct=_canonical(moisture),
        ph=reading(ph, PH_ABSENT),
    )


def encode_payload(msg: Message) -> bytes:
    if isinstance(msg, SensorFrameMsg):
        return _encode_sensor(msg)
    if isinstance(msg, AssayResultMsg):
        return (
            _pack(_U64, msg.t_ms)
            + _str(msg.target)
            + _pack(_U8, KIND_CODES[msg.kind])
            + _bool(msg.detected)
            + _pack(_U8, msg.bin_index)
            + _pack(_U32, msg.elapsed_ms)
            + _bool(msg.contaminated)
        )
    if isinstance(msg, LifeVerdictMsg):
        return (
            _pack(_U64, msg.t_ms)
            + _str(msg.target)
            + _pack(_U8, VERDICT_CODES[msg.verdict])
            + _bool(msg.contaminated)
            + _bool(msg.protein)
            + _bool(msg.carbohydrate)
            + _bool(msg.ammonia)
        )
    if isinstance(msg, LogEventMsg):
        return _pack(_U64, msg.t_ms) + _pack(_U32, msg.seq) + _str(msg.event) + _str(msg.payload)
    if isinstance(msg, Ack):
        return _pack(_U32, msg.seq)
    if isinstance(msg, CmdStart):
        return _str(msg.mission)
    if isinstance(msg, CmdAbort):
        return _str(msg.reason)
    raise PayloadError(f"cannot encode {type(msg).__name__}")


def _lookup(codes: dict, code: int, what: str):
    for member, value in codes.items():
        if value == code:
            return member
    raise PayloadError(f"unknown {what} code {code}")


def decode_payload(msg_type: int, payload: bytes) -> Message:
    reader = _Reader(payload)
    if msg_type == SensorFrameMsg.msg_type:
        msg: Message = _decode_sensor(reader)
    elif msg_type == AssayResultMsg.msg_type:
        msg = AssayResultMsg(
            t_ms=reader.u64(),
            target=reader.text(),
            kind=_lookup(KIND_CODES, reader.u8(), "assay kind"),
            detected=reader.flag(),
            bin_index=reader.u8(),
            elapsed_ms=reader.u32(),
            contaminated=reader.flag(),
        )
    elif msg_type == LifeVerdictMsg.msg_type:
        msg = LifeVerdictMsg(
            t_ms=reader.u64(),
            target=reader.text(),
            verdict=_lookup(VERDICT_CODES, reader.u8(), "verdict"),
            contaminated=reader.flag(),
            protein=reader.flag(),
            carbohydrate=reader.flag(),
            ammonia=reader.flag(),
        )
    elif msg_type == LogEventMsg.msg_type:
        msg = LogEventMsg(t_ms=reader.u64(), seq=reader.u32(), event=reader.text(), payload=reader.text())
    elif msg_type == Ack.msg_type:
        msg = Ack(seq=reader.u32())
    elif msg_type == CmdStart.msg_type:
        msg = CmdStart(mission=reader.text())
    elif msg_type == CmdAbort.msg_type:
        msg = CmdAbort(reason=reader.text())
    else:
        raise UnknownMessageType(f"message type {msg_type:#04x}")
    reader.done()
    return msg


# Frames ----------------------------------------------------------------------


def encode(msg: Message) -> bytes:
    payload = encode_payload(msg)
    if len(payload) > MAX_PAYLOAD:
        raise PayloadTooLarge(f"payload of {len(payload)} bytes exceeds {MAX_PAYLOAD}")
    body = HEADER.pack(MAGIC, VERSION, msg.msg_type, len(payload)) + payload
    return body + CRC.pack(crc32(body))


def decode(data: bytes) -> tuple[Message, int]:
    """Decode the frame at the start of ``data``; returns the message and bytes consumed.

    Raises ``IncompleteFrame`` when ``data`` is a valid but short prefix.
    """
    data = bytes(data)
    if data[:2] != MAGIC[: len(data[:2])]:
        raise BadMagic(f"bad magic {data[:2]!r}")
    if len(data) < 3:
        raise IncompleteFrame(HEADER.size - len(data))
    if data[2] != VERSION:
        raise UnsupportedVersion(f"version {data[2]}")
    if len(data) < HEADER.size:
        raise IncompleteFrame(HEADER.size - len(data))
    _, _, msg_type, length = HEADER.unpack_from(data)
    if length > MAX_PAYLOAD:
        raise PayloadTooLarge(f"declared payload of {length} bytes exceeds {MAX_PAYLOAD}")
    total = HEADER.size + length + CRC.size
    if len(data) < total:
        raise IncompleteFrame(total - len(data))
    body = data[: HEADER.size + length]
    (expected,) = CRC.unpack_from(data, HEADER.size + length)
    if crc32(body) != expected:
        raise CrcMismatch(f"crc {crc32(body):#010x} != {expected:#010x}")
    if msg_type not in MESSAGE_TYPES:
        raise UnknownMessageType(f"message type {msg_type:#04x}")
    return decode_payload(msg_type, body[HEADER.size:]), total


class FrameDecoder:
    """Incremental decoder for a byte stream split at arbitrary points.

    Garbage before a frame is skipped up to the next magic. A frame that is
    complete but invalid is dropped whole. Each such loss counts once in
    ``rejected``.
    """

    def __init__(self) -> None:
        self._buffer = bytearray()
        self._resyncing = False
        self.rejected = 0
        self.errors: list[FrameError] = []

    @property
    def buffered(self) -> int:
        return len(self._buffer)

    def _reject(self, exc: FrameError) -> None:
        if not self._resyncing:
            self.rejected += 1
            self.errors.append(exc)
        self._resyncing = True

    def _skip_to_magic(self, start: int) -> None:
        index = self._buffer.find(MAGIC, start)
        if index < 0:
            # a trailing first magic byte may begin the next frame
            keep = 1 if self._buffer.endswith(MAGIC[:1]) else 0
            del self._buffer[: len(self._buffer) - keep]
        else:
            del self._buffer[:index]

    def feed(self, chunk: bytes) -> list[Message]:
        self._buffer.extend(chunk)
        messages: list[Message] = []
        while self._buffer:
            try:
                msg, consumed = decode(self._buffer)
            except IncompleteFrame:
                break
            except (BadMagic, UnsupportedVersion, PayloadTooLarge) as exc:
                self._reject(exc)
                self._skip_to_magic(1)
                continue
            except FrameError as exc:
                # a framed loss counts even mid-resync
                self._resyncing = False
                self._reject(exc)
                _, _, _, length = HEADER.unpack_from(self._buffer)
                del self._buffer[: HEADER.size + length + CRC.size]
                self._resyncing = False
                continue
            del self._buffer[:consumed]
            self._resyncing = False
            messages.append(msg)
        return messages
