"""Rover side of the telemetry link.

The mission engine never blocks on the network: records go into an
unbounded queue drained by a sender thread, in log order. A reader thread
collects acknowledgements and ground commands.
"""
from __future__ import annotations

import logging
import queue
import socket
import threading

from rover.logbook import LogRecord
from rover.types import AssayKind, LifeClass

from .wire import (
    Ack,
    AssayResultMsg,
    CmdAbort,
    CmdStart,
    FrameDecoder,
    LifeVerdictMsg,
    LogEventMsg,
    Message,
    SensorFrameMsg,
    encode,
)

logger = logging.getLogger(__name__)

_STOP = object()


def _flag(value: str | None) -> bool:
    return value == "true"


def _reading(value: str | None) -> float | None:
    if value is None or value == "none":
        return None
    return float(value)


def record_to_messages(record: LogRecord) -> list[Message]:
    """Every record travels as a log event; results also travel as typed messages."""
    payload = " ".join(f"{k}={v}" for k, v in record.fields)
    messages: list[Message] = [LogEventMsg(t_ms=record.t_ms, seq=record.seq, event=record.event, payload=payload)]
    if record.event == "FRAME":
        r, g, b = (int(c) for c in record["rgb"].split(","))
        messages.append(
            SensorFrameMsg(
                t_ms=record.t_ms,
                rgb=(r, g, b),
                alcohol=_flag(record.get("alcohol")),
                co2_ppm=_reading(record.get("co2")),
                formaldehyde_ppm=_reading(record.get("hcho")),
                humidity_pct=float(record["humidity"]),
                ammonia_ppm=_reading(record.get("nh3")),
                soil_moisture_pct=float(record["moisture"]),
                ph=_reading(record.get("ph")),
            )
        )
    elif record.event == "ASSAY":
        messages.append(
            AssayResultMsg(
                t_ms=record.t_ms,
                target=record["target"],
                kind=AssayKind(record["kind"]),
                detected=_flag(record.get("detected")),
                bin_index=int(record["bin"]),
                elapsed_ms=int(record["elapsed"]),
                contaminated=_flag(record.get("contaminated")),
            )
        )
    elif record.event == "VERDICT":
        messages.append(
            LifeVerdictMsg(
                t_ms=record.t_ms,
                target=record["target"],
                verdict=LifeClass(record["verdict"]),
                contaminated=_flag(record.get("contaminated")),
                protein=_flag(record.get("protein")),
                carbohydrate=_flag(record.get("carbohydrate")),
                ammonia=_flag(record.get("ammonia")),
            )
        )
    return messages


class TelemetryLink:
    def __init__(self, host: str, port: int, connect_timeout_s: float = 5.0) -> None:
        self.host = host
        self.port = port
        self.connect_timeout_s = connect_timeout_s
        self.sent = 0
        self.acked = 0
        self.mission: str | None = None
        self._queue: queue.Queue = queue.Queue()
        self._sock: socket.socket | None = None
        self._sender: threading.Thread | None = None
        self._reader: threading.Thread | None = None
        self._started = threading.Event()
        self._abort = threading.Event()
        self._abort_reason: str | None = None
        self._ack_lock = threading.Condition()

    def start(self) -> None:
        """Connect and wait briefly for the station's start command; raises ``OSError`` on connect failure."""
        self._sock = socket.create_connection((self.host, self.port), timeout=self.connect_timeout_s)
        self._sock.settimeout(None)
        self._sender = threading.Thread(target=self._send_loop, name="telemetry-sender", daemon=True)
        self._reader = threading.Thread(target=self._read_loop, name="telemetry-reader", daemon=True)
        self._sender.start()
        self._reader.start()
        if not self._started.wait(self.connect_timeout_s):
            logger.warning("no start command from %s:%d; sending anyway", self.host, self.port)

    # engine-facing hooks

    def on_record(self, record: LogRecord) -> None:
        for msg in record_to_messages(record):
            self._queue.put(msg)

    def send(self, msg: Message) -> None:
        self._queue.put(msg)

    def abort_reason(self) -> str | None:
        return self._abort_reason if self._abort.is_set() else None

    # threads

    def _send_loop(self) -> None:
        assert self._sock is not None
        while True:
            item = self._queue.get()
            if item is _STOP:
                return
            try:
                self._sock.sendall(encode(item))
                self.sent += 1
            except OSError as exc:
                logger.error("telemetry send failed: %s", exc)
                return

    def _read_loop(self) -> None:
        assert self._sock is not None
        decoder = FrameDecoder()
        while True:
            try:
                chunk = self._sock.recv(4096)
            except OSError:
                break
            if not chunk:
                break
            for msg in decoder.feed(chunk):
                if isinstance(msg, Ack):
                    with self._ack_lock:
                        self.acked += 1
                        self._ack_lock.notify_all()
                elif isinstance(msg, CmdAbort):
                    logger.warning("abort command from ground station: %s", msg.reason)
                    self._abort_reason = msg.reason
                    self._abort.set()
                elif isinstance(msg, CmdStart):
                    logger.info("ground station opened mission %s", msg.mission)
                    self.mission = msg.mission
                    self._started.set()
        self._started.set()
        with self._ack_lock:
            self._ack_lock.notify_all()

    def close(self, timeout_s: float = 5.0) -> None:
        """Flush the queue, wait for outstanding acknowledgements, then disconnect."""
        if self._sock is None:
            return
        self._queue.put(_STOP)
        if self._sender is not None:
            self._sender.join(timeout_s)
        with self._ack_lock:
            self._ack_lock.wait_for(lambda: self.acked >= self.sent or not self._reader.is_alive(), timeout_s)
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()
        if self._reader is not None:
            self._reader.join(timeout_s)
        if self.acked < self.sent:
            logger.warning("%d of %d frames unacknowledged at close", self.sent - self.acked, self.sent)
        self._sock = None
