"""Ground station: accepts rover connections, stores frames, acknowledges them, forwards aborts."""
from __future__ import annotations

import asyncio
import itertools
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from models import ConnectionStatus, StationStatus
from rover.logbook import LogRecord, format_record, format_value

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

STATUS_NAME = "status.json"
ABORT_NAME = "ABORT"
ABORT_SENT_NAME = "ABORT.sent"
READ_CHUNK = 4096


def utc_now() -> str:
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()


def _token(text: str) -> str:
    return "_".join(text.split()) or "-"


def message_to_record(msg: Message, seq: int, last_t_ms: int) -> LogRecord:
    """Store line for one received message, in mission-log record format."""
    if isinstance(msg, LogEventMsg):
        fields = []
        for token in msg.payload.split():
            key, _, value = token.partition("=")
            fields.append((key, value or "-"))
        return LogRecord(t_ms=msg.t_ms, seq=seq, event=_token(msg.event), fields=tuple(fields))
    if isinstance(msg, SensorFrameMsg):
        values = {
            "rgb": msg.rgb,
            "alcohol": msg.alcohol,
            "co2": msg.co2_ppm,
            "hcho": msg.formaldehyde_ppm,
            "humidity": msg.humidity_pct,
            "nh3": msg.ammonia_ppm,
            "moisture": msg.soil_moisture_pct,
            "ph": msg.ph,
        }
        event, t_ms = "SENSOR_FRAME", msg.t_ms
    elif isinstance(msg, AssayResultMsg):
        values = {
            "target": _token(msg.target),
            "kind": msg.kind.value,
            "detected": msg.detected,
            "bin": msg.bin_index,
            "elapsed": msg.elapsed_ms,
            "contaminated": msg.contaminated,
        }
        event, t_ms = "ASSAY_RESULT", msg.t_ms
    elif isinstance(msg, LifeVerdictMsg):
        values = {
            "target": _token(msg.target),
            "verdict": msg.verdict.value,
            "contaminated": msg.contaminated,
            "protein": msg.protein,
            "carbohydrate": msg.carbohydrate,
            "ammonia": msg.ammonia,
        }
        event, t_ms = "LIFE_VERDICT", msg.t_ms
    elif isinstance(msg, Ack):
        values, event, t_ms = {"ack": msg.seq}, "ACK", last_t_ms
    elif isinstance(msg, CmdStart):
        values, event, t_ms = {"mission": _token(msg.mission)}, "CMD_START", last_t_ms
    else:
        values, event, t_ms = {"reason": _token(msg.reason)}, "CMD_ABORT", last_t_ms
    fields = tuple((key, format_value(value)) for key, value in values.items())
    return LogRecord(t_ms=t_ms, seq=seq, event=event, fields=fields)


@dataclass
class _Connection:
    status: ConnectionStatus
    writer: asyncio.StreamWriter
    store: Path
    decoder: FrameDecoder = field(default_factory=FrameDecoder)
    last_t_ms: int = 0
    send_lock: asyncio.Lock = field(default_factory=asyncio.Lock)


class GroundStation:
    def __init__(self, host: str, port: int, store_dir: str | Path, abort_poll_s: float = 0.2) -> None:
        self.host = host
        self.port = port
        self.store_dir = Path(store_dir)
        self.abort_poll_s = abort_poll_s
        self.started_at = utc_now()
        self.accepted_total = 0
        self.rejected_total = 0
        self.aborts_sent = 0
        self._ids = itertools.count(1)
        self._connections: dict[int, _Connection] = {}
        self._closed: list[ConnectionStatus] = []
        self._server: asyncio.AbstractServer | None = None
        self._abort_task: asyncio.Task | None = None

    @property
    def bound_port(self) -> int:
        if self._server is None or not self._server.sockets:
            return self.port
        return self._server.sockets[0].getsockname()[1]

    async def start(self) -> None:
        """Bind the listener; raises ``OSError`` when the endpoint is unavailable."""
        self.store_dir.mkdir(parents=True, exist_ok=True)
        self._server = await asyncio.start_server(self._handle, self.host, self.port)
        self._abort_task = asyncio.create_task(self._watch_abort_file())
        self._write_status()
        logger.info("ground station listening on %s:%d, store %s", self.host, self.bound_port, self.store_dir)

    async def serve_forever(self) -> None:
        if self._server is None:
            await self.start()
        assert self._server is not None
        async with self._server:
            await self._server.serve_forever()

    async def stop(self) -> None:
        if self._abort_task is not None:
            self._abort_task.cancel()
            try:
                await self._abort_task
            except asyncio.CancelledError:
                pass
        for connection in list(self._connections.values()):
            connection.writer.close()
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
        self._write_status()
        logger.info("ground station stopped")

    # status and operator commands

    def status(self) -> StationStatus:
        return StationStatus(
            listen=f"{self.host}:{self.bound_port}",
            started_at=self.started_at,
            updated_at=utc_now(),
            accepted_total=self.accepted_total,
            rejected_total=self.rejected_total,
            aborts_sent=self.aborts_sent,
            connections=[*self._closed, *(c.status for c in self._connections.values())],
        )

    def _write_status(self) -> None:
        path = self.store_dir / STATUS_NAME
        try:
            path.write_text(json.dumps(self.status().model_dump(mode="json"), indent=2) + "\n", encoding="utf-8")
        except OSError as exc:
            logger.warning("could not write %s: %s", path, exc)

    def _take_abort(self) -> str | None:
        path = self.store_dir / ABORT_NAME
        if not path.exists():
            return None
        try:
            reason = path.read_text(encoding="utf-8").strip() or "operator"
            path.replace(self.store_dir / ABORT_SENT_NAME)
        except OSError as exc:
            logger.warning("could not consume abort file: %s", exc)
            return None
        return reason

    async def _send(self, connection: _Connection, msg: Message) -> None:
        async with connection.send_lock:
            connection.writer.write(encode(msg))
            await connection.writer.drain()

    async def _forward_abort(self, reason: str) -> None:
        logger.warning("forwarding abort (%s) to %d rover(s)", reason, len(self._connections))
        for connection in list(self._connections.values()):
            try:
                await self._send(connection, CmdAbort(reason=reason))
                self.aborts_sent += 1
            except (ConnectionError, OSError) as exc:
                logger.warning("abort to connection %d failed: %s", connection.status.connection_id, exc)
        self._write_status()

    async def _watch_abort_file(self) -> None:
        while True:
            await asyncio.sleep(self.abort_poll_s)
            if not self._connections:
                continue
            reason = self._take_abort()
            if reason is not None:
                await self._forward_abort(reason)

    # connections

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        connection_id = next(self._ids)
        store = self.store_dir / f"rover-{connection_id:04d}.log"
        peer = writer.get_extra_info("peername")
        connection = _Connection(
            status=ConnectionStatus(
                connection_id=connection_id,
                peer=f"{peer[0]}:{peer[1]}" if peer else "unknown",
                store_file=store.name,
            ),
            writer=writer,
            store=store,
        )
        self._connections[connection_id] = connection
        logger.info("rover connected from %s as %s", connection.status.peer, store.name)
        try:
            store.touch()
            self._write_status()
            pending = self._take_abort()
            if pending is not None:
                await self._send(connection, CmdAbort(reason=pending))
                self.aborts_sent += 1
            await self._send(connection, CmdStart(mission=store.stem))
            await self._pump(reader, connection)
        except OSError as exc:
            logger.error("connection %d dropped: %s", connection_id, exc)
        finally:
            connection.status.open = False
            self._connections.pop(connection_id, None)
            self._closed.append(connection.status)
            writer.close()
            self._write_status()
            logger.info(
                "connection %d closed: %d accepted, %d rejected",
                connection_id,
                connection.status.accepted,
                connection.status.rejected,
            )

    async def _pump(self, reader: asyncio.StreamReader, connection: _Connection) -> None:
        status = connection.status
        with connection.store.open("a", encoding="utf-8") as store:
            while True:
                chunk = await reader.read(READ_CHUNK)
                if not chunk:
                    return
                messages = connection.decoder.feed(chunk)
                newly_rejected = connection.decoder.rejected - status.rejected
                if newly_rejected:
                    logger.warning("connection %d rejected %d frame(s)", status.connection_id, newly_rejected)
                    status.rejected = connection.decoder.rejected
                    self.rejected_total += newly_rejected
                for msg in messages:
                    seq = status.accepted
                    record = message_to_record(msg, seq, connection.last_t_ms)
                    connection.last_t_ms = max(connection.last_t_ms, record.t_ms)
                    store.write(format_record(record) + "\n")
                    store.flush()
                    status.accepted += 1
                    status.last_ack = seq
                    self.accepted_total += 1
                    await self._send(connection, Ack(seq=seq))
                if messages or newly_rejected:
                    self._write_status()


async def serve(host: str, port: int, store_dir: str | Path, stop: asyncio.Event | None = None) -> None:
    station = GroundStation(host, port, store_dir)
    await station.start()
    try:
        if stop is None:
            await asyncio.Event().wait()
        else:
            await stop.wait()
    finally:
        await station.stop()
