from __future__ import annotations

import asyncio
import json
import tempfile
import unittest
from pathlib import Path

from rover import read_log
from telemetry import Ack, CmdAbort, CmdStart, FrameDecoder, GroundStation, LogEventMsg, SensorFrameMsg, encode
from telemetry.station import ABORT_NAME, ABORT_SENT_NAME, STATUS_NAME, message_to_record


async def receive(reader: asyncio.StreamReader, decoder: FrameDecoder, count: int, timeout_s: float = 5.0) -> list:
    messages: list = []

    async def collect() -> None:
        while len(messages) < count:
            chunk = await reader.read(4096)
            if not chunk:
                return
            messages.extend(decoder.feed(chunk))

    await asyncio.wait_for(collect(), timeout_s)
    return messages


async def eventually(predicate, timeout_s: float = 5.0) -> None:
    deadline = asyncio.get_running_loop().time() + timeout_s
    while not predicate():
        if asyncio.get_running_loop().time() > deadline:
            raise AssertionError("condition not reached in time")
        await asyncio.sleep(0.01)


class GroundStationTests(unittest.IsolatedAsyncioTestCase):
    async def asyncSetUp(self) -> None:
        self._tmp = tempfile.TemporaryDirectory()
        self.store = Path(self._tmp.name)
        self.station = GroundStation("127.0.0.1", 0, self.store, abort_poll_s=0.05)
        await self.station.start()

    async def asyncTearDown(self) -> None:
        await self.station.stop()
        self._tmp.cleanup()

    def _status(self) -> dict:
        return json.loads((self.store / STATUS_NAME).read_text(encoding="utf-8"))

    async def _connect(self):
        reader, writer = await asyncio.open_connection("127.0.0.1", self.station.bound_port)
        decoder = FrameDecoder()
        return reader, writer, decoder

    async def test_every_frame_is_stored_and_acknowledged(self) -> None:
        reader, writer, decoder = await self._connect()
        self.assertEqual([CmdStart(mission="rover-0001")], await receive(reader, decoder, 1))
        for seq in range(10):
            writer.write(encode(LogEventMsg(t_ms=100 * seq, seq=seq, event="STEP", payload=f"step={seq}")))
        await writer.drain()
        acks = await receive(reader, decoder, 10)
        self.assertEqual([Ack(seq=i) for i in range(10)], acks)

        records = read_log(self.store / "rover-0001.log")
        self.assertEqual(list(range(10)), [r.seq for r in records])
        self.assertEqual("STEP", records[3].event)
        self.assertEqual({"step": "3"}, records[3].as_dict())
        self.assertEqual(10, self.station.accepted_total)
        writer.close()
        await writer.wait_closed()

    async def test_corrupt_frame_is_rejected_not_acknowledged(self) -> None:
        reader, writer, decoder = await self._connect()
        await receive(reader, decoder, 1)
        bad = bytearray(encode(LogEventMsg(1, 0, "STEP", "step=1")))
        bad[12] ^= 0x01
        writer.write(bytes(bad) + encode(LogEventMsg(2, 1, "STEP", "step=2")))
        await writer.drain()
        self.assertEqual([Ack(seq=0)], await receive(reader, decoder, 1))
        await eventually(lambda: self._status()["accepted_total"] == 1)
        self.assertEqual(1, self._status()["rejected_total"])
        self.assertEqual(1, self.station.rejected_total)
        writer.close()
        await writer.wait_closed()

    async def test_each_connection_gets_its_own_store_file(self) -> None:
        for expected in ("rover-0001", "rover-0002"):
            reader, writer, decoder = await self._connect()
            self.assertEqual([CmdStart(mission=expected)], await receive(reader, decoder, 1))
            writer.close()
            await writer.wait_closed()
        await eventually(lambda: [c.open for c in self.station.status().connections] == [False, False])
        self.assertTrue((self.store / "rover-0001.log").is_file())
        self.assertTrue((self.store / "rover-0002.log").is_file())
        self.assertFalse(any(c.open for c in self.station.status().connections))

    async def test_pending_abort_is_sent_before_start(self) -> None:
        (self.store / ABORT_NAME).write_text("dust storm\n", encoding="utf-8")
        reader, writer, decoder = await self._connect()
        messages = await receive(reader, decoder, 2)
        self.assertEqual([CmdAbort(reason="dust storm"), CmdStart(mission="rover-0001")], messages)
        self.assertFalse((self.store / ABORT_NAME).exists())
        self.assertTrue((self.store / ABORT_SENT_NAME).exists())
        self.assertEqual(1, self.station.aborts_sent)
        writer.close()
        await writer.wait_closed()

    async def test_abort_dropped_while_connected_is_forwarded(self) -> None:
        reader, writer, decoder = await self._connect()
        await receive(reader, decoder, 1)
        (self.store / ABORT_NAME).write_text("", encoding="utf-8")
        self.assertEqual([CmdAbort(reason="operator")], await receive(reader, decoder, 1))
        writer.close()
        await writer.wait_closed()


class MessageToRecordTests(unittest.TestCase):
    def test_sensor_frame_record(self) -> None:
        msg = SensorFrameMsg(2000, (150, 90, 60), False, 400.0, None, 20.0, 0.0, 12.0, None)
        record = message_to_record(msg, seq=4, last_t_ms=0)
        self.assertEqual(("SENSOR_FRAME", 2000, 4), (record.event, record.t_ms, record.seq))
        self.assertEqual("150,90,60", record["rgb"])
        self.assertEqual("none", record["hcho"])
        self.assertEqual("400.0000", record["co2"])

    def test_untimed_messages_reuse_last_time(self) -> None:
        record = message_to_record(CmdAbort(reason="two words"), seq=0, last_t_ms=77)
        self.assertEqual(77, record.t_ms)
        self.assertEqual("two_words", record["reason"])


if __name__ == "__main__":
    unittest.main()
