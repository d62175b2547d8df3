"""Stream server: ingest lane, analysis lane, and WebSocket broadcast.

``AnalysisPipeline`` is the synchronous core: it turns ingest lines into
store updates, runs the engine tick on every sealed slice, and hands
finished frame envelopes to subscribers. ``StreamServer`` wraps it with
the process lanes: an asyncio TCP listener (or file/stdin reader) feeds
lines to a dedicated analysis thread through a queue; control messages
from WebSocket clients travel the same queue so settings apply between
ticks; finished frames hop back onto the event loop for fan-out.

Wire protocol (JSON text messages):
  server -> client  {"type": "snapshot"|"frame"|"ack"|"error", "payload": ...}
  client -> server  {"type": "set", "key": str, "value": ...}
                    {"type": "pause"} | {"type": "resume"}
                    {"type": "select", "entities": [int, ...]}
"""

from __future__ import annotations

import asyncio
import json
import logging
import queue
import threading
import time
from dataclasses import dataclass, field

from websockets.asyncio.server import serve as ws_serve

from .engine import AnalysisEngine, SessionState, SettingError
from .generator import parse_line
from .tensor_store import IngestError, TensorStore

logger = logging.getLogger(__name__)

__all__ = ["AnalysisPipeline", "StreamServer"]


@dataclass
class PipelineStats:
    lines: int = 0
    malformed: int = 0
    rejected: int = 0
    before_preamble: int = 0
    frames: int = 0


class AnalysisPipeline:
    """Synchronous ingest-to-frame core shared by the server and tests."""

    def __init__(
        self,
        session: SessionState | None = None,
        seed: int = 0,
        window_capacity: int = 64,
        clock=time.monotonic,
    ):
        self.session = session or SessionState()
        self.seed = seed
        self.window_capacity = window_capacity
        self.clock = clock
        self.store: TensorStore | None = None
        self.engine: AnalysisEngine | None = None
        self.stats = PipelineStats()
        self._subscribers: list = []
        self._last_emitted_t: int | None = None

    def subscribe(self, callback) -> None:
        """``callback(envelope_dict)`` for every outbound message."""
        self._subscribers.append(callback)

    def _emit(self, kind: str, payload) -> None:
        envelope = {"type": kind, "payload": payload}
        for cb in self._subscribers:
            cb(envelope)

    # ------------------------------------------------------------- ingest

    def ingest_line(self, line: str) -> None:
        record = parse_line(line)
        if record is None:
            self.stats.malformed += 1
            return
        self.stats.lines += 1
        if "metrics" in record:
            self._handle_preamble(record)
            return
        if self.engine is None:
            self.stats.before_preamble += 1
            return
        try:
            if "v" in record:
                self.store.ingest_record(
                    int(record["t"]), int(record["e"]), record["v"], now=self.clock()
                )
            elif "w" in record:
                self.store.ingest_comm(
                    int(record["t"]), int(record["s"]), int(record["d"]), float(record["w"])
                )
            else:
                self.stats.malformed += 1
        except (IngestError, KeyError, TypeError, ValueError) as exc:
            logger.warning("rejected record: %s", exc)
            self.stats.rejected += 1

    def _handle_preamble(self, record: dict) -> None:
        if self.engine is not None:
            if record.get("n") != self.store.n or record.get("metrics") != self.store.metric_names:
                logger.warning("conflicting preamble ignored")
                self.stats.rejected += 1
            return
        try:
            self.store = TensorStore(
                n=int(record["n"]),
                metric_names=list(record["metrics"]),
                hierarchy=record.get("hierarchy"),
                window_capacity=self.window_capacity,
            )
        except (KeyError, TypeError, ValueError) as exc:
            logger.error("bad preamble: %s", exc)
            self.stats.rejected += 1
            return
        self.engine = AnalysisEngine(self.store, session=self.session, seed=self.seed)
        self.store.subscribe(self._on_seal)

    def poll(self, now: float | None = None) -> None:
        """Give the store a chance to seal stalled slices."""
        if self.store is not None:
            self.store.check_timeouts(self.clock() if now is None else now)

    def _on_seal(self, t: int) -> None:
        frame = self.engine.tick(t)
        self.stats.frames += 1
        if not self.session.paused:
            self._last_emitted_t = frame.t
            self._emit("frame", frame.payload)

    # ------------------------------------------------------------ control

    def control(self, message: dict) -> dict:
        """Apply one client control message; returns the reply envelope."""
        if not isinstance(message, dict) or "type" not in message:
            return {"type": "error", "payload": {"message": "malformed control message"}}
        kind = message["type"]
        try:
            if kind == "pause":
                self.session.paused = True
                return {"type": "ack", "payload": {"paused": True}}
            if kind == "resume":
                self.session.paused = False
                reply = {"type": "ack", "payload": {"paused": False}}
                latest = self.engine.latest_frame if self.engine else None
                if latest is not None and (
                    self._last_emitted_t is None or latest.t > self._last_emitted_t
                ):
                    self._last_emitted_t = latest.t
                    self._emit("frame", latest.payload)
                return reply
            if kind == "set":
                if self.engine is None:
                    return {"type": "error", "payload": {"message": "no stream yet"}}
                key = message.get("key")
                self.engine.apply_setting(key, message.get("value"))
                if key in ("base_time", "aggregation_level"):
                    # comm views update immediately, even while paused
                    self._emit("snapshot", self.engine.snapshot_payload())
                return {"type": "ack", "payload": {"key": key}}
            if kind == "select":
                if self.engine is None:
                    return {"type": "error", "payload": {"message": "no stream yet"}}
                self.engine.select_entities(message.get("entities") or [])
                return {
                    "type": "ack",
                    "payload": {"selection": list(self.session.selection)},
                }
            return {"type": "error", "payload": {"message": f"unknown message type {kind!r}"}}
        except (SettingError, ValueError) as exc:
            return {"type": "error", "payload": {"message": str(exc)}}

    def snapshot_envelope(self) -> dict:
        payload = self.engine.snapshot_payload() if self.engine else {"session": self.session.to_payload(), "frame": None}
        return {"type": "snapshot", "payload": payload}


class StreamServer:
    """Asyncio front: WebSocket fan-out plus a TCP/file/stdin ingest lane."""

    def __init__(
        self,
        pipeline: AnalysisPipeline,
        host: str = "127.0.0.1",
        port: int = 8765,
        ingest_port: int | None = 9009,
        ingest_file: str | None = None,
        poll_interval: float = 0.25,
    ):
        self.pipeline = pipeline
        self.host = host
        self.port = port
        self.ingest_port = ingest_port
        self.ingest_file = ingest_file
        self.poll_interval = poll_interval
        self.clients: set = set()
        self._queue: queue.Queue = queue.Queue(maxsize=200_000)
        self._loop: asyncio.AbstractEventLoop | None = None
        self._ws_server = None
        self._ingest_server = None
        self._worker: threading.Thread | None = None
        self._tasks: list[asyncio.Task] = []
        self._stopping = threading.Event()
        pipeline.subscribe(self._on_envelope)

    # --------------------------------------------------------- lifecycle

    async def start(self) -> None:
        self._loop = asyncio.get_running_loop()
        self._worker = threading.Thread(target=self._analysis_loop, daemon=True, name="analysis")
        self._worker.start()
        self._ws_server = await ws_serve(self._ws_handler, self.host, self.port)
        self.port = self._ws_server.sockets[0].getsockname()[1]
        if self.ingest_port is not None:
            self._ingest_server = await asyncio.start_server(
                self._ingest_handler, self.host, self.ingest_port
            )
            self.ingest_port = self._ingest_server.sockets[0].getsockname()[1]
        if self.ingest_file:
            self._tasks.append(asyncio.create_task(self._feed_file(self.ingest_file)))
        self._tasks.append(asyncio.create_task(self._poll_loop()))
        logger.info("serving ws on %s:%d", self.host, self.port)

    async def stop(self) -> None:
        self._stopping.set()
        self._queue.put(None)
        for task in self._tasks:
            task.cancel()
        if self._ws_server is not None:
            self._ws_server.close()
            await self._ws_server.wait_closed()
        if self._ingest_server is not None:
            self._ingest_server.close()
            await self._ingest_server.wait_closed()
        if self._worker is not None:
            self._worker.join(timeout=5.0)

    # ------------------------------------------------------ analysis lane

    def _analysis_loop(self) -> None:
        while not self._stopping.is_set():
            item = self._queue.get()
            if item is None:
                break
            kind, body, future = item
            try:
                if kind == "line":
                    self.pipeline.ingest_line(body)
                elif kind == "poll":
                    self.pipeline.poll()
                elif kind == "control":
                    if body.get("type") == "__snapshot__":
                        reply = self.pipeline.snapshot_envelope()
                    else:
                        reply = self.pipeline.control(body)
                    self._resolve(future, reply)
            except Exception:
                logger.exception("analysis lane failure")
                if future is not None:
                    self._resolve(
                        future,
                        {"type": "error", "payload": {"message": "internal error"}},
                    )

    def _resolve(self, future, value) -> None:
        if future is not None and self._loop is not None:
            self._loop.call_soon_threadsafe(
                lambda: future.set_result(value) if not future.done() else None
            )

    def submit_line(self, line: str) -> bool:
        try:
            self._queue.put_nowait(("line", line, None))
            return True
        except queue.Full:
            return False

    async def submit_control(self, message: dict) -> dict:
        future = self._loop.create_future()
        self._queue.put(("control", message, future))
        return await future

    # ----------------------------------------------------- broadcast lane

    def _on_envelope(self, envelope: dict) -> None:
        # called on the analysis thread; serialize once, fan out on the loop
        try:
            data = json.dumps(envelope, separators=(",", ":"), allow_nan=False)
        except ValueError:
            logger.exception("frame dropped: not serializable")
            return
        if self._loop is not None and not self._stopping.is_set():
            self._loop.call_soon_threadsafe(self._broadcast, data)

    def _broadcast(self, data: str) -> None:
        for client in list(self.clients):
            asyncio.ensure_future(self._send_one(client, data))

    async def _send_one(self, client, data: str) -> None:
        try:
            await client.send(data)
        except Exception:
            self.clients.discard(client)

    async def _ws_handler(self, connection) -> None:
        snapshot_future = self._loop.create_future()
        self._queue.put(("control", {"type": "__snapshot__"}, snapshot_future))
        # snapshot must reflect the analysis lane's state; route it through
        # the queue so it orders after any in-flight ticks
        try:
            snapshot = await snapshot_future
        except Exception:
            snapshot = {"type": "snapshot", "payload": {"session": {}, "frame": None}}
        try:
            await connection.send(json.dumps(snapshot, separators=(",", ":"), allow_nan=False))
        except Exception:
            return
        self.clients.add(connection)
        try:
            async for raw in connection:
                try:
                    message = json.loads(raw)
                except json.JSONDecodeError:
                    await connection.send(
                        json.dumps(
                            {"type": "error", "payload": {"message": "malformed JSON"}},
                            separators=(",", ":"),
                        )
                    )
                    continue
                reply = await self.submit_control(message)
                await connection.send(json.dumps(reply, separators=(",", ":"), allow_nan=False))
        except Exception:
            pass
        finally:
            self.clients.discard(connection)

    # -------------------------------------------------------- ingest lane

    async def _ingest_handler(self, reader: asyncio.StreamReader, writer) -> None:
        try:
            while True:
                raw = await reader.readline()
                if not raw:
                    break
                if not self.submit_line(raw.decode("utf-8", errors="replace")):
                    logger.warning("ingest queue full; dropping line")
        finally:
            writer.close()

    async def _feed_file(self, path: str) -> None:
        if path == "-":
            loop = asyncio.get_running_loop()
            reader = asyncio.StreamReader()
            protocol = asyncio.StreamReaderProtocol(reader)
            import sys

            await loop.connect_read_pipe(lambda: protocol, sys.stdin)
            while True:
                raw = await reader.readline()
                if not raw:
                    break
                self.submit_line(raw.decode("utf-8", errors="replace"))
        else:
            with open(path, "r", encoding="utf-8") as handle:
                for line in handle:
                    self.submit_line(line)
                    await asyncio.sleep(0)

    async def _poll_loop(self) -> None:
        while True:
            await asyncio.sleep(self.poll_interval)
            self._queue.put(("poll", None, None))
