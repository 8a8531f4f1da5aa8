"""WebSocket session service: one live engine per connection.

Two clocking modes. In lockstep every activation_input message advances the
engine exactly one tick, which makes automated sessions fast and replayable
byte for byte. In realtime a server loop paces ticks at the configured rate
from the most recent activation (held when input stalls, with a stall flag
on ticks), which is what a human-facing UI wants. Timing authority is
always the server's tick counter; wall clocks never reach the log.
"""

from __future__ import annotations

import asyncio
import json
import time
from pathlib import Path

import websockets

from .config import SessionConfig
from .errors import EngineError, InvalidConfig, ProtocolViolation
from .session import SessionEngine
from .storage import SessionLogWriter
from .wire import PROTOCOL_VERSION, validate_client

ACTIVE_STATES = ("training", "calibrating", "task")
STALL_AFTER_S = 1.0
HEARTBEAT_S = 1.0


class _Connection:
    def __init__(self, ws, out_dir: Path):
        self.ws = ws
        self.out_dir = out_dir
        self.engine: SessionEngine | None = None
        self.log: SessionLogWriter | None = None
        self.clock = "lockstep"
        self.last_a = 0.0
        self.last_input = time.monotonic()
        self.realtime_task: asyncio.Task | None = None

    async def send(self, msg: dict):
        await self.ws.send(json.dumps(msg, separators=(",", ":")))

    async def send_all(self, msgs):
        for m in msgs:
            await self.send(m)

    def close_session(self, abort: bool):
        if self.realtime_task is not None:
            self.realtime_task.cancel()
            self.realtime_task = None
        if self.engine is not None and abort and \
                self.engine.state not in ("done", "aborted"):
            self.engine.abort()
        if self.log is not None:
            self.log.close()
            self.log = None


class SessionService:
    """Hosts independent sessions, one per websocket connection."""

    def __init__(self, host: str = "127.0.0.1", port: int = 8765, out_dir=None):
        self.host = host
        self.port = port
        self.out_dir = Path(out_dir) if out_dir else Path("sessions")
        self._server = None
        self._session_counter = 0

    async def __aenter__(self):
        self._server = await websockets.serve(self._handle, self.host, self.port)
        return self

    async def __aexit__(self, *exc):
        self._server.close()
        await self._server.wait_closed()

    @property
    def bound_port(self) -> int:
        return self._server.sockets[0].getsockname()[1]

    async def serve_forever(self):
        async with self:
            await asyncio.Future()

    async def _handle(self, ws):
        conn = _Connection(ws, self.out_dir)
        heartbeat = asyncio.create_task(self._heartbeat(conn))
        try:
            async for raw in ws:
                try:
                    msg = validate_client(json.loads(raw))
                except (json.JSONDecodeError, ProtocolViolation) as e:
                    await conn.send({"type": "error", "error": "ProtocolViolation",
                                     "message": str(e)})
                    continue
                try:
                    await self._dispatch(conn, msg)
                except InvalidConfig as e:
                    await conn.send({"type": "error", "error": "InvalidConfig",
                                     "message": str(e)})
                except ProtocolViolation as e:
                    # out-of-order command: abort the session and drop the client
                    await conn.send({"type": "error", "error": "ProtocolViolation",
                                     "message": str(e)})
                    conn.close_session(abort=True)
                    break
                except EngineError as e:
                    await conn.send({"type": "error",
                                     "error": type(e).__name__, "message": str(e)})
        finally:
            heartbeat.cancel()
            conn.close_session(abort=True)

    async def _heartbeat(self, conn: _Connection):
        seq = 0
        try:
            while True:
                await asyncio.sleep(HEARTBEAT_S)
                await conn.send({"type": "heartbeat", "seq": seq})
                seq += 1
        except (asyncio.CancelledError, websockets.ConnectionClosed):
            pass

    async def _dispatch(self, conn: _Connection, msg: dict):
        mtype = msg["type"]
        if mtype == "hello":
            if msg["protocol_version"] != PROTOCOL_VERSION:
                await conn.send({"type": "error", "error": "VersionMismatch",
                                 "message": f"server speaks protocol {PROTOCOL_VERSION}"})
                return
            await conn.send({"type": "session_state", "state": "idle",
                             "protocol_version": PROTOCOL_VERSION})
            return
        if mtype == "configure_session":
            if conn.engine is not None:
                raise ProtocolViolation("session already configured")
            config = SessionConfig.from_dict(msg["config"])
            conn.clock = msg.get("clock", "lockstep")
            self._session_counter += 1
            self.out_dir.mkdir(parents=True, exist_ok=True)
            log_path = self.out_dir / f"{config.session_id}-{self._session_counter}.jsonl"
            conn.log = SessionLogWriter(log_path)
            conn.engine = SessionEngine(config, log=conn.log)
            if conn.clock == "realtime":
                conn.realtime_task = asyncio.create_task(self._realtime_loop(conn))
            await conn.send({"type": "session_state", "state": "configured",
                             "log_path": str(log_path),
                             "motions": list(config.motions),
                             "tick_rate_hz": config.tick_rate_hz,
                             "clock": conn.clock})
            return
        if conn.engine is None:
            raise ProtocolViolation(f"{mtype} before configure_session")
        engine = conn.engine
        if mtype == "start_training":
            await conn.send_all(engine.start_training())
        elif mtype == "select_motion":
            await conn.send_all(engine.select_motion(msg["motion"]))
        elif mtype == "start_calibration":
            await conn.send_all(engine.start_calibration())
        elif mtype == "start_task":
            await conn.send_all(engine.start_task())
        elif mtype == "finish_study":
            completion, pooled = engine.finish_study()
            await conn.send({"type": "study_summary",
                             "blocks": [b["motion"] for b in engine.completed],
                             "completion_rate": completion,
                             "fitts": pooled.to_dict() if pooled else None})
        elif mtype == "activation_input":
            conn.last_a = float(msg["a"])
            conn.last_input = time.monotonic()
            if conn.clock == "lockstep":
                tick, events = engine.step(conn.last_a)
                tick = dict(tick, stalled=False)
                await conn.send(tick)
                await conn.send_all(events)
        elif mtype == "abort":
            await conn.send_all(engine.abort())
            if conn.log is not None:
                conn.log.flush()

    async def _realtime_loop(self, conn: _Connection):
        dt = 1.0 / conn.engine.config.tick_rate_hz
        loop = asyncio.get_running_loop()
        try:
            while conn.engine.state not in ("done", "aborted"):
                start = loop.time()
                if conn.engine.state in ACTIVE_STATES:
                    stalled = (time.monotonic() - conn.last_input) > STALL_AFTER_S
                    tick, events = conn.engine.step(conn.last_a)
                    tick = dict(tick, stalled=stalled)
                    await conn.send(tick)
                    await conn.send_all(events)
                await asyncio.sleep(max(0.0, dt - (loop.time() - start)))
        except (asyncio.CancelledError, websockets.ConnectionClosed):
            pass


def serve(host: str, port: int, out_dir) -> None:
    """Blocking entry point used by the CLI."""
    async def _run():
        service = SessionService(host=host, port=port, out_dir=out_dir)
        async with service:
            print(f"session service listening on ws://{host}:{service.bound_port}",
                  flush=True)
            await asyncio.Future()
    try:
        asyncio.run(_run())
    except KeyboardInterrupt:
        pass
