"""Bridge server: one live training session per connection.

A client connects (raw TCP with length-prefix framing, or a WebSocket
upgrade on the same port), sends a join message with session parameters,
and receives a hello followed by one frame per tick. Inputs carry the
tick at which they apply; the server queues them until that boundary, so
a scripted client produces bit-reproducible sessions. Frame fan-out never
blocks the tick loop: a slow client loses frames oldest-first, while
control messages (hello, episode_end, error, bye) are never dropped.
"""

from __future__ import annotations

import asyncio
import heapq
import itertools
import json
import logging
import time
from collections import deque
from pathlib import Path

from ..envs import RENDER_SCHEMA_VERSION
from ..serialize import save_stack
from ..session import ControlOwner, Session, SessionConfig
from . import ws
from .protocol import (
    FramingError,
    InputCommand,
    ProtocolError,
    encode_frame,
    error_message,
    hello_message,
    parse_message,
    provenance_json,
    read_frame,
    validate_input,
    validate_join,
)

log = logging.getLogger(__name__)

DEFAULT_FRAME_BUFFER = 1024
_FAST_TICK_RATE = 500.0  # at or above this, pace only by yielding


class _Transport:
    """Send/receive JSON objects over one of the two wire encodings."""

    def __init__(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter,
                 websocket: bool) -> None:
        self.reader = reader
        self.writer = writer
        self.websocket = websocket

    async def recv(self) -> dict | None:
        if self.websocket:
            text = await ws.read_text(self.reader, self.writer)
            return None if text is None else parse_message(text)
        return await read_frame(self.reader)

    def send(self, obj: dict) -> None:
        if self.websocket:
            self.writer.write(ws.encode_text_frame(json.dumps(obj, separators=(",", ":"))))
        else:
            self.writer.write(encode_frame(obj))

    async def drain(self) -> None:
        await self.writer.drain()

    def close(self) -> None:
        try:
            if self.websocket:
                self.writer.write(ws.encode_close_frame())
            self.writer.close()
        except (ConnectionResetError, BrokenPipeError):
            pass


def session_config_from_params(params: dict) -> tuple[SessionConfig, int | None]:
    """The exact SessionConfig a join produces (shared with in-process twins)."""
    schedule = {
        params["baseline_episodes"] + i: ControlOwner.TEACHER
        for i in range(params["teacher_episodes"])
    }
    config = SessionConfig(
        env_id=params["env"],
        n=params["n"],
        k=params["k"],
        min_match_level=params["min_match_level"],
        baseline_episodes=params["baseline_episodes"],
        seed=params["seed"],
        tick_rate=params["tick_rate"] or 30.0,
        schedule=schedule or None,
        ingest_on_release=params["ingest_on_release"],
        max_steps=params["max_steps"],
    )
    return config, params["episodes"]


class BridgeServer:
    """Hosts sessions at a bind address; one session per connection."""

    def __init__(
        self,
        host: str = "127.0.0.1",
        port: int = 0,
        default_tick_rate: float = 30.0,
        model_dir: str | Path | None = None,
        frame_buffer: int = DEFAULT_FRAME_BUFFER,
    ) -> None:
        self.host = host
        self.port = port
        self.default_tick_rate = default_tick_rate
        self.model_dir = Path(model_dir) if model_dir else Path.cwd()
        self.frame_buffer = frame_buffer
        self._server: asyncio.base_events.Server | None = None
        self._conn_ids = itertools.count(1)

    async def start(self) -> tuple[str, int]:
        self._server = await asyncio.start_server(self._handle_conn, self.host, self.port)
        sock = self._server.sockets[0].getsockname()
        self.host, self.port = sock[0], sock[1]
        log.info("bridge listening on %s:%d", self.host, self.port)
        return self.host, self.port

    async def serve_forever(self) -> None:
        if self._server is None:
            await self.start()
        async with self._server:
            await self._server.serve_forever()

    async def stop(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()

    # ------------------------------------------------------------- connection

    async def _handle_conn(self, reader: asyncio.StreamReader,
                           writer: asyncio.StreamWriter) -> None:
        conn_id = next(self._conn_ids)
        transport: _Transport | None = None
        try:
            first = await reader.readline()
            if not first:
                writer.close()
                return
            if first.startswith(b"GET "):
                await ws.handshake(reader, writer, first)
                transport = _Transport(reader, writer, websocket=True)
            else:
                transport = _Transport(reader, writer, websocket=False)
                # the sniffed line is the first frame's length prefix
                text = first.strip()
                if not text.isdigit():
                    raise FramingError(f"expected a length prefix, got {first[:32]!r}")
                payload = await reader.readexactly(int(text))
                await self._run_session(conn_id, transport, parse_message(payload))
                return
            join_obj = await transport.recv()
            if join_obj is None:
                return
            await self._run_session(conn_id, transport, join_obj)
        except (FramingError, ws.WebSocketError, ProtocolError) as exc:
            log.warning("conn %d: %s", conn_id, exc)
            if transport is not None:
                try:
                    transport.send(error_message(str(exc)))
                    await transport.drain()
                except (ConnectionResetError, BrokenPipeError):
                    pass
        except (ConnectionResetError, BrokenPipeError, asyncio.IncompleteReadError):
            pass
        finally:
            if transport is not None:
                transport.close()
            else:
                writer.close()

    async def _run_session(self, conn_id: int, transport: _Transport,
                           first_message: dict) -> None:
        # The first message must be a valid join; invalid joins get an error
        # frame and another chance on the same connection.
        session: Session | None = None
        message: dict | None = first_message
        while session is None:
            try:
                if message is None:
                    return
                if message.get("type") != "join":
                    raise ProtocolError("first message must be a join")
                params = validate_join(message)
                if params["tick_rate"] is None:
                    params["tick_rate"] = self.default_tick_rate
                config, episode_budget = session_config_from_params(params)
                session = Session(config)
            except (ProtocolError, ValueError) as exc:
                transport.send(error_message(str(exc)))
                await transport.drain()
                message = await transport.recv()

        transport.send(
            hello_message(
                session.env.spec.to_json(),
                {
                    "env": session.config.env_id,
                    "seed": session.config.seed,
                    "n": session.config.n,
                    "k": session.config.k,
                    "min_match_level": session.stack.min_match_level,
                    "baseline_episodes": session.config.baseline_episodes,
                    "teacher_episodes": len(session.config.schedule or {}),
                    "tick_rate": session.config.tick_rate,
                    "episodes": episode_budget,
                    "ingest_on_release": session.config.ingest_on_release,
                    "max_steps": session.env.spec.max_steps,
                },
                RENDER_SCHEMA_VERSION,
            )
        )
        await transport.drain()

        frames: deque[dict] = deque()
        control: deque[dict] = deque()
        send_ready = asyncio.Event()
        dropped = 0

        def push_frame(obj: dict) -> None:
            nonlocal dropped
            frames.append(obj)
            while len(frames) > self.frame_buffer:
                frames.popleft()  # oldest first, never block the session
                dropped += 1
            send_ready.set()

        def push_control(obj: dict) -> None:
            control.append(obj)
            send_ready.set()

        stop = asyncio.Event()
        scheduled: list[tuple[int, int, InputCommand]] = []
        seq = itertools.count()
        save_requests: deque[int | None] = deque()
        # A join may carry a pre-validated input script; preloading it here
        # (before the first tick) makes scripted sessions bit-reproducible
        # regardless of network timing.
        for command in params.get("script", ()):
            if command.kind == "save_model":
                save_requests.append(command.tick)
            else:
                tick = command.tick if command.tick is not None else 0
                heapq.heappush(scheduled, (tick, next(seq), command))

        async def reader_task() -> None:
            while not stop.is_set():
                try:
                    obj = await transport.recv()
                except (FramingError, ws.WebSocketError) as exc:
                    push_control(error_message(f"framing: {exc}"))
                    stop.set()
                    return
                except ProtocolError as exc:
                    push_control(error_message(str(exc)))
                    continue
                if obj is None:
                    stop.set()
                    return
                if obj.get("type") != "input":
                    push_control(error_message("expected an input message"))
                    continue
                try:
                    command = validate_input(obj)
                except ProtocolError as exc:
                    push_control(error_message(str(exc)))
                    continue
                if command.kind == "save_model":
                    save_requests.append(command.tick)
                else:
                    tick = command.tick if command.tick is not None else session.tick_count + 1
                    heapq.heappush(scheduled, (tick, next(seq), command))

        async def writer_task() -> None:
            while True:
                await send_ready.wait()
                send_ready.clear()
                try:
                    while control:
                        transport.send(control.popleft())
                    while frames:
                        transport.send(frames.popleft())
                    await transport.drain()
                except (ConnectionResetError, BrokenPipeError):
                    stop.set()
                    return
                if stop.is_set() and not control and not frames:
                    return

        async def session_task() -> None:
            tick_rate = session.config.tick_rate
            period = 1.0 / tick_rate
            next_deadline = time.monotonic() + period
            episodes_done = 0
            session.begin_episode()
            while not stop.is_set():
                now_tick = session.tick_count
                while scheduled and scheduled[0][0] <= now_tick:
                    _, _, command = heapq.heappop(scheduled)
                    self._apply_input(session, command)
                while save_requests:
                    save_requests.popleft()
                    path = self.model_dir / f"session-{conn_id}.mrme"
                    save_stack(session.stack, path)
                    push_control({"type": "model_saved", "path": str(path)})
                snapshot = session.tick()
                if snapshot.stepped:
                    push_frame(self._frame_json(session, snapshot))
                if snapshot.done:
                    metrics = session.finish_episode()
                    episodes_done += 1
                    push_control(
                        {
                            "type": "episode_end",
                            "episode": metrics.index,
                            "metrics": {
                                "reward": metrics.reward,
                                "solved": metrics.solved,
                                "terminal": metrics.terminal.value,
                                "competence": metrics.competence,
                                "demo_steps": metrics.demo_steps,
                                "good_actions": metrics.good_actions,
                                "bad_actions": metrics.bad_actions,
                                "steps": metrics.steps,
                            },
                        }
                    )
                    if episode_budget is not None and episodes_done >= episode_budget:
                        push_control({"type": "bye", "episodes": episodes_done,
                                      "frames_dropped": dropped})
                        stop.set()
                        break
                    session.begin_episode()
                # Pacing: honor the tick rate, but at test rates just yield.
                tick_rate = session.config.tick_rate
                if tick_rate >= _FAST_TICK_RATE:
                    if session.tick_count % 64 == 0:
                        await asyncio.sleep(0)
                    continue
                period = 1.0 / tick_rate
                delay = next_deadline - time.monotonic()
                next_deadline += period
                if delay > 0:
                    await asyncio.sleep(delay)
                else:
                    await asyncio.sleep(0)
                    if delay < -1.0:  # fell far behind; resynchronize
                        next_deadline = time.monotonic() + period

        tasks = [
            asyncio.create_task(reader_task()),
            asyncio.create_task(session_task()),
        ]
        writer = asyncio.create_task(writer_task())
        try:
            await asyncio.wait(tasks, return_when=asyncio.FIRST_COMPLETED)
            stop.set()
            for task in tasks:
                task.cancel()
            send_ready.set()
            await asyncio.wait_for(writer, timeout=5.0)
        except (asyncio.TimeoutError, ConnectionResetError, BrokenPipeError):
            writer.cancel()
        finally:
            stop.set()
            for task in (*tasks, writer):
                task.cancel()

    @staticmethod
    def _apply_input(session: Session, command: InputCommand) -> None:
        if command.kind == "takeover_on":
            session.submit(("takeover", True))
        elif command.kind == "takeover_off":
            session.submit(("takeover", False))
        elif command.kind == "key":
            # Ownership gating happens in the session: a key only acts on
            # human-owned ticks, so keys sent while the policy owns are
            # inert (and cleared by the next takeover).
            if not session.takeover_active:
                log.info("key input while policy owns the tick; held but inert")
            session.submit(("key", (command.action,)))
        elif command.kind == "reset":
            session.submit(("reset",))
        elif command.kind == "set_config":
            session.submit(("set_config", command.config))

    @staticmethod
    def _frame_json(session: Session, snapshot) -> dict:
        return {
            "type": "frame",
            "tick": snapshot.tick,
            "episode": snapshot.episode,
            "t": snapshot.t,
            "owner": snapshot.owner.value,
            "action": list(snapshot.action),
            "reward": snapshot.reward,
            "reward_so_far": snapshot.reward_so_far,
            "competence_so_far": snapshot.competence_so_far,
            "last_decision": provenance_json(snapshot.decision),
            "obs": list(session._obs),
            "render": session.env.render(),
            "done": snapshot.done,
            "terminal": snapshot.terminal.value if snapshot.terminal else None,
        }
