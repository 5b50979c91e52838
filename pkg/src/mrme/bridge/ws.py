"""Minimal RFC 6455 WebSocket server endpoint (text frames only).

Just enough of the protocol for a browser client to join a session:
the upgrade handshake, masked client text frames, unmasked server text
frames, ping/pong, and close. No extensions, no fragmentation, no
permessage-deflate. Exists because no websocket package is available;
the TCP length-prefix framing remains the canonical wire.
"""

from __future__ import annotations

import asyncio
import base64
import hashlib
import struct

_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_CONT = 0x0
OP_TEXT = 0x1
OP_BINARY = 0x2
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA


class WebSocketError(Exception):
    pass


def accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + _GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


async def handshake(
    reader: asyncio.StreamReader, writer: asyncio.StreamWriter, first_line: bytes
) -> None:
    """Complete the HTTP upgrade; ``first_line`` was already consumed."""
    headers: dict[str, str] = {}
    while True:
        line = await reader.readline()
        if line in (b"\r\n", b"\n", b""):
            break
        name, _, value = line.decode("latin-1").partition(":")
        headers[name.strip().lower()] = value.strip()
    key = headers.get("sec-websocket-key")
    if not key or "websocket" not in headers.get("upgrade", "").lower():
        writer.write(b"HTTP/1.1 400 Bad Request\r\n\r\n")
        await writer.drain()
        raise WebSocketError("not a websocket upgrade request")
    response = (
        "HTTP/1.1 101 Switching Protocols\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Accept: {accept_key(key)}\r\n"
        "\r\n"
    )
    writer.write(response.encode("latin-1"))
    await writer.drain()


def encode_text_frame(text: str) -> bytes:
    payload = text.encode("utf-8")
    length = len(payload)
    if length < 126:
        header = struct.pack("!BB", 0x80 | OP_TEXT, length)
    elif length < 1 << 16:
        header = struct.pack("!BBH", 0x80 | OP_TEXT, 126, length)
    else:
        header = struct.pack("!BBQ", 0x80 | OP_TEXT, 127, length)
    return header + payload


def encode_close_frame(code: int = 1000) -> bytes:
    return struct.pack("!BBH", 0x80 | OP_CLOSE, 2, code)


async def read_text(reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> str | None:
    """Next text message from the client; None once the peer closes."""
    while True:
        try:
            head = await reader.readexactly(2)
        except (asyncio.IncompleteReadError, ConnectionResetError):
            return None
        fin = head[0] & 0x80
        opcode = head[0] & 0x0F
        masked = head[1] & 0x80
        length = head[1] & 0x7F
        if length == 126:
            (length,) = struct.unpack("!H", await reader.readexactly(2))
        elif length == 127:
            (length,) = struct.unpack("!Q", await reader.readexactly(8))
        if length > 1_000_000:
            raise WebSocketError(f"frame of {length} bytes exceeds cap")
        mask = await reader.readexactly(4) if masked else b""
        payload = await reader.readexactly(length)
        if masked:
            payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))

        if opcode == OP_TEXT:
            if not fin:
                raise WebSocketError("fragmented messages are not supported")
            return payload.decode("utf-8")
        if opcode == OP_PING:
            writer.write(struct.pack("!BB", 0x80 | OP_PONG, len(payload)) + payload)
            await writer.drain()
            continue
        if opcode == OP_PONG:
            continue
        if opcode == OP_CLOSE:
            writer.write(encode_close_frame())
            try:
                await writer.drain()
            except (ConnectionResetError, BrokenPipeError):
                pass
            return None
        raise WebSocketError(f"unsupported opcode {opcode:#x}")
