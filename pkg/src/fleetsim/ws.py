"""Minimal WebSocket (RFC 6455) support for the browser bridge.

Implements just what the daemon needs: the HTTP upgrade handshake, text
message framing with client-to-server masking, ping/pong, and clean close.
No extensions, no subprotocols.  A small asyncio client is included for
tests and tooling.
"""

from __future__ import annotations

import asyncio
import base64
import hashlib
import os
import struct
from typing import AsyncIterator, Optional

ACCEPT_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"
MAX_HEADER = 16384
MAX_MESSAGE = 24 * 1024 * 1024  # above the 16 MiB envelope cap, with slack

OP_CONT = 0x0
OP_TEXT = 0x1
OP_BINARY = 0x2
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA


class HandshakeError(Exception):
    """The HTTP upgrade request or response was not acceptable."""


class FrameError(Exception):
    """A WebSocket frame violated the protocol."""


def accept_key(key: str) -> str:
    digest = hashlib.sha1((key + ACCEPT_GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def _mask_bytes(data: bytes, key: bytes) -> bytes:
    if not data:
        return b""
    n = len(data)
    repeated = (key * (n // 4 + 1))[:n]
    value = int.from_bytes(data, "big") ^ int.from_bytes(repeated, "big")
    return value.to_bytes(n, "big")


def _frame(opcode: int, payload: bytes, mask: bool) -> bytes:
    head = bytearray([0x80 | opcode])
    n = len(payload)
    mask_bit = 0x80 if mask else 0
    if n < 126:
        head.append(mask_bit | n)
    elif n < 65536:
        head.append(mask_bit | 126)
        head += struct.pack(">H", n)
    else:
        head.append(mask_bit | 127)
        head += struct.pack(">Q", n)
    if mask:
        key = os.urandom(4)
        return bytes(head) + key + _mask_bytes(payload, key)
    return bytes(head) + payload


def text_frame(text, mask: bool = False) -> bytes:
    """Build a text frame from str or UTF-8 bytes."""
    data = text if isinstance(text, bytes) else text.encode("utf-8")
    return _frame(OP_TEXT, data, mask)


def close_frame(code: int = 1000, mask: bool = False) -> bytes:
    return _frame(OP_CLOSE, struct.pack(">H", code), mask)


async def _read_frame(reader: asyncio.StreamReader,
                      require_mask: bool) -> tuple[int, bool, bytes]:
    head = await reader.readexactly(2)
    fin = bool(head[0] & 0x80)
    if head[0] & 0x70:
        raise FrameError("reserved bits set without a negotiated extension")
    opcode = head[0] & 0x0F
    masked = bool(head[1] & 0x80)
    length = head[1] & 0x7F
    if length == 126:
        length = struct.unpack(">H", await reader.readexactly(2))[0]
    elif length == 127:
        length = struct.unpack(">Q", await reader.readexactly(8))[0]
    if length > MAX_MESSAGE:
        raise FrameError("frame of %d bytes exceeds limit" % length)
    if require_mask and not masked:
        raise FrameError("client frames must be masked")
    key = await reader.readexactly(4) if masked else b""
    payload = await reader.readexactly(length) if length else b""
    if masked:
        payload = _mask_bytes(payload, key)
    return opcode, fin, payload


async def _read_message(reader: asyncio.StreamReader,
                        writer: asyncio.StreamWriter,
                        require_mask: bool,
                        mask_replies: bool) -> Optional[str]:
    """Next complete text message, handling control frames inline.

    Returns None once the peer sends close (after echoing it).
    """
    buffer = bytearray()
    assembling = False
    while True:
        opcode, fin, payload = await _read_frame(reader, require_mask)
        if opcode == OP_PING:
            writer.write(_frame(OP_PONG, payload, mask_replies))
            await writer.drain()
            continue
        if opcode == OP_PONG:
            continue
        if opcode == OP_CLOSE:
            try:
                writer.write(_frame(OP_CLOSE, payload[:2], mask_replies))
                await writer.drain()
            except (ConnectionError, OSError):
                pass
            return None
        if opcode in (OP_TEXT, OP_BINARY):
            if assembling:
                raise FrameError("new message before previous finished")
            assembling = True
        elif opcode == OP_CONT:
            if not assembling:
                raise FrameError("continuation frame without a start")
        else:
            raise FrameError("unsupported opcode %d" % opcode)
        buffer += payload
        if len(buffer) > MAX_MESSAGE:
            raise FrameError("message exceeds %d bytes" % MAX_MESSAGE)
        if fin:
            try:
                return bytes(buffer).decode("utf-8")
            except UnicodeDecodeError as exc:
                raise FrameError("message is not valid UTF-8") from exc


async def iter_messages(reader: asyncio.StreamReader,
                        writer: asyncio.StreamWriter) -> AsyncIterator[str]:
    """Yield text messages from a client until it closes."""
    while True:
        message = await _read_message(reader, writer, require_mask=True,
                                      mask_replies=False)
        if message is None:
            return
        yield message


async def server_handshake(reader: asyncio.StreamReader,
                           writer: asyncio.StreamWriter) -> str:
    """Answer an HTTP upgrade; returns the request path."""
    raw = await reader.readuntil(b"\r\n\r\n")
    if len(raw) > MAX_HEADER:
        raise HandshakeError("oversized upgrade request")
    lines = raw.decode("latin-1").split("\r\n")
    parts = lines[0].split(" ")
    if len(parts) != 3 or parts[0] != "GET":
        raise HandshakeError("expected a GET upgrade request")
    path = parts[1]
    headers = {}
    for line in lines[1:]:
        if not line:
            continue
        name, sep, value = line.partition(":")
        if not sep:
            raise HandshakeError("malformed header line %r" % line)
        headers[name.strip().lower()] = value.strip()
    if "websocket" not in headers.get("upgrade", "").lower():
        raise HandshakeError("missing Upgrade: websocket")
    key = headers.get("sec-websocket-key")
    if not key:
        raise HandshakeError("missing Sec-WebSocket-Key")
    response = (
        "HTTP/1.1 101 Switching Protocols\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        "Sec-WebSocket-Accept: %s\r\n"
        "\r\n" % accept_key(key)
    )
    writer.write(response.encode("latin-1"))
    await writer.drain()
    return path


class WsClient:
    """Plain asyncio WebSocket client for tests and tooling."""

    def __init__(self, reader: asyncio.StreamReader,
                 writer: asyncio.StreamWriter):
        self.reader = reader
        self.writer = writer

    @classmethod
    async def connect(cls, host: str, port: int,
                      path: str = "/") -> "WsClient":
        reader, writer = await asyncio.open_connection(host, port)
        key = base64.b64encode(os.urandom(16)).decode("ascii")
        request = (
            "GET %s HTTP/1.1\r\n"
            "Host: %s:%d\r\n"
            "Upgrade: websocket\r\n"
            "Connection: Upgrade\r\n"
            "Sec-WebSocket-Key: %s\r\n"
            "Sec-WebSocket-Version: 13\r\n"
            "\r\n" % (path, host, port, key)
        )
        writer.write(request.encode("latin-1"))
        await writer.drain()
        raw = await reader.readuntil(b"\r\n\r\n")
        status = raw.split(b"\r\n", 1)[0]
        if b"101" not in status:
            writer.close()
            raise HandshakeError("upgrade refused: %r" % status)
        expected = accept_key(key).encode("latin-1")
        if expected not in raw:
            writer.close()
            raise HandshakeError("Sec-WebSocket-Accept mismatch")
        return cls(reader, writer)

    async def send_text(self, text: str) -> None:
        self.writer.write(text_frame(text, mask=True))
        await self.writer.drain()

    async def recv(self) -> Optional[str]:
        """Next text message, or None when the server closes."""
        return await _read_message(self.reader, self.writer,
                                   require_mask=False, mask_replies=True)

    async def close(self) -> None:
        try:
            self.writer.write(close_frame(mask=True))
            await self.writer.drain()
        except (ConnectionError, OSError):
            pass
        self.writer.close()
        try:
            await self.writer.wait_closed()
        except (ConnectionError, OSError):
            pass
