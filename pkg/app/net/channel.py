"""
Framed TCP transport: a blocking client channel, a small connection pool and
a threaded server base shared by proxy and node servers.
"""

import logging
import queue
import socket
import socketserver
import threading
from typing import Callable, Optional, Tuple

from ..core import BackendError, ErrorCode, ProtocolError
from .wire import MAX_FRAME_BYTES, encode_error, frame, frame_length

logger = logging.getLogger(__name__)

# Called with ("send" | "recv", payload) for every frame a channel moves.
Tap = Callable[[str, bytes], None]


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        chunk = sock.recv(min(remaining, 1 << 16))
        if not chunk:
            raise ConnectionError("Peer closed the connection")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


class FrameChannel:
    """One blocking, framed connection. Not thread-safe; pool it instead."""

    def __init__(self, sock: socket.socket, tap: Optional[Tap] = None):
        self.sock = sock
        self.tap = tap

    @classmethod
    def connect(cls, host: str, port: int, timeout: float = 30.0, tap: Optional[Tap] = None) -> "FrameChannel":
        sock = socket.create_connection((host, port), timeout=timeout)
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        return cls(sock, tap)

    def send(self, payload: bytes) -> None:
        if self.tap:
            self.tap("send", payload)
        self.sock.sendall(frame(payload))

    def recv(self) -> bytes:
        length = frame_length(_recv_exact(self.sock, 4))
        if length > MAX_FRAME_BYTES:
            raise ProtocolError(f"Frame of {length} bytes exceeds limit")
        payload = _recv_exact(self.sock, length)
        if self.tap:
            self.tap("recv", payload)
        return payload

    def request(self, payload: bytes) -> bytes:
        self.send(payload)
        return self.recv()

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


class ChannelPool:
    """Reusable channels to one endpoint; a broken channel is discarded."""

    def __init__(self, host: str, port: int, tap: Optional[Tap] = None, timeout: float = 30.0):
        self.host = host
        self.port = port
        self.tap = tap
        self.timeout = timeout
        self._idle: "queue.LifoQueue[FrameChannel]" = queue.LifoQueue()
        self._closed = False

    def request(self, payload: bytes) -> bytes:
        if self._closed:
            raise BackendError(f"Pool for {self.host}:{self.port} is closed")
        try:
            channel = self._idle.get_nowait()
        except queue.Empty:
            try:
                channel = FrameChannel.connect(self.host, self.port, self.timeout, self.tap)
            except OSError as e:
                raise BackendError(f"Cannot reach {self.host}:{self.port}: {e}") from e
        try:
            response = channel.request(payload)
        except (OSError, ConnectionError, ProtocolError) as e:
            channel.close()
            raise BackendError(f"Request to {self.host}:{self.port} failed: {e}") from e
        self._idle.put(channel)
        return response

    def close(self) -> None:
        self._closed = True
        while True:
            try:
                self._idle.get_nowait().close()
            except queue.Empty:
                return


class FramedRequestHandler(socketserver.StreamRequestHandler):
    """Reads frames until the peer disconnects; one response per request."""

    def write_response(self, payload: bytes) -> None:
        self.wfile.write(frame(payload))
        self.wfile.flush()

    def handle(self):
        while True:
            header = self.rfile.read(4)
            if len(header) < 4:
                return
            length = frame_length(header)
            if length > MAX_FRAME_BYTES:
                logger.warning(f"[{self.server.tag}] Oversized frame ({length} bytes) from {self.client_address}, closing")
                self.write_response(encode_error(ErrorCode.PARSE, f"Frame of {length} bytes exceeds limit"))
                return
            if length == 0:
                self.write_response(encode_error(ErrorCode.PARSE, "Empty frame"))
                continue
            payload = self.rfile.read(length)
            if len(payload) < length:
                return
            self.write_response(self.server.process_payload(payload))


class FramedServer(socketserver.ThreadingMixIn, socketserver.TCPServer):
    """Threaded TCP server dispatching each payload to `handler`."""

    daemon_threads = True
    allow_reuse_address = True
    tag = "SERVER"

    def __init__(self, host: str, port: int, handler: Callable[[bytes], bytes]):
        super().__init__((host, port), FramedRequestHandler, bind_and_activate=True)
        self.handler = handler
        self._thread: Optional[threading.Thread] = None

    @property
    def endpoint(self) -> Tuple[str, int]:
        host, port = self.server_address[:2]
        return host, port

    def process_payload(self, payload: bytes) -> bytes:
        try:
            return self.handler(payload)
        except ProtocolError as e:
            return encode_error(ErrorCode.PARSE, str(e))
        except Exception as e:
            logger.exception(f"[{self.tag}] Unhandled error while serving a request")
            return encode_error(ErrorCode.BACKEND, f"Internal error: {type(e).__name__}")

    def start(self) -> "FramedServer":
        """Serve on a daemon thread."""
        self._thread = threading.Thread(target=self.serve_forever, name=f"{self.tag.lower()}-{self.endpoint[1]}", daemon=True)
        self._thread.start()
        logger.info(f"[{self.tag}] Listening on {self.endpoint[0]}:{self.endpoint[1]}")
        return self

    def stop(self) -> None:
        if self._thread is not None:
            self.shutdown()
            self._thread.join(timeout=5)
            self._thread = None
        self.server_close()
        logger.info(f"[{self.tag}] Stopped")
