"""
Client sessions. A session speaks the wire protocol either to a proxy or,
for NoEnc, directly to a coordinator node using PLAIN_QUERY.
"""

from typing import Callable, Optional, Protocol

from ..core import BackendError, QueryResult, SchemaDef
from ..net import FrameChannel, Opcode, Tap, decode_response, encode_create_schema, encode_query


class Session(Protocol):
    def create_schema(self, schema: SchemaDef) -> QueryResult: ...

    def query(self, text: str) -> QueryResult: ...

    def close(self) -> None: ...


class _WireSession:
    """Encodes requests and decodes responses; subclasses move the bytes."""

    def __init__(self, plain: bool = False):
        self.query_opcode = Opcode.PLAIN_QUERY if plain else Opcode.QUERY

    def _request(self, payload: bytes) -> bytes:
        raise NotImplementedError

    def create_schema(self, schema: SchemaDef) -> QueryResult:
        return decode_response(self._request(encode_create_schema(schema.table, schema.columns)))

    def query(self, text: str) -> QueryResult:
        return decode_response(self._request(encode_query(text, self.query_opcode)))

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()


class LocalSession(_WireSession):
    """In-process session: payloads go straight to a handler such as SecureProxy.handle_payload."""

    def __init__(self, handler: Callable[[bytes], bytes], plain: bool = False, tap: Optional[Tap] = None):
        super().__init__(plain)
        self.handler = handler
        self.tap = tap

    def _request(self, payload: bytes) -> bytes:
        if self.tap:
            self.tap("send", payload)
        response = self.handler(payload)
        if self.tap:
            self.tap("recv", response)
        return response


class TcpSession(_WireSession):
    """Session over one TCP connection; requests are strictly sequential."""

    def __init__(self, host: str, port: int, plain: bool = False, tap: Optional[Tap] = None):
        super().__init__(plain)
        self.channel = FrameChannel.connect(host, port, tap=tap)

    def _request(self, payload: bytes) -> bytes:
        try:
            return self.channel.request(payload)
        except (OSError, ConnectionError) as e:
            raise BackendError(f"Connection lost: {e}") from e

    def close(self) -> None:
        self.channel.close()
