"""Wire codec and framed TCP transport."""
from .wire import (
    MAX_FRAME_BYTES,
    Opcode,
    Reader,
    RowRequest,
    decode_create_schema,
    decode_error,
    decode_query,
    decode_response,
    decode_row_request,
    decode_rows,
    encode_create_schema,
    encode_error,
    encode_ok,
    encode_query,
    encode_result,
    encode_row_delete,
    encode_row_get,
    encode_row_put,
    encode_rows,
    frame,
    frame_length,
    split_payload,
)
from .channel import ChannelPool, FrameChannel, FramedServer, Tap

__all__ = [
    "MAX_FRAME_BYTES",
    "Opcode",
    "Reader",
    "RowRequest",
    "decode_create_schema",
    "decode_error",
    "decode_query",
    "decode_response",
    "decode_row_request",
    "decode_rows",
    "encode_create_schema",
    "encode_error",
    "encode_ok",
    "encode_query",
    "encode_result",
    "encode_row_delete",
    "encode_row_get",
    "encode_row_put",
    "encode_rows",
    "frame",
    "frame_length",
    "split_payload",
    "ChannelPool",
    "FrameChannel",
    "FramedServer",
    "Tap",
]
