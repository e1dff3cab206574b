"""Text descriptors for segmentation masks.

Grids and masks are nested lists of ints, row-major. Label tables are
dicts mapping id to name; id 0 reads as "others" when left out.
"""

from ._textmask import (
    ConfigError,
    Error,
    IoError,
    ParseError,
    ValidationError,
    bits_from_bricks,
    bricks_from_bits,
    bsd_response,
    compare_encodings,
    count_tokens,
    decode_isd,
    downsample,
    encode_bsd,
    encode_isd,
    evaluate,
    iou,
    isd_response,
    parse_response,
    run_cli,
    tokenize,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "Error",
    "IoError",
    "ParseError",
    "ValidationError",
    "bits_from_bricks",
    "bricks_from_bits",
    "bsd_response",
    "compare_encodings",
    "count_tokens",
    "decode_isd",
    "downsample",
    "encode_bsd",
    "encode_isd",
    "evaluate",
    "iou",
    "isd_response",
    "parse_response",
    "run_cli",
    "tokenize",
]
