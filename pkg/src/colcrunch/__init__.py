"""colcrunch: a disk-based columnar engine with compressed pages.

Column files hold compressed pages; the buffer manager's I/O threads
decompress them at the disk boundary so workers only ever see
decompressed ValBlocks. A positional executor evaluates star-schema
queries over join indexes, and a benchmark harness measures the
codecs against each other.
"""

__version__ = "0.1.0"

from .codec import (  # noqa: F401
    CodecId,
    CodecError,
    DecodeError,
    compress_values,
    decompress_values,
    compressed_size_bound,
    codec_from_name,
    codec_name,
)
