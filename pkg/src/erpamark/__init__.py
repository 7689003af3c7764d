"""Learned error correction for patch-wise image watermarking."""
from erpamark.bits import BitVector
from erpamark.codec import PaintingScheme, oracle_decode, paint
from erpamark.dcss import DcssSequence, is_dcss, search_dcss, search_maximal_dcss
from erpamark.kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BitVector",
    "DcssSequence",
    "PaintingScheme",
    "is_dcss",
    "oracle_decode",
    "paint",
    "search_dcss",
    "search_maximal_dcss",
]
