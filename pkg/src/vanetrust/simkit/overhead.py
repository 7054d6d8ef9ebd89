"""Closed-form communication, storage, and verification-time model.

With n issued certificates and m currently revoked keys:

* packet size      S = 100 + 32*log2(n) + (32+8)*log2(m) bytes
  (certificate, one 32-byte hash per presence level, one hash plus an 8-byte
  revocation time per absence level)
* receive traffic  Tran = 100*(i-j) + S*j bytes/s for i packets/s of which
  j/s come from senders whose key is new to the receiver (known keys only
  need the 100-byte certificate)
* header storage   80 bytes * 6 blocks/hour * 24 * 365 per chain per year
* verification     T = t1 * (log2(n) + log2(m)) ms with t1 = 0.01 ms per
  hash-path step

All logs are real-valued. The model's 100-byte certificate is an idealized
size; the wire certificate this package actually ships is larger (see
AuthPacket.size_breakdown for measured composition).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

MODEL_CERT_BYTES = 100
HASH_BYTES = 32
REV_TIME_BYTES = 8
HEADER_BYTES = 80
BLOCKS_PER_HOUR = 6
T1_MS = 0.01

YEARLY_HEADER_BYTES = HEADER_BYTES * BLOCKS_PER_HOUR * 24 * 365  # 4,204,800


@dataclass(frozen=True)
class OverheadReport:
    n: int
    m: int
    i: float
    j: float
    packet_bytes: float
    tran_bytes_per_s: float
    tran_mbit_per_s: float
    yearly_header_bytes: int
    auth_time_ms: float

    def lines(self) -> list[str]:
        return [
            f"certificates issued (n)     {self.n}",
            f"keys revoked (m)            {self.m}",
            f"packets/s received (i)      {self.i:g}",
            f"new-key packets/s (j)       {self.j:g}",
            f"auth packet size S          {self.packet_bytes:.2f} B",
            f"receive traffic Tran        {self.tran_bytes_per_s:.2f} B/s"
            f" = {self.tran_mbit_per_s:.6f} Mbit/s",
            f"yearly header storage       {self.yearly_header_bytes} B"
            f" ({self.yearly_header_bytes / 1e6:.1f} MB)",
            f"verification time T         {self.auth_time_ms:.6f} ms",
        ]


def packet_size_bytes(n: int, m: int) -> float:
    """Model size of one authentication packet."""
    if n < 1 or m < 1:
        raise ValueError("n and m must be at least 1")
    return (MODEL_CERT_BYTES + HASH_BYTES * math.log2(n)
            + (HASH_BYTES + REV_TIME_BYTES) * math.log2(m))


def auth_time_ms(n: int, m: int, t1_ms: float = T1_MS) -> float:
    """Analytic verification time: t1 per level of either proof path."""
    if n < 1 or m < 1:
        raise ValueError("n and m must be at least 1")
    return t1_ms * (math.log2(n) + math.log2(m))


def calc_overhead(n: int, m: int, i: float, j: float) -> OverheadReport:
    """Evaluate the whole model; raises ValueError outside its domain."""
    if n < 1 or m < 1:
        raise ValueError("n and m must be at least 1")
    if j < 0 or i < j:
        raise ValueError("need i >= j >= 0")
    s = packet_size_bytes(n, m)
    tran = MODEL_CERT_BYTES * (i - j) + s * j
    return OverheadReport(
        n=n,
        m=m,
        i=i,
        j=j,
        packet_bytes=s,
        tran_bytes_per_s=tran,
        tran_mbit_per_s=tran * 8 / 1e6,
        yearly_header_bytes=YEARLY_HEADER_BYTES,
        auth_time_ms=auth_time_ms(n, m),
    )
