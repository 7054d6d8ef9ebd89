"""Authentication timing across ledger scales.

Verification cost should grow with log2(n) + log2(m): each extra doubling of
issued certificates adds one presence step, each doubling of revoked keys one
level to both absence co-paths. bench_auth measures that by building CerBC
at each requested n (bulk synthetic leaves plus a handful of real probe
certificates), a RevBC LexTree with m = fraction*n random keys, and timing
authenticate() on freshly built packets. fit_log then regresses the means
against a + b*(log2 n + log2 m).
"""

from __future__ import annotations

import gc
import math
import struct
import time
from dataclasses import dataclass
from random import Random

import numpy as np

from vanetrust import kernel, protocol
from vanetrust.merkleproofs import LEAF_TAG, AppendTree, LexTree, leaf_digest
from vanetrust.protocol import (
    CertificateAuthority,
    LawEnforcementAuthority,
    Vehicle,
    authenticate,
    encode_message,
    register,
)
from vanetrust.simkit.overhead import auth_time_ms
from vanetrust.sigcrypt import sha256

MAX_BENCH_N = 1 << 24  # leaf buffers beyond this exceed a desk machine's memory
PROBE_VEHICLES = 8
SWEEPS = 5  # timed rotations over all cells


@dataclass(frozen=True)
class BenchRow:
    n: int
    m: int
    trials: int
    measured_ms: float  # smallest per-trial verify time
    predicted_ms: float
    backend: str

    def csv_line(self) -> str:
        return f"{self.n},{self.m},{self.trials},{self.measured_ms!r},{self.predicted_ms!r},{self.backend}"


BENCH_HEADER = "n,m,trials,measured_ms,predicted_ms,backend"


def _build_fixture(n: int, m: int, rng: Random):
    """CerBC tree with n-PROBE_VEHICLES synthetic leaves plus real probe
    certificates at the tail, and a RevBC LexTree of m random revoked keys."""
    lea = LawEnforcementAuthority(sha256(b"bench-lea" + n.to_bytes(8, "big")))
    ca = CertificateAuthority(sha256(b"bench-ca" + n.to_bytes(8, "big")), lea.public_key)

    synthetic = n - PROBE_VEHICLES
    tree = AppendTree()
    if synthetic > 0:
        payloads = [struct.pack(">Q", i) for i in range(synthetic)]
        tree.append_digests(kernel.hash_leaves(payloads, LEAF_TAG))

    vehicles = []
    for k in range(PROBE_VEHICLES):
        vehicle = Vehicle(f"probe-{k}", sha256(b"bench-veh" + bytes([k]) + n.to_bytes(8, "big")))
        cert = register(lea, ca, vehicle.identity, vehicle.public_key, now_ms=0)
        vehicle.adopt_certificate(cert)
        vehicle.cert_index = len(tree)
        # append_digests defers the root; append() would rebuild all levels
        # per probe, which dominates at large n.
        tree.append_digests(leaf_digest(encode_message(cert)))
        vehicles.append(vehicle)

    pairs = []
    seen = set()
    while len(pairs) < m:
        key = rng.getrandbits(256).to_bytes(32, "big")
        if key not in seen:
            seen.add(key)
            pairs.append((key, 0))
    lex = LexTree(pairs)
    return tree, lex, vehicles


def bench_auth(n_values, revoked_fraction: float = 0.1, trials: int = 300) -> list[BenchRow]:
    """Measured vs analytic verification time for each ledger scale."""
    if not 0 < revoked_fraction < 1:
        raise ValueError("revoked_fraction must be in (0, 1)")
    if trials < 1:
        raise ValueError("trials must be positive")
    cells = []
    for n in n_values:
        if n < PROBE_VEHICLES + 1:
            raise ValueError(f"n must be at least {PROBE_VEHICLES + 1}")
        if n > MAX_BENCH_N:
            raise ValueError(
                f"n={n} needs more memory than this harness allows (limit {MAX_BENCH_N})")
        m = max(1, int(n * revoked_fraction))
        rng = Random(n)
        tree, lex, vehicles = _build_fixture(n, m, rng)
        packets = []
        for k in range(trials):
            vehicle = vehicles[k % len(vehicles)]
            packets.append(protocol.build_auth_packet(vehicle, tree, lex))
        cells.append((n, m, tree.root, lex.root, packets))

    # One warm pass over every cell before any timing: the first thousand
    # verifications of a fresh process run with cold caches and a CPU clock
    # still ramping up, which would bias whichever size happens to go first.
    for _, _, cerbc_root, revbc_root, packets in cells:
        for packet in packets:
            if not authenticate(packet, cerbc_root, revbc_root, now_ms=1):
                raise RuntimeError("benchmark fixture fails authentication")

    # Signature checks give a large constant cost and scheduler noise is
    # strictly additive, so the per-trial minimum is the stable estimate of
    # intrinsic verify time; a mean or median drifts with load. Sweeping the
    # cells SWEEPS times in rotation exposes each size to every epoch of any
    # residual clock drift instead of pinning one size to one epoch.
    samples: dict[int, list[float]] = {n: [] for n, *_ in cells}
    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        for _ in range(SWEEPS):
            for n, _, cerbc_root, revbc_root, packets in cells:
                for packet in packets:
                    start = time.perf_counter()
                    ok = authenticate(packet, cerbc_root, revbc_root, now_ms=1)
                    samples[n].append(time.perf_counter() - start)
                    if not ok:
                        raise RuntimeError("benchmark fixture fails authentication")
    finally:
        if gc_was_enabled:
            gc.enable()

    return [
        BenchRow(
            n=n, m=m, trials=trials,
            measured_ms=min(samples[n]) * 1000,
            predicted_ms=auth_time_ms(n, m),
            backend=kernel.backend(),
        )
        for n, m, _, _, _ in cells
    ]


def fit_log(rows) -> tuple[float, float, float]:
    """Least-squares fit measured_ms ~ a + b*(log2 n + log2 m); returns (a, b, r2)."""
    if len(rows) < 2:
        raise ValueError("need at least two scales to fit")
    x = np.array([math.log2(r.n) + math.log2(r.m) for r in rows])
    y = np.array([r.measured_ms for r in rows])
    b, a = np.polyfit(x, y, 1)
    fitted = a + b * x
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return float(a), float(b), r2


def write_bench_csv(rows, path) -> None:
    lines = [BENCH_HEADER] + [r.csv_line() for r in rows]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
