"""Anonymous PKI, Merkle-proof ledgers, and reputation simulation for
vehicular networks.

Subsystems: sigcrypt (primitives), merkleproofs (presence/absence trees),
ledger (the three blockchains), protocol (LEA/CA/vehicle/RSU message flows),
reputation (reward/penalty scoring), simkit (simulator, overhead model,
benchmarks, CLI).
"""

__version__ = "0.1.0"
