"""Deterministic discrete-event simulation of the whole trust stack.

One run wires up LEA, CA, RSUs, and the scenario's vehicles, then processes a
time-ordered event queue: block sealing, beacons, alerts (authentic and
forged), witness co-alerts, disclosures (honest and slanderous), key updates,
and reputation judgments. Ties at the same millisecond resolve by a fixed
priority (sealing first, then judgments, then traffic) and an insertion
counter, so a (scenario, seed) pair replays byte-identically: same event log,
same score series, same chain files.

Judgments run at the first block boundary after an event's evidence window,
so every judgment only consumes messages already committed to MesBC.

The event log and score CSV identify vehicles carefully: broadcast entries
use a pseudonym fingerprint (never the scenario name), while judgment/score
entries use the scenario name (the omniscient-researcher view). No output
record pairs an identity with a public key; the unlinkability probe audits
the actual protocol transcript (CA inputs, chain records, broadcasts).
"""

from __future__ import annotations

import heapq
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from random import Random
from typing import Optional

from vanetrust import __version__, protocol
from vanetrust.ledger import save_chain
from vanetrust.merkleproofs import AppendTree, LexTree
from vanetrust.protocol import (
    AuthPacket,
    CertificateAuthority,
    LawEnforcementAuthority,
    ProtocolError,
    TrustNetwork,
    Vehicle,
    certificate_payload,
    encode_message,
    register_vehicle,
    update_certificate,
    verify_broadcast,
)
from vanetrust.reputation import AUTHENTIC, CLAIM_FORGED, FORGED, UnknownParticipantError
from vanetrust.sigcrypt import sha256, sign
from vanetrust.simkit.scenario import (
    BEHAVIOR_FORGER,
    BEHAVIOR_HONEST,
    BEHAVIOR_SILENT,
    BEHAVIOR_SLANDERER,
    CREDENTIAL_SELF_SIGNED,
    Scenario,
)

PRIORITY = {
    "seal": 0,
    "judge": 1,
    "disclose": 2,
    "alert": 3,
    "witness": 3,
    "beacon": 4,
    "update": 5,
}

SCORES_HEADER = "time_ms,vehicle,score,delta,cause"


@dataclass
class _VehicleState:
    spec: object
    actor: Vehicle
    registered: bool = False
    rogue_packet: Optional[AuthPacket] = None
    pending_adoption: bool = False
    slander_budget: dict = field(default_factory=dict)  # phase from_h -> remaining


@dataclass
class RunResult:
    out_dir: Path
    event_log: Path
    scores_csv: Path
    manifest: Path
    chain_files: dict
    probes: dict
    final_scores: dict
    accepted_broadcasts: int
    rejected_broadcasts: int

    @property
    def ok(self) -> bool:
        return all(self.probes.values())


def _fingerprint(pu: bytes) -> str:
    return sha256(pu)[:4].hex()


def _self_signed_packet(actor: Vehicle, validity_ms: int) -> AuthPacket:
    """A rogue credential: the vehicle signs its own certificate and builds
    proofs against trees only it believes in."""
    payload = certificate_payload(actor.public_key, 50.0, validity_ms)
    sig = sign(actor.keypair.private, payload)
    cert = protocol.Certificate(
        pu_ca=actor.public_key, sig_ca=sig,
        pu_lea=actor.public_key, sig_lea=sig,
        pu_vehicle=actor.public_key, reputation=50.0, expiry_ms=validity_ms,
    )
    actor.certificate = cert
    fake_cerbc = AppendTree([encode_message(cert)])
    fake_revbc = LexTree()
    return AuthPacket(cert, 0, fake_cerbc.prove_presence(0), 0,
                      fake_revbc.prove_absence(actor.public_key))


class Simulation:
    def __init__(self, scenario: Scenario):
        self.sc = scenario
        self._queue: list = []
        self._seq = 0
        self._log: list[str] = []
        self._score_rows: list[str] = []
        self._events: dict[int, dict] = {}
        self._accepted: list[bytes] = []
        self._rejected = 0
        self._pending_adoptions: list[tuple[_VehicleState, protocol.Certificate]] = []
        self._setup()

    # -- construction ---------------------------------------------------------

    def _setup(self) -> None:
        sc = self.sc
        self.rng = Random(sc.seed)
        root = sc.seed.to_bytes(8, "big")
        self.lea = LawEnforcementAuthority(
            sha256(b"lea" + root),
            proof_validator=lambda identity, proof: proof != b"invalid",
            cert_validity_ms=sc.cert_validity_ms,
            alpha=sc.alpha,
            beta=sc.beta,
        )
        self.ca = CertificateAuthority(sha256(b"ca" + root), self.lea.public_key)
        self.net = TrustNetwork(
            self.ca.public_key,
            self.lea.public_key,
            difficulty=sc.difficulty,
            expiry_window_ms=sc.cert_validity_ms,
        )
        self.ca.join(self.net)

        self.states: dict[str, _VehicleState] = {}
        self._name_of_identity: dict[bytes, str] = {}
        for spec in sc.vehicles:
            actor = Vehicle(spec.name, sha256(b"vehicle" + root + spec.name.encode()))
            state = _VehicleState(spec=spec, actor=actor)
            state.slander_budget = {
                p.from_h: p.count for p in spec.profile
                if p.behavior == BEHAVIOR_SLANDERER
            }
            self.states[spec.name] = state
            self._name_of_identity[actor.identity] = spec.name

        for name, state in self.states.items():
            spec = state.spec
            if spec.credential == CREDENTIAL_SELF_SIGNED:
                state.rogue_packet = _self_signed_packet(state.actor, sc.duration_ms + 1)
                self._emit(0, "rogue_credential", vehicle=name)
                continue
            proof = b"proof" if spec.identity_valid else b"invalid"
            try:
                register_vehicle(self.lea, self.ca, state.actor,
                                 identity_proof=proof, now_ms=0)
                state.registered = True
                self._emit(0, "register", vehicle=name)
                self._score_rows.append(f"0,{name},50.0,0.0,registered")
            except ProtocolError as exc:
                self._emit(0, "registration_refused", vehicle=name, reason=str(exc))

        interval = sc.block_interval_ms
        for t in range(0, sc.duration_ms + 1, interval):
            self._push(t, "seal", {})
        self._schedule_beacons()
        self._schedule_alerts()
        self._schedule_updates()

    def _schedule_beacons(self) -> None:
        b = self.sc.beacon_interval_ms
        for name, state in self.states.items():
            if not (state.registered or state.rogue_packet):
                continue
            for phase in state.spec.profile:
                if phase.behavior == BEHAVIOR_SILENT:
                    continue
                start_ms = int(phase.from_h * 3_600_000)
                end_ms = int(phase.to_h * 3_600_000)
                t = (start_ms // b + 1) * b
                while t < end_ms and t <= self.sc.duration_ms:
                    self._push(t, "beacon", {"vehicle": name})
                    t += b

    def _schedule_alerts(self) -> None:
        planned = []
        for spec in self.sc.vehicles:
            state = self.states[spec.name]
            if not (state.registered or state.rogue_packet):
                continue
            for phase in spec.profile:
                start_ms = int(phase.from_h * 3_600_000)
                end_ms = int(phase.to_h * 3_600_000)
                if phase.behavior == BEHAVIOR_HONEST and phase.alert_rate_per_h > 0:
                    n = round(phase.alert_rate_per_h * (phase.to_h - phase.from_h))
                    times = sorted(self.rng.randrange(start_ms + 1, end_ms) for _ in range(n))
                    for t in times:
                        planned.append((t, spec.name, phase.level, AUTHENTIC, spec.position_km))
                elif phase.behavior == BEHAVIOR_FORGER:
                    times = sorted(self.rng.randrange(start_ms + 1, end_ms)
                                   for _ in range(phase.count))
                    for t in times:
                        planned.append((t, spec.name, phase.level, FORGED, spec.position_km))
        for ev in self.sc.events:
            spec = self.sc.vehicle(ev.vehicle)
            pos = ev.position_km if ev.position_km is not None else spec.position_km
            planned.append((int(ev.at_h * 3_600_000), ev.vehicle, ev.level,
                            ev.ground_truth, pos))
        planned.sort(key=lambda p: (p[0], p[1]))
        for eid, (t, name, level, truth, pos) in enumerate(planned, start=1):
            self._push(t, "alert", {
                "vehicle": name, "eid": eid, "level": level,
                "truth": truth, "position": pos, "witness": False,
            })

    def _schedule_updates(self) -> None:
        if self.sc.key_update_every_h <= 0:
            return
        step = int(self.sc.key_update_every_h * 3_600_000)
        for name, state in self.states.items():
            if not state.registered:
                continue
            t = step
            while t <= self.sc.duration_ms:
                self._push(t, "update", {"vehicle": name})
                t += step

    # -- queue plumbing -------------------------------------------------------

    def _push(self, t: int, kind: str, payload: dict) -> None:
        self._seq += 1
        heapq.heappush(self._queue, (t, PRIORITY[kind], self._seq, kind, payload))

    def _emit(self, t: int, event: str, **fields) -> None:
        entry = {"t": t, "event": event}
        entry.update(fields)
        self._log.append(json.dumps(entry, sort_keys=True, separators=(",", ":")))

    # -- handlers -------------------------------------------------------------

    def _behavior(self, state: _VehicleState, t: int):
        return state.spec.behavior_at(t / 3_600_000)

    def _packet_for(self, state: _VehicleState) -> Optional[AuthPacket]:
        if state.rogue_packet is not None:
            return state.rogue_packet
        try:
            return self.net.auth_packet_for(state.actor)
        except Exception:
            return None

    def _deliver(self, t: int, state: _VehicleState, msg, kind: str, **extra) -> bool:
        """Common broadcast path: authenticate + verify, record, log."""
        packet = self._packet_for(state)
        if packet is None:
            self._emit(t, "broadcast", kind=kind, pseud=_fingerprint(msg.sender_pu),
                       accepted=False, reason="no_packet", **extra)
            self._rejected += 1
            return False
        result = verify_broadcast(msg, packet, self.net.cerbc_root,
                                  self.net.revbc_root, t)
        if result:
            self.net.submit_broadcast(msg)
            self._accepted.append(encode_message(msg))
            self._emit(t, "broadcast", kind=kind, pseud=_fingerprint(msg.sender_pu),
                       accepted=True, **extra)
            return True
        self._rejected += 1
        self._emit(t, "broadcast", kind=kind, pseud=_fingerprint(msg.sender_pu),
                   accepted=False, reason=result.reason, **extra)
        return False

    def _handle_seal(self, t: int) -> None:
        blocks = self.net.seal(t)
        for state, cert in self._pending_adoptions:
            state.actor.adopt_certificate(cert)
            state.pending_adoption = False
            self._emit(t, "key_rotated", vehicle=state.spec.name)
        self._pending_adoptions.clear()
        for chain, block in zip(self.net.chains(), blocks):
            self._emit(t, "block", chain=chain.name, height=chain.height,
                       records=len(block.records),
                       hash=block.header.block_hash().hex())

    def _handle_beacon(self, t: int, payload: dict) -> None:
        state = self.states[payload["vehicle"]]
        phase = self._behavior(state, t)
        if phase is None or phase.behavior == BEHAVIOR_SILENT:
            return
        msg = state.actor.make_beacon(t, state.spec.position_km)
        self._deliver(t, state, msg, "beacon")

    def _receivers(self, position: float, sender: str):
        for name, state in self.states.items():
            if name == sender:
                continue
            if abs(state.spec.position_km - position) <= self.sc.radio_radius_km:
                yield state

    def _handle_alert(self, t: int, payload: dict) -> None:
        state = self.states[payload["vehicle"]]
        eid, level = payload["eid"], payload["level"]
        position = payload["position"]
        msg = state.actor.make_alert(t, eid, level, position)
        accepted = self._deliver(t, state, msg, "witness" if payload["witness"] else "alert",
                                 eid=eid)
        if not accepted:
            return
        ev = self._events.setdefault(eid, {
            "truth": payload["truth"], "level": level, "position": position,
            "alerts": [], "disclosures": [], "disclosers": set(), "judged": False,
        })
        ev["alerts"].append(msg)
        if payload["witness"]:
            return
        self._schedule_judgment(t, eid)
        witness_at = t + int(self.sc.witness_delay_s * 1000)
        disclose_at = t + int(self.sc.disclosure_delay_s * 1000)
        for receiver in self._receivers(position, payload["vehicle"]):
            phase = self._behavior(receiver, t)
            if phase is None or not receiver.registered:
                continue
            if payload["truth"] == AUTHENTIC:
                if phase.behavior == BEHAVIOR_HONEST and witness_at <= self.sc.duration_ms:
                    self._push(witness_at, "witness", {
                        "vehicle": receiver.spec.name, "eid": eid, "level": level,
                        "truth": payload["truth"], "position": position, "witness": True,
                    })
                elif (phase.behavior == BEHAVIOR_SLANDERER
                      and receiver.slander_budget.get(phase.from_h, 0) > 0
                      and disclose_at <= self.sc.duration_ms):
                    receiver.slander_budget[phase.from_h] -= 1
                    self._push(disclose_at, "disclose", {
                        "vehicle": receiver.spec.name, "eid": eid,
                        "accused": msg.sender_pu.hex(), "slander": True,
                    })
            else:
                if phase.behavior == BEHAVIOR_HONEST and disclose_at <= self.sc.duration_ms:
                    self._push(disclose_at, "disclose", {
                        "vehicle": receiver.spec.name, "eid": eid,
                        "accused": msg.sender_pu.hex(), "slander": False,
                    })

    def _schedule_judgment(self, t: int, eid: int) -> None:
        interval = self.sc.block_interval_ms
        horizon = t + int(max(self.sc.witness_delay_s, self.sc.disclosure_delay_s) * 1000)
        judge_at = (horizon // interval + 1) * interval
        if judge_at <= self.sc.duration_ms:
            self._push(judge_at, "judge", {"eid": eid})
        else:
            self._emit(t, "judgment_beyond_horizon", eid=eid)

    def _handle_disclose(self, t: int, payload: dict) -> None:
        state = self.states[payload["vehicle"]]
        eid = payload["eid"]
        ev = self._events.get(eid)
        if ev is None or state.spec.name in ev["disclosers"]:
            return
        msg = state.actor.make_disclosure(t, eid, bytes.fromhex(payload["accused"]),
                                          CLAIM_FORGED)
        if self._deliver(t, state, msg, "disclosure", eid=eid):
            ev["disclosures"].append(msg)
            ev["disclosers"].add(state.spec.name)

    def _handle_judge(self, t: int, payload: dict) -> None:
        ev = self._events.get(payload["eid"])
        if ev is None or ev["judged"] or not ev["alerts"]:
            return
        ev["judged"] = True
        density = sum(
            1 for s in self.states.values()
            if abs(s.spec.position_km - ev["position"]) <= self.sc.density_window_km
        )
        try:
            changes = self.lea.judge(ev["alerts"], ev["disclosures"], float(density),
                                     ev["truth"], t)
        except UnknownParticipantError as exc:
            self._emit(t, "judgment_deferred", eid=payload["eid"], unknown=str(exc))
            return
        summary = []
        for ch in changes:
            name = self._name_of_identity[self.lea.lookup_identity(ch.pu)]
            cause = f"{ev['truth']}_{ch.role}"
            self._score_rows.append(
                f"{t},{name},{ch.after!r},{ch.delta!r},{cause}")
            summary.append({"vehicle": name, "role": ch.role, "seq": ch.sequence,
                            "delta": ch.delta})
        self._emit(t, "judgment", eid=payload["eid"], truth=ev["truth"],
                   density=density, senders=len(ev["alerts"]),
                   disclosures=len(ev["disclosures"]), changes=summary)

    def _handle_update(self, t: int, payload: dict) -> None:
        state = self.states[payload["vehicle"]]
        phase = self._behavior(state, t)
        if not state.registered or state.pending_adoption:
            return
        if phase is None or phase.behavior == BEHAVIOR_SILENT:
            return
        try:
            ciphertext = state.actor.update_request(self.lea.enc_public)
            cert = update_certificate(self.lea, self.ca, ciphertext, now_ms=t)
        except ProtocolError as exc:
            self._emit(t, "key_update_refused", vehicle=state.spec.name, reason=str(exc))
            return
        state.pending_adoption = True
        self._pending_adoptions.append((state, cert))
        self._emit(t, "key_update_requested", vehicle=state.spec.name)

    # -- main loop and outputs ------------------------------------------------

    def run(self, out_dir) -> RunResult:
        handlers = {
            "seal": lambda t, p: self._handle_seal(t),
            "judge": self._handle_judge,
            "disclose": self._handle_disclose,
            "alert": self._handle_alert,
            "witness": self._handle_alert,
            "beacon": lambda t, p: self._handle_beacon(t, p),
            "update": self._handle_update,
        }
        while self._queue:
            t, _, _, kind, payload = heapq.heappop(self._queue)
            if t > self.sc.duration_ms:
                break
            handlers[kind](t, payload)
        for name, state in self.states.items():
            if state.registered:
                score = self.lea.live_score(state.actor.public_key)
                self._score_rows.append(
                    f"{self.sc.duration_ms},{name},{score!r},0.0,final")
        return self._write_outputs(Path(out_dir))

    def _final_scores(self) -> dict:
        return {
            name: self.lea.live_score(state.actor.public_key)
            for name, state in self.states.items() if state.registered
        }

    def _run_probes(self) -> dict:
        probes = {}
        recorded = Counter()
        for block in self.net.mesbc.blocks:
            recorded.update(block.records)
        recorded.update(self.net.pending_records(protocol.CHAIN_MSG))  # not yet sealed
        probes["broadcast_conservation"] = recorded == Counter(self._accepted)

        ok = True
        for row in self._score_rows:
            score = float(row.split(",")[2])
            ok = ok and 0.0 <= score <= 100.0
        probes["scores_in_bounds"] = ok

        corpus = [blob for _, blob in self.ca.transcript]
        for chain in self.net.chains():
            for block in chain.blocks:
                corpus.extend(block.records)
        corpus.extend(self._accepted)
        violations = 0
        for state in self.states.values():
            identity = state.actor.identity
            keys = state.actor.key_history
            for record in corpus:
                if identity in record and any(k in record for k in keys):
                    violations += 1
                for a, b in zip(keys, keys[1:]):
                    if a in record and b in record:
                        violations += 1
        probes["transcript_unlinkability"] = violations == 0

        rogue_keys = {
            s.actor.public_key for s in self.states.values() if s.rogue_packet is not None
        }
        probes["rogue_never_accepted"] = not any(
            protocol.decode_message(blob).sender_pu in rogue_keys for blob in self._accepted
        )

        rotated_ok = True
        for state in self.states.values():
            if state.registered:
                for old in state.actor.key_history[:-1]:
                    rotated_ok = rotated_ok and self.net.revoked(old)
        probes["rotated_keys_revoked"] = rotated_ok
        return probes

    def _write_outputs(self, out_dir: Path) -> RunResult:
        out_dir.mkdir(parents=True, exist_ok=True)
        event_log = out_dir / "events.jsonl"
        event_log.write_text("\n".join(self._log) + "\n", encoding="utf-8")
        scores_csv = out_dir / "scores.csv"
        scores_csv.write_text(
            SCORES_HEADER + "\n" + "\n".join(self._score_rows) + "\n", encoding="utf-8")

        chain_files = {}
        for chain in self.net.chains():
            path = out_dir / f"{chain.name.lower()}.chain"
            save_chain(chain, path)
            chain_files[chain.name] = path

        probes = self._run_probes()
        manifest = {
            "scenario": self.sc.name,
            "seed": self.sc.seed,
            "duration_h": self.sc.duration_h,
            "package_version": __version__,
            "accepted_broadcasts": len(self._accepted),
            "rejected_broadcasts": self._rejected,
            "chain_heights": {c.name: c.height for c in self.net.chains()},
            "state_roots": {c.name: c.state_root.hex() for c in self.net.chains()},
            "final_scores": self._final_scores(),
            "probes": probes,
        }
        manifest_path = out_dir / "manifest.json"
        manifest_path.write_text(
            json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")

        return RunResult(
            out_dir=out_dir,
            event_log=event_log,
            scores_csv=scores_csv,
            manifest=manifest_path,
            chain_files=chain_files,
            probes=probes,
            final_scores=self._final_scores(),
            accepted_broadcasts=len(self._accepted),
            rejected_broadcasts=self._rejected,
        )


def run_scenario(scenario: Scenario, out_dir) -> RunResult:
    """Simulate one scenario and write its artifacts under out_dir."""
    return Simulation(scenario).run(out_dir)
