import pytest

from vanetrust.protocol import (
    CertificateAuthority,
    LawEnforcementAuthority,
    TrustNetwork,
    Vehicle,
    register_vehicle,
)
from vanetrust.sigcrypt import sha256


@pytest.fixture
def authorities():
    lea = LawEnforcementAuthority(sha256(b"test-lea"))
    ca = CertificateAuthority(sha256(b"test-ca"), lea.public_key)
    return lea, ca


@pytest.fixture
def live_network(authorities):
    """Three registered vehicles with their certificates sealed at t=1000."""
    lea, ca = authorities
    net = TrustNetwork(ca.public_key, lea.public_key)
    ca.join(net)
    vehicles = {}
    for name in ("ada", "ben", "cal"):
        vehicle = Vehicle(name, sha256(b"test-veh-" + name.encode()))
        register_vehicle(lea, ca, vehicle, now_ms=0)
        vehicles[name] = vehicle
    net.seal(now_ms=1000)
    return lea, ca, net, vehicles
