import pytest

from emsserve import LatencyProfile, default_family, preset_profile


@pytest.fixture
def family():
    return default_family()


@pytest.fixture
def synthetic_profile():
    # text=1.0, vitals=0.001, image=0.1, header=0.001 on device "glass"
    return preset_profile("synthetic-glass")


@pytest.fixture
def two_device_profile():
    profile = LatencyProfile()
    for dev, costs in [
        ("glass", {"text": 12.0, "vitals": 0.008, "image": 2.0, "header": 0.004}),
        ("edge-4c", {"text": 0.56, "vitals": 0.0008, "image": 0.08, "header": 0.0004}),
    ]:
        for module, seconds in costs.items():
            profile.set(module, dev, seconds)
    return profile
