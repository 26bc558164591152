import struct

import pytest
import torch

from crave import checkpoint as ckpt
from crave.errors import CheckpointError


def state():
    g = torch.Generator().manual_seed(0)
    return {"a.weight": torch.randn(3, 4, generator=g), "a.bias": torch.randn(3, generator=g),
            "scalar": torch.tensor(1.5)}


CONFIG = {"train": {"seed": 0, "lr": 0.001}}


def test_roundtrip():
    data = ckpt.dumps(state(), CONFIG, {"history": [["probe", 1, 0.5]]})
    loaded, config, meta = ckpt.loads(data, expected_config=CONFIG)
    assert config == CONFIG and meta["history"] == [["probe", 1, 0.5]]
    assert list(loaded) == list(state())
    for k, v in state().items():
        assert torch.equal(loaded[k], v.float())


def test_layout():
    data = ckpt.dumps(state(), CONFIG)
    magic, version, head_len = struct.unpack_from("<8sII", data)
    assert magic == b"CRAVECKP" and version == 1
    assert len(data) == 16 + head_len + 4 * (12 + 3 + 1)


def test_deterministic_bytes(tmp_path):
    a = ckpt.save(tmp_path / "a.ckpt", state(), CONFIG)
    b = ckpt.dumps(state(), dict(reversed(list(CONFIG.items()))))
    assert a == b == (tmp_path / "a.ckpt").read_bytes()
    assert ckpt.load(tmp_path / "a.ckpt")[1] == CONFIG


@pytest.mark.parametrize("mutate", [
    lambda d: b"XXXXXXXX" + d[8:],
    lambda d: d[:8] + struct.pack("<I", 9) + d[12:],
    lambda d: d[:-3],
    lambda d: d + b"\0\0\0\0",
    lambda d: d[:10],
])
def test_corruption_detected(mutate):
    with pytest.raises(CheckpointError):
        ckpt.loads(mutate(ckpt.dumps(state(), CONFIG)))


def test_tampered_config_detected():
    data = ckpt.dumps(state(), CONFIG)
    tampered = data.replace(b'"lr":0.001', b'"lr":0.002')
    assert tampered != data
    with pytest.raises(CheckpointError, match="hash"):
        ckpt.loads(tampered)


def test_expected_config_mismatch():
    with pytest.raises(CheckpointError, match="different config"):
        ckpt.loads(ckpt.dumps(state(), CONFIG), expected_config={"train": {"seed": 1}})
