import json

import numpy as np
import pytest

from g2flow import checkpoint
from g2flow.initial import perturbation
from g2flow.lattice import LatticeSpec, OctonionField


@pytest.fixture
def field():
    return perturbation(LatticeSpec((1, 3), 8, 2.0), 0.7, seed=11)


def test_round_trip_bit_exact(tmp_path, field):
    p = tmp_path / "a.ckpt"
    checkpoint.save(p, field, t=0.125, step=42)
    ck = checkpoint.load(p, expected=field.spec)
    assert ck.field.spec == field.spec and ck.t == 0.125 and ck.step == 42
    assert ck.field.values.tobytes() == field.values.tobytes()
    assert not (tmp_path / "a.ckpt.tmp").exists()


def test_random_payload_round_trip(tmp_path):
    s = LatticeSpec((2,), 16)
    v = np.random.default_rng(0).normal(size=s.shape + (8,)) * 1e300
    p = tmp_path / "r.ckpt"
    checkpoint.save(p, OctonionField(s, v))
    assert np.array_equal(checkpoint.load(p).field.values, v)


def test_header_contents(tmp_path, field):
    p = tmp_path / "h.ckpt"
    checkpoint.save(p, field)
    header, offset = checkpoint.read_header(p)
    assert header["format"] == checkpoint.MAGIC and header["version"] == checkpoint.VERSION
    assert header["active_axes"] == [1, 3] and header["n"] == 8 and header["L"] == 2.0
    assert offset + 8 * field.values.size == p.stat().st_size


def test_truncated_payload(tmp_path, field):
    p = tmp_path / "t.ckpt"
    checkpoint.save(p, field)
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(checkpoint.CheckpointSizeError):
        checkpoint.load(p)


def test_trailing_bytes(tmp_path, field):
    p = tmp_path / "x.ckpt"
    checkpoint.save(p, field)
    p.write_bytes(p.read_bytes() + b"\0" * 8)
    with pytest.raises(checkpoint.CheckpointSizeError):
        checkpoint.load(p)


@pytest.mark.parametrize("header", [b"not json\n", b'{"format": "other"}\n', b"[1, 2]\n",
                                    b'{"format": "g2flow-checkpoint", "n": 8}\n', b"no newline"])
def test_malformed_header(tmp_path, header):
    p = tmp_path / "m.ckpt"
    p.write_bytes(header)
    with pytest.raises(checkpoint.CheckpointHeaderError):
        checkpoint.load(p)


def test_inconsistent_shape(tmp_path, field):
    p = tmp_path / "s.ckpt"
    checkpoint.save(p, field)
    header, offset = checkpoint.read_header(p)
    header["shape"] = [8, 8]
    p.write_bytes(json.dumps(header).encode() + b"\n" + p.read_bytes()[offset:])
    with pytest.raises(checkpoint.CheckpointHeaderError):
        checkpoint.load(p)


def test_non_finite_values(tmp_path, field):
    v = field.values.copy()
    v[0, 0, 3] = np.nan
    p = tmp_path / "n.ckpt"
    checkpoint.save(p, OctonionField(field.spec, v))
    with pytest.raises(checkpoint.CheckpointValueError):
        checkpoint.load(p)


def test_lattice_mismatch(tmp_path, field):
    p = tmp_path / "l.ckpt"
    checkpoint.save(p, field)
    other = LatticeSpec((1, 3), 16, 2.0)
    with pytest.raises(checkpoint.LatticeMismatchError) as exc:
        checkpoint.load(p, expected=other)
    assert exc.value.found == field.spec and exc.value.expected == other
    assert "16" in str(exc.value) and "8" in str(exc.value)
