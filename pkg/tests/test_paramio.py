import numpy as np
import pytest

from hrec import paramio
from hrec.paramio import FormatError


def _arrays():
    rng = np.random.default_rng(0)
    return {"b.W": rng.standard_normal((3, 2)).astype(np.float32), "a.b": np.arange(4, dtype=np.float32)}


def test_round_trip_is_bit_exact(tmp_path):
    arrays = _arrays()
    paramio.save(tmp_path / "p.hrec", arrays, {"kind": "x", "n": 3})
    back, trailer = paramio.load(tmp_path / "p.hrec")
    assert trailer == {"kind": "x", "n": 3}
    assert sorted(back) == sorted(arrays)
    for k in arrays:
        assert back[k].dtype == np.float32
        assert back[k].tobytes() == arrays[k].tobytes()


def test_dumps_is_order_independent():
    a = _arrays()
    assert paramio.dumps(a) == paramio.dumps(dict(reversed(list(a.items()))))


def test_header_layout():
    blob = paramio.dumps({"x": np.zeros(2, np.float32)})
    assert blob[:4] == b"HREC"
    assert int.from_bytes(blob[4:8], "little") == 1
    assert len(blob) == 12 + int.from_bytes(blob[8:12], "little") + 8


def test_no_trailer_reads_none():
    assert paramio.loads(paramio.dumps(_arrays()))[1] is None


def test_bad_magic():
    with pytest.raises(FormatError, match="magic"):
        paramio.loads(b"NOPE" + paramio.dumps(_arrays())[4:])


def test_truncated_payload():
    blob = paramio.dumps(_arrays())
    with pytest.raises(FormatError, match="payload size mismatch"):
        paramio.loads(blob[:-4])


def test_unknown_version():
    blob = bytearray(paramio.dumps(_arrays()))
    blob[4] = 9
    with pytest.raises(FormatError, match="version"):
        paramio.loads(bytes(blob))
