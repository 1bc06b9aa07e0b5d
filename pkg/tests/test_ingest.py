import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ecgfusion.errors import (
    ChecksumMismatch, LabelOutOfRange, MalformedHeader, RaggedRows,
    TruncatedStream, UnknownCode, UnsupportedFormat,
)
from ecgfusion.ingest import (
    AamiClass, Annotation, SKIP, checksum_matches, adu_to_mv, decode_fmt212, encode_annotations,
    encode_fmt212, load_beat_csv, map_to_aami, parse_annotations, parse_header,
    read_record, signal_checksum, write_beat_csv, write_record,
)

HEADER_100 = """100 2 360 650000
100.dat 212 200 11 1024 995 -22131 0 MLII
100.dat 212 200 11 1024 1011 20052 0 V5
# 69 M 1085 1629 x1
"""


def test_header_mitbih_layout():
    h = parse_header(HEADER_100)
    assert (h.n_signals, h.sampling_rate, h.n_samples) == (2, 360.0, 650000)
    assert h.signals[0].initial_value == 995
    assert h.signals[1].checksum == 20052
    assert h.signals[0].baseline == 1024
    assert h.lead_index("II") == 0
    assert h.lead_index("V5") == 1


def test_header_gain_default_and_baseline():
    h = parse_header("r 1 250 10\nr.dat 212\n")
    assert h.signals[0].gain == 200.0
    h = parse_header("r 1 250 10\nr.dat 212 400(12)/uV 12 0\n")
    s = h.signals[0]
    assert (s.gain, s.baseline, s.units) == (400.0, 12, "uV")
    assert parse_header("r 1 250 10\nr.dat 212 0 12 7\n").signals[0].gain == 200.0


@pytest.mark.parametrize("text,exc", [
    ("100 0 360 100\n", MalformedHeader),
    ("100 2 360 100\n100.dat 212\n", MalformedHeader),
    ("", MalformedHeader),
    ("100 1 abc 10\nx.dat 212\n", MalformedHeader),
    ("100/2 1 360 10\nx.dat 212\n", MalformedHeader),
    ("100 1 360 10\nx.dat 16\n", UnsupportedFormat),
])
def test_header_errors(text, exc):
    with pytest.raises(exc):
        parse_header(text)


def test_fmt212_bit_examples():
    assert decode_fmt212(bytes([0x10, 0x00, 0x02]), 1).tolist() == [[16, 2]]
    assert decode_fmt212(bytes([0xFF, 0x0F, 0x00]), 1).tolist() == [[-1, 0]]
    # high nibble of the middle byte belongs to the second sample
    assert decode_fmt212(bytes([0x00, 0x80, 0x00]), 1).tolist() == [[0, -2048]]


def test_fmt212_roundtrip_large(rng):
    x = rng.integers(-2048, 2048, size=(50_000, 2))
    back = decode_fmt212(encode_fmt212(x), 50_000, 2)
    assert np.array_equal(back, x)


def test_fmt212_odd_single_channel(rng):
    x = rng.integers(-2048, 2048, size=(7, 1))
    assert np.array_equal(decode_fmt212(encode_fmt212(x), 7, 1), x)


def test_fmt212_truncated():
    with pytest.raises(TruncatedStream):
        decode_fmt212(bytes(5), 2, 2)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(-2048, 2047), min_size=1, max_size=64))
def test_fmt212_roundtrip_property(vals):
    x = np.array(vals).reshape(-1, 1)
    assert np.array_equal(decode_fmt212(encode_fmt212(x), len(vals), 1), x)


def _words(*ws):
    return np.array(ws, dtype="<u2").tobytes()


def test_annotations_cumulative():
    anns = parse_annotations(_words((1 << 10) | 100, (1 << 10) | 50, 0))
    assert [(a.sample_index, a.symbol) for a in anns] == [(100, "N"), (150, "N")]


def test_annotations_skip():
    anns = parse_annotations(_words(SKIP << 10, 70000 >> 16, 70000 & 0xFFFF, 5 << 10, 0))
    assert [(a.sample_index, a.symbol) for a in anns] == [(70000, "V")]


def test_annotations_roundtrip_with_pseudo_codes():
    src = [
        Annotation(18, "+", aux="(N"),
        Annotation(77, "N"),
        Annotation(370, "V", subtype=2),
        Annotation(80_000, "A", channel=1, num=-3),
        Annotation(80_001, "~", aux="noise!"),
        Annotation(90_000, "N", channel=1, num=-3),
    ]
    assert parse_annotations(encode_annotations(src)) == src


def test_annotation_errors():
    with pytest.raises(TruncatedStream):
        parse_annotations(_words((1 << 10) | 5))
    with pytest.raises(UnknownCode):
        parse_annotations(_words((15 << 10) | 5, 0))
    with pytest.raises(TruncatedStream):
        parse_annotations(_words(SKIP << 10, 0))


@pytest.mark.parametrize("sym,cls", [
    ("N", AamiClass.N), ("L", AamiClass.N), ("R", AamiClass.N), ("e", AamiClass.N), ("j", AamiClass.N),
    ("A", AamiClass.S), ("a", AamiClass.S), ("J", AamiClass.S), ("S", AamiClass.S),
    ("V", AamiClass.V), ("E", AamiClass.V), ("F", AamiClass.F),
    ("/", AamiClass.Q), ("f", AamiClass.Q), ("Q", AamiClass.Q),
    ("+", None), ("~", None), ("|", None), ('"', None),
])
def test_aami_map(sym, cls):
    assert map_to_aami(sym) is cls


def test_adu_to_mv():
    assert adu_to_mv([1195, 995, 795], 200, 995).tolist() == [1.0, 0.0, -1.0]


def test_beat_csv(tmp_path):
    p = tmp_path / "b.csv"
    p.write_text("0.1,0.5,0.9,0\n")
    X, y = load_beat_csv(p)
    assert X.shape == (1, 3) and y.tolist() == [AamiClass.N]
    p.write_text("")
    X, y = load_beat_csv(p)
    assert len(X) == 0 and len(y) == 0
    p.write_text("0.1,0.2,7\n")
    with pytest.raises(LabelOutOfRange):
        load_beat_csv(p)
    p.write_text("0.1,0.2,1\n0.3,1\n")
    with pytest.raises(RaggedRows):
        load_beat_csv(p)


def test_beat_csv_roundtrip(tmp_path, rng):
    X = rng.normal(size=(4, 9))
    y = np.array([0, 4, 2, 1])
    write_beat_csv(tmp_path / "x.csv", X, y)
    X2, y2 = load_beat_csv(tmp_path / "x.csv")
    assert np.allclose(X2, X, rtol=1e-8) and np.array_equal(y2, y)


def test_checksum_wraps():
    adu = np.full((100, 1), 2000)  # 200000 mod 65536 = 3392
    assert signal_checksum(adu).tolist() == [3392]
    adu = np.full((20, 1), 2000)  # 40000 -> -25536 as signed 16-bit
    assert signal_checksum(adu).tolist() == [-25536]


def test_record_roundtrip_and_checks(tmp_path, rng):
    adu = rng.integers(-2048, 2048, size=(1000, 2))
    anns = [Annotation(100, "N"), Annotation(400, "V"), Annotation(700, "A")]
    write_record(tmp_path / "r1", adu, 360, ["MLII", "V1"], annotations=anns)
    rec = read_record(tmp_path / "r1")
    assert np.array_equal(rec.adu, adu)
    assert list(rec.annotations) == anns
    for i, s in enumerate(rec.header.signals):
        assert rec.adu[0, i] == s.initial_value
        assert signal_checksum(rec.adu)[i] == s.checksum
    hea = tmp_path / "r1.hea"
    hea.write_text(hea.read_text().replace(f" {signal_checksum(adu)[0]} 0 MLII", " 1 0 MLII"))
    with pytest.raises(ChecksumMismatch):
        read_record(tmp_path / "r1")


def test_against_reference_reader(tmp_path, rng):
    """Files written by the reference WFDB package decode identically here."""
    wfdb = pytest.importorskip("wfdb")
    adu = rng.integers(-2000, 2000, size=(3000, 2)).astype(np.int64)
    adu[:, 1] = np.abs(adu[:, 1])  # positive sum, so the unsigned checksum form shows up
    wfdb.wrsamp("ref", fs=360, units=["mV", "mV"], sig_name=["MLII", "V5"], d_signal=adu,
                fmt=["212", "212"], adc_gain=[200, 200], baseline=[0, 0], write_dir=str(tmp_path))
    samples = np.array([10, 300, 1100, 70_000 // 30, 2999])
    symbols = ["N", "V", "A", "/", "F"]
    wfdb.wrann("ref", "atr", samples, symbols, aux_note=["", "(B", "", "", ""], write_dir=str(tmp_path))
    rec = read_record(tmp_path / "ref")  # verifies initial values and checksums
    assert np.array_equal(rec.adu, adu)
    assert [a.sample_index for a in rec.annotations] == samples.tolist()
    assert [a.symbol for a in rec.annotations] == symbols
    assert rec.annotations[1].aux == "(B"
    ref = wfdb.rdann(str(tmp_path / "ref"), "atr")
    assert ref.sample.tolist() == [a.sample_index for a in rec.annotations]


def test_real_record_100(mitdb_dir):
    rec = read_record(mitdb_dir / "100")
    h = rec.header
    assert (h.n_signals, h.sampling_rate, h.n_samples) == (2, 360.0, 650000)
    for i, s in enumerate(h.signals):
        assert rec.adu[0, i] == s.initial_value
        assert checksum_matches(signal_checksum(rec.adu)[i], s.checksum)
    beats = sum(map_to_aami(a.symbol) is not None for a in rec.annotations)
    assert beats == 2273


def test_checksum_signed_or_unsigned():
    assert checksum_matches(-22131, -22131)
    assert checksum_matches(-22131, 43405)
    assert not checksum_matches(-22131, 43404)
