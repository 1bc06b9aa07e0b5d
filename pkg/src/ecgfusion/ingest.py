"""WFDB record reading (header, format 212 signal, MIT annotations) and the beat CSV format.

Only the subset of WFDB needed for MIT-BIH, INCART and NSTDB is supported:
single-segment records whose signals all live in one format-212 file.
"""

from __future__ import annotations

import csv
import enum
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ChecksumMismatch,
    LabelOutOfRange,
    MalformedHeader,
    RaggedRows,
    TruncatedStream,
    UnknownCode,
    UnsupportedFormat,
)

SUPPORTED_FORMATS = frozenset({212})
DEFAULT_GAIN = 200.0

# MIT annotation codes -> symbols (codes 15 and 17 are unassigned)
ANNOTATION_SYMBOLS = {
    0: " ", 1: "N", 2: "L", 3: "R", 4: "a", 5: "V", 6: "F", 7: "J", 8: "A",
    9: "S", 10: "E", 11: "j", 12: "/", 13: "Q", 14: "~", 16: "|", 18: "s",
    19: "T", 20: "*", 21: "D", 22: '"', 23: "=", 24: "p", 25: "B", 26: "^",
    27: "t", 28: "+", 29: "u", 30: "?", 31: "!", 32: "[", 33: "]", 34: "e",
    35: "n", 36: "@", 37: "x", 38: "f", 39: "(", 40: ")", 41: "r",
}
SYMBOL_CODES = {sym: code for code, sym in ANNOTATION_SYMBOLS.items()}

SKIP, NUM, SUB, CHN, AUX = 59, 60, 61, 62, 63


class AamiClass(enum.IntEnum):
    N = 0
    S = 1
    V = 2
    F = 3
    Q = 4


AAMI_GROUPS = {
    AamiClass.N: "NLRej",
    AamiClass.S: "AaJS",
    AamiClass.V: "VE",
    AamiClass.F: "F",
    AamiClass.Q: "/fQ",
}
_SYMBOL_TO_AAMI = {s: cls for cls, syms in AAMI_GROUPS.items() for s in syms}


def map_to_aami(symbol: str) -> AamiClass | None:
    """AAMI EC57 superclass of an MIT beat symbol, or None for non-beat annotations."""
    return _SYMBOL_TO_AAMI.get(symbol)


@dataclass(frozen=True)
class SignalSpec:
    file_name: str
    format_code: int
    gain: float = DEFAULT_GAIN
    baseline: int = 0
    units: str = "mV"
    adc_resolution: int = 12
    adc_zero: int = 0
    initial_value: int | None = None
    checksum: int | None = None
    block_size: int = 0
    description: str = ""


@dataclass(frozen=True)
class RecordHeader:
    record_name: str
    n_signals: int
    sampling_rate: float
    n_samples: int
    signals: tuple[SignalSpec, ...] = ()

    def lead_index(self, lead: str = "II") -> int:
        """Index of the signal whose description names `lead` ("II" also matches "MLII")."""
        wanted = {lead.upper()}
        if lead.upper() == "II":
            wanted.add("MLII")
        for i, sig in enumerate(self.signals):
            if sig.description.strip().upper() in wanted:
                return i
        raise MalformedHeader(
            f"record {self.record_name}: no signal described as {lead!r} "
            f"(have {[s.description for s in self.signals]})"
        )


@dataclass(frozen=True)
class Annotation:
    sample_index: int
    symbol: str
    subtype: int = 0
    channel: int = 0
    num: int = 0
    aux: str | None = None


@dataclass(frozen=True)
class EcgRecord:
    header: RecordHeader
    adu: np.ndarray  # (n_samples, n_signals) integer samples
    annotations: tuple[Annotation, ...] = field(default=())

    @property
    def sampling_rate(self) -> float:
        return self.header.sampling_rate

    def lead_mv(self, index: int) -> np.ndarray:
        sig = self.header.signals[index]
        return adu_to_mv(self.adu[:, index], sig.gain, sig.baseline)


def _int(token: str, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise MalformedHeader(f"non-numeric {what}: {token!r}") from None


def _float(token: str, what: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise MalformedHeader(f"non-numeric {what}: {token!r}") from None


_GAIN_RE = re.compile(r"^([-+0-9.eE]+)(?:\((-?\d+)\))?(?:/(.*))?$")


def _parse_signal_line(line: str) -> SignalSpec:
    tokens = line.split()
    if len(tokens) < 2:
        raise MalformedHeader(f"signal line needs at least file and format: {line!r}")
    file_name = tokens[0]
    fmt_match = re.match(r"^(\d+)", tokens[1])
    if not fmt_match:
        raise MalformedHeader(f"non-numeric format code: {tokens[1]!r}")
    fmt = int(fmt_match.group(1))
    if fmt not in SUPPORTED_FORMATS:
        raise UnsupportedFormat(f"format {fmt} not supported (only {sorted(SUPPORTED_FORMATS)})")

    gain, baseline, units = DEFAULT_GAIN, None, "mV"
    if len(tokens) > 2:
        m = _GAIN_RE.match(tokens[2])
        if not m:
            raise MalformedHeader(f"bad gain field: {tokens[2]!r}")
        gain = _float(m.group(1), "gain")
        if m.group(2) is not None:
            baseline = int(m.group(2))
        if m.group(3):
            units = m.group(3)
        if gain == 0:
            gain = DEFAULT_GAIN  # WFDB: zero gain means uncalibrated, use default
        if gain < 0:
            raise MalformedHeader(f"negative gain: {gain}")
    adc_res = _int(tokens[3], "adc resolution") if len(tokens) > 3 else 12
    adc_zero = _int(tokens[4], "adc zero") if len(tokens) > 4 else 0
    init = _int(tokens[5], "initial value") if len(tokens) > 5 else None
    checksum = _int(tokens[6], "checksum") if len(tokens) > 6 else None
    block = _int(tokens[7], "block size") if len(tokens) > 7 else 0
    desc = " ".join(tokens[8:])
    return SignalSpec(
        file_name=file_name,
        format_code=fmt,
        gain=gain,
        baseline=adc_zero if baseline is None else baseline,
        units=units,
        adc_resolution=adc_res,
        adc_zero=adc_zero,
        initial_value=init,
        checksum=checksum,
        block_size=block,
        description=desc,
    )


def parse_header(text: str) -> RecordHeader:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise MalformedHeader("empty header")
    rec = lines[0].split()
    if len(rec) < 4:
        raise MalformedHeader(f"record line needs name, n_signals, rate, n_samples: {lines[0]!r}")
    name = rec[0]
    if "/" in name:
        raise MalformedHeader(f"multi-segment records are not supported: {name}")
    n_signals = _int(rec[1], "signal count")
    if n_signals < 1:
        raise MalformedHeader(f"record {name}: n_signals must be >= 1, got {n_signals}")
    # "360/..." carries a counter frequency we do not use
    rate = _float(rec[2].split("/")[0], "sampling rate")
    if rate <= 0:
        raise MalformedHeader(f"record {name}: sampling rate must be positive")
    n_samples = _int(rec[3], "sample count")
    if n_samples < 0:
        raise MalformedHeader(f"record {name}: negative sample count")
    sig_lines = lines[1 : 1 + n_signals]
    if len(sig_lines) != n_signals:
        raise MalformedHeader(f"record {name}: expected {n_signals} signal lines, got {len(sig_lines)}")
    signals = tuple(_parse_signal_line(ln) for ln in sig_lines)
    return RecordHeader(name, n_signals, rate, n_samples, signals)


def decode_fmt212(data: bytes, n_samples: int, n_signals: int = 2) -> np.ndarray:
    """Unpack format 212: two 12-bit two's-complement samples per three bytes.

    Returns an int array of shape (n_samples, n_signals); signals are interleaved
    frame by frame in the byte stream.
    """
    total = n_samples * n_signals
    needed = (3 * total + 1) // 2
    if len(data) < needed:
        raise TruncatedStream(f"format 212 needs {needed} bytes for {total} samples, got {len(data)}")
    n_groups = (total + 1) // 2
    raw = np.frombuffer(data, dtype=np.uint8, count=min(len(data), 3 * n_groups))
    if raw.size < 3 * n_groups:
        raw = np.concatenate([raw, np.zeros(3 * n_groups - raw.size, dtype=np.uint8)])
    b = raw.reshape(-1, 3).astype(np.int32)
    out = np.empty(2 * n_groups, dtype=np.int32)
    out[0::2] = b[:, 0] | ((b[:, 1] & 0x0F) << 8)
    out[1::2] = b[:, 2] | ((b[:, 1] & 0xF0) << 4)
    out[out > 2047] -= 4096
    return out[:total].reshape(n_samples, n_signals)


def encode_fmt212(samples: np.ndarray) -> bytes:
    """Inverse of decode_fmt212 (used to build fixtures); odd counts are zero-padded."""
    flat = np.asarray(samples, dtype=np.int64).ravel()
    if flat.size and (flat.min() < -2048 or flat.max() > 2047):
        raise ValueError("format 212 holds 12-bit values in [-2048, 2047]")
    if flat.size % 2:
        flat = np.append(flat, 0)
    u = (flat & 0xFFF).reshape(-1, 2)
    out = np.empty((u.shape[0], 3), dtype=np.uint8)
    out[:, 0] = u[:, 0] & 0xFF
    out[:, 1] = ((u[:, 0] >> 8) & 0x0F) | ((u[:, 1] >> 4) & 0xF0)
    out[:, 2] = u[:, 1] & 0xFF
    return out.tobytes()


def signal_checksum(adu: np.ndarray) -> np.ndarray:
    """Per-channel WFDB checksum: sum of samples mod 65536, as signed 16-bit."""
    s = np.asarray(adu, dtype=np.int64).sum(axis=0) % 65536
    return np.where(s > 32767, s - 65536, s)


def checksum_matches(computed: int, declared: int) -> bool:
    # headers store the checksum signed (MIT-BIH) or unsigned (some writers); compare 16 bits
    return (int(computed) - int(declared)) % 65536 == 0


def verify_signals(header: RecordHeader, adu: np.ndarray) -> None:
    """Check initial values and checksums declared in the header against decoded samples."""
    sums = signal_checksum(adu)
    for i, sig in enumerate(header.signals):
        if sig.initial_value is not None and adu.shape[0] and adu[0, i] != sig.initial_value:
            raise ChecksumMismatch(
                f"{header.record_name} signal {i}: first sample {adu[0, i]} != initial value {sig.initial_value}"
            )
        if sig.checksum is not None and not checksum_matches(sums[i], sig.checksum):
            raise ChecksumMismatch(
                f"{header.record_name} signal {i}: checksum {sums[i]} != header {sig.checksum}"
            )


def _signed_byte(v: int) -> int:
    v &= 0xFF
    return v - 256 if v > 127 else v


def parse_annotations(data: bytes) -> list[Annotation]:
    if len(data) % 2:
        raise TruncatedStream("annotation stream has odd length")
    words = np.frombuffer(data, dtype="<u2")
    anns: list[dict] = []
    t = 0
    num = chan = 0
    i = 0
    n = len(words)
    while True:
        if i >= n:
            raise TruncatedStream("annotation stream ended without terminating zero word")
        w = int(words[i])
        i += 1
        if w == 0:
            break
        code, interval = w >> 10, w & 0x3FF
        if code == SKIP:
            if i + 2 > n:
                raise TruncatedStream("SKIP without its 32-bit interval")
            skip = (int(words[i]) << 16) | int(words[i + 1])
            if skip >= 1 << 31:
                skip -= 1 << 32
            t += skip
            i += 2
        elif code == NUM:
            num = _signed_byte(interval)
            if anns:
                anns[-1]["num"] = num
        elif code == SUB:
            if anns:
                anns[-1]["subtype"] = _signed_byte(interval)
        elif code == CHN:
            chan = interval
            if anns:
                anns[-1]["channel"] = chan
        elif code == AUX:
            nwords = (interval + 1) // 2
            if i + nwords > n:
                raise TruncatedStream("AUX string runs past end of stream")
            raw = words[i : i + nwords].tobytes()[:interval]
            i += nwords
            if anns:
                anns[-1]["aux"] = raw.decode("latin-1").rstrip("\x00")
        else:
            if code not in ANNOTATION_SYMBOLS:
                raise UnknownCode(f"annotation code {code} at word {i - 1}")
            t += interval
            anns.append(dict(sample_index=t, symbol=ANNOTATION_SYMBOLS[code], num=num, channel=chan))
    return [Annotation(**a) for a in anns]


def encode_annotations(annotations: list[Annotation]) -> bytes:
    """Serialize annotations to the MIT stream format (fixtures and synthetic records)."""
    words: list[int] = []
    prev_t = 0
    num = chan = 0
    for a in annotations:
        if a.symbol not in SYMBOL_CODES:
            raise UnknownCode(f"no MIT code for symbol {a.symbol!r}")
        dt = a.sample_index - prev_t
        if dt < 0 or dt > 1023:
            d = dt & 0xFFFFFFFF
            words += [SKIP << 10, d >> 16, d & 0xFFFF]
            dt = 0
        words.append((SYMBOL_CODES[a.symbol] << 10) | dt)
        prev_t = a.sample_index
        if a.subtype:
            words.append((SUB << 10) | (a.subtype & 0xFF))
        if a.channel != chan:
            chan = a.channel
            words.append((CHN << 10) | (chan & 0x3FF))
        if a.num != num:
            num = a.num
            words.append((NUM << 10) | (num & 0xFF))
        if a.aux:
            raw = a.aux.encode("latin-1")
            words.append((AUX << 10) | len(raw))
            if len(raw) % 2:
                raw += b"\x00"
            words += np.frombuffer(raw, dtype="<u2").tolist()
    words.append(0)
    return np.asarray(words, dtype="<u2").tobytes()


def adu_to_mv(samples, gain: float, baseline: float) -> np.ndarray:
    if gain <= 0:
        raise ValueError("gain must be positive")
    return (np.asarray(samples, dtype=np.float64) - baseline) / gain


def read_record(path: str | Path, annotator: str | None = "atr", verify: bool = True) -> EcgRecord:
    """Read `<path>.hea`, its format-212 signal file and optionally `<path>.<annotator>`."""
    path = Path(path)
    header = parse_header(path.with_suffix(".hea").read_text(encoding="latin-1"))
    files = {s.file_name for s in header.signals}
    if len(files) != 1:
        raise UnsupportedFormat(f"{header.record_name}: signals split over several files {sorted(files)}")
    data = (path.parent / files.pop()).read_bytes()
    adu = decode_fmt212(data, header.n_samples, header.n_signals)
    if verify:
        verify_signals(header, adu)
    anns: tuple[Annotation, ...] = ()
    if annotator:
        ann_path = path.with_suffix("." + annotator)
        anns = tuple(parse_annotations(ann_path.read_bytes()))
    return EcgRecord(header, adu, anns)


def write_record(path: str | Path, adu: np.ndarray, rate: float, descriptions: list[str],
                 gain: float = DEFAULT_GAIN, baseline: int = 0,
                 annotations: list[Annotation] | None = None) -> None:
    """Write a single-file format-212 record; counterpart of read_record for fixtures."""
    path = Path(path)
    adu = np.asarray(adu, dtype=np.int64)
    if adu.ndim == 1:
        adu = adu[:, None]
    n, k = adu.shape
    name = path.name
    dat = f"{name}.dat"
    (path.parent / dat).write_bytes(encode_fmt212(adu))
    sums = signal_checksum(adu)
    lines = [f"{name} {k} {rate:g} {n}"]
    for i in range(k):
        init = int(adu[0, i]) if n else 0
        lines.append(
            f"{dat} 212 {gain:g}({baseline})/mV 12 {baseline} {init} {int(sums[i])} 0 {descriptions[i]}"
        )
    path.with_suffix(".hea").write_text("\n".join(lines) + "\n")
    if annotations is not None:
        path.with_suffix(".atr").write_bytes(encode_annotations(annotations))


def load_beat_csv(path: str | Path, m: int = 5) -> tuple[np.ndarray, np.ndarray]:
    """Read rows of `L` samples followed by an integer label in [0, m).

    Returns (beats, labels) with shapes (n, L) and (n,); an empty file gives
    zero rows.
    """
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or all(not c.strip() for c in row):
                continue
            rows.append((lineno, row))
    if not rows:
        return np.zeros((0, 0)), np.zeros(0, dtype=np.int64)
    width = len(rows[0][1])
    if width < 2:
        raise RaggedRows(f"{path}:{rows[0][0]}: a row needs at least one sample and a label")
    beats = np.empty((len(rows), width - 1))
    labels = np.empty(len(rows), dtype=np.int64)
    for k, (lineno, row) in enumerate(rows):
        if len(row) != width:
            raise RaggedRows(f"{path}:{lineno}: {len(row)} columns, expected {width}")
        try:
            beats[k] = [float(c) for c in row[:-1]]
            label = float(row[-1])
        except ValueError as exc:
            raise RaggedRows(f"{path}:{lineno}: {exc}") from None
        if label != int(label) or not 0 <= label < m:
            raise LabelOutOfRange(f"{path}:{lineno}: label {row[-1]} not in [0, {m})")
        labels[k] = int(label)
    return beats, labels


def write_beat_csv(path: str | Path, beats: np.ndarray, labels: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for x, y in zip(beats, labels):
            w.writerow([f"{v:.9g}" for v in x] + [int(y)])
