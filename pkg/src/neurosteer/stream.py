"""Real-time streaming: replay a recording over a byte protocol and classify
trigger windows online.

Wire protocol (little-endian): sample frame 'S' | u32 index | 64 x f32;
trigger frame 'T' | u32 index | u8 label; end frame 'E'. Sample indices
are dense; triggers precede the sample frame with the same index.

The client runs exactly two activities: a receiver that parses frames into
a ring buffer and snapshots each classifier window the moment its final
sample arrives, and a consumer that normalizes, predicts, and emits events
in FIFO order over a bounded queue. Ingestion is never dropped: if
classification falls behind, lateness grows but ordering is preserved.
Latency is clocked from the arrival of a window's final sample, since
waiting for the discriminative interval is physics, not overhead.
"""

from __future__ import annotations

import queue
import socket
import struct
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .cnn import Model, predict
from .epochs import WindowSpec, normalize_block
from .errors import (
    ChannelCountMismatch,
    ConnectionLost,
    GapDetected,
    ModelShapeMismatch,
)
from .recording import Recording, TriggerEvent

WIRE_CHANNELS = 64
_SAMPLE_FRAME = struct.Struct("<cI" + "f" * WIRE_CHANNELS)
_TRIGGER_FRAME = struct.Struct("<cIB")
_SAMPLE_BYTES = 1 + 4 + 4 * WIRE_CHANNELS
_TRIGGER_BYTES = 1 + 4 + 1

_RING_CAPACITY = 4096
_REALTIME_BLOCK = 64
_MAX_RATE_BLOCK = 8192


@dataclass(frozen=True)
class PredictionEvent:
    trigger_index: int          # sample index of the originating trigger
    window_index: int           # 0 or 1 for the two overlapping windows
    label: int
    probs: np.ndarray
    latency_ms: float


@dataclass(frozen=True)
class StreamSummary:
    n_events: int
    n_truncated: int            # windows cut off by the end of the stream
    mean_latency_ms: float
    p95_latency_ms: float


def parse_addr(addr: str) -> tuple[str, int]:
    host, _, port = addr.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"address must be host:port, got {addr!r}")
    return host, int(port)


def _sample_block_bytes(data: np.ndarray, start: int, end: int) -> bytes:
    if end <= start:
        return b""
    block = np.empty(
        end - start,
        dtype=np.dtype([("tag", "S1"), ("index", "<u4"), ("values", "<f4", (WIRE_CHANNELS,))]),
    )
    block["tag"] = b"S"
    block["index"] = np.arange(start, end, dtype=np.uint32)
    block["values"] = data[:, start:end].T
    return block.tobytes()


class StreamServer:
    """Replays one recording with its triggers to a single client.

    `realtime` paces samples at the recording's nominal rate against an
    absolute schedule (so pacing error does not accumulate); otherwise the
    stream runs as fast as the socket allows.
    """

    def __init__(self, rec: Recording, triggers: Sequence[TriggerEvent],
                 host: str = "127.0.0.1", port: int = 0, realtime: bool = False):
        if rec.n_samples > 0 and rec.n_channels != WIRE_CHANNELS:
            raise ChannelCountMismatch(
                f"wire protocol carries {WIRE_CHANNELS} channels, recording has {rec.n_channels}"
            )
        self.rec = rec
        self.triggers = list(triggers)
        self.realtime = realtime
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self.sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self.sock.bind((host, port))
        self.sock.listen(1)
        self.port = self.sock.getsockname()[1]

    def serve_once(self) -> None:
        """Accept one client, stream every frame in index order, then close."""
        conn, _ = self.sock.accept()
        block = _REALTIME_BLOCK if self.realtime else _MAX_RATE_BLOCK
        fs = self.rec.sample_rate
        data = self.rec.data
        n = self.rec.n_samples
        try:
            t0 = time.perf_counter()
            ti = 0
            for block_start in range(0, n, block):
                block_end = min(block_start + block, n)
                buf = bytearray()
                cursor = block_start
                while ti < len(self.triggers) and self.triggers[ti].sample_index < block_end:
                    trig = self.triggers[ti]
                    buf += _sample_block_bytes(data, cursor, trig.sample_index)
                    buf += _TRIGGER_FRAME.pack(b"T", trig.sample_index, trig.label)
                    cursor = trig.sample_index
                    ti += 1
                buf += _sample_block_bytes(data, cursor, block_end)
                conn.sendall(bytes(buf))
                if self.realtime:
                    deadline = t0 + block_end / fs
                    now = time.perf_counter()
                    if deadline > now:
                        time.sleep(deadline - now)
            conn.sendall(b"E")
        except (BrokenPipeError, ConnectionResetError, OSError) as exc:
            raise ConnectionLost(f"client connection lost: {exc}") from exc
        finally:
            conn.close()
            self.sock.close()


class _Receiver:
    """Parses frames, keeps the ring buffer, and snapshots completed windows."""

    def __init__(self, sock: socket.socket, spec: WindowSpec, out: queue.Queue):
        self.sock = sock
        self.spec = spec
        self.out = out
        self.ring = np.zeros((_RING_CAPACITY, WIRE_CHANNELS))
        self.expected = 0
        self.due: dict[int, list[tuple[int, int]]] = {}
        self.registered = 0
        self.completed = 0
        self.error: Exception | None = None

    def run(self) -> None:
        try:
            self._loop()
        except Exception as exc:  # surfaced to the consumer after drain
            self.error = exc
        finally:
            self.out.put(None)

    def _loop(self) -> None:
        buf = bytearray()
        ended = False
        while not ended:
            chunk = self.sock.recv(1 << 16)
            if not chunk:
                raise ConnectionLost("stream closed before the end frame")
            buf += chunk
            pos = 0
            while pos < len(buf):
                tag = buf[pos:pos + 1]
                if tag == b"S":
                    if len(buf) - pos < _SAMPLE_BYTES:
                        break
                    idx = int.from_bytes(buf[pos + 1:pos + 5], "little")
                    row = np.frombuffer(buf, dtype="<f4", count=WIRE_CHANNELS,
                                        offset=pos + 5).astype(np.float64)
                    pos += _SAMPLE_BYTES
                    self._on_sample(idx, row)
                elif tag == b"T":
                    if len(buf) - pos < _TRIGGER_BYTES:
                        break
                    _, idx, label = _TRIGGER_FRAME.unpack_from(buf, pos)
                    pos += _TRIGGER_BYTES
                    self._on_trigger(idx)
                elif tag == b"E":
                    pos += 1
                    ended = True
                    break
                else:
                    raise ConnectionLost(f"unknown frame tag {tag!r}")
            del buf[:pos]

    def _on_trigger(self, idx: int) -> None:
        for wi, (_, end) in enumerate(self.spec.offsets):
            self.due.setdefault(idx + end - 1, []).append((idx, wi))
            self.registered += 1

    def _on_sample(self, idx: int, row: np.ndarray) -> None:
        if idx != self.expected:
            raise GapDetected(f"expected sample {self.expected}, received {idx}")
        self.expected += 1
        self.ring[idx % _RING_CAPACITY] = row
        ready = self.due.pop(idx, None)
        if ready is None:
            return
        t_complete = time.perf_counter()
        for trig_idx, wi in ready:
            start, _ = self.spec.offsets[wi]
            gather = (trig_idx + start
                      + self.spec.decimation * np.arange(self.spec.out_len)) % _RING_CAPACITY
            raw = self.ring[gather].copy()
            self.completed += 1
            self.out.put((trig_idx, wi, raw, t_complete))


def classify_stream(addr: str, model: Model, spec: WindowSpec = WindowSpec(),
                    timeout: float = 60.0) -> tuple[list[PredictionEvent], StreamSummary]:
    """Consume a stream, predicting each classifier window as it completes.

    Predictions are bit-identical to offline `predict` on the same data:
    the wire carries the same float32 payload as the container file, and
    extraction, normalization, and the forward pass share one code path.
    Returns all events in completion order plus the end-of-stream summary.
    """
    if (model.arch.input_len, model.arch.input_channels) != (spec.out_len, WIRE_CHANNELS):
        raise ModelShapeMismatch(
            f"model expects ({model.arch.input_len}, {model.arch.input_channels}), "
            f"stream produces ({spec.out_len}, {WIRE_CHANNELS})"
        )
    host, port = parse_addr(addr)
    sock = socket.create_connection((host, port), timeout=timeout)
    out: queue.Queue = queue.Queue(maxsize=4096)
    receiver = _Receiver(sock, spec, out)
    thread = threading.Thread(target=receiver.run, name="stream-receiver", daemon=True)
    events: list[PredictionEvent] = []
    try:
        thread.start()
        while True:
            item = out.get()
            if item is None:
                break
            trig_idx, wi, raw, t_complete = item
            label, probs = predict(model, normalize_block(raw))
            latency_ms = (time.perf_counter() - t_complete) * 1e3
            events.append(PredictionEvent(trig_idx, wi, label, probs, latency_ms))
        thread.join()
        if receiver.error is not None:
            raise receiver.error
    finally:
        sock.close()
    truncated = receiver.registered - receiver.completed
    if events:
        lat = np.array([e.latency_ms for e in events])
        summary = StreamSummary(len(events), truncated,
                                float(lat.mean()), float(np.percentile(lat, 95)))
    else:
        summary = StreamSummary(0, truncated, 0.0, 0.0)
    return events, summary


def write_events_csv(events: Sequence[PredictionEvent], path: str | Path) -> None:
    lines = ["trigger_index,window_index,label,p0,p1,p2,latency_ms"]
    for e in events:
        probs = ",".join(f"{p:.10g}" for p in e.probs)
        lines.append(f"{e.trigger_index},{e.window_index},{e.label},{probs},"
                     f"{e.latency_ms:.3f}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")
