"""Coordinator/worker runtime with five-phase timing and byte accounting.

Frames are ``>I`` payload length, one tag byte, then the payload:

======  =============  =====================================================
tag     name           payload
======  =============  =====================================================
0x01    SHARES         share bytes (u32 index, u8 pair count, matrices)
0x02    OBSERVATION    u32 index, matrix
0x03    COMPUTE_TIME   u32 index, little-endian f64 seconds
0x04    ACK            u32 index (shares received and parsed)
0x05    FETCH          empty (request the stored observation)
0x7E    ERROR          utf-8 message
0x7F    SHUTDOWN       empty
======  =============  =====================================================

A worker answers SHARES with ACK, computes, then sends COMPUTE_TIME; it sends
its OBSERVATION on FETCH.  The phases are: encode (T_EC), upload until every
ACK (T_UL), mean reported compute time (T_C), fetch from the first Q workers
to finish (T_DL) and decode (T_DC).
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import queue
import socket
import struct
import threading
import time
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .costs import cost_dl, cost_ul_branch
from .errors import PipelineError, ProtocolError, SDMMError, StragglerError
from .ffield import FieldConfig, make_rng
from .matrix import FieldMatrix, mat_mul_naive
from .schemes import (SchemeSpec, ServerObservation, ServerShare, decode, encode, make_plan,
                      recovery_threshold, server_compute)

log = logging.getLogger(__name__)

TAG_SHARES = 0x01
TAG_OBSERVATION = 0x02
TAG_COMPUTE_TIME = 0x03
TAG_ACK = 0x04
TAG_FETCH = 0x05
TAG_ERROR = 0x7E
TAG_SHUTDOWN = 0x7F
KNOWN_TAGS = {TAG_SHARES, TAG_OBSERVATION, TAG_COMPUTE_TIME, TAG_ACK, TAG_FETCH, TAG_ERROR, TAG_SHUTDOWN}

FRAME_HEADER = 5
MAX_FRAME = 1 << 34
PORT_BASE_ENV = "CSA_SDMM_PORT_BASE"
DEFAULT_PORT_BASE = 47000
DEFAULT_TIMEOUT = 120.0
DEFAULT_VERIFY_LIMIT = 2 * 10 ** 8


# -- framing ----------------------------------------------------------------------


def encode_frame(tag: int, payload: bytes = b"") -> bytes:
    return struct.pack(">IB", len(payload), tag) + payload


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(min(n - len(buf), 1 << 20))
        if not chunk:
            raise ConnectionError("peer closed the connection")
        buf.extend(chunk)
    return bytes(buf)


def read_frame(sock: socket.socket) -> tuple[int, bytes]:
    """Read one frame; raises ProtocolError on an unknown tag or oversized length."""
    length, tag = struct.unpack(">IB", _recv_exact(sock, FRAME_HEADER))
    if tag not in KNOWN_TAGS:
        raise ProtocolError(f"unknown frame tag 0x{tag:02x}")
    if length > MAX_FRAME:
        raise ProtocolError(f"frame length {length} exceeds limit")
    return tag, _recv_exact(sock, length) if length else b""


def share_overhead(share: ServerShare) -> int:
    """Non-element bytes of a SHARES frame: frame, share and matrix headers."""
    return FRAME_HEADER + 5 + 16 * len(share.pairs)


OBSERVATION_OVERHEAD = FRAME_HEADER + 4 + 8


def parse_address(addr: str) -> tuple[str, int]:
    host, _, port = addr.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"worker address must look like host:port, got {addr!r}")
    return host, int(port)


def default_worker_addresses(N: int, host: str = "127.0.0.1") -> list[str]:
    base = int(os.environ.get(PORT_BASE_ENV, DEFAULT_PORT_BASE))
    return [f"{host}:{base + i}" for i in range(N)]


# -- worker -----------------------------------------------------------------------


def serve_connection(sock: socket.socket, field: FieldConfig, multiplier: str = "naive") -> bool:
    """Handle one coordinator connection. Returns True on SHUTDOWN."""
    observation: ServerObservation | None = None
    try:
        while True:
            try:
                tag, payload = read_frame(sock)
            except ConnectionError:
                return False
            if tag == TAG_SHUTDOWN:
                return True
            if tag == TAG_SHARES:
                share = ServerShare.from_bytes(field, payload)
                idx = struct.pack(">I", share.server_index)
                sock.sendall(encode_frame(TAG_ACK, idx))
                t0 = time.perf_counter()
                observation = server_compute(share, multiplier)
                dt = time.perf_counter() - t0
                sock.sendall(encode_frame(TAG_COMPUTE_TIME, idx + struct.pack("<d", dt)))
            elif tag == TAG_FETCH:
                if observation is None:
                    raise ProtocolError("FETCH before any SHARES")
                sock.sendall(encode_frame(TAG_OBSERVATION, observation.to_bytes()))
            else:
                raise ProtocolError(f"unexpected frame tag 0x{tag:02x} at worker")
    except (ProtocolError, ValueError, SDMMError, struct.error) as exc:
        try:
            sock.sendall(encode_frame(TAG_ERROR, str(exc).encode()))
        except OSError:
            pass
        log.warning("protocol error, closing connection: %s", exc)
        return False
    except OSError:
        return False
    finally:
        try:
            sock.close()
        except OSError:
            pass


def worker_serve(listen_address: str, field: FieldConfig | None = None, multiplier: str = "naive",
                 ready: threading.Event | None = None) -> int:
    """Accept coordinator connections until a SHUTDOWN frame arrives; returns 0."""
    field = field or FieldConfig()
    host, port = parse_address(listen_address)
    with socket.create_server((host, port), reuse_port=False) as srv:
        if ready is not None:
            ready.set()
        log.info("worker listening on %s:%d", host, port)
        while True:
            conn, _ = srv.accept()
            if serve_connection(conn, field, multiplier):
                return 0


# -- coordinator --------------------------------------------------------------------


@dataclass
class TimingReport:
    """Measured phase times (seconds) and exact byte counts of one run."""

    spec: SchemeSpec
    shape: tuple[int, int, int]
    padded_shape: tuple[int, int, int]
    seed: int
    t_ec: float
    t_ul: float
    t_c_avg: float
    t_dl: float
    t_dc: float
    bytes_up: int
    bytes_down: int
    payload_up: int
    payload_down: int
    per_server_compute: dict[int, float] = dc_field(default_factory=dict)
    responders: tuple[int, ...] = ()
    verified: bool | None = None
    output_digest: str = ""
    iterations: int = 1

    @property
    def t_total(self) -> float:
        return self.t_ec + self.t_ul + self.t_c_avg + self.t_dl + self.t_dc

    @property
    def ul_ratio(self) -> Fraction:
        m, n, p = self.padded_shape
        return Fraction(self.payload_up, 8 * n * (m + p))

    @property
    def dl_ratio(self) -> Fraction:
        m, _, p = self.padded_shape
        return Fraction(self.payload_down, 8 * m * p)

    def expected_ul(self) -> Fraction:
        m, _, p = self.padded_shape
        return cost_ul_branch(self.spec, Fraction(m, p), self.spec.b)

    def expected_dl(self) -> Fraction:
        return cost_dl(self.spec)

    def as_dict(self) -> dict:
        m, n, p = self.padded_shape
        return {
            "scheme": self.spec.label,
            "m": m, "n": n, "p": p,
            "t_ec": self.t_ec, "t_ul": self.t_ul, "t_c_avg": self.t_c_avg,
            "t_dl": self.t_dl, "t_dc": self.t_dc, "t_total": self.t_total,
            "bytes_up": self.bytes_up, "bytes_down": self.bytes_down,
            "payload_up": self.payload_up, "payload_down": self.payload_down,
            "ul_ratio": str(self.ul_ratio), "dl_ratio": str(self.dl_ratio),
            "seed": self.seed, "verified": self.verified, "output_digest": self.output_digest,
        }


def pad_multiple(x: int, k: int) -> int:
    return -(-x // k) * k


def pad_matrix(M: FieldMatrix, rows: int, cols: int) -> FieldMatrix:
    if (rows, cols) == M.shape:
        return M
    data = M.field.zeros((rows, cols))
    data[:M.rows, :M.cols] = M.data
    return FieldMatrix(M.field, data)


class _Link:
    """One coordinator-side connection with a background frame reader."""

    def __init__(self, index: int, sock: socket.socket, events: queue.Queue, thread: threading.Thread | None = None):
        self.index = index
        self.sock = sock
        self.worker_thread = thread
        self.reader = threading.Thread(target=self._read, args=(events,), daemon=True)
        self.reader.start()

    def _read(self, events: queue.Queue):
        while True:
            try:
                tag, payload = read_frame(self.sock)
            except (OSError, ConnectionError, ProtocolError, struct.error) as exc:
                events.put((self.index, None, exc))
                return
            events.put((self.index, tag, payload))

    def send(self, data: bytes):
        self.sock.sendall(data)

    def close(self, shutdown: bool):
        try:
            if shutdown:
                self.sock.sendall(encode_frame(TAG_SHUTDOWN))
        except OSError:
            pass
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()
        if self.worker_thread is not None:
            self.worker_thread.join(timeout=5)


def _open_links(N: int, workers, field: FieldConfig, multiplier: str, timeout: float, events: queue.Queue) -> list[_Link]:
    links = []
    if workers in (None, "loopback"):
        for i in range(1, N + 1):
            ours, theirs = socket.socketpair()
            t = threading.Thread(target=serve_connection, args=(theirs, field, multiplier), daemon=True)
            t.start()
            links.append(_Link(i, ours, events, t))
        return links
    addresses = list(workers)
    if len(addresses) < N:
        raise ValueError(f"need {N} worker addresses, got {len(addresses)}")
    for i, addr in enumerate(addresses[:N], start=1):
        sock = socket.create_connection(parse_address(addr), timeout=timeout)
        sock.settimeout(None)
        links.append(_Link(i, sock, events))
    return links


class _Inbox:
    """Demultiplexes reader events by tag, raising on worker errors."""

    def __init__(self, events: queue.Queue, timeout: float):
        self.events = events
        self.timeout = timeout
        self.stash: dict[int, list[tuple[int, bytes]]] = {}

    def wait(self, tag: int, pending: set[int], count: int | None = None) -> list[tuple[int, bytes]]:
        """Collect ``count`` (default all of ``pending``) frames with ``tag``."""
        need = len(pending) if count is None else count
        got = []
        for idx, payload in list(self.stash.get(tag, [])):
            if idx in pending and len(got) < need:
                got.append((idx, payload))
                pending.discard(idx)
                self.stash[tag].remove((idx, payload))
        deadline = time.monotonic() + self.timeout
        while len(got) < need:
            left = deadline - time.monotonic()
            try:
                idx, t, payload = self.events.get(timeout=max(left, 0.0))
            except queue.Empty:
                raise StragglerError(min(pending), self.timeout) from None
            if t is None:
                raise ProtocolError(f"server {idx}: connection failed: {payload}")
            if t == TAG_ERROR:
                raise ProtocolError(f"server {idx} reported: {payload.decode(errors='replace')}")
            if t == tag and idx in pending:
                got.append((idx, payload))
                pending.discard(idx)
            else:
                self.stash.setdefault(t, []).append((idx, payload))
        return got


def coordinate_run(spec: SchemeSpec, shape: tuple[int, int, int], workers="loopback", seed: int = 0,
                   field: FieldConfig | None = None, multiplier: str = "naive", verify: bool = True,
                   verify_limit: int = DEFAULT_VERIFY_LIMIT, timeout: float = DEFAULT_TIMEOUT,
                   pad_to: tuple[int, int] | None = None, shutdown_workers: bool | None = None) -> TimingReport:
    """Run encode, upload, compute, download and decode once.

    Args:
        spec: scheme instance.
        shape: (m, n, p) of A (m x n) and B (n x p), drawn uniformly from ``seed``.
        workers: "loopback" for in-process workers, or a list of host:port strings.
        seed: seed for inputs, evaluation points and noise.
        field: defaults to F_(2^61-1).
        multiplier: server kernel, "naive" or "hybridWS".
        verify: compare the decoded product with a direct product when
            m*n*p <= verify_limit.
        timeout: seconds to wait for any worker response.
        pad_to: (row multiple of m, column multiple of p); defaults to the
            scheme's own partition factors.
        shutdown_workers: send SHUTDOWN at the end (default: only for loopback).

    Raises:
        StragglerError: a worker missed the timeout.
        ProtocolError: a worker sent an error or malformed frame.
        PipelineError: the decoded product differs from the direct product.
    """
    field = field or FieldConfig()
    m, n, p = shape
    rng = make_rng(seed)
    A0 = FieldMatrix.random(field, m, n, rng)
    B0 = FieldMatrix.random(field, n, p, rng)
    vA, hB = pad_to or spec.partition_factors
    mp, pp = pad_multiple(m, vA), pad_multiple(p, hB)
    A, B = pad_matrix(A0, mp, n), pad_matrix(B0, n, pp)
    N, Q = spec.N, recovery_threshold(spec)
    loopback = workers in (None, "loopback")
    if shutdown_workers is None:
        shutdown_workers = loopback

    events: queue.Queue = queue.Queue()
    links = _open_links(N, workers, field, multiplier, timeout, events)
    inbox = _Inbox(events, timeout)
    try:
        t0 = time.perf_counter()
        plan = make_plan(spec, rng, field)
        shares = encode(A, B, spec, plan, rng)
        t_ec = time.perf_counter() - t0

        t0 = time.perf_counter()
        frames = [encode_frame(TAG_SHARES, s.to_bytes()) for s in shares]
        senders = [threading.Thread(target=link.send, args=(fr,)) for link, fr in zip(links, frames)]
        for th in senders:
            th.start()
        for th in senders:
            th.join()
        inbox.wait(TAG_ACK, set(range(1, N + 1)))
        t_ul = time.perf_counter() - t0
        bytes_up = sum(len(fr) for fr in frames)
        payload_up = sum(len(fr) - share_overhead(s) for fr, s in zip(frames, shares))

        done = inbox.wait(TAG_COMPUTE_TIME, set(range(1, N + 1)), count=Q)
        compute = {idx: struct.unpack("<d", pl[4:12])[0] for idx, pl in done}
        first_q = [idx for idx, _ in done]

        t0 = time.perf_counter()
        for idx in first_q:
            links[idx - 1].send(encode_frame(TAG_FETCH))
        got = inbox.wait(TAG_OBSERVATION, set(first_q))
        t_dl = time.perf_counter() - t0
        bytes_down = sum(FRAME_HEADER + len(pl) for _, pl in got)
        payload_down = sum(FRAME_HEADER + len(pl) - OBSERVATION_OVERHEAD for _, pl in got)
        observations = [ServerObservation.from_bytes(field, pl) for _, pl in got]

        t0 = time.perf_counter()
        try:
            C = decode(spec, plan, observations)
        except SDMMError as exc:
            raise PipelineError(f"decode failed: {exc}") from exc
        t_dc = time.perf_counter() - t0

        rest = set(range(1, N + 1)) - set(compute)
        if rest:
            for idx, pl in inbox.wait(TAG_COMPUTE_TIME, rest):
                compute[idx] = struct.unpack("<d", pl[4:12])[0]
    finally:
        for link in links:
            link.close(shutdown_workers)

    C = FieldMatrix(field, C.data[:m, :p].copy())
    verified = None
    if verify and m * n * p <= verify_limit:
        verified = C == mat_mul_naive(A0, B0)
        if not verified:
            raise PipelineError(f"{spec.label}: decoded product differs from A @ B")
    digest = hashlib.sha256(C.to_bytes()).hexdigest()
    return TimingReport(
        spec=spec, shape=(m, n, p), padded_shape=(mp, n, pp), seed=seed,
        t_ec=t_ec, t_ul=t_ul, t_c_avg=float(np.mean(list(compute.values()))), t_dl=t_dl, t_dc=t_dc,
        bytes_up=bytes_up, bytes_down=bytes_down, payload_up=payload_up, payload_down=payload_down,
        per_server_compute=dict(sorted(compute.items())), responders=tuple(sorted(first_q)),
        verified=verified, output_digest=digest,
    )


# -- scenarios ----------------------------------------------------------------------


GROWTH = Fraction(13, 10)


@dataclass
class ScenarioSpec:
    """Growth experiment over (m_k, n_k, p_k) = ceil(c0 * 1.3**k)."""

    scenario_id: str
    N: int
    ell: int
    m0: int
    n0: int
    p0: int
    schemes: list[SchemeSpec]
    steps: Sequence[int] = tuple(range(10))
    iterations: int = 10
    growth: Fraction = GROWTH
    seed: int = 0

    def shape(self, k: int) -> tuple[int, int, int]:
        g = self.growth ** k
        return tuple(math.ceil(c * g) for c in (self.m0, self.n0, self.p0))

    @property
    def pad_to(self) -> tuple[int, int]:
        vA = math.lcm(*(s.partition_factors[0] for s in self.schemes))
        hB = math.lcm(*(s.partition_factors[1] for s in self.schemes))
        return vA, hB

    def padded_shape(self, k: int) -> tuple[int, int, int]:
        m, n, p = self.shape(k)
        vA, hB = self.pad_to
        return pad_multiple(m, vA), n, pad_multiple(p, hB)

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id, "N": self.N, "ell": self.ell,
            "m0": self.m0, "n0": self.n0, "p0": self.p0,
            "schemes": [s.to_dict() for s in self.schemes], "steps": list(self.steps),
            "iterations": self.iterations, "growth": str(self.growth), "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        return cls(
            scenario_id=str(d.get("scenario_id", "custom")), N=d["N"], ell=d["ell"],
            m0=d["m0"], n0=d["n0"], p0=d["p0"],
            schemes=[SchemeSpec.from_dict(s) for s in d["schemes"]],
            steps=tuple(d.get("steps", range(10))), iterations=d.get("iterations", 10),
            growth=Fraction(d.get("growth", "13/10")), seed=d.get("seed", 0),
        )


def scenario(scenario_id: int, n0: int = 10, steps: Iterable[int] = range(10), iterations: int = 10,
             seed: int = 0) -> ScenarioSpec:
    """The two reference scenarios (m0 = 90, p0 = 1000, n0 in {10, 100})."""
    if scenario_id == 1:
        N, ell = 15, 4
        schemes = [SchemeSpec.scsa(N, ell, 1), SchemeSpec.uscsa(N, ell, 2, 3, 2, 0),
                   SchemeSpec.gscsa(N, ell, 2, 3, 2, 1)]
    elif scenario_id == 2:
        N, ell = 18, 2
        schemes = [SchemeSpec.scsa(N, ell, 1), SchemeSpec.uscsa(N, ell, 3, 4, 3, 0),
                   SchemeSpec.gscsa(N, ell, 3, 4, 3, 1)]
    else:
        raise ValueError(f"unknown scenario {scenario_id}; use 1, 2 or a config file")
    return ScenarioSpec(str(scenario_id), N, ell, 90, n0, 1000, schemes, tuple(steps), iterations, GROWTH, seed)


SCENARIO_HEADER = ["scheme", "k", "m", "n", "p", "t_ec", "t_ul", "t_c_avg", "t_dl", "t_dc", "t_total",
                   "bytes_up", "bytes_down", "seed"]


def run_scenario(sc: ScenarioSpec, out_path: str | None = None, workers="loopback",
                 field: FieldConfig | None = None, multiplier: str = "naive", verify: bool = True,
                 verify_limit: int = DEFAULT_VERIFY_LIMIT, timeout: float = DEFAULT_TIMEOUT,
                 config: dict | None = None) -> list[dict]:
    """Run every (step, scheme) cell ``iterations`` times and write mean times.

    A failing cell becomes a ``# FAILED`` comment line; the run goes on.
    """
    rows = []
    lines = [f"# config: {json.dumps(config if config is not None else sc.to_dict(), sort_keys=True)}"]
    for k in sc.steps:
        shape = sc.shape(k)
        for spec in sc.schemes:
            cell_seed = sc.seed + 1000 * k
            try:
                reps = [
                    coordinate_run(spec, shape, workers, cell_seed + it, field, multiplier, verify,
                                   verify_limit, timeout, pad_to=sc.pad_to)
                    for it in range(sc.iterations)
                ]
            except (SDMMError, OSError, ValueError) as exc:
                log.error("cell %s k=%d failed: %s", spec.label, k, exc)
                lines.append(f"# FAILED scheme={spec.label} k={k}: {type(exc).__name__}: {exc}")
                continue
            m, n, p = reps[0].padded_shape
            row = {
                "scheme": spec.label, "k": k, "m": m, "n": n, "p": p,
                **{key: float(np.mean([getattr(r, key) for r in reps]))
                   for key in ("t_ec", "t_ul", "t_c_avg", "t_dl", "t_dc", "t_total")},
                "bytes_up": reps[0].bytes_up, "bytes_down": reps[0].bytes_down, "seed": cell_seed,
            }
            rows.append(row)
            lines.append(None)
    if out_path is not None:
        with open(out_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            fh.write(lines[0] + "\n")
            w.writerow(SCENARIO_HEADER)
            it = iter(rows)
            for line in lines[1:]:
                if line is None:
                    row = next(it)
                    w.writerow([_fmt(row[h]) for h in SCENARIO_HEADER])
                else:
                    fh.write(line + "\n")
    return rows


def _fmt(v):
    return f"{v:.6g}" if isinstance(v, float) else v
