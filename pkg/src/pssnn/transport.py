"""Party runtime and message fabric.

Ordered point-to-point channels among n parties, P1-centered gather/scatter
collectives, and exact communication accounting.  Two fabrics exist: an
in-memory simulation (threads + FIFO queues, optional simulated RTT) and a
localhost TCP mesh.  Both move the same little-endian u64 payloads, so a
protocol run produces byte-identical transcripts on either.

Round accounting keeps two counters per party and phase:

* flights: one-way synchronized exchanges (a gather is 1, a scatter is 1);
* rounds: incremented when a party blocks on a receive after having sent,
  which matches the usual round tallies for mask-open-redistribute protocols
  (gather at P1 followed by scatter is 1 round for everyone but P1).

Protocol-level round claims are checked against `rounds` as observed by a
non-P1 party.
"""

import hashlib
import queue
import socket
import struct
import threading
import time

import numpy as np

PHASE_OFFLINE = "offline"
PHASE_ONLINE = "online"

_MAGIC = b"PSS1"
_HEADER = struct.Struct("<4sBI")
_PHASE_CODE = {PHASE_OFFLINE: 0, PHASE_ONLINE: 1}
_PHASE_NAME = {v: k for k, v in _PHASE_CODE.items()}


class TransportError(Exception):
    pass


class PeerDisconnected(TransportError):
    pass


class CountMismatch(TransportError):
    pass


class Timeout(TransportError):
    pass


class ChannelStats:
    """Per-party communication counters, split by peer and phase."""

    def __init__(self, pid: int):
        self.pid = pid
        # (peer, phase) -> [messages, elements]
        self.sent: dict = {}
        self.recvd: dict = {}
        self.rounds = {PHASE_OFFLINE: 0, PHASE_ONLINE: 0}
        self.flights = {PHASE_OFFLINE: 0, PHASE_ONLINE: 0}
        # elements sent per (protocol tag, phase), for the complexity report
        self.by_tag: dict = {}

    def _bump(self, table, peer, phase, count):
        cell = table.setdefault((peer, phase), [0, 0])
        cell[0] += 1
        cell[1] += count

    def record_send(self, dst, phase, count):
        self._bump(self.sent, dst, phase, count)

    def record_recv(self, src, phase, count):
        self._bump(self.recvd, src, phase, count)

    def elements_sent(self, phase=None) -> int:
        return sum(
            c for (peer, ph), (_, c) in self.sent.items() if phase in (None, ph)
        )

    def elements_recvd(self, phase=None) -> int:
        return sum(
            c for (peer, ph), (_, c) in self.recvd.items() if phase in (None, ph)
        )

    def snapshot(self):
        """Totals tuple for delta-based assertions:
        (sent, recvd, rounds_offline, rounds_online, flights_off, flights_on)."""
        return (
            self.elements_sent(),
            self.elements_recvd(),
            self.rounds[PHASE_OFFLINE],
            self.rounds[PHASE_ONLINE],
            self.flights[PHASE_OFFLINE],
            self.flights[PHASE_ONLINE],
        )

    def csv_rows(self):
        """Rows of sender,receiver,phase,elements,rounds.

        Per-pair rows carry element counts with rounds left 0; one summary
        row per phase (receiver '*') carries this party's round counter.
        """
        rows = []
        for (peer, phase), (_, count) in sorted(self.sent.items()):
            rows.append((self.pid, peer, phase, count, 0))
        for phase in (PHASE_OFFLINE, PHASE_ONLINE):
            rows.append((self.pid, "*", phase, self.elements_sent(phase), self.rounds[phase]))
        return rows


def stats_to_csv(stats_list) -> str:
    lines = ["sender,receiver,phase,elements,rounds"]
    for st in stats_list:
        for row in st.csv_rows():
            lines.append(",".join(str(x) for x in row))
    return "\n".join(lines) + "\n"


class SimFabric:
    """In-memory fabric: one FIFO queue per ordered party pair.

    latency_rtt_ms > 0 delays delivery by half the RTT using wall-clock
    timestamps, which makes request-response wall time scale with rounds.
    """

    def __init__(self, n: int, latency_rtt_ms: float = 0.0):
        self.n = n
        self.one_way = latency_rtt_ms / 2000.0
        self._queues = {
            (i, j): queue.Queue() for i in range(1, n + 1) for j in range(1, n + 1) if i != j
        }

    def send(self, src: int, dst: int, phase: str, payload: bytes):
        self._queues[(src, dst)].put((time.monotonic() + self.one_way, phase, payload))

    def recv(self, dst: int, src: int, timeout: float):
        try:
            ready, phase, payload = self._queues[(src, dst)].get(timeout=timeout)
        except queue.Empty:
            raise Timeout(f"party {dst}: no message from {src} within {timeout}s")
        delay = ready - time.monotonic()
        if delay > 0:
            time.sleep(delay)
        return phase, payload

    def close(self, pid: int):
        pass


class SocketFabric:
    """Full TCP mesh on localhost (or a host:port table).

    Party i accepts connections from lower-numbered parties and dials
    higher-numbered ones; a 4-byte little-endian pid identifies the dialer.
    Wire format per message: magic, phase byte, element count (u32), then
    count little-endian u64 elements.
    """

    def __init__(self, pid: int, hosts, timeout: float = 30.0):
        self.pid = pid
        self.n = len(hosts)
        self.timeout = timeout
        self._socks: dict = {}
        host, port = hosts[pid - 1]
        server = None
        if pid < self.n:
            server = socket.create_server((host, port))
            server.settimeout(timeout)
        # dial lower pids first so their accept loops can pair us up
        for peer in range(1, pid):
            ph, pp = hosts[peer - 1]
            deadline = time.monotonic() + timeout
            while True:
                try:
                    s = socket.create_connection((ph, pp), timeout=timeout)
                    break
                except OSError:
                    if time.monotonic() > deadline:
                        raise Timeout(f"party {pid}: cannot reach party {peer}")
                    time.sleep(0.02)
            s.sendall(struct.pack("<I", pid))
            self._socks[peer] = s
        if server is not None:
            for _ in range(pid + 1, self.n + 1):
                try:
                    s, _ = server.accept()
                except socket.timeout:
                    raise Timeout(f"party {pid}: accept timed out")
                peer = struct.unpack("<I", self._recv_exact(s, 4))[0]
                self._socks[peer] = s
            server.close()
        for s in self._socks.values():
            s.settimeout(timeout)
            s.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)

    @staticmethod
    def _recv_exact(sock, count: int) -> bytes:
        buf = bytearray()
        while len(buf) < count:
            try:
                chunk = sock.recv(count - len(buf))
            except socket.timeout:
                raise Timeout("socket receive timed out")
            if not chunk:
                raise PeerDisconnected("peer closed connection")
            buf.extend(chunk)
        return bytes(buf)

    def send(self, src: int, dst: int, phase: str, payload: bytes):
        header = _HEADER.pack(_MAGIC, _PHASE_CODE[phase], len(payload) // 8)
        self._socks[dst].sendall(header + payload)

    def recv(self, dst: int, src: int, timeout: float):
        sock = self._socks[src]
        magic, phase_code, count = _HEADER.unpack(self._recv_exact(sock, _HEADER.size))
        if magic != _MAGIC:
            raise TransportError(f"bad magic {magic!r} from party {src}")
        payload = self._recv_exact(sock, 8 * count)
        return _PHASE_NAME[phase_code], payload

    def close(self, pid: int):
        for s in self._socks.values():
            s.close()


class PartyRuntime:
    """One party's handle on the fabric: typed sends/recvs, collectives,
    per-party RNG, stats, and a running transcript hash."""

    def __init__(self, pid: int, n: int, fabric, seed: int = 0, timeout: float = 30.0):
        self.pid = pid
        self.n = n
        self.fabric = fabric
        self.timeout = timeout
        self.rng = np.random.Generator(np.random.PCG64(seed + pid))
        self.stats = ChannelStats(pid)
        self.protocol = ""
        self.phase = PHASE_ONLINE
        # tracked per phase so offline generation interleaved into an online
        # protocol cannot swallow an online round increment
        self._sent_since_recv = {PHASE_OFFLINE: False, PHASE_ONLINE: False}
        self._transcript = hashlib.sha256()

    def set_phase(self, phase: str):
        assert phase in (PHASE_OFFLINE, PHASE_ONLINE)
        self.phase = phase

    def tagged(self, name: str):
        """Context manager labeling sends with a protocol name for reports."""
        rt = self

        class _Tag:
            def __enter__(self):
                self.prev = rt.protocol
                rt.protocol = name

            def __exit__(self, *exc):
                rt.protocol = self.prev

        return _Tag()

    def transcript_hash(self) -> str:
        return self._transcript.hexdigest()

    # -- point to point -------------------------------------------------------

    def send(self, dst: int, arr):
        payload = np.ascontiguousarray(np.atleast_1d(arr)).astype("<u8").tobytes()
        self._transcript.update(struct.pack("<III", self.pid, dst, len(payload)))
        self._transcript.update(payload)
        self.fabric.send(self.pid, dst, self.phase, payload)
        self.stats.record_send(dst, self.phase, len(payload) // 8)
        if self.protocol:
            tag = (self.protocol, self.phase)
            self.stats.by_tag[tag] = self.stats.by_tag.get(tag, 0) + len(payload) // 8
        self._sent_since_recv[self.phase] = True

    def recv(self, src: int, count: int = None) -> np.ndarray:
        if self._sent_since_recv[self.phase]:
            self.stats.rounds[self.phase] += 1
            self._sent_since_recv[self.phase] = False
        phase, payload = self.fabric.recv(self.pid, src, self.timeout)
        arr = np.frombuffer(payload, dtype="<u8").astype(np.uint64)
        if count is not None and arr.shape[0] != count:
            raise CountMismatch(f"expected {count} elements from {src}, got {arr.shape[0]}")
        self._transcript.update(struct.pack("<III", src, self.pid, len(payload)))
        self._transcript.update(payload)
        self.stats.record_recv(src, phase, arr.shape[0])
        return arr

    # -- collectives (all n parties call in lockstep) --------------------------

    def gather_at_p1(self, arr):
        """Everyone sends to P1; P1 returns the n arrays (own included)."""
        self.stats.flights[self.phase] += 1
        if self.pid == 1:
            out = [None] * self.n
            out[0] = np.atleast_1d(np.asarray(arr, dtype=np.uint64))
            for src in range(2, self.n + 1):
                out[src - 1] = self.recv(src)
            return out
        self.send(1, arr)
        return None

    def scatter_from_p1(self, per_party=None) -> np.ndarray:
        """P1 sends per_party[i] to party i+1; everyone returns their piece."""
        self.stats.flights[self.phase] += 1
        if self.pid == 1:
            for dst in range(2, self.n + 1):
                self.send(dst, per_party[dst - 1])
            return np.atleast_1d(np.asarray(per_party[0], dtype=np.uint64))
        return self.recv(1)

    def bcast_from_p1(self, arr=None) -> np.ndarray:
        """P1 sends the same array to everyone."""
        self.stats.flights[self.phase] += 1
        if self.pid == 1:
            out = np.atleast_1d(np.asarray(arr, dtype=np.uint64))
            for dst in range(2, self.n + 1):
                self.send(dst, out)
            return out
        return self.recv(1)

    def all_to_all(self, per_dst) -> list:
        """Every party sends per_dst[j] to party j+1; returns the n received
        arrays indexed by source (own contribution passed through)."""
        self.stats.flights[self.phase] += 1
        for dst in range(1, self.n + 1):
            if dst != self.pid:
                self.send(dst, per_dst[dst - 1])
        out = [None] * self.n
        out[self.pid - 1] = np.atleast_1d(np.asarray(per_dst[self.pid - 1], dtype=np.uint64))
        for src in range(1, self.n + 1):
            if src != self.pid:
                out[src - 1] = self.recv(src)
        return out

    def exchange_via_p1(self, arr, combine) -> np.ndarray:
        """Gather at P1, apply combine(list of n arrays) there, broadcast."""
        gathered = self.gather_at_p1(arr)
        if self.pid == 1:
            return self.bcast_from_p1(combine(gathered))
        return self.bcast_from_p1()

    def open_to_all(self, cfg, share) -> np.ndarray:
        """Open a packed share batch: returns the (k, m) secrets everywhere."""
        degree = share.degree

        def combine(values):
            return cfg.reconstruct(np.stack(values), cfg.party_points, degree).ravel()

        flat = self.exchange_via_p1(share.value, combine)
        return flat.reshape(cfg.k, -1)


def run_parties(n, fn, seed: int = 0, latency_rtt_ms: float = 0.0, timeout: float = 30.0):
    """Run fn(runtime) on n threads over a SimFabric; returns [fn results].

    The first exception raised by any party is re-raised in the caller.
    """
    fabric = SimFabric(n, latency_rtt_ms)
    results = [None] * n
    errors = [None] * n

    def worker(pid):
        rt = PartyRuntime(pid, n, fabric, seed=seed, timeout=timeout)
        try:
            results[pid - 1] = fn(rt)
        except BaseException as exc:  # noqa: BLE001 - surfaced to caller
            errors[pid - 1] = exc

    threads = [threading.Thread(target=worker, args=(pid,), daemon=True) for pid in range(1, n + 1)]
    for t in threads:
        t.start()
    for t in threads:
        t.join(timeout=timeout * 4)
        if t.is_alive():
            raise Timeout("party thread did not finish (deadlock?)")
    for exc in errors:
        if exc is not None:
            raise exc
    return results
