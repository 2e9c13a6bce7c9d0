"""
Framed message channels between the servers and the trusted dealer

Frame format: 4-byte little-endian payload length, 2-byte little-endian tag,
payload. Every channel counts bytes and messages per phase and keeps a running
SHA-256 over the frames it sends, so two transports can be compared byte for
byte.
"""
import copy
import hashlib
import logging
import queue
import socket
import struct
import threading
import time
from abc import ABC, abstractmethod
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import IntEnum

from config import Config
from utils.errors import ProtocolError, TransportError

logger = logging.getLogger(__name__)

FRAME_HEADER = struct.Struct('<IH')


class Tag(IntEnum):
    """Message tags"""
    HELLO = 1
    ECHO = 2
    MUL_OPEN = 10
    GC_TABLES = 20
    GC_INPUTS = 21
    GC_DECODE = 22
    GC_RESULT = 23
    GC_OUTPUT_LABELS = 24
    OT_PAIRS = 30
    OT_CHOICES = 31
    OT_LABELS = 32
    OT_SETUP = 33
    OT_REPLY = 34
    OT_CIPHERTEXTS = 35
    TRIPLE_REQUEST = 40
    TRIPLE_BATCH = 41
    COMMAND = 50
    RESULT = 51
    CLOSE = 52


@dataclass
class PhaseMetrics:
    bytes_sent: int = 0
    rounds: int = 0


@dataclass
class ChannelMetrics:
    """Byte and message counters of one channel end"""
    bytes_sent: int = 0
    bytes_received: int = 0
    rounds: int = 0
    gate_table_bytes: int = 0
    phases: dict = field(default_factory=dict)
    current_phase: str = 'setup'
    _transcript: object = field(default_factory=hashlib.sha256, repr=False)

    def record_send(self, frame):
        self.bytes_sent += len(frame)
        self.rounds += 1
        phase = self.phases.setdefault(self.current_phase, PhaseMetrics())
        phase.bytes_sent += len(frame)
        phase.rounds += 1
        self._transcript.update(frame)

    def record_receive(self, size):
        self.bytes_received += size

    @property
    def transcript_digest(self):
        return self._transcript.hexdigest()

    def snapshot(self):
        """A consistent copy that later traffic does not touch"""
        clone = ChannelMetrics(
            bytes_sent=self.bytes_sent,
            bytes_received=self.bytes_received,
            rounds=self.rounds,
            gate_table_bytes=self.gate_table_bytes,
            phases=copy.deepcopy(self.phases),
            current_phase=self.current_phase,
        )
        clone._transcript = self._transcript.copy()
        return clone

    def to_dict(self):
        return {
            'bytes_sent': self.bytes_sent,
            'bytes_received': self.bytes_received,
            'rounds': self.rounds,
            'gate_table_bytes': self.gate_table_bytes,
            'transcript': self.transcript_digest,
            'phases': {name: {'bytes_sent': p.bytes_sent, 'rounds': p.rounds}
                       for name, p in sorted(self.phases.items())},
        }


_CLOSED = object()


class Channel(ABC):
    """One end of a full-duplex, in-order message channel"""

    def __init__(self, name, timeout=None, max_frame_bytes=None):
        self.name = name
        self.timeout = Config.RECV_TIMEOUT if timeout is None else timeout
        self.max_frame_bytes = max_frame_bytes or Config.MAX_FRAME_BYTES
        self.metrics = ChannelMetrics()
        self._inbox = queue.Queue()
        self._closed = False

    def send(self, tag, payload=b''):
        """Frame and deliver one message"""
        if self._closed:
            raise TransportError(f'{self.name}: send on closed channel')
        payload = bytes(payload)
        if len(payload) > self.max_frame_bytes:
            raise TransportError(f'{self.name}: frame of {len(payload)} bytes exceeds limit')
        frame = FRAME_HEADER.pack(len(payload), int(tag)) + payload
        self._write(frame)
        self.metrics.record_send(frame)

    def recv(self, expected_tag):
        """Receive the next message, which must carry expected_tag"""
        tag, payload = self.recv_any()
        if tag != expected_tag:
            raise ProtocolError(
                f'{self.name}: expected {Tag(expected_tag).name}, got {_tag_name(tag)}')
        return payload

    def recv_any(self):
        """Receive the next message, whatever its tag"""
        if self._closed:
            raise TransportError(f'{self.name}: receive on closed channel')
        try:
            item = self._inbox.get(timeout=self.timeout)
        except queue.Empty:
            raise TransportError(f'{self.name}: receive timed out after {self.timeout}s')
        if item is _CLOSED:
            self._closed = True
            raise TransportError(f'{self.name}: peer disconnected')
        if isinstance(item, Exception):
            raise item
        length, tag = FRAME_HEADER.unpack_from(item)
        self.metrics.record_receive(len(item))
        return tag, item[FRAME_HEADER.size:FRAME_HEADER.size + length]

    @contextmanager
    def phase(self, name):
        previous = self.metrics.current_phase
        self.metrics.current_phase = name
        try:
            yield
        finally:
            self.metrics.current_phase = previous

    @abstractmethod
    def close(self):
        """Release the backend and wake a blocked peer"""

    @abstractmethod
    def _write(self, frame):
        """Hand one complete frame to the backend"""


def _tag_name(tag):
    try:
        return Tag(tag).name
    except ValueError:
        return str(tag)


class QueueChannel(Channel):
    """In-process backend: frames travel through the peer's queue"""

    def __init__(self, name, timeout=None, max_frame_bytes=None):
        super().__init__(name, timeout, max_frame_bytes)
        self.peer = None

    def _write(self, frame):
        self.peer._inbox.put(frame)

    def close(self):
        if not self._closed:
            self._closed = True
            if self.peer is not None:
                self.peer._inbox.put(_CLOSED)


def queue_channel_pair(name_a='a', name_b='b', timeout=None):
    """Two connected in-process channel ends"""
    a = QueueChannel(name_a, timeout)
    b = QueueChannel(name_b, timeout)
    a.peer, b.peer = b, a
    return a, b


class TcpChannel(Channel):
    """TCP backend; a reader thread drains the socket so sends never deadlock"""

    def __init__(self, sock, name, timeout=None, max_frame_bytes=None):
        super().__init__(name, timeout, max_frame_bytes)
        self._sock = sock
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._send_lock = threading.Lock()
        self._reader = threading.Thread(target=self._read_loop, name=f'{name}-reader', daemon=True)
        self._reader.start()

    def _write(self, frame):
        try:
            with self._send_lock:
                self._sock.sendall(frame)
        except OSError as e:
            raise TransportError(f'{self.name}: send failed: {e}')

    def _read_exact(self, size):
        chunks = []
        remaining = size
        while remaining:
            chunk = self._sock.recv(min(remaining, 1 << 20))
            if not chunk:
                return None
            chunks.append(chunk)
            remaining -= len(chunk)
        return b''.join(chunks)

    def _read_loop(self):
        try:
            while True:
                header = self._read_exact(FRAME_HEADER.size)
                if header is None:
                    break
                length, _ = FRAME_HEADER.unpack(header)
                if length > self.max_frame_bytes:
                    self._inbox.put(TransportError(
                        f'{self.name}: incoming frame of {length} bytes exceeds limit'))
                    break
                payload = self._read_exact(length) if length else b''
                if payload is None:
                    break
                self._inbox.put(header + payload)
        except OSError as e:
            logger.debug('%s: reader stopped: %s', self.name, e)
        self._inbox.put(_CLOSED)

    def close(self):
        if self._closed:
            return
        self._closed = True
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


def parse_address(text):
    """'host:port' -> (host, port)"""
    host, _, port = text.rpartition(':')
    if not host or not port.isdigit():
        raise TransportError(f'Address must look like host:port, got {text!r}')
    return host, int(port)


def tcp_listener(host, port):
    """Bound listening socket; port 0 picks a free port"""
    return socket.create_server((host, port), backlog=4)


def tcp_accept(server, name, timeout=None):
    server.settimeout(timeout or Config.RECV_TIMEOUT)
    try:
        sock, address = server.accept()
    except socket.timeout:
        raise TransportError(f'{name}: no peer connected')
    sock.settimeout(None)
    logger.info('%s: accepted connection from %s:%s', name, *address[:2])
    return TcpChannel(sock, name)


def tcp_connect(host, port, name, retries=100, delay=0.1):
    """Dial host:port, retrying while the listener comes up"""
    last_error = None
    for _ in range(retries):
        try:
            sock = socket.create_connection((host, port))
            return TcpChannel(sock, name)
        except OSError as e:
            last_error = e
            time.sleep(delay)
    raise TransportError(f'{name}: cannot connect to {host}:{port}: {last_error}')


def send_hello(channel, party):
    channel.send(Tag.HELLO, bytes([party]))


def recv_hello(channel):
    payload = channel.recv(Tag.HELLO)
    if len(payload) != 1 or payload[0] not in (0, 1):
        raise ProtocolError(f'{channel.name}: malformed hello')
    return payload[0]
