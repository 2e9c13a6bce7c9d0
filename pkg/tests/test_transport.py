import hashlib
import threading

import pytest

from services.transport import (FRAME_HEADER, Channel, Tag, queue_channel_pair, recv_hello, send_hello,
                                tcp_accept, tcp_connect, tcp_listener)
from utils.errors import ProtocolError, TransportError


def test_echo_round_trip():
    a, b = queue_channel_pair(timeout=5)
    a.send(Tag.ECHO, b'ping')
    assert b.recv(Tag.ECHO) == b'ping'
    b.send(Tag.ECHO, b'pong')
    assert a.recv(Tag.ECHO) == b'pong'


def test_tag_mismatch_is_a_protocol_error():
    a, b = queue_channel_pair(timeout=5)
    a.send(Tag.MUL_OPEN, b'x')
    with pytest.raises(ProtocolError):
        b.recv(Tag.GC_TABLES)


def test_large_frame_arrives_intact():
    a, b = queue_channel_pair(timeout=5)
    payload = bytes(range(256)) * (10 * 1024 * 1024 // 256)
    a.send(Tag.GC_TABLES, payload)
    received = b.recv(Tag.GC_TABLES)
    assert hashlib.sha256(received).digest() == hashlib.sha256(payload).digest()


def test_oversize_frame_is_refused():
    a, _ = queue_channel_pair(timeout=5)
    a.max_frame_bytes = 16
    with pytest.raises(TransportError):
        a.send(Tag.ECHO, b'x' * 17)


def test_receive_times_out():
    _, b = queue_channel_pair(timeout=0.05)
    with pytest.raises(TransportError):
        b.recv(Tag.ECHO)


def test_close_unblocks_the_peer():
    a, b = queue_channel_pair(timeout=5)
    a.close()
    with pytest.raises(TransportError):
        b.recv(Tag.ECHO)
    with pytest.raises(TransportError):
        a.send(Tag.ECHO, b'late')


def test_fresh_metrics_are_zero():
    a, _ = queue_channel_pair()
    snapshot = a.metrics.snapshot()
    assert snapshot.bytes_sent == 0
    assert snapshot.rounds == 0
    assert snapshot.phases == {}


def test_metrics_count_frames_per_phase():
    a, b = queue_channel_pair(timeout=5)
    with a.phase('initialise'):
        a.send(Tag.ECHO, b'1234')
    with a.phase('update'):
        a.send(Tag.ECHO, b'12')
        a.send(Tag.ECHO)
    b.recv(Tag.ECHO)

    header = FRAME_HEADER.size
    assert a.metrics.bytes_sent == 3 * header + 6
    assert a.metrics.rounds == 3
    assert a.metrics.phases['initialise'].bytes_sent == header + 4
    assert a.metrics.phases['update'].rounds == 2
    assert sum(p.bytes_sent for p in a.metrics.phases.values()) == a.metrics.bytes_sent
    assert b.metrics.bytes_received == header + 4


def test_snapshot_is_detached():
    a, _ = queue_channel_pair()
    a.send(Tag.ECHO, b'x')
    snapshot = a.metrics.snapshot()
    a.send(Tag.ECHO, b'y')
    assert snapshot.rounds == 1
    assert snapshot.transcript_digest != a.metrics.transcript_digest


def test_tcp_and_queue_transcripts_match():
    frames = [(Tag.MUL_OPEN, b'\x01' * 16), (Tag.GC_TABLES, b'\x02' * 300), (Tag.ECHO, b'')]

    a, b = queue_channel_pair(timeout=5)
    for tag, payload in frames:
        a.send(tag, payload)

    listener = tcp_listener('127.0.0.1', 0)
    port = listener.getsockname()[1]
    accepted = {}

    def accept():
        accepted['channel'] = tcp_accept(listener, 'server', timeout=5)

    thread = threading.Thread(target=accept)
    thread.start()
    client = tcp_connect('127.0.0.1', port, 'client')
    thread.join()
    listener.close()
    server = accepted['channel']
    try:
        for tag, payload in frames:
            client.send(tag, payload)
        for tag, payload in frames:
            assert server.recv(tag) == payload
        assert client.metrics.transcript_digest == a.metrics.transcript_digest
        assert client.metrics.bytes_sent == a.metrics.bytes_sent
    finally:
        client.close()
        server.close()


def test_hello_identifies_the_party():
    a, b = queue_channel_pair(timeout=5)
    send_hello(a, 1)
    assert recv_hello(b) == 1
    a.send(Tag.HELLO, b'\x07')
    with pytest.raises(ProtocolError):
        recv_hello(b)


def test_backend_without_a_writer_cannot_be_built():
    class HalfChannel(Channel):
        def close(self):
            self._closed = True

    with pytest.raises(TypeError):
        HalfChannel('half', timeout=1)
    with pytest.raises(TypeError):
        Channel('bare', timeout=1)
