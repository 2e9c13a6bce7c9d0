"""
Streaming runs: in-process threads or TCP processes, oracle checks, sweeps
"""
import logging
import threading
import time

from models.report import PHASES, RunReport, StepRecord
from services.coordinator import Coordinator, run_server
from services.plaintext_oracle import (PlainPoint, divergence_report, oracle_distance,
                                       oracle_protocol_replay, oracle_textbook_stream)
from services.session import make_rngs
from services.transport import (ChannelMetrics, parse_address, queue_channel_pair, recv_hello, send_hello,
                                tcp_accept, tcp_connect, tcp_listener)
from utils.errors import PPODError, ParameterError, TransportError

logger = logging.getLogger(__name__)

SWEEPS = ('window', 'k')


def _rows(values, ids):
    ids = list(ids) if ids is not None else [None] * len(values)
    if len(ids) != len(values):
        raise ParameterError('One id per point is required')
    return list(zip(ids, [list(map(float, v)) for v in values]))


class _Timer:
    def __init__(self, report, phase):
        self.report = report
        self.phase = phase

    def __enter__(self):
        self.started = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.report.add_time(self.phase, time.perf_counter() - self.started)
        return False


def drive(coordinator, rows, queries=(), report=None):
    """
    Feed a stream through an already connected coordinator

    Points beyond the last full slide are preprocessed but never processed.

    Returns:
        RunReport without the oracle verdict
    """
    config = coordinator.config
    if len(rows) < config.window:
        raise ParameterError(f'Dataset of {len(rows)} points is smaller than W={config.window}')
    report = report or RunReport(config=config.to_dict())
    report.points = len(rows)

    with _Timer(report, 'setup'):
        coordinator.setup()

    for point_id, values in rows:
        with _Timer(report, 'preprocess'):
            coordinator.ingest(values, point_id)
        if coordinator.ready:
            record_step(report, *coordinator.flush())
    if coordinator.buffer:
        logger.warning('%d trailing points do not fill a slide and were not processed',
                       len(coordinator.buffer))

    for values, epsilon in queries:
        run_query(report, coordinator, values, epsilon)

    collect_metrics(report, coordinator)
    coordinator.close()
    return report


def record_step(report, op, result):
    """Append the outcome of initialise or one slide"""
    phase = 'initialise' if op == 'initialise' else 'update'
    report.add_time(phase, result['seconds'])
    work = result['work']
    step = StepRecord(len(report.steps), phase, result['outliers'], result.get('knn_ids', []),
                      work['distance_evaluations'], work['resorted_entries'], work['triples_consumed'],
                      result['seconds'])
    report.steps.append(step)
    return step


def run_query(report, coordinator, values, epsilon=None):
    with _Timer(report, 'query'):
        assertion, rounded = coordinator.query(values, epsilon)
    epsilon = coordinator.config.epsilon if epsilon is None else epsilon
    report.queries.append({'point': list(rounded), 'epsilon': epsilon, 'assertion': assertion})
    return assertion


def collect_metrics(report, coordinator):
    """Pull counters, channel metrics and decode audits from both servers"""
    result0, result1 = coordinator.report()
    report.party_metrics = {'p0': result0, 'p1': result1}
    report.triples_consumed = result0['counters']['triples_consumed']
    report.circuits = result0['counters']['circuits']
    report.leakage = {
        'p0': result0['decodes'], 'p1': result1['decodes'],
        'violations': result0['violations'] + result1['violations'],
    }
    return report


def verify(report, coordinator):
    """Compare every step and query with the plaintext oracles"""
    config = coordinator.config
    radius = config.clamp_threshold(config.radius)
    replay = oracle_protocol_replay(coordinator.stream, config.window, config.slide, config.k, radius,
                                    sentinel_key=config.sentinel_key)
    textbook = oracle_textbook_stream(coordinator.stream, config.window, config.slide, config.k, radius)

    mismatches = []
    if len(replay) != len(report.steps):
        mismatches.append({'step': None, 'reason': f'{len(report.steps)} steps run, oracle has {len(replay)}'})
    for step, expected in zip(report.steps, replay):
        if set(step.outliers) != expected.outliers:
            mismatches.append({'step': step.step, 'reason': 'outliers',
                               'secure': sorted(step.outliers), 'oracle': sorted(expected.outliers)})
        if step.step and step.knn_ids != expected.knn_ids:
            mismatches.append({'step': step.step, 'reason': 'knn_ids'})

    if replay:
        final = replay[-1].outliers
        outliers = [p for p in coordinator.stream if p.id in final]
        for index, query in enumerate(report.queries):
            epsilon = config.clamp_threshold(query['epsilon'])
            point = PlainPoint(0, tuple(query['point']))
            expected = any(oracle_distance(point, o) <= epsilon for o in outliers)
            if expected != query['assertion']:
                mismatches.append({'step': None, 'reason': f'query {index}'})

    report.mismatches = mismatches
    report.divergence = divergence_report(replay, textbook)
    report.verdict = 'pass' if not mismatches else 'fail'
    return report


def _finish(report, coordinator, check):
    if check:
        verify(report, coordinator)
    logger.info('run finished: %d steps, verdict %s', len(report.steps), report.verdict)
    return report


def _run_threads(targets):
    """
    Start server threads; returns (threads, errors list)

    A failing server appends its error; the caller raises the root cause.
    """
    errors = []

    def wrap(fn, args):
        try:
            fn(*args)
        except BaseException as e:
            errors.append(e)

    threads = [threading.Thread(target=wrap, args=(fn, args), name=name, daemon=True)
               for name, fn, args in targets]
    for thread in threads:
        thread.start()
    return threads, errors


def _raise_first(primary, errors):
    causes = [e for e in errors if isinstance(e, PPODError) and not isinstance(e, TransportError)]
    if causes:
        raise causes[0] from primary
    raise primary


class InprocTopology:
    """
    Whole topology in one process: the trusted node on the caller's thread,
    one thread per server, queue channels between them
    """

    def __init__(self, config, seed=None, timeout=None):
        trusted_rng, rng0, rng1 = make_rngs(seed)
        peer0, peer1 = queue_channel_pair('p0-peer', 'p1-peer', timeout)
        up0, down0 = queue_channel_pair('p0-dealer', 'dealer-p0', timeout)
        up1, down1 = queue_channel_pair('p1-dealer', 'dealer-p1', timeout)
        self.channels = (peer0, peer1, up0, up1, down0, down1)
        self.threads, self.errors = _run_threads([('server-0', run_server, (0, peer0, up0, rng0)),
                                                  ('server-1', run_server, (1, peer1, up1, rng1))])
        self.coordinator = Coordinator(config, (down0, down1), trusted_rng)

    def abort(self, error):
        """Tear everything down and raise the root cause of error"""
        for channel in self.channels:
            channel.close()
        for thread in self.threads:
            thread.join(timeout=5)
        _raise_first(error, self.errors)

    def join(self):
        for thread in self.threads:
            thread.join()


def run_inproc(config, values, ids=None, seed=None, queries=(), check=False, timeout=None):
    """
    Run a stream on an InprocTopology

    Returns:
        RunReport
    """
    rows = _rows(values, ids)
    topology = InprocTopology(config, seed, timeout)
    report = RunReport(config=config.to_dict(), seed=seed, transport='inproc')
    try:
        drive(topology.coordinator, rows, queries, report)
    except BaseException as e:
        topology.abort(e)
    topology.join()
    return _finish(report, topology.coordinator, check)


def _reset_metrics(*channels):
    """Handshake frames stay out of the protocol transcript"""
    for channel in channels:
        channel.metrics = ChannelMetrics()


def serve_p0(listen, connect, seed=None, timeout=None):
    """Server 0: accept server 1 on listen, dial the trusted node at connect"""
    _, rng0, _ = make_rngs(seed)
    listener = tcp_listener(*parse_address(listen))
    try:
        dealer = tcp_connect(*parse_address(connect), name='p0-dealer')
        send_hello(dealer, 0)
        peer = tcp_accept(listener, 'p0-peer', timeout)
        if recv_hello(peer) != 1:
            raise TransportError('p0: expected server 1 on the peer link')
    finally:
        listener.close()
    _reset_metrics(peer, dealer)
    return run_server(0, peer, dealer, rng0)


def serve_p1(peer_address, dealer_address, seed=None):
    """Server 1: dial server 0 and the trusted node"""
    _, _, rng1 = make_rngs(seed)
    peer = tcp_connect(*parse_address(peer_address), name='p1-peer')
    send_hello(peer, 1)
    dealer = tcp_connect(*parse_address(dealer_address), name='p1-dealer')
    send_hello(dealer, 1)
    _reset_metrics(peer, dealer)
    return run_server(1, peer, dealer, rng1)


def accept_servers(listener, timeout=None):
    """Accept both servers on the trusted node's listener, ordered by party"""
    channels = {}
    while len(channels) < 2:
        channel = tcp_accept(listener, f'dealer-p{len(channels)}', timeout)
        party = recv_hello(channel)
        if party in channels:
            raise TransportError(f'Server {party} connected twice')
        channel.name = f'dealer-p{party}'
        _reset_metrics(channel)
        channels[party] = channel
    return channels[0], channels[1]


def run_trusted(config, values, ids=None, listen='127.0.0.1:0', seed=None, queries=(), check=False,
                timeout=None, listener=None):
    """
    Trusted node as its own process: wait for both servers, run the stream

    Returns:
        RunReport
    """
    rows = _rows(values, ids)
    trusted_rng, _, _ = make_rngs(seed)
    listener = listener or tcp_listener(*parse_address(listen))
    try:
        channels = accept_servers(listener, timeout)
    finally:
        listener.close()
    coordinator = Coordinator(config, channels, trusted_rng)
    report = RunReport(config=config.to_dict(), seed=seed, transport='tcp')
    try:
        drive(coordinator, rows, queries, report)
    except BaseException:
        coordinator.dealer.close()
        raise
    return _finish(report, coordinator, check)


def run_tcp_local(config, values, ids=None, seed=None, queries=(), check=False, timeout=None):
    """All three roles on localhost TCP, one thread each"""
    dealer_listener = tcp_listener('127.0.0.1', 0)
    dealer_address = '127.0.0.1:%d' % dealer_listener.getsockname()[1]
    probe = tcp_listener('127.0.0.1', 0)
    peer_address = '127.0.0.1:%d' % probe.getsockname()[1]
    probe.close()

    threads, errors = _run_threads([('server-0', serve_p0, (peer_address, dealer_address, seed, timeout)),
                                    ('server-1', serve_p1, (peer_address, dealer_address, seed))])
    try:
        report = run_trusted(config, values, ids, seed=seed, queries=queries, check=check,
                             timeout=timeout, listener=dealer_listener)
    except BaseException as e:
        for thread in threads:
            thread.join(timeout=5)
        _raise_first(e, errors)
    for thread in threads:
        thread.join()
    return report


def run_stream(config, values, ids=None, seed=None, transport='inproc', queries=(), check=False,
               timeout=None):
    if transport == 'inproc':
        return run_inproc(config, values, ids, seed, queries, check, timeout)
    if transport == 'tcp':
        return run_tcp_local(config, values, ids, seed, queries, check, timeout)
    raise ParameterError(f'Unknown transport {transport!r}')


def phase_bytes(report, phase, party='p0'):
    """Peer-channel bytes one server sent during a phase"""
    phases = report.party_metrics[party]['peer']['phases']
    return phases.get(phase, {}).get('bytes_sent', 0)


def bench(config, values, ids=None, sweep='k', settings=(), seed=None):
    """
    One in-process run per swept value

    Returns:
        list of dicts, one per setting, in the given order
    """
    if sweep not in SWEEPS:
        raise ParameterError(f'Sweep must be one of {SWEEPS}')
    series = []
    for setting in settings:
        run_config = config.with_params(**{sweep: setting}).check()
        report = run_inproc(run_config, values, ids, seed)
        initialise = next((s for s in report.steps if s.phase == 'initialise'), None)
        updates = [s for s in report.steps if s.phase == 'update']
        series.append({
            'sweep': sweep,
            'value': setting,
            'initialise_distances': initialise.distance_evaluations if initialise else 0,
            'update_distances': sum(s.distance_evaluations for s in updates),
            'resorted_entries': sum(s.resorted_entries for s in updates),
            'bytes': {phase: phase_bytes(report, phase) for phase in PHASES},
            'seconds': dict(report.phase_seconds),
            'slides': len(updates),
        })
        logger.info('bench %s=%s done', sweep, setting)
    return series
