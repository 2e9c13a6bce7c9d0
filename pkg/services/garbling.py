"""
Yao garbled circuits with free-XOR and point-and-permute

Labels are 128-bit integers; the permute bit is the low bit. Every AND gate
gets a four-row table whose rows are blake2b(la || lb || gate index) xor
(out_label << 128); the low 128 bits of a decrypted row must be zero.
Party 0 garbles, party 1 evaluates.
"""
import hashlib
import logging
import struct
from dataclasses import dataclass, field

from models.circuit import GateType, YaoShare, bits_of, int_of
from services.oblivious_transfer import ot_transfer
from services.transport import Tag
from utils.errors import (AccessError, IntegrityError, ParameterError, ProtocolError,
                          WidthMismatchError)

logger = logging.getLogger(__name__)

LABEL_BITS = 128
LABEL_BYTES = LABEL_BITS // 8
ROW_BYTES = 32
TABLE_BYTES = 4 * ROW_BYTES
PAD_MASK = (1 << LABEL_BITS) - 1

_HEADER = struct.Struct('<32sIII')


def new_delta(rng):
    """Global free-XOR offset with its permute bit set"""
    return rng.getrandbits(LABEL_BITS) | 1


def _prf(la, lb, index):
    digest = hashlib.blake2b(la.to_bytes(LABEL_BYTES, 'little') + lb.to_bytes(LABEL_BYTES, 'little')
                             + index.to_bytes(4, 'little'), digest_size=ROW_BYTES).digest()
    return int.from_bytes(digest, 'little')


def _label_hash(label):
    return hashlib.blake2b(label.to_bytes(LABEL_BYTES, 'little'), digest_size=8,
                           person=b'ppod-decode').digest()


def labels_to_bytes(labels):
    return b''.join(label.to_bytes(LABEL_BYTES, 'little') for label in labels)


def labels_from_bytes(data):
    if len(data) % LABEL_BYTES:
        raise ProtocolError('Label block is not a whole number of labels')
    return [int.from_bytes(data[i:i + LABEL_BYTES], 'little') for i in range(0, len(data), LABEL_BYTES)]


@dataclass(frozen=True)
class GarbledCircuit:
    """Garbled tables in gate order plus the active labels of constant gates"""
    digest: bytes
    gate_count: int
    and_count: int
    tables: bytes
    const_labels: tuple = ()

    @property
    def table_bytes(self):
        return len(self.tables)

    def to_bytes(self):
        header = _HEADER.pack(self.digest, self.gate_count, self.and_count, len(self.const_labels))
        return header + self.tables + labels_to_bytes(self.const_labels)

    @classmethod
    def from_bytes(cls, data, circuit):
        if len(data) < _HEADER.size:
            raise ProtocolError('Garbled circuit frame is truncated')
        digest, gate_count, and_count, const_count = _HEADER.unpack_from(data)
        if digest != circuit.digest():
            raise ProtocolError(f'Garbled circuit does not match {circuit.name!r}')
        if gate_count != len(circuit.gates) or and_count != circuit.and_count:
            raise ProtocolError('Garbled circuit header disagrees with the gate list')
        tables_end = _HEADER.size + and_count * TABLE_BYTES
        expected = tables_end + const_count * LABEL_BYTES
        if len(data) != expected:
            raise ProtocolError(f'Garbled circuit frame has {len(data)} bytes, expected {expected}')
        return cls(digest, gate_count, and_count, bytes(data[_HEADER.size:tables_end]),
                   tuple(labels_from_bytes(data[tables_end:])))


def garble(circuit, rng, delta, fixed=None):
    """
    Garble a circuit

    Args:
        circuit: built Circuit
        rng: garbler's random source
        delta: session free-XOR offset
        fixed: optional dict wire -> zero label, for inputs chained from an
            earlier circuit

    Returns:
        (GarbledCircuit, list of zero labels indexed by wire)
    """
    fixed = fixed or {}
    zero = [None] * circuit.wire_count
    for bundle in circuit.inputs:
        for wire in bundle.wires:
            zero[wire] = fixed[wire] if wire in fixed else rng.getrandbits(LABEL_BITS)

    tables = bytearray()
    const_labels = []
    for index, gate in enumerate(circuit.gates):
        if gate.kind == GateType.XOR:
            zero[gate.output] = zero[gate.a] ^ zero[gate.b]
        elif gate.kind == GateType.NOT:
            zero[gate.output] = zero[gate.a] ^ delta
        elif gate.kind == GateType.CONST:
            label = rng.getrandbits(LABEL_BITS)
            zero[gate.output] = label
            const_labels.append(label ^ delta if gate.value else label)
        elif gate.kind == GateType.AND:
            a0, b0 = zero[gate.a], zero[gate.b]
            if a0 is None or b0 is None:
                raise ParameterError(f'Gate {index} of {circuit.name!r} reads an unset wire')
            out0 = rng.getrandbits(LABEL_BITS)
            zero[gate.output] = out0
            rows = [0, 0, 0, 0]
            for va in (0, 1):
                la = a0 ^ delta if va else a0
                for vb in (0, 1):
                    lb = b0 ^ delta if vb else b0
                    lo = out0 ^ delta if va & vb else out0
                    rows[((la & 1) << 1) | (lb & 1)] = _prf(la, lb, index) ^ (lo << LABEL_BITS)
            for row in rows:
                tables += row.to_bytes(ROW_BYTES, 'little')
        else:
            raise ParameterError(f'Unknown gate type {gate.kind!r}')

    garbled = GarbledCircuit(circuit.digest(), len(circuit.gates), circuit.and_count,
                             bytes(tables), tuple(const_labels))
    return garbled, zero


def encode_garbler_inputs(zero_labels, value, delta):
    """Active labels of the garbler's own input bits"""
    if value < 0 or value >> len(zero_labels):
        raise WidthMismatchError(f'Input value does not fit in {len(zero_labels)} bits')
    return [label ^ delta if bit else label
            for label, bit in zip(zero_labels, bits_of(value, len(zero_labels)))]


def evaluate(circuit, garbled, input_labels):
    """
    Evaluate garbled tables on one active label per input wire

    Returns:
        list of active labels indexed by wire
    """
    active = [None] * circuit.wire_count
    for bundle in circuit.inputs:
        for wire in bundle.wires:
            if wire not in input_labels:
                raise ParameterError(f'No label for input wire {wire} of {bundle.name!r}')
            active[wire] = input_labels[wire]

    tables = garbled.tables
    offset = 0
    const_index = 0
    for index, gate in enumerate(circuit.gates):
        if gate.kind == GateType.XOR:
            active[gate.output] = active[gate.a] ^ active[gate.b]
        elif gate.kind == GateType.NOT:
            active[gate.output] = active[gate.a]
        elif gate.kind == GateType.CONST:
            active[gate.output] = garbled.const_labels[const_index]
            const_index += 1
        else:
            la, lb = active[gate.a], active[gate.b]
            start = offset + (((la & 1) << 1) | (lb & 1)) * ROW_BYTES
            value = int.from_bytes(tables[start:start + ROW_BYTES], 'little') ^ _prf(la, lb, index)
            if value & PAD_MASK:
                raise IntegrityError(f'Garbled row of gate {index} in {circuit.name!r} failed its pad check')
            active[gate.output] = value >> LABEL_BITS
            offset += TABLE_BYTES
    return active


def decode_map(zero_labels, delta):
    """Per-wire hashes of K_0 and K_1"""
    return [(_label_hash(label), _label_hash(label ^ delta)) for label in zero_labels]


def decode(labels, mapping, bundle, party):
    """
    Decode evaluator-side output labels to cleartext

    Raises:
        AccessError: bundle not destined to this party (reshare bundles never are)
        IntegrityError: a label matches neither hash
    """
    if not bundle.visible_to(party):
        raise AccessError(f'Output {bundle.name!r} ({bundle.destination}) is not decodable by party {party}')
    if len(labels) != len(mapping):
        raise WidthMismatchError('Label count does not match the decode map')
    bits = []
    for label, (h0, h1) in zip(labels, mapping):
        digest = _label_hash(label)
        if digest == h0:
            bits.append(0)
        elif digest == h1:
            bits.append(1)
        else:
            raise IntegrityError(f'Output label of {bundle.name!r} failed its decode check')
    return int_of(bits)


def decode_returned(labels, zero_labels, delta, bundle, party=0):
    """Garbler-side decode of labels the evaluator sent back"""
    if not bundle.visible_to(party):
        raise AccessError(f'Output {bundle.name!r} ({bundle.destination}) is not decodable by party {party}')
    bits = []
    for label, zero_label in zip(labels, zero_labels):
        if label == zero_label:
            bits.append(0)
        elif label == zero_label ^ delta:
            bits.append(1)
        else:
            raise IntegrityError(f'Returned label of {bundle.name!r} is not a valid output label')
    return int_of(bits)


def _encode_maps(maps):
    return b''.join(h0 + h1 for mapping in maps for h0, h1 in mapping)


def _decode_maps(data, bundles):
    expected = sum(bundle.width for bundle in bundles) * 16
    if len(data) != expected:
        raise ProtocolError(f'Decode map frame has {len(data)} bytes, expected {expected}')
    maps = {}
    offset = 0
    for bundle in bundles:
        pairs = []
        for _ in range(bundle.width):
            pairs.append((bytes(data[offset:offset + 8]), bytes(data[offset + 8:offset + 16])))
            offset += 16
        maps[bundle.name] = pairs
    return maps


@dataclass
class CircuitResult:
    """This party's view of one circuit run"""
    values: dict = field(default_factory=dict)
    shares: dict = field(default_factory=dict)


def execute(session, circuit, inputs=None, shared=None, kind=None):
    """
    Run one circuit between the two servers

    Args:
        session: PartySession of the calling party
        circuit: built Circuit
        inputs: dict bundle name -> int for the bundles this party owns
        shared: dict bundle name -> YaoShare for 'shared' bundles
        kind: label for work counters and the decode log

    Returns:
        CircuitResult with cleartext values this party may see and Yao shares
        of every reshare output
    """
    inputs = inputs or {}
    shared = shared or {}
    kind = kind or circuit.name
    owner = 'garbler' if session.party == 0 else 'evaluator'

    for bundle in circuit.inputs_of(owner):
        if bundle.name not in inputs:
            raise ParameterError(f'{kind}: missing {owner} input {bundle.name!r}')
    for bundle in circuit.inputs_of('shared'):
        share = shared.get(bundle.name)
        if share is None:
            raise ParameterError(f'{kind}: missing Yao input {bundle.name!r}')
        if share.width != bundle.width or share.party != session.party:
            raise WidthMismatchError(f'{kind}: Yao input {bundle.name!r} has the wrong width or owner')

    logger.debug('party %d: %s (%d AND)', session.party, kind, circuit.and_count)
    if session.party == 0:
        result = _run_garbler(session, circuit, inputs, shared, kind)
    else:
        result = _run_evaluator(session, circuit, inputs, shared, kind)
    session.counters.record_circuit(kind, circuit.cost())
    return result


def _run_garbler(session, circuit, inputs, shared, kind):
    delta = session.delta
    fixed = {}
    for bundle in circuit.inputs_of('shared'):
        fixed.update(zip(bundle.wires, shared[bundle.name].labels))

    garbled, zero = garble(circuit, session.rng, delta, fixed)
    session.peer.send(Tag.GC_TABLES, garbled.to_bytes())
    session.peer.metrics.gate_table_bytes += garbled.table_bytes

    active = []
    for bundle in circuit.inputs_of('garbler'):
        active += encode_garbler_inputs([zero[w] for w in bundle.wires], inputs[bundle.name], delta)
    session.peer.send(Tag.GC_INPUTS, labels_to_bytes(active))

    evaluator_wires = [w for bundle in circuit.inputs_of('evaluator') for w in bundle.wires]
    if evaluator_wires:
        ot_transfer(session, pairs=[(zero[w], zero[w] ^ delta) for w in evaluator_wires])

    to_evaluator = [b for b in circuit.outputs if b.destination in ('evaluator', 'both')]
    if to_evaluator:
        maps = [decode_map([zero[w] for w in bundle.wires], delta) for bundle in to_evaluator]
        session.peer.send(Tag.GC_DECODE, _encode_maps(maps))

    result = CircuitResult()
    returned = [b for b in circuit.outputs if b.destination in ('garbler', 'both')]
    if returned:
        labels = labels_from_bytes(session.peer.recv(Tag.GC_OUTPUT_LABELS))
        if len(labels) != sum(b.width for b in returned):
            raise ProtocolError(f'{kind}: wrong number of returned output labels')
        offset = 0
        for bundle in returned:
            chunk = labels[offset:offset + bundle.width]
            offset += bundle.width
            result.values[bundle.name] = decode_returned(
                chunk, [zero[w] for w in bundle.wires], delta, bundle, session.party)
            session.record_decode(kind, bundle)

    for bundle in circuit.outputs:
        if bundle.destination == 'reshare':
            result.shares[bundle.name] = YaoShare(tuple(zero[w] for w in bundle.wires), 0)
    return result


def _run_evaluator(session, circuit, inputs, shared, kind):
    garbled = GarbledCircuit.from_bytes(session.peer.recv(Tag.GC_TABLES), circuit)

    wire_labels = {}
    garbler_wires = [w for bundle in circuit.inputs_of('garbler') for w in bundle.wires]
    received = labels_from_bytes(session.peer.recv(Tag.GC_INPUTS))
    if len(received) != len(garbler_wires):
        raise ProtocolError(f'{kind}: expected {len(garbler_wires)} garbler labels, got {len(received)}')
    wire_labels.update(zip(garbler_wires, received))

    for bundle in circuit.inputs_of('shared'):
        wire_labels.update(zip(bundle.wires, shared[bundle.name].labels))

    evaluator_wires = []
    choices = []
    for bundle in circuit.inputs_of('evaluator'):
        value = inputs[bundle.name]
        if value < 0 or value >> bundle.width:
            raise WidthMismatchError(f'{kind}: input {bundle.name!r} exceeds {bundle.width} bits')
        evaluator_wires += bundle.wires
        choices += bits_of(value, bundle.width)
    if evaluator_wires:
        wire_labels.update(zip(evaluator_wires, ot_transfer(session, choices=choices)))

    to_evaluator = [b for b in circuit.outputs if b.destination in ('evaluator', 'both')]
    maps = _decode_maps(session.peer.recv(Tag.GC_DECODE), to_evaluator) if to_evaluator else {}

    active = evaluate(circuit, garbled, wire_labels)

    result = CircuitResult()
    for bundle in to_evaluator:
        result.values[bundle.name] = decode([active[w] for w in bundle.wires],
                                            maps[bundle.name], bundle, session.party)
        session.record_decode(kind, bundle)

    returned = [b for b in circuit.outputs if b.destination in ('garbler', 'both')]
    if returned:
        session.peer.send(Tag.GC_OUTPUT_LABELS,
                          labels_to_bytes([active[w] for b in returned for w in b.wires]))

    for bundle in circuit.outputs:
        if bundle.destination == 'reshare':
            result.shares[bundle.name] = YaoShare(tuple(active[w] for w in bundle.wires), 1)
    return result
