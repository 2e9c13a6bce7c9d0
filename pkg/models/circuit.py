"""
Boolean circuit model: gate lists with named input and output bundles

Bundles are LSB-first. A multi-record bundle is record-major, so record i of
width w occupies bits [i*w, (i+1)*w).
"""
import hashlib
import struct
from dataclasses import dataclass, replace
from enum import IntEnum

from utils.errors import ParameterError, WidthMismatchError

# Builder-level constants; never appear in a built circuit
CONST0 = -1
CONST1 = -2

INPUT_OWNERS = ('garbler', 'evaluator', 'shared')
DESTINATIONS = ('garbler', 'evaluator', 'both', 'reshare')

_GATE_RECORD = struct.Struct('<BIII')


class GateType(IntEnum):
    XOR = 0
    AND = 1
    NOT = 2
    CONST = 3


@dataclass(frozen=True)
class Gate:
    kind: GateType
    output: int
    a: int = -1
    b: int = -1
    value: int = 0


@dataclass(frozen=True)
class InputBundle:
    name: str
    owner: str
    wires: tuple

    @property
    def width(self):
        return len(self.wires)


@dataclass(frozen=True)
class OutputBundle:
    name: str
    destination: str
    wires: tuple
    category: str = 'internal'

    @property
    def width(self):
        return len(self.wires)

    def visible_to(self, party):
        """Party 0 garbles, party 1 evaluates"""
        if self.destination == 'both':
            return True
        return self.destination == ('garbler' if party == 0 else 'evaluator')


def pack(values, width):
    """Concatenate unsigned values into one LSB-first bundle integer"""
    packed = 0
    for i, value in enumerate(values):
        if value < 0 or value >> width:
            raise WidthMismatchError(f'Value {value} does not fit in {width} bits')
        packed |= value << (i * width)
    return packed


def unpack(packed, width, count):
    mask = (1 << width) - 1
    return [(packed >> (i * width)) & mask for i in range(count)]


def bits_of(value, width):
    return [(value >> i) & 1 for i in range(width)]


def int_of(bits):
    return sum(bit << i for i, bit in enumerate(bits))


@dataclass(frozen=True)
class Circuit:
    """An optimised, topologically ordered gate list"""
    name: str
    wire_count: int
    gates: tuple
    inputs: tuple
    outputs: tuple
    fingerprint: bytes = b''

    def input(self, name):
        for bundle in self.inputs:
            if bundle.name == name:
                return bundle
        raise KeyError(name)

    def output(self, name):
        for bundle in self.outputs:
            if bundle.name == name:
                return bundle
        raise KeyError(name)

    def inputs_of(self, owner):
        return [bundle for bundle in self.inputs if bundle.owner == owner]

    def cost(self):
        """Gate counts by type"""
        counts = {kind.name.lower(): 0 for kind in GateType}
        for gate in self.gates:
            counts[gate.kind.name.lower()] += 1
        return counts

    @property
    def and_count(self):
        return sum(1 for gate in self.gates if gate.kind == GateType.AND)

    def cost_report(self):
        """Cost as structured text, one `key: value` per line"""
        cost = self.cost()
        lines = [f'circuit: {self.name}', f'wires: {self.wire_count}']
        lines += [f'{kind}: {count}' for kind, count in cost.items()]
        lines += [f'input {b.name}: {b.owner} {b.width}' for b in self.inputs]
        lines += [f'output {b.name}: {b.destination} {b.width} {b.category}' for b in self.outputs]
        return '\n'.join(lines)

    def to_bytes(self):
        """Gate-list serialisation shared with the garbling wire format"""
        chunks = [struct.pack('<II', self.wire_count, len(self.gates))]
        for gate in self.gates:
            chunks.append(_GATE_RECORD.pack(gate.kind, gate.output,
                                            gate.a & 0xFFFFFFFF, gate.b & 0xFFFFFFFF)
                          + bytes([gate.value]))
        for bundle in self.inputs:
            chunks.append(f'I{bundle.name}:{bundle.owner}:{",".join(map(str, bundle.wires))};'.encode())
        for bundle in self.outputs:
            chunks.append(f'O{bundle.name}:{bundle.destination}:{bundle.category}:'
                          f'{",".join(map(str, bundle.wires))};'.encode())
        return b''.join(chunks)

    def digest(self):
        return self.fingerprint or hashlib.sha256(self.to_bytes()).digest()

    def evaluate_plain(self, values):
        """
        Evaluate on cleartext bundle values

        Args:
            values: dict bundle name -> unsigned int, for every input bundle

        Returns:
            dict output name -> unsigned int
        """
        wires = [0] * self.wire_count
        for bundle in self.inputs:
            if bundle.name not in values:
                raise ParameterError(f'Missing value for input bundle {bundle.name!r}')
            value = values[bundle.name]
            if value >> bundle.width:
                raise WidthMismatchError(f'Input {bundle.name!r} exceeds {bundle.width} bits')
            for i, wire in enumerate(bundle.wires):
                wires[wire] = (value >> i) & 1

        for gate in self.gates:
            if gate.kind == GateType.XOR:
                wires[gate.output] = wires[gate.a] ^ wires[gate.b]
            elif gate.kind == GateType.AND:
                wires[gate.output] = wires[gate.a] & wires[gate.b]
            elif gate.kind == GateType.NOT:
                wires[gate.output] = wires[gate.a] ^ 1
            else:
                wires[gate.output] = gate.value

        return {bundle.name: int_of([wires[w] for w in bundle.wires]) for bundle in self.outputs}


class CircuitBuilder:
    """
    Build circuits gate by gate with constant folding

    Bits are wire ids or the CONST0/CONST1 markers. build() drops every gate
    that no declared output depends on.
    """

    def __init__(self, name):
        self.name = name
        self._next_wire = 0
        self._gates = []
        self._inputs = []
        self._outputs = []
        self._names = set()

    def _wire(self):
        wire = self._next_wire
        self._next_wire += 1
        return wire

    def _claim(self, name):
        if name in self._names:
            raise ParameterError(f'Duplicate bundle name {name!r}')
        self._names.add(name)

    def add_input(self, name, owner, width):
        """Declare an input bundle and return its bits"""
        if owner not in INPUT_OWNERS:
            raise ParameterError(f'Unknown input owner {owner!r}')
        if width < 1:
            raise ParameterError(f'Input {name!r} needs a positive width')
        self._claim(name)
        wires = tuple(self._wire() for _ in range(width))
        self._inputs.append(InputBundle(name, owner, wires))
        return list(wires)

    def add_output(self, name, destination, bits, category='internal'):
        if destination not in DESTINATIONS:
            raise ParameterError(f'Unknown output destination {destination!r}')
        if not bits:
            raise ParameterError(f'Output {name!r} needs at least one bit')
        self._claim(name)
        self._outputs.append((name, destination, list(bits), category))

    @staticmethod
    def constant(value, width):
        return [CONST1 if (value >> i) & 1 else CONST0 for i in range(width)]

    # Single-bit gates

    def xor(self, a, b):
        if a < 0 and b < 0:
            return CONST1 if (a == CONST1) != (b == CONST1) else CONST0
        if a < 0:
            a, b = b, a
        if b == CONST0:
            return a
        if b == CONST1:
            return self.not_(a)
        if a == b:
            return CONST0
        out = self._wire()
        self._gates.append(Gate(GateType.XOR, out, a, b))
        return out

    def and_(self, a, b):
        if a < 0:
            a, b = b, a
        if b == CONST0:
            return CONST0
        if b == CONST1:
            return a
        if a == b:
            return a
        out = self._wire()
        self._gates.append(Gate(GateType.AND, out, a, b))
        return out

    def not_(self, a):
        if a == CONST0:
            return CONST1
        if a == CONST1:
            return CONST0
        out = self._wire()
        self._gates.append(Gate(GateType.NOT, out, a))
        return out

    def or_(self, a, b):
        if a == CONST1 or b == CONST1:
            return CONST1
        if a == CONST0:
            return b
        if b == CONST0 or a == b:
            return a
        return self.xor(self.xor(a, b), self.and_(a, b))

    # Word-level helpers, LSB-first

    def add(self, a, b, carry=CONST0):
        """a + b mod 2^width; the final carry is dropped"""
        self._same_width(a, b)
        total = []
        for i, (x, y) in enumerate(zip(a, b)):
            total.append(self.xor(self.xor(x, y), carry))
            if i + 1 < len(a):
                carry = self._carry(x, y, carry)
        return total

    def subtract(self, a, b):
        """a - b mod 2^width, as a + not(b) + 1"""
        return self.add(a, [self.not_(bit) for bit in b], CONST1)

    def _carry(self, x, y, carry):
        # majority(x, y, c) with a single AND
        return self.xor(carry, self.and_(self.xor(x, carry), self.xor(y, carry)))

    def greater_than(self, a, b):
        """Unsigned a > b: carry out of a + not(b)"""
        self._same_width(a, b)
        carry = CONST0
        for x, y in zip(a, b):
            carry = self._carry(x, self.not_(y), carry)
        return carry

    def less_or_equal(self, a, b):
        return self.not_(self.greater_than(a, b))

    def mux(self, select, if_one, if_zero):
        """select ? if_one : if_zero, one AND per bit"""
        self._same_width(if_one, if_zero)
        return [self.xor(z, self.and_(select, self.xor(o, z))) for o, z in zip(if_one, if_zero)]

    def cond_swap(self, select, a, b):
        """Swap records a and b when select is 1"""
        self._same_width(a, b)
        low, high = [], []
        for x, y in zip(a, b):
            t = self.and_(select, self.xor(x, y))
            low.append(self.xor(x, t))
            high.append(self.xor(y, t))
        return low, high

    def or_reduce(self, bits):
        if not bits:
            return CONST0
        layer = list(bits)
        while len(layer) > 1:
            nxt = [self.or_(layer[i], layer[i + 1]) for i in range(0, len(layer) - 1, 2)]
            if len(layer) % 2:
                nxt.append(layer[-1])
            layer = nxt
        return layer[0]

    def is_zero(self, bits):
        return self.not_(self.or_reduce(bits))

    def zero_extend(self, bits, width):
        if len(bits) > width:
            raise WidthMismatchError(f'Cannot extend {len(bits)} bits to {width}')
        return list(bits) + [CONST0] * (width - len(bits))

    @staticmethod
    def _same_width(a, b):
        if len(a) != len(b):
            raise WidthMismatchError(f'Operand widths differ: {len(a)} vs {len(b)}')

    def build(self):
        """Materialise constant outputs, drop dead gates, freeze"""
        gates = list(self._gates)
        outputs = []
        for name, destination, bits, category in self._outputs:
            wires = []
            for bit in bits:
                if bit < 0:
                    wire = self._wire()
                    gates.append(Gate(GateType.CONST, wire, value=1 if bit == CONST1 else 0))
                    bit = wire
                wires.append(bit)
            outputs.append(OutputBundle(name, destination, tuple(wires), category))

        needed = set()
        for bundle in outputs:
            needed.update(bundle.wires)
        kept = []
        for gate in reversed(gates):
            if gate.output in needed:
                kept.append(gate)
                if gate.a >= 0:
                    needed.add(gate.a)
                if gate.b >= 0:
                    needed.add(gate.b)
        kept.reverse()

        circuit = Circuit(self.name, self._next_wire, tuple(kept), tuple(self._inputs), tuple(outputs))
        return replace(circuit, fingerprint=circuit.digest())


@dataclass(frozen=True)
class YaoShare:
    """
    One party's side of a Yao-shared bundle

    The garbler holds the zero labels K_0 (K_1 = K_0 xor delta); the evaluator
    holds exactly one active label per wire.
    """
    labels: tuple
    party: int

    @property
    def width(self):
        return len(self.labels)

    def slice(self, start, width):
        if start < 0 or start + width > len(self.labels):
            raise WidthMismatchError('Slice outside the Yao bundle')
        return YaoShare(self.labels[start:start + width], self.party)

    def records(self, width):
        """Split into equal-width records"""
        if width < 1 or len(self.labels) % width:
            raise WidthMismatchError(f'Bundle of {len(self.labels)} wires is not a multiple of {width}')
        return [self.slice(i, width) for i in range(0, len(self.labels), width)]

    @staticmethod
    def concat(shares):
        shares = list(shares)
        if not shares:
            raise WidthMismatchError('Nothing to concatenate')
        if len({share.party for share in shares}) != 1:
            raise WidthMismatchError('Yao shares of different parties cannot be joined')
        return YaoShare(tuple(label for share in shares for label in share.labels), shares[0].party)
