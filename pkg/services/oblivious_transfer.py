"""
1-out-of-2 oblivious transfer of wire labels

Ideal mode routes both sides through the trusted dealer: the garbler uploads
label pairs, the evaluator uploads choice bits and receives only the chosen
labels. Real mode runs a Diffie-Hellman OT over the peer channel and must be
enabled with PPOD_ENABLE_REAL_OT.
"""
import hashlib
import logging
import struct

from config import Config
from services.transport import Tag
from utils.errors import ProtocolError, UnsupportedModeError

logger = logging.getLogger(__name__)

LABEL_BYTES = 16

# RFC 3526 2048-bit MODP group, generator 2
MODP_PRIME = int(
    'FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74020BBEA63B139B22514A08798E3404DD'
    'EF9519B3CD3A431B302B0A6DF25F14374FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED'
    'EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF0598DA48361C55D39A69163FA8FD24CF5F'
    '83655D23DCA3AD961C62F356208552BB9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B'
    'E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF6955817183995497CEA956AE515D2261898FA0510'
    '15728E5A8AACAA68FFFFFFFFFFFFFFFF', 16)
MODP_GENERATOR = 2
MODP_BYTES = 256
EXPONENT_BITS = 256

_COUNT = struct.Struct('<I')


def pack_bits(bits):
    packed = 0
    for i, bit in enumerate(bits):
        packed |= (bit & 1) << i
    return _COUNT.pack(len(bits)) + packed.to_bytes((len(bits) + 7) // 8, 'little')


def unpack_bits(data):
    (count,) = _COUNT.unpack_from(data)
    body = data[_COUNT.size:]
    if len(body) != (count + 7) // 8:
        raise ProtocolError('Choice-bit frame has the wrong length')
    packed = int.from_bytes(body, 'little')
    return [(packed >> i) & 1 for i in range(count)]


def pack_pairs(pairs):
    return b''.join(l0.to_bytes(LABEL_BYTES, 'little') + l1.to_bytes(LABEL_BYTES, 'little')
                    for l0, l1 in pairs)


def unpack_pairs(data):
    if len(data) % (2 * LABEL_BYTES):
        raise ProtocolError('Label-pair frame has the wrong length')
    step = 2 * LABEL_BYTES
    return [(int.from_bytes(data[i:i + LABEL_BYTES], 'little'),
             int.from_bytes(data[i + LABEL_BYTES:i + step], 'little'))
            for i in range(0, len(data), step)]


def ideal_select(pairs, choices):
    """What the dealer does in ideal mode"""
    if len(pairs) != len(choices):
        raise ProtocolError(f'OT got {len(pairs)} label pairs for {len(choices)} choices')
    return [pair[choice] for pair, choice in zip(pairs, choices)]


def ot_transfer(session, choices=None, pairs=None):
    """
    Transfer one label per choice bit

    The garbler (party 0) passes pairs and gets None; the evaluator passes
    choices and gets the chosen labels.
    """
    mode = session.config.ot_mode
    if mode == 'real':
        if not Config.ENABLE_REAL_OT:
            raise UnsupportedModeError('Real OT requested but PPOD_ENABLE_REAL_OT is not set')
        if session.party == 0:
            return _real_send(session, pairs)
        return _real_receive(session, choices)

    if session.party == 0:
        session.dealer.send(Tag.OT_PAIRS, pack_pairs(pairs))
        return None
    session.dealer.send(Tag.OT_CHOICES, pack_bits(choices))
    labels = session.dealer.recv(Tag.OT_LABELS)
    if len(labels) != len(choices) * LABEL_BYTES:
        raise ProtocolError('Dealer returned the wrong number of labels')
    return [int.from_bytes(labels[i:i + LABEL_BYTES], 'little')
            for i in range(0, len(labels), LABEL_BYTES)]


def _pad(index, element):
    digest = hashlib.sha256(index.to_bytes(4, 'little') + element.to_bytes(MODP_BYTES, 'little')).digest()
    return int.from_bytes(digest[:LABEL_BYTES], 'little')


def _group_elements(data):
    if len(data) % MODP_BYTES:
        raise ProtocolError('Group element frame has the wrong length')
    return [int.from_bytes(data[i:i + MODP_BYTES], 'little') for i in range(0, len(data), MODP_BYTES)]


def _real_send(session, pairs):
    a = session.rng.getrandbits(EXPONENT_BITS) | 1
    big_a = pow(MODP_GENERATOR, a, MODP_PRIME)
    session.peer.send(Tag.OT_SETUP, big_a.to_bytes(MODP_BYTES, 'little'))

    replies = _group_elements(session.peer.recv(Tag.OT_REPLY))
    if len(replies) != len(pairs):
        raise ProtocolError('OT reply count does not match the label pairs')
    a_inverse = pow(big_a, -1, MODP_PRIME)
    ciphertexts = []
    for index, (big_b, (l0, l1)) in enumerate(zip(replies, pairs)):
        k0 = _pad(index, pow(big_b, a, MODP_PRIME))
        k1 = _pad(index, pow(big_b * a_inverse % MODP_PRIME, a, MODP_PRIME))
        ciphertexts.append((l0 ^ k0, l1 ^ k1))
    session.peer.send(Tag.OT_CIPHERTEXTS, pack_pairs(ciphertexts))
    return None


def _real_receive(session, choices):
    big_a = int.from_bytes(session.peer.recv(Tag.OT_SETUP), 'little')
    secrets = []
    replies = bytearray()
    for choice in choices:
        b = session.rng.getrandbits(EXPONENT_BITS) | 1
        big_b = pow(MODP_GENERATOR, b, MODP_PRIME)
        if choice:
            big_b = big_a * big_b % MODP_PRIME
        secrets.append(b)
        replies += big_b.to_bytes(MODP_BYTES, 'little')
    session.peer.send(Tag.OT_REPLY, bytes(replies))

    ciphertexts = unpack_pairs(session.peer.recv(Tag.OT_CIPHERTEXTS))
    if len(ciphertexts) != len(choices):
        raise ProtocolError('OT ciphertext count does not match the choices')
    return [pair[choice] ^ _pad(index, pow(big_a, b, MODP_PRIME))
            for index, (pair, choice, b) in enumerate(zip(ciphertexts, choices, secrets))]
