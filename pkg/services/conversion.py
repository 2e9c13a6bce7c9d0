"""
Conversions between additive and Yao shares
"""
from models.ring_share import RingShare, ring_mask
from services.circuits import build_a2y, build_y2a
from services.garbling import execute
from utils.errors import ProtocolError, WidthMismatchError


def a2y(session, share, width=None):
    """
    Additive share in, Yao share out

    With width < l only the low width bits of each share enter the adder,
    which is exact whenever the secret is below 2^width.

    Args:
        session: PartySession
        share: RingShare or int share value of this party
        width: circuit width, defaults to the ring bitwidth

    Returns:
        YaoShare of the secret
    """
    value = share.value if isinstance(share, RingShare) else share
    if isinstance(share, RingShare) and share.bits != session.bits:
        raise WidthMismatchError(f'{share.bits}-bit share in a {session.bits}-bit session')
    width = width or session.bits
    low = value & ring_mask(width)
    name = 'share0' if session.party == 0 else 'share1'
    result = execute(session, build_a2y(width), {name: low}, kind='a2y')
    return result.shares['value']


def y2a(session, yao, mask=None):
    """
    Yao share in, l-bit additive share out

    The garbler's share is a fresh mask a_0; the evaluator decodes only
    a - a_0. A mask may never be used twice in one session.

    Returns:
        RingShare of this party
    """
    bits = session.bits
    circuit = build_y2a(yao.width, bits)
    if session.party == 0:
        if mask is None:
            mask = session.rng.getrandbits(bits)
        if mask in session.used_masks:
            raise ProtocolError('Y2A mask reused')
        session.used_masks.add(mask)
        execute(session, circuit, {'mask': mask}, {'value': yao}, kind='y2a')
        return RingShare(mask, 0, bits)
    result = execute(session, circuit, {}, {'value': yao}, kind='y2a')
    return RingShare(result.values['share'], 1, bits)
