"""
Input validation utilities
"""
import math

SUPPORTED_BITWIDTHS = (32, 64)
BOUNDS_POLICIES = ('clamp', 'reject')
OT_MODES = ('ideal', 'real')


def validate_gateway_config(data):
    """
    Validate session parameters

    Args:
        data: Dictionary with the GatewayConfig fields

    Returns:
        Tuple of (is_valid, error_message)
    """
    bounds = data.get('bounds') or []
    if not bounds:
        return False, 'At least one dimension bound is required'

    for i, (lower, upper) in enumerate(bounds):
        if not (math.isfinite(lower) and math.isfinite(upper)):
            return False, f'Bounds of dimension {i} must be finite'
        if upper <= lower:
            return False, f'Upper bound of dimension {i} must exceed its lower bound'

    bits = data.get('bits')
    if bits not in SUPPORTED_BITWIDTHS:
        return False, f'Ring bitwidth must be one of {SUPPORTED_BITWIDTHS}'

    rounding = data.get('rounding_bits')
    if not isinstance(rounding, int) or rounding < 1:
        return False, 'Rounding factor l_D must be a positive integer'

    # n * 2^(2*l_D + 2) < 2^l keeps every distance sum clear of the modulus
    dims = len(bounds)
    if dims * (1 << (2 * rounding + 2)) >= (1 << bits):
        return False, (f'Distance wrap check failed: {dims}*2^{2 * rounding + 2} '
                       f'does not fit below 2^{bits}')

    window, slide, k = data.get('window'), data.get('slide'), data.get('k')
    for name, value in (('W', window), ('S', slide), ('k', k)):
        if not isinstance(value, int) or value < 1:
            return False, f'{name} must be a positive integer'
    if slide > window:
        return False, 'S must not exceed W'
    if window - slide < k:
        return False, 'W - S must be at least k so every arrival has k candidates'

    if data.get('radius', 0) < 0:
        return False, 'R must be non-negative'
    if data.get('epsilon', 0) < 0:
        return False, 'epsilon must be non-negative'

    key_width = data.get('key_width', 0)
    if key_width < 0 or key_width > bits:
        return False, f'Key width must lie in [0, {bits}]'

    for name in ('id_width', 'flag_width'):
        width = data.get(name)
        if not isinstance(width, int) or width < 1 or width > 64:
            return False, f'{name} must lie in [1, 64]'

    if data.get('bounds_policy') not in BOUNDS_POLICIES:
        return False, f'Bounds policy must be one of {BOUNDS_POLICIES}'

    if data.get('ot_mode') not in OT_MODES:
        return False, f'OT mode must be one of {OT_MODES}'

    if data.get('triple_refill', 0) < 1 or data.get('triple_low_water', -1) < 0:
        return False, 'Triple pool refill must be positive and low-water non-negative'

    return True, None


def validate_raw_point(values, dims):
    """
    Validate one raw data point before preprocessing

    Args:
        values: Sequence of coordinates
        dims: Expected dimensionality

    Returns:
        Tuple of (is_valid, error_message)
    """
    if values is None or len(values) != dims:
        return False, f'Point must have exactly {dims} coordinates'

    for value in values:
        number = sanitize_numeric_input(value)
        if number is None:
            return False, f'Coordinate {value!r} is not a number'
        if not math.isfinite(number):
            return False, 'Coordinates must be finite'

    return True, None


def sanitize_numeric_input(value):
    """
    Convert input to float safely

    Args:
        value: Input value (string, int, float, or None)

    Returns:
        Float value or None if invalid
    """
    if value is None or value == '':
        return None

    try:
        return float(value)
    except (ValueError, TypeError):
        return None


def validate_file_extension(filename, allowed_extensions):
    """
    Check if file has allowed extension

    Args:
        filename: Name of file
        allowed_extensions: Set of allowed extensions

    Returns:
        True if extension is allowed, False otherwise
    """
    if not filename:
        return False
    return '.' in filename and \
           filename.rsplit('.', 1)[1].lower() in allowed_extensions
