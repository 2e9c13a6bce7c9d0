"""
Configuration settings for the PPOD engine
"""
import logging
import os
from dataclasses import dataclass, asdict, replace

from dotenv import load_dotenv

from utils.errors import ParameterError
from utils.validators import validate_gateway_config

# Load environment variables from .env file
load_dotenv()


def _env_flag(name, default='false'):
    return os.getenv(name, default).strip().lower() in ('1', 'true', 'yes', 'on')


class Config:
    """Process-wide settings"""

    # Flask
    SECRET_KEY = os.getenv('FLASK_SECRET_KEY', 'dev-secret-key-change-in-production')

    # Logging
    LOG_LEVEL = os.getenv('PPOD_LOG_LEVEL', 'INFO')

    # Transport
    RECV_TIMEOUT = float(os.getenv('PPOD_RECV_TIMEOUT', 120))
    MAX_FRAME_BYTES = int(os.getenv('PPOD_MAX_FRAME_BYTES', 256 * 1024 * 1024))

    # Oblivious transfer
    ENABLE_REAL_OT = _env_flag('PPOD_ENABLE_REAL_OT')

    # Session config and uploads
    CONFIG_PATH = os.getenv('PPOD_CONFIG_PATH', '')
    MAX_CONTENT_LENGTH = int(os.getenv('MAX_CONTENT_LENGTH', 16 * 1024 * 1024))  # 16MB
    ALLOWED_EXTENSIONS = {'csv'}

    @staticmethod
    def allowed_file(filename):
        """Check if file extension is allowed"""
        return '.' in filename and \
               filename.rsplit('.', 1)[1].lower() in Config.ALLOWED_EXTENSIONS


def configure_logging(level=None):
    """Install the root handler once, at the configured level"""
    logging.basicConfig(
        level=getattr(logging, (level or Config.LOG_LEVEL).upper(), logging.INFO),
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )


@dataclass(frozen=True)
class GatewayConfig:
    """
    Parameters of one protocol session

    Distances, R and epsilon live in the rounded integer domain produced by
    the gateway's normalise-and-round step.
    """
    bounds: tuple = ((0.0, 1.0), (0.0, 1.0))
    bits: int = 64
    rounding_bits: int = 8
    window: int = 40
    slide: int = 5
    k: int = 5
    radius: int = 0
    epsilon: int = 0
    id_width: int = 32
    flag_width: int = 32
    key_width: int = 0
    bounds_policy: str = 'clamp'
    ot_mode: str = 'ideal'
    triple_low_water: int = 1024
    triple_refill: int = 8192

    @property
    def dims(self):
        return len(self.bounds)

    @property
    def max_distance(self):
        """Largest squared distance two rounded points can have"""
        return self.dims * (1 << (2 * self.rounding_bits))

    @property
    def distance_width(self):
        """Wires per distance inside circuits; the sentinel 2^w - 1 exceeds max_distance"""
        if self.key_width:
            return self.key_width
        return min(self.bits, (self.max_distance + 1).bit_length())

    @property
    def sentinel_key(self):
        return (1 << self.distance_width) - 1

    @property
    def sentinel_id(self):
        return (1 << self.id_width) - 1

    def clamp_threshold(self, value):
        """R and epsilon above every reachable distance compare the same as 2^w - 1"""
        return min(int(value), self.sentinel_key)

    def to_dict(self):
        data = asdict(self)
        data['bounds'] = [list(b) for b in self.bounds]
        return data

    def check(self):
        """Raise ParameterError unless the configuration is consistent"""
        is_valid, error = validate_gateway_config(self.to_dict())
        if not is_valid:
            raise ParameterError(error)
        if self.key_width and (1 << self.key_width) - 1 <= self.max_distance:
            raise ParameterError('key_width too small for the largest rounded distance')
        return self

    def with_params(self, **changes):
        return replace(self, **changes)

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        if 'bounds' in data:
            data['bounds'] = tuple((float(lo), float(hi)) for lo, hi in data['bounds'])
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f'Unknown config keys: {sorted(unknown)}')
        return cls(**data)


# Accepted spellings in key-value config files
_KEY_ALIASES = {
    'l': 'bits', 'bits': 'bits',
    'l_d': 'rounding_bits', 'rounding_bits': 'rounding_bits',
    'w': 'window', 'window': 'window',
    's': 'slide', 'slide': 'slide',
    'k': 'k',
    'r': 'radius', 'radius': 'radius',
    'epsilon': 'epsilon', 'eps': 'epsilon',
    'id_width': 'id_width', 'flag_width': 'flag_width', 'key_width': 'key_width',
    'bounds_policy': 'bounds_policy', 'ot_mode': 'ot_mode',
    'triple_low_water': 'triple_low_water', 'triple_refill': 'triple_refill',
}

_STRING_KEYS = {'bounds_policy', 'ot_mode'}

PROFILES = {
    'full': dict(bits=64, rounding_bits=15, window=400, slide=20, k=50, radius=25000),
    'desk': dict(bits=64, rounding_bits=8, window=40, slide=5, k=5, radius=0),
}


def profile_config(name, dims, **overrides):
    """Build a GatewayConfig from a named profile over unit bounds"""
    if name not in PROFILES:
        raise ParameterError(f'Unknown profile {name!r}; choose from {sorted(PROFILES)}')
    params = dict(PROFILES[name])
    params['bounds'] = tuple((0.0, 1.0) for _ in range(dims))
    params.update(overrides)
    return GatewayConfig.from_dict(params)


def parse_config_text(text):
    """
    Parse the key-value session config format

    Args:
        text: File contents; one `key = value` per line, `#` starts a comment

    Returns:
        GatewayConfig (not yet checked)
    """
    params = {}
    lower = upper = None
    dims = None
    profile = None

    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ParameterError(f'Line {number}: expected key = value')
        key, value = (part.strip() for part in line.split('=', 1))
        key = key.lower()

        try:
            if key == 'bounds':
                pairs = [item.split(':') for item in value.split(';') if item.strip()]
                params['bounds'] = tuple((float(lo), float(hi)) for lo, hi in pairs)
            elif key == 'lower':
                lower = float(value)
            elif key == 'upper':
                upper = float(value)
            elif key in ('dims', 'n'):
                dims = int(value)
            elif key == 'profile':
                profile = value
            elif key in _KEY_ALIASES:
                target = _KEY_ALIASES[key]
                params[target] = value if target in _STRING_KEYS else int(value)
            else:
                raise ParameterError(f'Line {number}: unknown key {key!r}')
        except ValueError as e:
            if isinstance(e, ParameterError):
                raise
            raise ParameterError(f'Line {number}: bad value for {key!r}: {e}')

    if 'bounds' not in params and dims is not None:
        params['bounds'] = tuple((lower if lower is not None else 0.0,
                                  upper if upper is not None else 1.0)
                                 for _ in range(dims))

    if profile:
        base = dict(PROFILES.get(profile) or {})
        if not base:
            raise ParameterError(f'Unknown profile {profile!r}')
        base.update(params)
        params = base

    return GatewayConfig.from_dict(params)


def load_gateway_config(path):
    """Read and check a key-value config file"""
    with open(path, encoding='utf-8') as handle:
        return parse_config_text(handle.read()).check()
