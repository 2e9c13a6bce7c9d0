"""
Decorators for the gateway API routes
"""
import logging
from functools import wraps

from flask import jsonify

from utils.errors import NoSessionError, PPODError

logger = logging.getLogger(__name__)


def session_required(service):
    """
    Decorator to require a running gateway session

    Usage:
        @bp.route('/api/outliers')
        @session_required(service)
        def outliers():
            ...
    """
    def decorator(f):
        @wraps(f)
        def decorated_function(*args, **kwargs):
            if not service.active:
                return jsonify({'error': 'No session is running; POST /api/session first'}), 409
            return f(*args, **kwargs)
        return decorated_function
    return decorator


def error_status(error):
    """HTTP status for an engine error"""
    if isinstance(error, NoSessionError):
        return 409
    if isinstance(error, ValueError):
        return 400
    return 500


def json_errors(f):
    """Turn engine errors into {'error': ...} responses"""
    @wraps(f)
    def decorated_function(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except (PPODError, ValueError) as e:
            status = error_status(e)
            if status == 500:
                logger.error('%s failed: %s', f.__name__, e)
            return jsonify({'error': str(e)}), status
    return decorated_function
