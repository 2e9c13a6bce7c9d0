"""
Gateway ingestion routes (session, points, queries)
"""
import logging

import pandas as pd
from flask import Blueprint, jsonify, request
from werkzeug.utils import secure_filename

from config import Config, profile_config
from services.dataset_service import frame_to_points
from utils.decorators import json_errors, session_required
from utils.errors import ParameterError
from utils.validators import sanitize_numeric_input

logger = logging.getLogger(__name__)


def _session_config(data):
    """Config dict from a request body; 'profile' + 'dims' expand a named profile"""
    data = dict(data)
    seed = data.pop('seed', None)
    profile = data.pop('profile', None)
    if profile:
        dims = int(data.pop('dims', len(data.get('bounds', [])) or 2))
        return profile_config(profile, dims, **data).to_dict(), seed
    return data, seed


def init_gateway_routes(service):
    """Initialize gateway routes with a GatewayService"""
    gateway_bp = Blueprint('gateway', __name__)

    @gateway_bp.route('/api/session', methods=['POST'])
    @json_errors
    def start_session():
        """Start (or restart) a session"""
        data = request.get_json(silent=True)
        if not isinstance(data, dict):
            raise ParameterError('Expected a JSON object with the session config')
        config, seed = _session_config(data)
        return jsonify({'config': service.start(config, seed)}), 201

    @gateway_bp.route('/api/session', methods=['DELETE'])
    @session_required(service)
    @json_errors
    def close_session():
        service.close()
        return jsonify({'closed': True})

    @gateway_bp.route('/api/points', methods=['POST'])
    @session_required(service)
    @json_errors
    def add_points():
        """Raw points as JSON or as an uploaded CSV"""
        upload = request.files.get('file')
        if upload is not None:
            filename = secure_filename(upload.filename or '')
            if not Config.allowed_file(filename):
                raise ParameterError('Only CSV uploads are accepted')
            try:
                frame = pd.read_csv(upload.stream)
            except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
                raise ParameterError(f'Cannot read {filename}: {e}')
            ids, values = frame_to_points(frame)
            ids = ids or [None] * len(values)
            points = [{'id': i, 'values': list(v)} for i, v in zip(ids, values)]
            logger.info('ingesting %d points from %s', len(points), filename)
        else:
            data = request.get_json(silent=True) or {}
            points = data.get('points')
            if not isinstance(points, list) or not points:
                raise ParameterError('Expected a non-empty "points" list')
        return jsonify(service.add_points(points))

    @gateway_bp.route('/api/query', methods=['POST'])
    @session_required(service)
    @json_errors
    def query():
        data = request.get_json(silent=True) or {}
        point = data.get('point')
        if not isinstance(point, list):
            raise ParameterError('Expected a "point" coordinate list')
        epsilon = data.get('epsilon')
        if epsilon is not None:
            epsilon = sanitize_numeric_input(epsilon)
            if epsilon is None or epsilon < 0 or epsilon != int(epsilon):
                raise ParameterError('epsilon must be a non-negative integer')
            epsilon = int(epsilon)
        return jsonify({'assertion': service.query(point, epsilon)})

    @gateway_bp.route('/api/outliers')
    @session_required(service)
    @json_errors
    def outliers():
        return jsonify(service.outliers())

    return gateway_bp
