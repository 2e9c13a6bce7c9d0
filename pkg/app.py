"""
PPOD gateway
HTTP ingestion endpoint of the trusted node
"""
from flask import Flask, jsonify

from config import Config, configure_logging
from routes.gateway_routes import init_gateway_routes
from routes.report_routes import init_report_routes
from services.gateway_service import GatewayService


def create_app(service=None):
    """Build the Flask app around one GatewayService"""
    app = Flask(__name__)
    app.config.from_object(Config)
    service = service or GatewayService()
    app.extensions['ppod_gateway'] = service

    app.register_blueprint(init_gateway_routes(service))
    app.register_blueprint(init_report_routes(service))

    @app.route('/')
    def index():
        return jsonify({'service': 'ppod-gateway', 'session': service.active})

    @app.errorhandler(404)
    def not_found(error):
        return jsonify({'error': 'Not found'}), 404

    @app.errorhandler(500)
    def internal_error(error):
        return jsonify({'error': 'Internal server error'}), 500

    return app


if __name__ == '__main__':
    configure_logging()
    print("=" * 60)
    print("PPOD gateway")
    print("=" * 60)
    print(f"Log level: {Config.LOG_LEVEL}")
    print(f"Real OT enabled: {'Yes' if Config.ENABLE_REAL_OT else 'No'}")
    print("=" * 60)
    print("Starting server on http://localhost:5000")
    print("=" * 60)
    create_app().run()
