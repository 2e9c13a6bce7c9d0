"""
Run report routes
"""
from flask import Blueprint, jsonify, send_file

from services.report_service import ReportService, report_dict
from utils.decorators import json_errors, session_required


def init_report_routes(service):
    """Initialize report routes with a GatewayService"""
    reports_bp = Blueprint('reports', __name__)
    report_service = ReportService()

    @reports_bp.route('/api/report')
    @session_required(service)
    @json_errors
    def report():
        return jsonify(report_dict(service.run_report()))

    @reports_bp.route('/api/report.pdf')
    @session_required(service)
    @json_errors
    def report_pdf():
        pdf = report_service.generate_run_report(service.run_report())
        return send_file(pdf, mimetype='application/pdf', as_attachment=True,
                         download_name='ppod_report.pdf')

    return reports_bp
