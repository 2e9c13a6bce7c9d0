import io

import pytest

from app import create_app
from services.gateway_service import GatewayService

SESSION = {
    'bounds': [[0.0, 1.0], [0.0, 1.0]], 'rounding_bits': 4, 'window': 8, 'slide': 2, 'k': 5,
    'radius': 20, 'epsilon': 4, 'id_width': 8, 'flag_width': 16, 'seed': 5,
}

# Rounded grid cells; the first point is isolated
CELLS = [(15, 15), (4, 4), (5, 4), (4, 5), (5, 5), (3, 4), (4, 3), (6, 4)]


def raw(cell):
    """Raw coordinates that round to cell at l_D = 4"""
    return [(c + 0.5) / 16 for c in cell]


@pytest.fixture
def service():
    service = GatewayService(timeout=60)
    yield service
    service.close()


@pytest.fixture
def client(service):
    return create_app(service).test_client()


@pytest.fixture
def started(client):
    response = client.post('/api/session', json=SESSION)
    assert response.status_code == 201
    return client


@pytest.fixture
def initialised(started):
    response = started.post('/api/points', json={'points': [raw(c) for c in CELLS]})
    assert response.status_code == 200
    return started


def test_index_reports_the_session(client):
    assert client.get('/').get_json() == {'service': 'ppod-gateway', 'session': False}


def test_unknown_route_is_json(client):
    response = client.get('/api/nothing')
    assert response.status_code == 404
    assert response.get_json() == {'error': 'Not found'}


@pytest.mark.parametrize('method,path', [
    ('post', '/api/points'), ('post', '/api/query'), ('get', '/api/outliers'),
    ('get', '/api/report'), ('get', '/api/report.pdf'), ('delete', '/api/session'),
])
def test_routes_need_a_session(client, method, path):
    response = getattr(client, method)(path, json={})
    assert response.status_code == 409
    assert 'error' in response.get_json()


class TestSession:
    def test_start_returns_the_checked_config(self, started):
        assert started.get('/').get_json()['session'] is True

    def test_start_from_a_profile(self, client):
        response = client.post('/api/session', json={'profile': 'desk', 'dims': 3, 'radius': 30})
        assert response.status_code == 201
        config = response.get_json()['config']
        assert (config['window'], config['radius'], len(config['bounds'])) == (40, 30, 3)

    @pytest.mark.parametrize('body', [[1, 2], {'window': 4, 'slide': 5}, {'colour': 'blue'}])
    def test_bad_configs(self, client, body):
        response = client.post('/api/session', json=body)
        assert response.status_code == 400
        assert client.get('/').get_json()['session'] is False

    def test_delete_ends_the_session(self, started):
        assert started.delete('/api/session').get_json() == {'closed': True}
        assert started.get('/api/outliers').status_code == 409


class TestPoints:
    def test_initialise_runs_once_the_window_is_full(self, started):
        first = started.post('/api/points', json={'points': [raw(c) for c in CELLS[:5]]}).get_json()
        assert first == {'accepted': 5, 'pending': 5, 'steps': []}
        second = started.post('/api/points', json={'points': [raw(c) for c in CELLS[5:]]}).get_json()
        assert second['pending'] == 0
        assert second['steps'] == [{'step': 0, 'phase': 'initialise', 'outliers': [1]}]

    def test_slide_after_initialise(self, initialised):
        body = initialised.post('/api/points', json={'points': [raw((4, 4)), raw((5, 5))]}).get_json()
        assert body['steps'] == [{'step': 1, 'phase': 'update', 'outliers': []}]
        outliers = initialised.get('/api/outliers').get_json()
        assert outliers == {'initialised': True, 'outliers': [], 'steps': 2}

    def test_points_with_ids(self, started):
        points = [{'id': 100 + i, 'values': raw(c)} for i, c in enumerate(CELLS)]
        body = started.post('/api/points', json={'points': points}).get_json()
        assert body['steps'][0]['outliers'] == [100]

    def test_csv_upload(self, started):
        rows = '\n'.join(f'{i + 1},{x},{y}' for i, (x, y) in enumerate(raw(c) for c in CELLS))
        data = {'file': (io.BytesIO(f'id,x0,x1\n{rows}\n'.encode()), 'stream.csv')}
        response = started.post('/api/points', data=data, content_type='multipart/form-data')
        assert response.status_code == 200
        assert response.get_json()['steps'][0]['outliers'] == [1]

    def test_non_csv_upload(self, started):
        data = {'file': (io.BytesIO(b'0.1,0.2\n'), 'stream.txt')}
        response = started.post('/api/points', data=data, content_type='multipart/form-data')
        assert response.status_code == 400

    @pytest.mark.parametrize('body', [{}, {'points': []}, {'points': [[0.1]]}, {'points': [['a', 0.2]]}])
    def test_bad_points(self, started, body):
        assert started.post('/api/points', json=body).status_code == 400

    def test_out_of_bounds_points_are_clamped(self, started):
        points = [[1.7, 1.9]] + [raw(c) for c in CELLS[1:]]
        body = started.post('/api/points', json={'points': points}).get_json()
        assert body['steps'][0]['outliers'] == [1]


class TestQuery:
    def test_query_near_the_outlier(self, initialised):
        response = initialised.post('/api/query', json={'point': raw((15, 15)), 'epsilon': 4})
        assert response.get_json() == {'assertion': True}

    def test_query_inside_the_cluster(self, initialised):
        response = initialised.post('/api/query', json={'point': raw((4, 4))})
        assert response.get_json() == {'assertion': False}

    def test_query_before_initialise(self, started):
        assert started.post('/api/query', json={'point': raw((4, 4))}).status_code == 400

    @pytest.mark.parametrize('body', [
        {'point': 'near'}, {'point': [0.5]}, {'point': [0.5, 0.5], 'epsilon': -1},
        {'point': [0.5, 0.5], 'epsilon': 'x'}, {'point': [0.5, 0.5], 'epsilon': 2.5},
    ])
    def test_bad_queries(self, initialised, body):
        assert initialised.post('/api/query', json=body).status_code == 400

    def test_session_survives_a_bad_query(self, initialised):
        initialised.post('/api/query', json={'point': [0.5]})
        response = initialised.post('/api/query', json={'point': raw((15, 15)), 'epsilon': 0})
        assert response.get_json() == {'assertion': True}


class TestReports:
    def test_json_report(self, initialised):
        initialised.post('/api/query', json={'point': raw((15, 15)), 'epsilon': 4})
        report = initialised.get('/api/report').get_json()
        assert [step['outliers'] for step in report['steps']] == [[1]]
        assert report['queries'][0]['assertion'] is True
        assert report['leakage']['violations'] == []
        assert report['triples_consumed'] > 0

    def test_pdf_report(self, initialised):
        response = initialised.get('/api/report.pdf')
        assert response.status_code == 200
        assert response.mimetype == 'application/pdf'
        assert response.data.startswith(b'%PDF')
