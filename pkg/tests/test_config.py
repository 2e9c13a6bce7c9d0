import pytest

from config import GatewayConfig, load_gateway_config, parse_config_text, profile_config
from utils.errors import ParameterError
from utils.validators import sanitize_numeric_input, validate_gateway_config, validate_raw_point


def unit(dims):
    return tuple((0.0, 1.0) for _ in range(dims))


class TestWrapCheck:
    def test_sixteen_dims_fit_in_64_bits(self):
        GatewayConfig(bounds=unit(16), bits=64, rounding_bits=15).check()

    def test_sixteen_dims_overflow_32_bits(self):
        with pytest.raises(ParameterError, match='wrap'):
            GatewayConfig(bounds=unit(16), bits=32, rounding_bits=15).check()

    def test_unsupported_ring(self):
        with pytest.raises(ParameterError):
            GatewayConfig(bits=48).check()


class TestWindowParameters:
    @pytest.mark.parametrize('changes', [
        dict(slide=50),
        dict(window=10, slide=6, k=5),
        dict(k=0),
        dict(radius=-1),
        dict(epsilon=-2),
        dict(bounds=((1.0, 1.0),)),
        dict(bounds=((0.0, float('inf')),)),
        dict(bounds=()),
        dict(bounds_policy='wrap'),
        dict(ot_mode='quantum'),
        dict(id_width=0),
        dict(key_width=3),
    ])
    def test_rejected(self, changes):
        with pytest.raises(ParameterError):
            GatewayConfig(**changes).check()

    def test_defaults_are_valid(self):
        assert GatewayConfig().check().window == 40


class TestDerivedWidths:
    def test_distance_width_covers_the_largest_distance(self):
        config = GatewayConfig(bounds=unit(2), rounding_bits=4)
        assert config.max_distance == 512
        assert config.distance_width == 10
        assert config.sentinel_key == 1023
        assert config.sentinel_key > config.max_distance

    def test_explicit_key_width(self):
        config = GatewayConfig(bounds=unit(2), rounding_bits=4, key_width=12)
        assert config.check().distance_width == 12

    def test_thresholds_clamp_to_the_sentinel(self):
        config = GatewayConfig(bounds=unit(2), rounding_bits=4)
        assert config.clamp_threshold(30) == 30
        assert config.clamp_threshold(10 ** 12) == 1023


class TestProfiles:
    def test_full_profile(self):
        config = profile_config('full', 16).check()
        assert (config.window, config.slide, config.k, config.radius) == (400, 20, 50, 25000)
        assert config.rounding_bits == 15

    def test_desk_profile_with_overrides(self):
        config = profile_config('desk', 3, radius=7)
        assert (config.window, config.slide, config.k, config.radius) == (40, 5, 5, 7)
        assert config.dims == 3

    def test_unknown_profile(self):
        with pytest.raises(ParameterError):
            profile_config('huge', 2)


class TestConfigFile:
    def test_parse_with_aliases_and_comments(self):
        text = """
        # desk-sized run
        dims = 3
        lower = -1
        upper = 1
        l = 64
        l_D = 6     # rounding
        W = 20
        S = 4
        k = 3
        R = 100
        eps = 9
        ot_mode = ideal
        """
        config = parse_config_text(text).check()
        assert config.bounds == ((-1.0, 1.0),) * 3
        assert (config.bits, config.rounding_bits) == (64, 6)
        assert (config.window, config.slide, config.k) == (20, 4, 3)
        assert (config.radius, config.epsilon, config.ot_mode) == (100, 9, 'ideal')

    def test_explicit_bounds(self):
        config = parse_config_text('bounds = 0:10; -5:5\nW = 10\nS = 2\nk = 2')
        assert config.bounds == ((0.0, 10.0), (-5.0, 5.0))

    def test_profile_in_file(self):
        config = parse_config_text('profile = full\ndims = 16\nR = 100')
        assert (config.window, config.radius) == (400, 100)

    @pytest.mark.parametrize('text', ['W 20', 'colour = blue', 'W = many', 'profile = tiny\ndims = 2'])
    def test_bad_lines(self, text):
        with pytest.raises(ParameterError):
            parse_config_text(text)

    def test_load_checks_the_file(self, tmp_path):
        path = tmp_path / 'session.conf'
        path.write_text('dims = 2\nl = 32\nl_D = 15\n', encoding='utf-8')
        with pytest.raises(ParameterError):
            load_gateway_config(path)

    def test_round_trip_through_dict(self):
        config = GatewayConfig(bounds=unit(2), rounding_bits=5, window=12, slide=3, k=3, radius=9)
        assert GatewayConfig.from_dict(config.to_dict()) == config

    def test_unknown_dict_keys(self):
        with pytest.raises(ParameterError):
            GatewayConfig.from_dict({'window': 10, 'colour': 'blue'})


class TestValidators:
    def test_config_validator_reports_the_problem(self):
        data = GatewayConfig(bounds=unit(2)).to_dict()
        data['window'] = 4
        is_valid, error = validate_gateway_config(data)
        assert not is_valid
        assert 'S must not exceed W' in error

    def test_raw_point(self):
        assert validate_raw_point([0.1, '0.2'], 2) == (True, None)
        assert validate_raw_point([0.1], 2)[0] is False
        assert validate_raw_point(None, 2)[0] is False

    @pytest.mark.parametrize('value,expected', [('3.5', 3.5), (2, 2.0), ('', None), (None, None), ('x', None)])
    def test_sanitize(self, value, expected):
        assert sanitize_numeric_input(value) == expected
