"""
PPOD operator script
Generate data, run streaming sessions in-process or over TCP, query, benchmark
"""
import argparse
import json
import sys

from config import Config, configure_logging, load_gateway_config, profile_config
from services.dataset_service import data_bounds, generate_dataset, planted_ids, read_dataset, write_dataset
from services.plaintext_oracle import PlainPoint, calibrate_radius
from services.ppod_protocol import Gateway
from services.report_service import FORMATS, write_report
from services.ring_sharing import gen_triples, write_triple_file
from services.run_service import SWEEPS, bench, run_stream, run_trusted, serve_p0, serve_p1
from services.session import make_rngs
from utils.errors import PPODError, ParameterError

ROLES = ('all', 'dealer', 'p0', 'p1')
MODES = {'ideal-ot': 'ideal', 'real-ot': 'real'}

# Quantile of the first window's k-distances used when R is calibrated
DEFAULT_QUANTILE = 0.9


def _point(text):
    values = [item.strip() for item in text.split(',')]
    if not values or any(not v for v in values):
        raise argparse.ArgumentTypeError(f'Malformed point {text!r}; use comma-separated numbers')
    try:
        return [float(v) for v in values]
    except ValueError:
        raise argparse.ArgumentTypeError(f'Malformed point {text!r}; use comma-separated numbers')


def _int_list(text):
    try:
        return [int(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f'Expected comma-separated integers, got {text!r}')


def build_config(args, values):
    """Session config from --config or --profile, fitted to the dataset"""
    dims = values.shape[1]
    path = args.config or Config.CONFIG_PATH
    if path:
        config = load_gateway_config(path)
    else:
        config = profile_config(args.profile, dims)
    if args.bounds_from_data:
        config = config.with_params(bounds=data_bounds(values))
    if config.dims != dims:
        raise ParameterError(f'Config has {config.dims} dimensions, dataset has {dims}')
    config = config.with_params(ot_mode=MODES[args.mode])
    if args.radius is not None:
        config = config.with_params(radius=args.radius)
    elif args.calibrate is not None or (not path and args.profile == 'desk'):
        config = config.with_params(radius=calibrated_radius(config, values, args.calibrate))
    if args.epsilon is not None:
        config = config.with_params(epsilon=args.epsilon)
    return config.check()


def calibrated_radius(config, values, quantile=None):
    """R from the k-distances of the first window's rounded points"""
    if len(values) < config.window:
        raise ParameterError(f'Dataset of {len(values)} points is smaller than W={config.window}')
    gateway = Gateway(config, None)
    points = [PlainPoint(i, tuple(gateway.round_point(list(v)))) for i, v in enumerate(values[:config.window])]
    return calibrate_radius(points, config.k, DEFAULT_QUANTILE if quantile is None else quantile)


def _emit(report, args):
    result = write_report(report, args.out, args.format)
    if args.out:
        print(f"Report written to {result}")
    else:
        print(result)


def cmd_gen_data(args):
    frame = generate_dataset(args.points, args.dims, args.clusters, args.outliers, args.spread, args.seed)
    write_dataset(frame, args.out)
    print(f"Wrote {len(frame)} points to {args.out} (planted outliers: {sorted(planted_ids(frame))})")
    return 0


def _queries(args):
    return [(point, args.epsilon) for point in (args.point or [])]


def cmd_run(args):
    if args.role == 'p0':
        if not args.listen or not args.connect:
            raise ParameterError('p0 needs --listen HOST:PORT and --connect DEALER_HOST:PORT')
        serve_p0(args.listen, args.connect, args.seed)
        print("Server 0 finished")
        return 0
    if args.role == 'p1':
        addresses = (args.connect or '').split(',')
        if len(addresses) != 2:
            raise ParameterError('p1 needs --connect P0_HOST:PORT,DEALER_HOST:PORT')
        serve_p1(addresses[0], addresses[1], args.seed)
        print("Server 1 finished")
        return 0

    if not args.data:
        raise ParameterError('--data is required')
    ids, values = read_dataset(args.data)
    config = build_config(args, values)
    if args.role == 'dealer':
        if not args.listen:
            raise ParameterError('dealer needs --listen HOST:PORT')
        report = run_trusted(config, values, ids, args.listen, args.seed, _queries(args), args.verify_oracle)
    else:
        report = run_stream(config, values, ids, args.seed, args.transport, _queries(args), args.verify_oracle)
    _emit(report, args)
    return 0 if report.verdict != 'fail' else 1


def cmd_query(args):
    if not args.point:
        raise ParameterError('At least one --point is required')
    args.role = 'all'
    ids, values = read_dataset(args.data)
    config = build_config(args, values)
    report = run_stream(config, values, ids, args.seed, args.transport, _queries(args), args.verify_oracle)
    for query in report.queries:
        print(f"{query['point']} eps={query['epsilon']}: {query['assertion']}")
    if args.out:
        write_report(report, args.out, args.format)
    return 0 if report.verdict != 'fail' else 1


def cmd_bench(args):
    ids, values = read_dataset(args.data)
    config = build_config(args, values)
    series = bench(config, values, ids, args.sweep, args.values, args.seed)
    text = json.dumps(series, indent=2)
    if args.out:
        with open(args.out, 'w', encoding='utf-8') as handle:
            handle.write(text)
        print(f"Series written to {args.out}")
    else:
        print(text)
    return 0


def cmd_gen_triples(args):
    rng, _, _ = make_rngs(args.seed)
    share0, share1 = gen_triples(args.count, rng, args.bits)
    for party, triples in ((0, share0), (1, share1)):
        path = f"{args.out}.p{party}"
        write_triple_file(path, triples, party, args.bits)
        print(f"Wrote {len(triples)} triples to {path}")
    return 0


def _session_options(parser, data_required=True):
    parser.add_argument('--config', help='key-value session config file')
    parser.add_argument('--profile', choices=('full', 'desk'), default='desk')
    parser.add_argument('--data', required=data_required, help='CSV stream, one point per row')
    parser.add_argument('--seed', type=int)
    parser.add_argument('--mode', choices=sorted(MODES), default='ideal-ot')
    parser.add_argument('--radius', type=int, help='R in the rounded domain')
    parser.add_argument('--calibrate', type=float, metavar='QUANTILE',
                        help='set R to this quantile of the first window\'s k-distances')
    parser.add_argument('--epsilon', type=int, help='query threshold in the rounded domain')
    parser.add_argument('--bounds-from-data', action='store_true')
    parser.add_argument('--transport', choices=('inproc', 'tcp'), default='inproc')
    parser.add_argument('--verify-oracle', action='store_true')
    parser.add_argument('--out')
    parser.add_argument('--format', choices=FORMATS, default='json')


def build_parser():
    parser = argparse.ArgumentParser(prog='ppod', description=__doc__.strip().splitlines()[0])
    parser.add_argument('--log-level', default=None)
    commands = parser.add_subparsers(dest='command', required=True)

    gen = commands.add_parser('gen-data', help='write a synthetic stream')
    gen.add_argument('--points', type=int, default=90)
    gen.add_argument('--dims', type=int, default=2)
    gen.add_argument('--clusters', type=int, default=3)
    gen.add_argument('--outliers', type=int, default=3)
    gen.add_argument('--spread', type=float, default=0.02)
    gen.add_argument('--seed', type=int)
    gen.add_argument('--out', required=True)
    gen.set_defaults(handler=cmd_gen_data)

    run = commands.add_parser('run', help='run a streaming session')
    _session_options(run, data_required=False)
    run.add_argument('--role', choices=ROLES, default='all')
    run.add_argument('--listen', help='HOST:PORT to accept on')
    run.add_argument('--connect', help='HOST:PORT to dial (p1: P0,DEALER)')
    run.add_argument('--point', type=_point, action='append', help='query point after the stream')
    run.set_defaults(handler=cmd_run)

    query = commands.add_parser('query', help='run a stream, then answer queries')
    _session_options(query)
    query.add_argument('--point', type=_point, action='append', required=True)
    query.set_defaults(handler=cmd_query)

    sweep = commands.add_parser('bench', help='sweep W or k')
    _session_options(sweep)
    sweep.add_argument('--sweep', choices=SWEEPS, default='k')
    sweep.add_argument('--values', type=_int_list, default=[5, 10, 20])
    sweep.set_defaults(handler=cmd_bench)

    triples = commands.add_parser('gen-triples', help='write dealer triple files')
    triples.add_argument('--count', type=int, required=True)
    triples.add_argument('--bits', type=int, choices=(32, 64), default=64)
    triples.add_argument('--seed', type=int)
    triples.add_argument('--out', required=True, help='path prefix; .p0 and .p1 are appended')
    triples.set_defaults(handler=cmd_gen_triples)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.handler(args)
    except (PPODError, ValueError) as e:
        print(f"ppod {args.command} failed: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
