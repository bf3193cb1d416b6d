#!/usr/bin/env python3
"""Command-line front end: cheeger <command> [options].

Exit codes: 0 success, 1 a numerical check falsified a claimed inequality,
2 usage error (bad flags, invalid parameters, unwritable output).
"""
import os
import sys
import argparse
import logging

import numpy as np
import pandas as pd

from cheeger_solver import cheeger, iso_profile, run_lemma_checks, solver_options
from mixture_core import DegenerateGaussian, MixtureSpec, canonicalize
from oracle import verify_cheeger_lower_bound
from scanner import ParameterScanner, ScanRecord, records_to_csv, records_to_frame
from utils import (CheegerError, ConfigManager, DomainError, VerificationFailure, dump_json, format_float,
                   parse_vector)

EXIT_OK, EXIT_FALSIFIED, EXIT_USAGE = 0, 1, 2
FORMATS = ('json', 'csv', 'human')
TEST_SET_KINDS = ('halfspace', 'ball', 'slab')


class UsageError(CheegerError):
    pass


def _mixture_options():
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group('mixture')
    group.add_argument('--p', type=float, help='weight of the component centred at a')
    group.add_argument('--a', help='centre a as comma-separated reals (default: origin)')
    group.add_argument('--b', help='centre b as comma-separated reals')
    group.add_argument('--m', type=float, help='canonical weight (shorthand with --d)')
    group.add_argument('--d', type=float, help='canonical distance |b - a|')
    group.add_argument('--m-d', dest='m_d', help="shorthand 'm,d'")
    group.add_argument('--n', type=int, help='ambient dimension (pads the centres)')
    return parent


def _output_options():
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument('--format', choices=FORMATS, help='output format')
    parent.add_argument('--output', help='write to this path instead of stdout')
    parent.add_argument('--seed', type=int, help='seed for Monte-Carlo streams')
    parent.add_argument('--config', help='JSON config file (defaults for every flag)')
    return parent


def build_parser():
    parser = argparse.ArgumentParser(
        prog='cheeger',
        description='Cheeger constants and Cheeger sets of two-component Gaussian mixtures')
    sub = parser.add_subparsers(dest='command', required=True)
    mixture, output = _mixture_options(), _output_options()

    sub.add_parser('compute', parents=[mixture, output], help='Cheeger constant and optimal half-spaces')

    profile = sub.add_parser('profile', parents=[mixture, output], help='half-space isoperimetric profile')
    profile.add_argument('--points', type=int, default=21)
    profile.add_argument('--unrestricted', action='store_true',
                         help='sample all of (0, 1) instead of [Q(0), Q(d)]')

    scan = sub.add_parser('scan', parents=[output], help='solve a (p, d) grid')
    scan.add_argument('--p-lo', type=float, default=0.05)
    scan.add_argument('--p-hi', type=float, default=0.95)
    scan.add_argument('--d-lo', type=float, default=0.5)
    scan.add_argument('--d-hi', type=float, default=5.0)
    scan.add_argument('--np', dest='n_p', type=int, default=10)
    scan.add_argument('--nd', dest='n_d', type=int, default=10)
    scan.add_argument('--workers', type=int)

    verify = sub.add_parser('verify', parents=[mixture, output], help='randomized lower-bound sweep')
    verify.add_argument('--trials', type=int)
    verify.add_argument('--samples', type=int)
    verify.add_argument('--kinds', default=','.join(TEST_SET_KINDS),
                        help='comma-separated subset of halfspace,ball,slab')
    verify.add_argument('--shift-trials', type=int, default=0)

    locus = sub.add_parser('locus', parents=[output], help='weight where two Cheeger sets coexist')
    locus.add_argument('--d', type=float, required=True)
    locus.add_argument('--p-lo', type=float, default=0.05)
    locus.add_argument('--p-hi', type=float, default=0.10)

    checks = sub.add_parser('checks', parents=[mixture, output], help='supporting inequality checks')
    checks.add_argument('--grid-size', type=int)

    threshold = sub.add_parser('threshold', parents=[output], help='uniqueness threshold estimate')
    threshold.add_argument('--p', type=float, required=True)
    threshold.add_argument('--d-hi', type=float, default=10.0)

    serve = sub.add_parser('serve', help='run the JSON API')
    serve.add_argument('--host', default='127.0.0.1')
    serve.add_argument('--port', type=int, default=5000)
    return parser


# ---------------- Mixture resolution ----------------

def _pad(vector, n):
    return list(vector) + [0.0] * (n - len(vector))


def resolve_mixture(args, config):
    """Build the MixtureSpec from either (p, a, b) or the (m, d) shorthand."""
    defaults = config.get('mixture', {}) or {}
    p = args.p if args.p is not None else defaults.get('p')
    a_text = args.a if args.a is not None else defaults.get('a')
    b_text = args.b if args.b is not None else defaults.get('b')
    m, d = args.m, args.d
    if args.m_d is not None:
        pair = parse_vector(args.m_d)
        if len(pair) != 2:
            raise UsageError(f"--m-d expects 'm,d', got {args.m_d!r}")
        if (m is not None and m != pair[0]) or (d is not None and d != pair[1]):
            raise UsageError("--m-d conflicts with --m/--d")
        m, d = pair
    if m is None and d is None and a_text is None and b_text is None:
        m, d = defaults.get('m'), defaults.get('d')

    shorthand = m is not None or d is not None
    if shorthand and (args.a is not None or args.b is not None):
        raise UsageError("give either --a/--b or the (m, d) shorthand, not both")
    if shorthand:
        if m is None and p is not None:
            m = p
        if m is None or d is None:
            raise UsageError("the shorthand needs both m and d")
        if p is not None and p != m:
            raise UsageError(f"--p {p} conflicts with m = {m}")
        return MixtureSpec.from_canonical(m, d, args.n or 1)

    if p is None or b_text is None:
        raise UsageError("specify the mixture with --p and --b (and optionally --a), or with --m/--d")
    b = parse_vector(b_text)
    a = parse_vector(a_text) if a_text is not None else [0.0]
    n = max(len(a), len(b), args.n or 1)
    return MixtureSpec(p=p, a=_pad(a, n), b=_pad(b, n))


def _canonical(spec):
    cm = canonicalize(spec)
    if isinstance(cm, DegenerateGaussian):
        raise DomainError("the mixture is a single Gaussian; this command needs distinct components")
    return cm


# ---------------- Rendering ----------------

def _human(payload, indent=''):
    lines = []
    for key, value in payload.items():
        if isinstance(value, dict):
            lines.append(f"{indent}{key}:")
            lines.extend(_human(value, indent + '  '))
        elif isinstance(value, (list, tuple)) and value and isinstance(value[0], dict):
            lines.append(f"{indent}{key}:")
            for item in value:
                lines.append(f"{indent}  -")
                lines.extend(_human(item, indent + '    '))
        elif isinstance(value, (list, tuple)):
            lines.append(f"{indent}{key}: " + ', '.join(_scalar(v) for v in value))
        else:
            lines.append(f"{indent}{key}: {_scalar(value)}")
    return lines


def _scalar(value):
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    return str(value)


def _frame_csv(frame):
    return frame.to_csv(index=False, float_format='%.17g', na_rep='', lineterminator='\n')


def render(payload, fmt, frame=None):
    if fmt == 'json':
        return dump_json(payload) + '\n'
    if fmt == 'csv':
        if frame is None:
            frame = pd.DataFrame([{k: v for k, v in payload.items()
                                   if not isinstance(v, (dict, list, tuple))}])
        return _frame_csv(frame)
    return '\n'.join(_human(payload)) + '\n'


# ---------------- Commands ----------------

def _solution_record(spec, solution):
    return ScanRecord(p=spec.p, d=spec.distance, h=solution.h, r_star=solution.r_star,
                      minimizers=tuple(solution.minimizers), n_min=len(solution.minimizers),
                      gap=solution.gap)


def cmd_compute(args, config, fmt):
    spec = resolve_mixture(args, config)
    solution = cheeger(spec, **solver_options(config))
    payload = {'spec': spec.to_dict(), **solution.to_dict()}
    if fmt == 'csv':
        return records_to_csv([_solution_record(spec, solution)]), EXIT_OK
    return render(payload, fmt), EXIT_OK


def cmd_profile(args, config, fmt):
    cm = _canonical(resolve_mixture(args, config))
    if args.points < 2:
        raise UsageError(f"--points must be at least 2, got {args.points}")
    fn = cm.functions
    if args.unrestricted:
        grid = np.linspace(1e-3, 1.0 - 1e-3, args.points)
    else:
        grid = np.linspace(float(fn.Q(0.0)), float(fn.Q(cm.d)), args.points)
    points = iso_profile(cm, grid, restricted=not args.unrestricted)
    rows = [{'v': pt.v, 'iso': pt.iso, 'r': pt.r} for pt in points]
    payload = {'m': cm.m, 'd': cm.d, 'restricted': not args.unrestricted, 'points': rows}
    return render(payload, fmt, frame=pd.DataFrame(rows, columns=['v', 'iso', 'r'])), EXIT_OK


def cmd_scan(args, config, fmt):
    scanner = ParameterScanner(workers=args.workers, config=config)
    records = scanner.scan_grid(args.p_lo, args.p_hi, args.d_lo, args.d_hi, args.n_p, args.n_d)
    if fmt == 'csv':
        return records_to_csv(records), EXIT_OK
    if fmt == 'json':
        return dump_json([r.to_dict() for r in records]) + '\n', EXIT_OK
    table = records_to_frame(records).to_string(index=False, float_format=format_float)
    return table + '\n', EXIT_OK


def cmd_verify(args, config, fmt):
    spec = resolve_mixture(args, config)
    kinds = tuple(k.strip() for k in args.kinds.split(',') if k.strip())
    unknown = [k for k in kinds if k not in TEST_SET_KINDS]
    if not kinds or unknown:
        raise UsageError(f"--kinds must be a subset of {','.join(TEST_SET_KINDS)}, got {args.kinds!r}")
    trials = args.trials if args.trials is not None else config.get('oracle.trials', 100)
    samples = args.samples if args.samples is not None else config.get('oracle.samples', 10**6)
    seed = args.seed if args.seed is not None else config.get('run.seed', 0)
    if trials < 1:
        raise UsageError(f"--trials must be positive, got {trials}")
    report = verify_cheeger_lower_bound(spec, trials, samples, seed, kinds=kinds,
                                        shift_trials=args.shift_trials, strict=True,
                                        tolerances=solver_options(config))
    return render(report, fmt), EXIT_OK


def cmd_locus(args, config, fmt):
    scanner = ParameterScanner(workers=1, config=config)
    p_hat = scanner.tie_locus(args.d, (args.p_lo, args.p_hi))
    solution = cheeger(MixtureSpec.from_canonical(p_hat, args.d), **solver_options(config))
    payload = {'d': args.d, 'p_lo': args.p_lo, 'p_hi': args.p_hi, 'p_hat': p_hat,
               'h': solution.h, 'minimizers': solution.minimizers,
               'n_min': len(solution.minimizers)}
    return render(payload, fmt), EXIT_OK


def cmd_checks(args, config, fmt):
    cm = _canonical(resolve_mixture(args, config))
    grid_size = args.grid_size if args.grid_size is not None else config.get('run.grid_size', 1000)
    results = run_lemma_checks(cm.m, cm.d, grid_size)
    status = EXIT_OK if all(results.values()) else EXIT_FALSIFIED
    if fmt == 'human':
        lines = [f"{name}: {'PASS' if passed else 'FAIL'}" for name, passed in results.items()]
        return '\n'.join(lines) + '\n', status
    return render({'m': cm.m, 'd': cm.d, 'grid_size': grid_size, 'checks': results}, fmt,
                  frame=pd.DataFrame([{'m': cm.m, 'd': cm.d, **results}])), status


def cmd_threshold(args, config, fmt):
    scanner = ParameterScanner(workers=1, config=config)
    value = scanner.uniqueness_threshold(args.p, args.d_hi)
    return render({'p': args.p, 'd_hi': args.d_hi, 'threshold': value}, fmt), EXIT_OK


COMMANDS = {
    'compute': cmd_compute,
    'profile': cmd_profile,
    'scan': cmd_scan,
    'verify': cmd_verify,
    'locus': cmd_locus,
    'checks': cmd_checks,
    'threshold': cmd_threshold,
}


def emit(text, path):
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, 'w', newline='') as f:
        f.write(text)


def run(args):
    """Execute one parsed command; returns the process exit code."""
    if args.command == 'serve':
        from app import app
        app.run(host=args.host, port=args.port)
        return EXIT_OK

    if args.config and not os.path.exists(args.config):
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return EXIT_USAGE
    config = ConfigManager(args.config) if args.config else ConfigManager()
    fmt = args.format or config.get('run.format', 'human')
    if fmt not in FORMATS:
        print(f"error: unknown format {fmt!r}", file=sys.stderr)
        return EXIT_USAGE

    try:
        text, status = COMMANDS[args.command](args, config, fmt)
    except VerificationFailure as e:
        logging.error(f"{args.command} falsified: {e}")
        text, status = render(e.report, fmt), EXIT_FALSIFIED
    except (CheegerError, ValueError) as e:
        logging.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE

    try:
        emit(text, args.output)
    except OSError as e:
        print(f"error: cannot write {args.output}: {e}", file=sys.stderr)
        return EXIT_USAGE
    return status


def main(argv=None):
    logging.basicConfig(level=os.environ.get('CHEEGER_LOG_LEVEL', 'WARNING').upper(),
                        stream=sys.stderr, format='%(levelname)s: %(message)s')
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    return run(args)


if __name__ == '__main__':
    sys.exit(main())
