import logging

import numpy as np
from flask import request, jsonify

from app import app
from cheeger_solver import cheeger, iso_profile, run_lemma_checks, solver_options
from mixture_core import CanonicalMixture, MixtureSpec
from scanner import ParameterScanner
from utils import DomainError, parse_vector, to_jsonable


def _arg(name, cast=float, default=None):
    raw = request.args.get(name)
    if raw is None or raw == '':
        if default is None:
            raise DomainError(f"missing query parameter '{name}'")
        return default
    try:
        return cast(raw)
    except ValueError:
        raise DomainError(f"query parameter '{name}' is not a valid {cast.__name__}: {raw!r}")


def _mixture_from_query():
    if 'm' in request.args or 'd' in request.args:
        return MixtureSpec.from_canonical(_arg('m'), _arg('d'), _arg('n', int, 1))
    a = parse_vector(request.args.get('a', '0'))
    b = parse_vector(_arg('b', str))
    n = max(len(a), len(b))
    a = a + [0.0] * (n - len(a))
    b = b + [0.0] * (n - len(b))
    return MixtureSpec(p=_arg('p'), a=a, b=b)


def _respond(payload):
    return jsonify(to_jsonable(payload))


@app.route('/api/compute')
def api_compute():
    spec = _mixture_from_query()
    solution = cheeger(spec, **solver_options())
    return _respond({'spec': spec.to_dict(), **solution.to_dict()})


@app.route('/api/profile')
def api_profile():
    cm = CanonicalMixture.from_md(_arg('m'), _arg('d'))
    points = _arg('points', int, 21)
    if not 2 <= points <= 1000:
        raise DomainError(f"points must lie in [2, 1000], got {points}")
    fn = cm.functions
    grid = np.linspace(float(fn.Q(0.0)), float(fn.Q(cm.d)), points)
    profile = iso_profile(cm, grid)
    return _respond({'m': cm.m, 'd': cm.d,
                     'points': [{'v': pt.v, 'iso': pt.iso, 'r': pt.r} for pt in profile]})


@app.route('/api/scan')
def api_scan():
    n_p, n_d = _arg('np', int, 10), _arg('nd', int, 10)
    if n_p * n_d > app.config['MAX_SCAN_CELLS']:
        raise DomainError(f"grid of {n_p * n_d} cells exceeds the limit of {app.config['MAX_SCAN_CELLS']}")
    records = ParameterScanner(workers=1).scan_grid(
        _arg('p_lo', float, 0.05), _arg('p_hi', float, 0.95),
        _arg('d_lo', float, 0.5), _arg('d_hi', float, 5.0), n_p, n_d)
    logging.info(f"API scan returned {len(records)} records")
    return _respond({'records': [r.to_dict() for r in records]})


@app.route('/api/checks')
def api_checks():
    m, d = _arg('m'), _arg('d')
    results = run_lemma_checks(m, d, _arg('grid_size', int, 1000))
    return _respond({'m': m, 'd': d, 'checks': results, 'pass': all(results.values())})


@app.route('/api/locus')
def api_locus():
    d = _arg('d')
    p_hat = ParameterScanner(workers=1).tie_locus(d, (_arg('p_lo', float, 0.05), _arg('p_hi', float, 0.10)))
    return _respond({'d': d, 'p_hat': p_hat})


@app.route('/api/threshold')
def api_threshold():
    p = _arg('p')
    return _respond({'p': p, 'threshold': ParameterScanner(workers=1).uniqueness_threshold(p, _arg('d_hi', float, 10.0))})
