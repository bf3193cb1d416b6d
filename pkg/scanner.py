import io
import math
import logging
from functools import partial
from dataclasses import dataclass
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pandas as pd
from scipy.optimize import brentq

from cheeger_solver import (TIE_TOLERANCE, cheeger, critical_points, median_r_star, search_minimizers,
                            solver_options)
from mixture_core import CanonicalMixture, MixtureSpec
from utils import DomainError, NoTieLocusError, ThresholdError, config_manager, dump_json, require_finite

CSV_COLUMNS = ['p', 'd', 'h', 'r_star', 'n_min', 't1', 't2', 'gap']
DISTINCT_BASINS = 1e-6
_RTOL = 4 * np.finfo(float).eps


@dataclass(frozen=True)
class ScanRecord:
    """Solution summary of one (p, d) grid cell; minimizers are canonical offsets."""
    p: float
    d: float
    h: float
    r_star: float
    minimizers: tuple
    n_min: int
    gap: float

    def to_dict(self):
        return {
            'p': self.p,
            'd': self.d,
            'h': self.h,
            'r_star': self.r_star,
            'minimizers': list(self.minimizers),
            'n_min': self.n_min,
            'gap': self.gap,
        }


@dataclass(frozen=True)
class BasinState:
    signal: float
    t_left: float
    r_star: float

    @property
    def distinct(self):
        return abs(self.r_star - self.t_left) > DISTINCT_BASINS


def solve_cell(cell, options=None):
    """Solve one grid cell; module-level so worker processes can pickle it."""
    p, d = cell
    solution = cheeger(MixtureSpec.from_canonical(p, d), **(options or {}))
    return ScanRecord(p=float(p), d=float(d), h=float(solution.h), r_star=float(solution.r_star),
                      minimizers=tuple(float(t) for t in solution.minimizers),
                      n_min=len(solution.minimizers), gap=float(solution.gap))


def basin_state(m, d):
    """Competing basins of f on [0, r*]: the interior local minimizer (or 0) against r*."""
    cm = CanonicalMixture.from_md(m, d)
    fn = cm.functions
    r_star = median_r_star(cm)
    t_left = 0.0
    for z in critical_points(fn):
        if 0.0 < z < r_star and float(fn.h_prime(z)) > 0.0:
            t_left = z
            break
    values = fn.f(np.array([t_left, r_star]))
    return BasinState(signal=float(values[0] - values[1]), t_left=float(t_left), r_star=float(r_star))


def basin_signal(m, d):
    """f(t_left) - f(r*); zero exactly where the two basins tie."""
    return basin_state(m, d).signal


def _canonical_weight(p):
    require_finite('p', p)
    if not 0.0 < p < 1.0:
        raise DomainError(f"p must lie in (0, 1), got {p}")
    return min(p, 1.0 - p)


def _refine_tie(signal_at, state_at, lo, hi, tolerance=TIE_TOLERANCE):
    """Root of a bracketed sign change, or None when the change is a basin hand-off."""
    root = brentq(signal_at, lo, hi, xtol=1e-15, rtol=_RTOL, maxiter=500)
    state = state_at(root)
    if state.distinct and abs(state.signal) <= tolerance:
        return root
    logging.debug(f"Sign change near {root} is a basin hand-off (t_left={state.t_left}, "
                  f"r*={state.r_star}, signal={state.signal})")
    return None


def _sign_change(a, b):
    return a == 0.0 or b == 0.0 or (a < 0.0) != (b < 0.0)


class ParameterScanner:
    """Explores the (p, d) parameter plane for uniqueness of the Cheeger set."""

    def __init__(self, workers=None, config=None):
        config = config or config_manager
        self.workers = workers or config.get('scanner.workers', 1)
        if self.workers < 1:
            raise DomainError(f"workers must be at least 1, got {self.workers}")
        self.gap_tolerance = config.get('scanner.gap_tolerance', 1e-6)
        self.outer_step = config.get('scanner.outer_step', 1e-2)
        self.resolution = config.get('scanner.resolution', 1e-4)
        self.locus_cells = config.get('scanner.locus_cells', 64)
        self.solver = solver_options(config)

    def map_cells(self, cells):
        """Solve cells in input order, in worker processes when workers > 1."""
        cells = list(cells)
        solve = partial(solve_cell, options=self.solver)
        if self.workers > 1 and len(cells) > 1:
            chunksize = max(1, len(cells) // (4 * self.workers))
            with ProcessPoolExecutor(max_workers=self.workers) as pool:
                return list(pool.map(solve, cells, chunksize=chunksize))
        return [solve(cell) for cell in cells]

    def scan_grid(self, p_lo, p_hi, d_lo, d_hi, n_p, n_d):
        """ScanRecords for the n_p x n_d grid, sorted by (p, d)."""
        require_finite('grid bounds', [p_lo, p_hi, d_lo, d_hi])
        if not 0.0 < p_lo <= p_hi < 1.0:
            raise DomainError(f"need 0 < p_lo <= p_hi < 1, got {p_lo}, {p_hi}")
        if not 0.0 < d_lo <= d_hi:
            raise DomainError(f"need 0 < d_lo <= d_hi, got {d_lo}, {d_hi}")
        if n_p < 2 or n_d < 2:
            raise DomainError(f"grid needs at least 2 points per axis, got {n_p} x {n_d}")

        cells = [(float(p), float(d)) for p in np.linspace(p_lo, p_hi, n_p)
                 for d in np.linspace(d_lo, d_hi, n_d)]
        logging.info(f"Scanning {len(cells)} cells with {self.workers} worker(s)")
        records = sorted(self.map_cells(cells), key=lambda r: (r.p, r.d))
        ties = sum(1 for r in records if r.n_min == 2)
        logging.info(f"Scan completed: {len(records)} cells, {ties} with two Cheeger sets")
        return records

    def tie_locus(self, d, p_bracket):
        """Weight p at which both basins of f give the same value, for fixed d > 2."""
        require_finite('d', d)
        if d <= 2.0:
            raise NoTieLocusError(f"no tie locus for d = {d} <= 2: f is decreasing on [0, r*]")
        p_lo, p_hi = sorted(float(p) for p in p_bracket)
        _canonical_weight(p_lo)
        _canonical_weight(p_hi)
        if p_lo == p_hi:
            raise DomainError(f"empty bracket {p_bracket}")

        def state_at(p):
            return basin_state(_canonical_weight(p), d)

        def signal_at(p):
            return state_at(p).signal

        grid = np.linspace(p_lo, p_hi, self.locus_cells + 1)
        previous = signal_at(grid[0])
        for lo, hi in zip(grid[:-1], grid[1:]):
            current = signal_at(hi)
            if _sign_change(previous, current):
                root = _refine_tie(signal_at, state_at, lo, hi, self.solver['tie_tolerance'])
                if root is not None:
                    logging.info(f"Tie locus at d={d}: p={root:.15g}")
                    return float(root)
            previous = current
        raise NoTieLocusError(f"no tie locus in bracket ({p_lo}, {p_hi}) at d = {d}")

    def _cell_fails(self, m, d):
        search = search_minimizers(CanonicalMixture.from_md(m, d), **self.solver)
        return len(search.minimizers) == 2 or search.gap <= self.gap_tolerance

    def uniqueness_threshold(self, p, d_hi):
        """Grid-certified estimate of the distance beyond which the Cheeger set is unique.

        Scans d downward from d_hi; the first failing cell (two minimizers,
        a gap below gap_tolerance, or a genuine basin tie between cells) is
        refined by bisection and the upper end of the failing interval returned.
        """
        m = _canonical_weight(p)
        require_finite('d_hi', d_hi)
        if m == 0.5:
            return 0.0
        if d_hi <= 0.0:
            raise DomainError(f"d_hi must be positive, got {d_hi}")
        if self._cell_fails(m, d_hi):
            raise ThresholdError(f"Cheeger set not unique at d_hi = {d_hi} for p = {p}; "
                                 f"try a larger d_hi")

        def state_at(d):
            return basin_state(m, d)

        def signal_at(d):
            return state_at(d).signal

        steps = int(math.floor(d_hi / self.outer_step))
        upper, upper_signal = d_hi, signal_at(d_hi)
        for k in range(1, steps + 1):
            d = d_hi - k * self.outer_step
            if d <= 0.0:
                break
            if self._cell_fails(m, d):
                return self._bisect_failure(m, d, upper)
            current = signal_at(d)
            if _sign_change(current, upper_signal):
                root = _refine_tie(signal_at, state_at, d, upper, self.solver['tie_tolerance'])
                if root is not None:
                    threshold = min(upper, root + self.resolution)
                    logging.info(f"Uniqueness threshold for p={p}: {threshold:.6g} (basin tie)")
                    return threshold
            upper, upper_signal = d, current
        logging.info(f"No loss of uniqueness for p={p} on (0, {d_hi}]")
        return 0.0

    def _bisect_failure(self, m, lo, hi):
        while hi - lo > self.resolution:
            mid = 0.5 * (lo + hi)
            if self._cell_fails(m, mid):
                lo = mid
            else:
                hi = mid
        logging.info(f"Uniqueness threshold for m={m}: {hi:.6g}")
        return hi


def scan_grid(p_lo, p_hi, d_lo, d_hi, n_p, n_d, workers=None):
    return ParameterScanner(workers).scan_grid(p_lo, p_hi, d_lo, d_hi, n_p, n_d)


def tie_locus(d, p_bracket):
    return ParameterScanner(1).tie_locus(d, p_bracket)


def uniqueness_threshold(p, d_hi):
    return ParameterScanner(1).uniqueness_threshold(p, d_hi)


# ---------------- Emission ----------------

def records_to_frame(records):
    rows = []
    for r in records:
        rows.append({
            'p': r.p,
            'd': r.d,
            'h': r.h,
            'r_star': r.r_star,
            'n_min': r.n_min,
            't1': r.minimizers[0] if r.minimizers else np.nan,
            't2': r.minimizers[1] if len(r.minimizers) > 1 else np.nan,
            'gap': r.gap,
        })
    frame = pd.DataFrame(rows, columns=CSV_COLUMNS)
    frame['n_min'] = frame['n_min'].astype(int)
    return frame


def records_to_csv(records):
    buffer = io.StringIO()
    records_to_frame(records).to_csv(buffer, index=False, float_format='%.17g', na_rep='',
                                     lineterminator='\n')
    return buffer.getvalue()


def write_records_csv(records, path):
    with open(path, 'w', newline='') as f:
        f.write(records_to_csv(records))
    logging.info(f"Wrote {len(records)} records to {path}")


def read_records_csv(source):
    """Parse CSV text written by records_to_csv back into ScanRecords."""
    if isinstance(source, str) and '\n' in source:
        source = io.StringIO(source)
    frame = pd.read_csv(source, float_precision='round_trip')
    records = []
    for row in frame.itertuples(index=False):
        minimizers = tuple(float(t) for t in (row.t1, row.t2) if not pd.isna(t))
        records.append(ScanRecord(p=float(row.p), d=float(row.d), h=float(row.h),
                                  r_star=float(row.r_star), minimizers=minimizers,
                                  n_min=int(row.n_min), gap=float(row.gap)))
    return records


def records_to_json(records):
    return dump_json([r.to_dict() for r in records])
