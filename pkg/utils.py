import os
import json
import math
import logging
from copy import deepcopy

import numpy as np
from dotenv import load_dotenv

load_dotenv()


class CheegerError(Exception):
    """Base class for every error raised by the Cheeger toolkit."""


class DomainError(CheegerError, ValueError):
    """A numeric argument lies outside the domain of an operation."""


class DegenerateMixtureError(CheegerError):
    """Raised when a canonical-only operation receives a degenerate mixture."""


class NoTieLocusError(CheegerError):
    pass


class ThresholdError(CheegerError):
    pass


class VerificationFailure(CheegerError):
    """A numerical check falsified one of the claimed inequalities."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


def require_finite(name, value):
    """Raise DomainError unless every entry of value is finite."""
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite, got {value!r}")
    return value


def format_float(value):
    """17 significant digits; round-trips every double."""
    if value is None:
        return ''
    value = float(value)
    if math.isinf(value):
        return 'inf' if value > 0 else '-inf'
    return format(value, '.17g')


def parse_vector(text):
    """Parse '1,2.5,-3' into a list of finite floats."""
    if isinstance(text, (list, tuple, np.ndarray)):
        values = [float(v) for v in text]
    else:
        parts = [part.strip() for part in str(text).split(',') if part.strip()]
        if not parts:
            raise DomainError(f"empty vector: {text!r}")
        try:
            values = [float(part) for part in parts]
        except ValueError:
            raise DomainError(f"not a comma-separated list of reals: {text!r}")
    require_finite('vector', values)
    return values


def to_jsonable(value):
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def dump_json(payload):
    """Deterministic JSON text for emitted artifacts."""
    return json.dumps(to_jsonable(payload), indent=2, sort_keys=True)


class ConfigManager:
    def __init__(self, config_file=None):
        self.config_file = config_file or os.environ.get('CHEEGER_CONFIG', 'cheeger_config.json')
        self.default_config = {
            'solver': {
                'tie_tolerance': 1e-9,
                'dedup_spacing': 1e-8,
                'root_xtol': 1e-12,
            },
            'scanner': {
                'gap_tolerance': 1e-6,
                'outer_step': 1e-2,
                'resolution': 1e-4,
                'locus_cells': 64,
                'workers': int(os.environ.get('CHEEGER_WORKERS', '1')),
            },
            'oracle': {
                'samples': 10**6,
                'trials': 100,
                'band': 4.0,
                'floor': 1e-3,
                'epsilons': [1e-2, 5e-3, 2.5e-3],
            },
            'run': {
                'format': 'human',
                'seed': 0,
                'grid_size': 1000,
            },
        }
        self.config = self.load_config()

    def load_config(self):
        """Load configuration from file, section-merged over the defaults"""
        config = deepcopy(self.default_config)
        try:
            if self.config_file and os.path.exists(self.config_file):
                with open(self.config_file, 'r') as f:
                    loaded = json.load(f)
                for section, values in loaded.items():
                    if isinstance(values, dict) and isinstance(config.get(section), dict):
                        config[section].update(values)
                    else:
                        config[section] = values
                logging.info(f"Configuration loaded from {self.config_file}")
        except Exception as e:
            logging.error(f"Failed to load config {self.config_file}: {e}")
            return deepcopy(self.default_config)
        return config

    def get(self, key, default=None):
        """Get configuration value by dotted key"""
        value = self.config
        for k in key.split('.'):
            if not isinstance(value, dict) or k not in value:
                return default
            value = value[k]
        return value


config_manager = ConfigManager()
