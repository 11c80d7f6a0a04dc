''' Run settings: built-in defaults < key=value config file < environment < command line

Config file format, one setting per line:

    # comment
    grid_nodes = 121
    sigma_grid = 0.1, 0.2, 0.4
'''
import os
import logging
from dataclasses import dataclass, fields, replace
from typing import Optional
from .errors import ArgumentError
from .em.npkmle import NpkmleConfig, FULL_EM
from .quadrature import GRID, MONTE_CARLO, IntegrationPolicy, default_grid


__all__ = ('Settings', 'load_config_file', 'resolve_settings', 'ENV_THREADS', 'ENV_OUT')


ENV_THREADS = 'MIXREG_THREADS'
ENV_OUT = 'MIXREG_OUT'

AUTO = 'auto'


@dataclass(frozen=True)
class Settings:
    seed: int = 0
    threads: int = 1
    out: str = 'out'
    log_level: str = 'INFO'
    # data
    intercept: bool = True
    # quadrature
    integration: str = AUTO
    grid_low: float = -4.0
    grid_high: float = 4.0
    grid_nodes: Optional[int] = None
    mc_samples: int = 2000
    # em-npmle
    l2_tol: float = 1e-5
    max_iter: int = 500
    # em-npkmle
    inner_tol: float = 1e-5
    outer_tol: float = 1e-7
    displacement_tol: float = 1e-4
    max_inner: int = 500
    max_outer: int = 200
    merge_factor: float = 0.05
    particles: Optional[int] = None
    bandwidth: Optional[float] = None
    bandwidth_multiplier: Optional[float] = None
    # mean shift / scms
    postprocess_sample: int = 2000
    postprocess_bandwidth: Optional[float] = None
    ridge_dim: int = 1
    mode_merge_factor: float = 0.1
    # cross-validation
    folds: int = 5
    sigma_grid: Optional[tuple] = None
    cv_method: str = 'gem'

    def __post_init__(self):
        if self.threads < 1:
            raise ArgumentError(f'threads must be at least 1, got {self.threads}')
        if self.integration not in (AUTO, GRID, MONTE_CARLO):
            raise ArgumentError(f'integration must be one of auto, {GRID}, {MONTE_CARLO}; got "{self.integration}"')
        if self.folds < 2:
            raise ArgumentError(f'cross-validation needs at least 2 folds, got {self.folds}')

    def updated(self, **overrides):
        ''' copy with every override that is not None applied '''
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ArgumentError(f'unknown settings: {", ".join(sorted(unknown))}')
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def grid(self, d):
        return default_grid(d, self.grid_low, self.grid_high, self.grid_nodes)

    def policy(self, d):
        mode = self.integration
        if mode == AUTO:
            return IntegrationPolicy.default(d, self.grid(d) if d <= 2 else None, self.mc_samples, self.seed)
        if mode == GRID:
            return IntegrationPolicy(GRID, self.grid(d))
        return IntegrationPolicy(MONTE_CARLO, None, self.mc_samples, self.seed)

    def npkmle_config(self, d, mode=FULL_EM):
        return NpkmleConfig(
            mode=mode,
            inner_tol=self.inner_tol,
            outer_tol=self.outer_tol,
            displacement_tol=self.displacement_tol,
            max_inner=self.max_inner,
            max_outer=self.max_outer,
            policy=self.policy(d),
            merge_factor=self.merge_factor)


def _parse_bool(text):
    value = text.strip().lower()
    if value in ('1', 'true', 'yes', 'on'):
        return True
    if value in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError(f'not a boolean: {text}')


def _parse_floats(text):
    return tuple(float(v) for v in text.replace(',', ' ').split())


_PARSERS = {bool: _parse_bool, int: int, float: float, str: str, tuple: _parse_floats}


def _field_parser(f):
    kind = f.type
    for candidate in _PARSERS:
        if kind is candidate or kind == Optional[candidate]:
            return _PARSERS[candidate]
    return str


def _coerce(name, text):
    for f in fields(Settings):
        if f.name == name:
            if text.strip().lower() in ('none', ''):
                return None
            try:
                return _field_parser(f)(text.strip())
            except ValueError as err:
                raise ArgumentError(f'bad value for setting "{name}": {err}')
    raise ArgumentError(f'unknown setting "{name}"')


def load_config_file(path):
    ''' flat key = value pairs; blank lines and # comments ignored '''
    values = {}
    try:
        with open(path, encoding='utf-8') as f:
            lines = f.readlines()
    except OSError as err:
        raise ArgumentError(f'cannot read config file "{path}": {err}')
    for lineno, line in enumerate(lines, 1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ArgumentError(f'{path}:{lineno}: expected "key = value", got "{line}"', lineno)
        key, value = (part.strip() for part in line.split('=', 1))
        values[key] = _coerce(key, value)
    logging.debug(f'loaded {len(values)} settings from {path}')
    return values


def _from_environ(environ):
    values = {}
    if environ.get(ENV_THREADS):
        values['threads'] = _coerce('threads', environ[ENV_THREADS])
    if environ.get(ENV_OUT):
        values['out'] = environ[ENV_OUT]
    return values


def resolve_settings(config_path=None, overrides=None, environ=None):
    settings = Settings()
    if config_path:
        settings = settings.updated(**load_config_file(config_path))
    settings = settings.updated(**_from_environ(os.environ if environ is None else environ))
    return settings.updated(**(overrides or {}))
