"""运行配置: INI 文档 → 经过完整校验的 RunConfig

每个命令对应一个节，另有可选的 [run] 节 (command, output_dir, seed, threads)。
未知的节或键一律报错，重复的键给出行号。
"""
from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field

from . import settings
from .errors import ConfigParseError, ConfigValidationError, KernelDomainError
from .items import (
    Boussinesq, Burgers, CouplingTerm, FractionalDiffusion, FractionalNLS, FractionalWave,
    InteractionForm, KdV, KernelWrap, LatticeConfig, Nonlinearity, OnSiteForce, TimeOrder,
)
from .kernels import parse_kernel
from .lattice import initial_profile

REQUIRED = object()

COMMANDS = {
    'spectrum': 'kernel-spectrum',
    'classify': 'classify',
    'lattice': 'lattice-run',
    'pde': 'pde-run',
    'dispersion': 'compare-dispersion',
    'evolution': 'compare-evolution',
    'divergence': 'divergence',
}
SECTIONS = {command: section for section, command in COMMANDS.items()}


# ---- 值解析 ----

def _float(text):
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f'需要有限实数, 得到 {text!r}')
    return value


def _positive(text):
    value = _float(text)
    if not value > 0:
        raise ValueError(f'必须为正, 得到 {text!r}')
    return value


def _int(text):
    try:
        return int(text)
    except ValueError:
        raise ValueError(f'需要整数, 得到 {text!r}') from None


def _count(text):
    value = _int(text)
    if value < 0:
        raise ValueError(f'不能为负, 得到 {value}')
    return value


def _power_of_two(minimum):
    def parse(text):
        value = _int(text)
        if value < minimum or value & (value - 1):
            raise ValueError(f'必须是不小于 {minimum} 的 2 的幂, 得到 {value}')
        return value
    return parse


def _choice(enum_cls):
    def parse(text):
        try:
            return enum_cls(text.strip().lower())
        except ValueError:
            allowed = ', '.join(e.value for e in enum_cls)
            raise ValueError(f'取值需为 {allowed} 之一, 得到 {text!r}') from None
    return parse


def _bool(text):
    lowered = text.strip().lower()
    if lowered in ('1', 'true', 'yes', 'on'):
        return True
    if lowered in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError(f'需要布尔值, 得到 {text!r}')


def _float_list(text):
    return [_float(p) for p in text.split(',') if p.strip()]


def _int_list(text):
    return [_int(p) for p in text.split(',') if p.strip()]


def _complex(text):
    value = complex(text.strip().replace(' ', ''))
    if not (math.isfinite(value.real) and math.isfinite(value.imag)):
        raise ValueError(f'需要有限复数, 得到 {text!r}')
    return value


def _profile(text):
    # 试算一次以校验语法
    initial_profile(text, [0.0], 1.0)
    return text.strip()


def _nonlinearity_kind(text):
    kind = text.strip().lower()
    Nonlinearity(kind)
    return kind


def parse_force(text):
    """none | linear:c | cubic:b | polynomial:c0,c1,..."""
    kind, _, params = text.strip().partition(':')
    kind = kind.strip().lower()
    values = _float_list(params)
    if kind == 'none' and not values:
        return OnSiteForce.none()
    if kind == 'linear' and len(values) == 1:
        return OnSiteForce.linear(values[0])
    if kind == 'cubic' and len(values) == 1:
        return OnSiteForce.cubic(values[0])
    if kind == 'polynomial' and values:
        return OnSiteForce(tuple(values))
    raise ValueError(f'无法识别的在位力: {text!r}')


def parse_extra_terms(text):
    """`kernel @ coupling [@ nonlinearity[:g']]`，多项以 ; 分隔"""
    terms = []
    for entry in filter(None, (e.strip() for e in text.split(';'))):
        parts = [p.strip() for p in entry.split('@')]
        if len(parts) not in (2, 3):
            raise ValueError(f'附加耦合项格式应为 kernel@coupling[@nonlinearity], 得到 {entry!r}')
        nonlinearity = Nonlinearity()
        if len(parts) == 3:
            kind, _, g_prime = parts[2].partition(':')
            nonlinearity = Nonlinearity(kind.strip().lower(), _float(g_prime) if g_prime else 0.0)
        terms.append(CouplingTerm(parse_kernel(parts[0]), _float(parts[1]), nonlinearity))
    return tuple(terms)


# ---- 各节的键 ----

LATTICE_KEYS = {
    'kernel': (parse_kernel, REQUIRED),
    'n_sites': (_power_of_two(16), REQUIRED),
    'dx': (_positive, REQUIRED),
    'g': (_float, REQUIRED),
    'interaction_form': (_choice(InteractionForm), InteractionForm.INVARIANT),
    'nonlinearity': (_nonlinearity_kind, 'identity'),
    'g_prime': (_float, 0.0),
    'on_site_force': (parse_force, OnSiteForce.none()),
    'order': (_choice(TimeOrder), TimeOrder.SECOND),
    'wrap': (_choice(KernelWrap), KernelWrap.TRUNCATED),
    'extra_terms': (parse_extra_terms, ()),
}

PDE_KEYS = {
    'family': (str, REQUIRED),
    'n': (_power_of_two(4), REQUIRED),
    'length': (_positive, 2.0 * math.pi),
    'dt': (_positive, REQUIRED),
    'steps': (_count, REQUIRED),
    'initial': (_profile, 'mode:1,0.1'),
    'snapshot_every': (_count, 0),
    'write_spectrum': (_bool, False),
}

_FRACTIONAL_KEYS = {
    'alpha': (_positive, REQUIRED),
    'ga': (_float, REQUIRED),
    'nonlinearity': (_nonlinearity_kind, 'identity'),
    'g_prime': (_float, 0.0),
    'on_site_force': (parse_force, OnSiteForce.none()),
}

FAMILY_KEYS = {
    'fractional_wave': _FRACTIONAL_KEYS,
    'fractional_diffusion': _FRACTIONAL_KEYS,
    'burgers': {'g1': (_float, REQUIRED), 'g2': (_float, REQUIRED), 'alpha': (_positive, 2.0)},
    'kdv': {'g1': (_float, REQUIRED), 'g3': (_float, REQUIRED), 'beta': (_positive, 2.0)},
    'boussinesq': {'g2': (_float, REQUIRED), 'g4': (_float, REQUIRED), 'g_prime': (_float, 0.0)},
    'nls': {
        'alpha': (_positive, REQUIRED), 'g_alpha': (_float, REQUIRED),
        'omega0': (_float, 0.0), 'b': (_complex, 0j),
    },
}

SCHEMAS = {
    'spectrum': {
        'kernel': (parse_kernel, REQUIRED),
        'k_min': (_float, 0.0),
        'k_max': (_float, math.pi),
        'points': (_count, 65),
        'partial_sum_terms': (_count, 0),
    },
    'classify': {
        'kernel': (parse_kernel, REQUIRED),
        'k_min': (_positive, settings.CLASSIFY_K_MIN),
        'k_max': (_positive, settings.CLASSIFY_K_MAX),
        'points': (_count, settings.CLASSIFY_POINTS),
        'residual_threshold': (_positive, settings.RESIDUAL_THRESHOLD),
    },
    'lattice': {
        **LATTICE_KEYS,
        'dt': (_positive, REQUIRED),
        'steps': (_count, REQUIRED),
        'initial': (_profile, 'mode:1,0.01'),
        'snapshot_every': (_count, 0),
        'track_modes': (_int_list, []),
    },
    'pde': PDE_KEYS,
    'dispersion': {
        **LATTICE_KEYS,
        'k_max_fraction': (_positive, 1.0),
        'points': (_count, 64),
    },
    'evolution': {
        **LATTICE_KEYS,
        'initial': (_profile, REQUIRED),
        't_final': (_positive, REQUIRED),
        'levels': (_count, 3),
        'reference_n': (_count, 0),
    },
    'divergence': {
        'alpha': (_positive, REQUIRED),
        'g_alpha': (_positive, REQUIRED),
        'dx_list': (_float_list, REQUIRED),
    },
}

RUN_KEYS = {
    'command': (str, None),
    'output_dir': (str, settings.DEFAULT_OUTPUT_DIR),
    'seed': (_count, 0),
    'threads': (_count, settings.FFT_WORKERS),
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    section: str
    params: dict
    output_dir: str = settings.DEFAULT_OUTPUT_DIR
    seed: int = 0
    threads: int = 1
    # 原始键值，用于元数据回显
    source: dict = field(default_factory=dict)


# ---- 解析 ----

_SECTION_RE = re.compile(r'^\s*\[([^\]]+)\]')
_KEY_RE = re.compile(r'^([^\s=:#;\[][^=:]*?)\s*[=:]')


def _line_index(text):
    """(section, key) → 行号"""
    index, section = {}, None
    for number, line in enumerate(text.splitlines(), start=1):
        head = _SECTION_RE.match(line)
        if head:
            section = head.group(1).strip()
            index[(section, None)] = number
            continue
        key = _KEY_RE.match(line)
        if key and section is not None:
            index.setdefault((section, key.group(1).strip().lower()), number)
    return index


def _read(text, source):
    parser = configparser.ConfigParser(
        strict=True, interpolation=None, default_section='__defaults__',
        comment_prefixes=('#', ';'), inline_comment_prefixes=('#',),
    )
    try:
        parser.read_string(text, source=source)
    except configparser.DuplicateOptionError as e:
        raise ConfigParseError(f'节 [{e.section}] 中的键 {e.option!r} 重复', e.lineno) from None
    except configparser.DuplicateSectionError as e:
        raise ConfigParseError(f'节 [{e.section}] 重复', e.lineno) from None
    except configparser.MissingSectionHeaderError as e:
        raise ConfigParseError('缺少节标题', e.lineno) from None
    except configparser.ParsingError as e:
        line = e.errors[0][0] if e.errors else None
        raise ConfigParseError('无法解析的行', line) from None
    except configparser.Error as e:
        raise ConfigParseError(str(e)) from None
    return parser


def _validate_section(parser, section, schema, lines, skip=()):
    raw = parser[section]
    values = {}
    for key, text in raw.items():
        if key in skip:
            continue
        if key not in schema:
            raise ConfigValidationError(section, key, '未知的键', lines.get((section, key)))
        parse, _ = schema[key]
        try:
            values[key] = parse(text)
        except (ValueError, KernelDomainError) as e:
            raise ConfigValidationError(section, key, str(e), lines.get((section, key))) from None
    for key, (_, default) in schema.items():
        if key in values:
            continue
        if default is REQUIRED:
            raise ConfigValidationError(section, key, '缺少必需的键', lines.get((section, None)))
        values[key] = default
    return values


def _check_cross_fields(section, params, lines):
    def fail(key, message):
        raise ConfigValidationError(section, key, message, lines.get((section, key)))

    if section in ('spectrum', 'classify'):
        if params['k_min'] >= params['k_max']:
            fail('k_max', 'k_max 必须大于 k_min')
        if params['points'] < 2:
            fail('points', '至少需要 2 个点')
    if section == 'classify':
        if params['k_max'] > 0.5:
            fail('k_max', '分类窗口需满足 k_max ≤ 0.5')
        if params['points'] < 8:
            fail('points', '至少需要 8 个点')
    if section == 'lattice' and params['initial'].startswith(('wave', 'soliton')):
        fail('initial', '晶格需要实初始条件 (mode、gaussian 或 random)')
    if section == 'lattice':
        bad = [j for j in params['track_modes'] if not 0 < j <= params['n_sites'] // 2]
        if bad:
            fail('track_modes', f'模式编号需在 1..{params["n_sites"] // 2} 内, 得到 {bad}')
    if section == 'evolution':
        if params['levels'] < 3:
            fail('levels', '至少需要 3 个细化层级')
        if params['initial'].startswith(('random', 'wave')):
            fail('initial', '演化比较需要光滑实初始条件')
    if section == 'dispersion' and params['k_max_fraction'] > 1:
        fail('k_max_fraction', '需在 (0, 1] 内')
    if section == 'divergence':
        alpha = params['alpha']
        if not alpha < 2 or alpha == 1:
            fail('alpha', '需在 (0, 2) 且不等于 1')
        dx = params['dx_list']
        if len(dx) < 4:
            fail('dx_list', '至少需要 4 个 dx')
        if any(b >= a for a, b in zip(dx, dx[1:])) or min(dx) <= 0:
            fail('dx_list', 'dx 必须为严格递减的正数')
        if dx[0] / dx[-1] < 100:
            fail('dx_list', 'dx 需跨越至少两个数量级')
    if section == 'pde' and params['family'] != 'nls' and params['initial'].startswith('wave'):
        fail('initial', '实方程需要实初始条件')


def load_config(text, source='<config>'):
    lines = _line_index(text)
    parser = _read(text, source)

    unknown = [s for s in parser.sections() if s != 'run' and s not in SCHEMAS]
    if unknown:
        raise ConfigValidationError(unknown[0], '-', '未知的节', lines.get((unknown[0], None)))
    run = _validate_section(parser, 'run', RUN_KEYS, lines) if parser.has_section('run') else {
        key: default for key, (_, default) in RUN_KEYS.items()
    }

    modules = [s for s in parser.sections() if s != 'run']
    if len(modules) != 1:
        raise ConfigValidationError('run', 'command', f'需要恰好一个命令节, 得到 {modules or "无"}')
    section = modules[0]
    command = COMMANDS[section]
    if run['command'] is not None and run['command'] != command:
        raise ConfigValidationError(
            'run', 'command', f'命令 {run["command"]!r} 与节 [{section}] 不符', lines.get(('run', 'command')),
        )

    if section == 'pde':
        params = _validate_pde(parser, lines)
    else:
        params = _validate_section(parser, section, SCHEMAS[section], lines)
    _check_cross_fields(section, params, lines)

    echo = {name: dict(parser[name]) for name in parser.sections()}
    return RunConfig(
        command=command, section=section, params=params,
        output_dir=run['output_dir'], seed=run['seed'], threads=run['threads'], source=echo,
    )


def _validate_pde(parser, lines):
    family = parser['pde'].get('family')
    if family is None:
        raise ConfigValidationError('pde', 'family', '缺少必需的键', lines.get(('pde', None)))
    family = family.strip().lower()
    if family not in FAMILY_KEYS:
        raise ConfigValidationError(
            'pde', 'family', f'未知的方程族 {family!r}，可选 {", ".join(FAMILY_KEYS)}',
            lines.get(('pde', 'family')),
        )
    schema = {**PDE_KEYS, **FAMILY_KEYS[family]}
    params = _validate_section(parser, 'pde', schema, lines)
    params['family'] = family
    return params


def load_config_file(path):
    with open(path, encoding='utf-8') as f:
        return load_config(f.read(), source=str(path))


# ---- 由参数构造模块对象 ----

def lattice_config(params):
    nonlinearity = Nonlinearity(params['nonlinearity'], params['g_prime'])
    return LatticeConfig(
        n_sites=params['n_sites'], dx=params['dx'], coupling=params['g'],
        kernel=params['kernel'], interaction_form=params['interaction_form'],
        nonlinearity=nonlinearity, on_site_force=params['on_site_force'],
        order=params['order'], wrap=params['wrap'], extra_terms=params['extra_terms'],
    )


def pde_spec(params):
    family = params['family']
    if family in ('fractional_wave', 'fractional_diffusion'):
        cls = FractionalWave if family == 'fractional_wave' else FractionalDiffusion
        return cls(
            alpha=params['alpha'], ga=params['ga'],
            nonlinearity=Nonlinearity(params['nonlinearity'], params['g_prime']),
            on_site_force=params['on_site_force'],
        )
    if family == 'burgers':
        return Burgers(params['g1'], params['g2'], params['alpha'])
    if family == 'kdv':
        return KdV(params['g1'], params['g3'], params['beta'])
    if family == 'boussinesq':
        return Boussinesq(params['g2'], params['g4'], params['g_prime'])
    return FractionalNLS(params['alpha'], params['g_alpha'], params['omega0'], params['b'])
