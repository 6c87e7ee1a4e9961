"""命令行入口: fraclat <command> --config FILE [--output DIR] [--seed N] [--threads N]"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
from logging.handlers import RotatingFileHandler

import numpy as np
import pandas as pd
import scipy.fft
from tabulate import tabulate

from . import settings
from .alpha_classifier import classify
from .config import COMMANDS, lattice_config, load_config, load_config_file, pde_spec
from .continuum import evolve, time_order
from .correspondence import compare_dispersion, compare_evolution, crossover_for, divergence_demo, divergence_terms
from .errors import FraclatError, InstabilityError, KernelDomainError
from .items import Field, InteractionForm, Verdict
from .kernels import gap_values, kernel_spec, partial_sum_spectrum, spectrum_values
from .lattice import initial_profile, run_lattice, stability_bound
from .pipelines import OutputPipeline

logger = logging.getLogger(__name__)


def setup_logging(level=None, log_dir=None):
    handlers = [logging.StreamHandler()]
    log_dir = settings.LOG_DIR if log_dir is None else log_dir
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
        handlers.append(RotatingFileHandler(
            os.path.join(log_dir, settings.LOG_FILE_NAME),
            maxBytes=settings.LOG_MAX_BYTES, backupCount=settings.LOG_BACKUP_COUNT,
            encoding='utf-8',
        ))
    logging.basicConfig(
        level=getattr(logging, (level or settings.LOG_LEVEL).upper(), logging.INFO),
        format=settings.LOG_FORMAT,
        handlers=handlers,
        force=True,
    )


def _metadata(config):
    return {'command': config.command, 'seed': config.seed, 'config': config.source}


def _estimate(kernel):
    estimate = classify(kernel)
    if estimate.verdict is not Verdict.ALPHA_INTERACTION:
        logger.warning(f'{kernel_spec(kernel)} 的判定为 {estimate.verdict.value}')
    return estimate


# ---- 各命令 ----

def _kernel_spectrum(config, out):
    p = config.params
    kernel = p['kernel']
    k = np.linspace(p['k_min'], p['k_max'], p['points'])
    columns = {'k': k, 'spectrum': spectrum_values(kernel, k), 'gap': gap_values(kernel, k)}
    if p['partial_sum_terms']:
        samples = [partial_sum_spectrum(kernel, x, p['partial_sum_terms']) for x in k]
        columns['partial_sum'] = [s.value for s in samples]
        columns['tail_bound'] = [s.tail_bound for s in samples]
    out.export_to_csv('spectrum.csv', pd.DataFrame(columns))


def _classify(config, out):
    p = config.params
    estimate = classify(
        p['kernel'], k_window=(p['k_min'], p['k_max']), n_points=p['points'],
        residual_threshold=p['residual_threshold'],
    )
    report = {'kernel': kernel_spec(p['kernel']), **estimate.as_dict(), 'crossover_k0': None}
    if estimate.verdict is Verdict.ALPHA_INTERACTION:
        # 单位晶格间距下的 k₀；幂律用闭式，其余核取偏离 A|k|^α 的位置
        try:
            report['crossover_k0'] = crossover_for(p['kernel'], estimate, 1.0)
        except KernelDomainError:
            pass
    logger.info('分类结果:\n' + tabulate(
        [[report['kernel'], f'{estimate.alpha:.6f}', f'{estimate.amplitude:.6g}',
          f'{estimate.fit_residual:.2e}', estimate.verdict.value]],
        headers=['核', 'alpha', 'A_alpha', '残差', '判定'],
    ))
    out.export_to_json('classify.json', report)


def _lattice_run(config, out):
    p = config.params
    lattice = lattice_config(p)
    u0 = initial_profile(p['initial'], lattice.sites, lattice.circumference, config.seed)
    run = run_lattice(
        lattice, u0, p['dt'], p['steps'],
        snapshot_every=p['snapshot_every'], track_modes=p['track_modes'],
    )
    snapshots = run.snapshots or [run.final]
    n = lattice.n_sites
    frame = pd.DataFrame({
        't': np.repeat([s.t for s in snapshots], n),
        'site_index': np.tile(np.arange(n), len(snapshots)),
        'u': np.concatenate([s.u for s in snapshots]),
        'v': np.concatenate([s.v for s in snapshots]),
    })
    out.export_to_csv('lattice_snapshots.csv', frame)
    summary = {
        'stability_bound': stability_bound(lattice),
        'final_time': run.final.t,
        'energy_drift': run.energy_drift,
        'energy_times': run.energy_times,
        'energies': run.energies,
        'mode_frequencies': {
            str(j): {'measured': measured, 'predicted': predicted}
            for j, (measured, predicted) in run.mode_frequencies.items()
        },
    }
    out.export_to_json('lattice_summary.json', summary)


def _pde_run(config, out):
    p = config.params
    spec = pde_spec(p)
    n, length = p['n'], p['length']
    x = np.arange(n) * (length / n)
    field = Field(initial_profile(p['initial'], x, length, config.seed), length)
    cadence = p['snapshot_every'] or p['steps']
    snapshots = [field]
    done = 0
    while done < p['steps']:
        chunk = min(cadence, p['steps'] - done)
        field = evolve(spec, field, p['dt'], chunk)
        done += chunk
        snapshots.append(field)
    frame = pd.DataFrame({
        't': np.repeat([s.t for s in snapshots], n),
        'x': np.tile(x, len(snapshots)),
        're_u': np.concatenate([s.values.real for s in snapshots]),
        'im_u': np.concatenate([s.values.imag for s in snapshots]),
    })
    out.export_to_csv('pde_snapshots.csv', frame)
    if p['write_spectrum']:
        k = field.wavenumbers
        order = np.argsort(k, kind='stable')
        amplitude = np.abs(scipy.fft.fft(field.values)) / n
        out.export_to_csv('pde_spectrum.csv', pd.DataFrame({'k': k[order], 'abs_u_hat': amplitude[order]}))
    out.export_to_json('pde_summary.json', {
        'family': type(spec).__name__, 'time_order': time_order(spec),
        'final_time': field.t, 'mass': float(np.sum(field.values.real) * field.dx),
        'l2_norm_squared': float(np.sum(np.abs(field.values) ** 2) * field.dx),
    })


def _report_json(report):
    return {
        'error_norm': report.error_norm, 'norm_label': report.norm_label,
        'crossover_k0': report.crossover_k0, 'metadata': report.metadata,
    }


def _compare_dispersion(config, out):
    p = config.params
    lattice = lattice_config(p)
    report = compare_dispersion(lattice, _estimate(lattice.kernel), p['k_max_fraction'], p['points'])
    out.export_to_csv('dispersion.csv', pd.DataFrame({
        'k': report.abscissa, 'lambda_disc': report.discrete_values,
        'lambda_cont': report.continuum_values, 'relative_error': report.pointwise_errors,
    }))
    out.export_to_json('dispersion_report.json', _report_json(report))


def _compare_evolution(config, out):
    p = config.params
    lattice = lattice_config(p)
    report = compare_evolution(
        lattice, _estimate(lattice.kernel), p['initial'], p['t_final'],
        refinement_levels=p['levels'], reference_n=p['reference_n'], seed=config.seed,
    )
    out.export_to_csv('evolution_fields.csv', pd.DataFrame({
        'x': report.abscissa, 'lattice_u': report.discrete_values,
        'continuum_u': report.continuum_values,
    }))
    out.export_to_csv('evolution_levels.csv', pd.DataFrame(
        [dataclasses.asdict(level) for level in report.levels]
    ))
    out.export_to_json('evolution_report.json', {
        **_report_json(report), 'convergence_orders': report.convergence_orders,
    })


def _divergence(config, out):
    p = config.params
    dx = np.asarray(p['dx_list'])
    slope = divergence_demo(p['alpha'], p['g_alpha'], dx)
    out.export_to_csv('divergence.csv', pd.DataFrame({
        'dx': dx,
        'noninvariant_term': divergence_terms(p['alpha'], p['g_alpha'], dx),
        'invariant_term': divergence_terms(p['alpha'], p['g_alpha'], dx, InteractionForm.INVARIANT),
    }))
    out.export_to_json('divergence.json', {'alpha': p['alpha'], 'slope': slope, 'expected': -p['alpha']})


HANDLERS = {
    'kernel-spectrum': _kernel_spectrum,
    'classify': _classify,
    'lattice-run': _lattice_run,
    'pde-run': _pde_run,
    'compare-dispersion': _compare_dispersion,
    'compare-evolution': _compare_evolution,
    'divergence': _divergence,
}


def _config_digest(config):
    text = json.dumps(config.source, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def _register(config, status):
    if not settings.DATABASE_URL:
        return
    from .database import init_db, record_run
    session = init_db(settings.DATABASE_URL)
    try:
        record_run(
            session, command=config.command, config_sha256=_config_digest(config),
            seed=config.seed, exit_status=status, output_dir=config.output_dir,
            artifact_version=settings.ARTIFACT_VERSION,
        )
    except Exception as e:
        logger.warning(f'写入运行记录失败: {str(e)}')
    finally:
        session.close()


def run(config):
    """执行一个命令；返回 0 成功，2 数值不稳定，1 其他错误"""
    out = OutputPipeline(config.output_dir, _metadata(config))
    logger.info(f'开始执行 {config.command}，输出目录 {config.output_dir}')
    try:
        with scipy.fft.set_workers(max(1, config.threads)):
            HANDLERS[config.command](config, out)
        status = 0
    except InstabilityError as e:
        logger.error(f'{config.command} 失败: {str(e)}')
        status = 2
    except (FraclatError, ValueError, OSError) as e:
        logger.error(f'{config.command} 失败: {str(e)}')
        status = 1
    except Exception:
        logger.exception(f'{config.command} 意外失败')
        status = 1
    if status == 0:
        logger.info(f'{config.command} 完成，写出 {len(out.written)} 个文件')
    _register(config, status)
    return status


def build_parser():
    parser = argparse.ArgumentParser(prog='fraclat', description='分数阶晶格与连续介质的对应计算')
    parser.add_argument('command', choices=sorted(set(COMMANDS.values())) + ['run'],
                        help='要执行的命令；run 由配置文件决定')
    parser.add_argument('--config', help='INI 配置文件')
    parser.add_argument('--kernel', help='classify/kernel-spectrum 的核描述，如 powerlaw:s=0.5')
    parser.add_argument('--kmin', type=float)
    parser.add_argument('--kmax', type=float)
    parser.add_argument('--points', type=int)
    parser.add_argument('--output', help='输出目录')
    parser.add_argument('--seed', type=int)
    parser.add_argument('--threads', type=int)
    parser.add_argument('--log-level', default=None)
    return parser


def _shortcut_config(args):
    """--kernel 等参数拼出的等价配置文本"""
    section = {'classify': 'classify', 'kernel-spectrum': 'spectrum'}.get(args.command)
    if section is None:
        raise FraclatError(f'{args.command} 需要 --config')
    lines = [f'[{section}]', f'kernel = {args.kernel}']
    for key, value in (('k_min', args.kmin), ('k_max', args.kmax), ('points', args.points)):
        if value is not None:
            lines.append(f'{key} = {value!r}')
    return load_config('\n'.join(lines) + '\n', source='<command line>')


def main(argv=None):
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        if args.config:
            config = load_config_file(args.config)
        elif args.kernel:
            config = _shortcut_config(args)
        else:
            raise FraclatError('需要 --config 或 --kernel')
        if args.command != 'run' and args.command != config.command:
            raise FraclatError(f'命令 {args.command} 与配置中的 {config.command} 不符')
    except (FraclatError, OSError) as e:
        logger.error(str(e))
        return 1

    overrides = {}
    if args.output is not None:
        overrides['output_dir'] = args.output
    if args.seed is not None:
        overrides['seed'] = args.seed
    if args.threads is not None:
        overrides['threads'] = args.threads
    return run(dataclasses.replace(config, **overrides))


if __name__ == '__main__':
    sys.exit(main())
