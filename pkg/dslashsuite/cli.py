# -*- coding: utf-8 -*-
"""
Command-line front end.

    dslashsuite gen     --dims 4,4,4,4 --seed 42 --start hot --out runs/hot42
    dslashsuite solve   --gauge runs/hot42 --source manufactured --algorithm rgcg --out runs/solve
    dslashsuite perf    --profile u250 --out runs/perf
    dslashsuite bench   --gauge runs/hot42 --reps 10
    dslashsuite replay  runs/solve/manifest.json --out runs/solve2

Every output folder gets a manifest.json with the resolved parameters; `replay` re-runs from it.
Exit codes: 0 success (solver converged), 1 no convergence or failed audit, 2 usage error,
3 file, format or profile error.
"""
import argparse
import json
import logging
import os
import sys
import time
from collections import OrderedDict
from contextlib import contextmanager
from dataclasses import dataclass, field, asdict
from multiprocessing import Pool

import dslashsuite
from dslashsuite import fields, perf, reader
from dslashsuite.algebra import Precision, PrecisionMismatch, GeometryMismatch, norm, axpy
from dslashsuite.dslash import apply, flop_count, DDAGD, DEFAULT_MASS, HOPPING_SIGN
from dslashsuite.lattice import LatticeDims, LatticeError
from dslashsuite.path import outdir, listfields, manifest_path
from dslashsuite.solver import SolverConfig, SolverBreakdown, solve, ALGORITHMS, RGCG
from dslashsuite.su3 import NotSpecialUnitary, reconstruction_flops

logger = logging.getLogger('dslashsuite')

EXIT_OK = 0
EXIT_NOT_CONVERGED = 1
EXIT_USAGE = 2
EXIT_IO = 3

SOURCES = ('point', 'random', 'manufactured')


@dataclass
class RunManifest:
    """ Everything needed to rerun one command; paths of outputs are relative to the manifest's folder """
    subcommand: str
    parameters: dict
    version: str = dslashsuite.__version__
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)

    def write(self, folder):
        fname = manifest_path(folder)
        with open(fname, 'w') as f:
            json.dump(asdict(self), f, indent=2, sort_keys=True)
            f.write('\n')
        return fname

    @classmethod
    def read(cls, fname):
        if os.path.isdir(fname):
            fname = manifest_path(fname)
        with open(fname, 'r') as f:
            d = json.load(f)
        try:
            return cls(**d)
        except TypeError:
            raise reader.FieldFileError("{} is not a run manifest".format(fname))


######## Argument types ##########
def _dims(text):
    try:
        return LatticeDims.parse(text)
    except LatticeError as err:
        raise argparse.ArgumentTypeError(str(err))


def _site(text):
    try:
        parts = [int(s) for s in text.split(',')]
    except ValueError:
        raise argparse.ArgumentTypeError("Site must be an index or T,X,Y,Z, got {!r}".format(text))
    return parts[0] if len(parts) == 1 else tuple(parts)


def _positive_int(text):
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("Expected a positive integer, got {}".format(text))
    return n


def build_parser():
    parser = argparse.ArgumentParser(prog='dslashsuite', description="Wilson Dslash stencil, mixed precision CG and FPGA performance model")
    parser.add_argument('--version', action='version', version='%(prog)s ' + dslashsuite.__version__)
    parser.add_argument('--verbose', '-v', action='count', default=0, help="-v for progress, -vv for debug")
    sub = parser.add_subparsers(dest='subcommand', metavar='COMMAND')
    sub.required = True

    p = sub.add_parser('gen', help="generate a gauge field")
    p.add_argument('--dims', type=_dims, default=LatticeDims(4, 4, 4, 4), help="T,X,Y,Z (default 4,4,4,4)")
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--start', choices=('hot', 'cold'), default='hot')
    p.add_argument('--precision', choices=('double', 'single'), default='double')
    p.add_argument('--compressed', action='store_true', help="store links as 10 reals")
    p.add_argument('--jobs', type=_positive_int, default=1, help="worker processes for generation")
    p.add_argument('--out', required=True)

    p = sub.add_parser('solve', help="solve D^dagger D psi = eta")
    p.add_argument('--gauge', required=True, help="gauge file, or a folder holding gauge*.dsf")
    p.add_argument('--source', choices=SOURCES, default='point')
    p.add_argument('--site', type=_site, default=0, help="point source site: index or T,X,Y,Z")
    p.add_argument('--spin', type=int, default=0)
    p.add_argument('--color', type=int, default=0)
    p.add_argument('--seed', type=int, default=0, help="seed of random and manufactured sources")
    p.add_argument('--mass', type=float, default=DEFAULT_MASS)
    p.add_argument('--sign', type=int, choices=(-1, 1), default=HOPPING_SIGN)
    p.add_argument('--rmin', type=float, default=1e-9)
    p.add_argument('--inner-k', type=_positive_int, default=16)
    p.add_argument('--max-outer', type=_positive_int, default=1000)
    p.add_argument('--max-iter', type=_positive_int, default=10000)
    p.add_argument('--algorithm', choices=ALGORITHMS, default=RGCG)
    p.add_argument('--compressed', action='store_true', help="low-precision operator on compressed links")
    p.add_argument('--out', required=True)

    p = sub.add_parser('perf', help="performance model curves and anchor audit")
    p.add_argument('--profile', default=perf.DEFAULT_PROFILE, help="profile file or shipped name (u250, u280)")
    p.add_argument('--precision', choices=perf.PRECISIONS, default=None, help="restrict curves to one format")
    p.add_argument('--ii-max', type=_positive_int, default=20)
    p.add_argument('--dims', type=_dims, default=LatticeDims(12, 8, 8, 8), help="node lattice of the scenario table")
    p.add_argument('--out', required=True)

    p = sub.add_parser('bench', help="time D^dagger D on a gauge field")
    p.add_argument('--gauge', required=True)
    p.add_argument('--reps', type=_positive_int, default=10)
    p.add_argument('--mass', type=float, default=DEFAULT_MASS)
    p.add_argument('--precision', choices=('double', 'single'), default=None, help="convert the field first")
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--out', default=None)

    p = sub.add_parser('replay', help="rerun a command from its manifest")
    p.add_argument('manifest', help="manifest.json or the folder holding it")
    p.add_argument('--out', default=None, help="write here instead of the manifest's folder")
    return parser


@contextmanager
def _pool(jobs):
    if jobs > 1:
        with Pool(jobs) as pool:
            yield pool
    else:
        yield None


def _parameters(args):
    """ JSON-ready copy of the resolved arguments (out folder and verbosity excluded) """
    params = OrderedDict()
    for key, value in sorted(vars(args).items()):
        if key in ('out', 'verbose', 'subcommand', 'func', 'manifest'):
            continue
        if isinstance(value, LatticeDims):
            value = list(value.extents)
        elif isinstance(value, tuple):
            value = list(value)
        params[key] = value
    return params


def _resolve_gauge(path):
    if os.path.isdir(path):
        fns = listfields(path, 'gauge')
        if not fns:
            raise reader.FieldFileError("No gauge*.dsf files in {}".format(path))
        return fns[-1]
    return path


######## Commands ##########
def cmd_gen(args):
    folder = outdir(args.out)
    with _pool(args.jobs) as pool:
        if args.start == 'cold':
            gauge = fields.cold_start(args.dims, args.precision)
        else:
            gauge = fields.hot_start(args.dims, args.seed, args.precision, pool=pool)
    if args.compressed:
        gauge = gauge.compress()
    reader.save(gauge, os.path.join(folder, 'gauge.dsf'))
    RunManifest('gen', _parameters(args), outputs=['gauge.dsf']).write(folder)
    return EXIT_OK


def _source(args, gauge):
    geom = gauge.geometry
    if args.source == 'point':
        return fields.point_source(geom, args.site, args.spin, args.color), None
    if args.source == 'random':
        return fields.random_spinor(geom, args.seed), None
    x0 = fields.random_spinor(geom, args.seed)
    return apply(DDAGD, gauge, x0, args.mass, args.sign), x0


def cmd_solve(args):
    gauge_path = _resolve_gauge(args.gauge)
    gauge = reader.load(gauge_path, kind='gauge').convert(Precision.HIGH)
    folder = outdir(args.out)
    eta, x0 = _source(args, gauge)
    cfg = SolverConfig(r_min=args.rmin, inner_k=args.inner_k, max_outer=args.max_outer, max_iter=args.max_iter,
                       m_q=args.mass, sign=args.sign, compressed=args.compressed)
    psi, report = solve(args.algorithm, gauge, eta, cfg)

    summary = report.summary()
    if x0 is not None:
        summary['solution_error'] = norm(axpy(-1.0, x0, psi)) / norm(x0)
    reader.save(eta, os.path.join(folder, 'eta.dsf'))
    reader.save(psi, os.path.join(folder, 'psi.dsf'))
    reader.write_csv(os.path.join(folder, 'report.csv'), report.rows())
    reader.write_csv(os.path.join(folder, 'summary.csv'), [summary])
    params = _parameters(args)
    params['gauge'] = os.path.abspath(gauge_path)
    RunManifest('solve', params, inputs=[params['gauge']],
                outputs=['eta.dsf', 'psi.dsf', 'report.csv', 'summary.csv']).write(folder)
    if not report.converged:
        logger.error("%s did not reach r_min = %g (residual %.3e)", args.algorithm, args.rmin, report.steps[-1].relative_residual)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_perf(args):
    device, kernel = perf.load_profile(args.profile)
    folder = outdir(args.out)
    precisions = [args.precision] if args.precision else None
    paths, rows = perf.write_figures(folder, device, kernel, range(1, args.ii_max + 1), precisions)
    table = [perf.scenario_report(args.dims, device, kernel, scenario, p)
             for scenario in perf.SCENARIOS for p in (perf.SINGLE, perf.DOUBLE)]
    paths.append(reader.write_csv(os.path.join(folder, 'scenarios.csv'), _uniform(table)))
    params = _parameters(args)
    params['profile'] = os.path.abspath(perf.profile_path(args.profile))
    RunManifest('perf', params, inputs=[params['profile']],
                outputs=[os.path.basename(p) for p in paths]).write(folder)
    try:
        perf.audit(rows)
    except perf.AnchorAuditError as err:
        logger.error("Anchor audit failed: %s", err)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _uniform(table):
    """ Give every row the union of the keys (first-seen order), blanks where a scenario has no value """
    keys = []
    for row in table:
        keys += [k for k in row if k not in keys]
    return [OrderedDict((k, row.get(k, '')) for k in keys) for row in table]


def _bench_flops(gauge):
    """ Operations one apply(DDAGD) executes; compressed links are rebuilt once per call, not per stencil """
    flops = flop_count(DDAGD, gauge.geometry.volume).total
    if gauge.compressed:
        flops += reconstruction_flops() * len(gauge.params)
    return flops


def cmd_bench(args):
    gauge_path = _resolve_gauge(args.gauge)
    gauge = reader.load(gauge_path, kind='gauge')
    if args.precision:
        gauge = gauge.convert(args.precision)
    psi = fields.random_spinor(gauge.geometry, args.seed, gauge.precision)
    V = gauge.geometry.volume
    flops = _bench_flops(gauge) * args.reps
    t0 = time.perf_counter()
    for _ in range(args.reps):
        psi = apply(DDAGD, gauge, psi, args.mass)
    seconds = time.perf_counter() - t0
    result = OrderedDict([('dims', str(gauge.geometry.dims)), ('precision', gauge.precision.value),
                          ('compressed', gauge.compressed), ('reps', args.reps), ('flops', flops),
                          ('seconds', seconds), ('gflops', flops / seconds / 1e9 if seconds > 0 else float('inf')),
                          ('sites_per_second', 2 * V * args.reps / seconds if seconds > 0 else float('inf'))])
    print(', '.join("{} = {}".format(k, v) for k, v in result.items()))
    if args.out:
        folder = outdir(args.out)
        reader.write_csv(os.path.join(folder, 'bench.csv'), [result])
        params = _parameters(args)
        params['gauge'] = os.path.abspath(gauge_path)
        RunManifest('bench', params, inputs=[params['gauge']], outputs=['bench.csv']).write(folder)
    return EXIT_OK


COMMANDS = OrderedDict([('gen', cmd_gen), ('solve', cmd_solve), ('perf', cmd_perf), ('bench', cmd_bench)])


def _namespace(manifest):
    """ Rebuild the parsed arguments of a recorded command """
    params = dict(manifest.parameters)
    if 'dims' in params:
        params['dims'] = LatticeDims(*params['dims'])
    if isinstance(params.get('site'), list):
        params['site'] = tuple(params['site'])
    return argparse.Namespace(subcommand=manifest.subcommand, **params)


def cmd_replay(args):
    manifest = RunManifest.read(args.manifest)
    if manifest.subcommand not in COMMANDS:
        raise reader.FieldFileError("Cannot replay a '{}' manifest".format(manifest.subcommand))
    if manifest.version != dslashsuite.__version__:
        logger.warning("Manifest written by version %s, replaying with %s", manifest.version, dslashsuite.__version__)
    ns = _namespace(manifest)
    src = args.manifest if os.path.isdir(args.manifest) else os.path.dirname(os.path.abspath(args.manifest))
    ns.out = args.out or src
    logger.info("Replaying %s into %s", manifest.subcommand, ns.out)
    return COMMANDS[manifest.subcommand](ns)


COMMANDS['replay'] = cmd_replay


def configure_logging(verbose):
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format='%(levelname)s %(name)s: %(message)s')


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        return COMMANDS[args.subcommand](args)
    except (reader.FieldFileError, reader.ProfileError, NotSpecialUnitary, GeometryMismatch,
            PrecisionMismatch, OSError, json.JSONDecodeError) as err:
        logger.error("%s", err)
        return EXIT_IO
    except SolverBreakdown as err:
        logger.error("%s", err)
        return EXIT_NOT_CONVERGED
    except ValueError as err:
        logger.error("%s", err)
        return EXIT_USAGE


if __name__ == '__main__':
    sys.exit(main())
