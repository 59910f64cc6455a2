""" Wilson Dslash Suite, Python Tools """

__version__ = '0.1.0'

from .lattice import LatticeDims, LatticeGeometry, Direction, DIRECTIONS, index_of, coords_of, neighbor
from .algebra import Precision, axpy, scale, dot, norm, norm2, convert, gamma5, mat_vec, mat_dag_vec
from .su3 import compress, reconstruct, reconstruction_flops, is_special_unitary
from .fields import GaugeField, CompressedGaugeField, SpinorField, cold_start, hot_start, point_source, random_spinor, zeros
from .dslash import D, DDAG, DDAGD, StencilInputs, FlopReport, gather, stencil, apply, apply_dense, flop_count
from .solver import SolverConfig, SolveReport, cg_reference, residual_guided_cg, solve, true_residual, direct_solve
from .perf import (DeviceParams, KernelParams, FootprintParams, PerfPoint, load_profile, bytes_per_stencil,
                   min_initiation_interval, sustained_gflops, required_bandwidth, bram_footprint, resource_usage,
                   pipeline_latency, scenario_report, anchors, audit, AnchorAuditError)
from .reader import save, load, read_profile, write_csv, read_csv
from .path import subdir, outdir, listfields
from .chunk import site_chunks, unchunk
