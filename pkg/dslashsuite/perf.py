# -*- coding: utf-8 -*-
"""
Analytical performance model of the stencil kernel on an FPGA card, in two deployment scenarios:

    embedded   the whole lattice lives in on-chip URAM; the pipeline accepts one stencil per cycle
    streaming  links and spinors stream from DDR; the link throughput sets the initiation interval

All device numbers come from a profile (dslashsuite/profiles/*.txt); the quoted values the
model is checked against live in ANCHORS, never in the model itself.
"""
import logging
import math
import os
from collections import OrderedDict
from dataclasses import dataclass, field, fields as dc_fields
from fractions import Fraction

from dslashsuite.algebra import Precision, SPINOR_WORDS, LINK_WORDS
from dslashsuite.dslash import STENCIL_FLOPS, STAGE3_FLOPS, STENCIL_WORDS, COMPRESSED_STENCIL_WORDS, NLINKS, NSPINORS
from dslashsuite.lattice import LatticeDims, NDIM
from dslashsuite.su3 import COMPRESSED_LINK_WORDS, RECONSTRUCTION_FLOPS
from dslashsuite.reader import read_profile, write_csv, ProfileError

logger = logging.getLogger(__name__)

EMBEDDED = 'embedded'
STREAMING = 'streaming'
SCENARIOS = (EMBEDDED, STREAMING)

SINGLE = 'single'
DOUBLE = 'double'
FIXED32 = 'fixed32'
PRECISIONS = (SINGLE, DOUBLE, FIXED32)

# Node counts are quoted for a production lattice this many times the per-node one
TARGET_FACTOR = 4096

PROFILE_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'profiles')
DEFAULT_PROFILE = 'u250'

assert STENCIL_WORDS == NLINKS * LINK_WORDS + NSPINORS * SPINOR_WORDS == 360
assert COMPRESSED_STENCIL_WORDS == NLINKS * COMPRESSED_LINK_WORDS + NSPINORS * SPINOR_WORDS == 296


class AnchorAuditError(AssertionError):
    """ A model value strays from its quoted anchor, or a known discrepancy went unflagged """


def perf_precision(p):
    """ 'single', 'double' or 'fixed32' from a Precision or any name Precision.parse accepts """
    if isinstance(p, str) and p.lower() == FIXED32:
        return FIXED32
    return Precision.parse(p).value


######## Parameters ##########
@dataclass(frozen=True)
class DeviceParams:
    """
    One accelerator card.
        frequency_hz:      programmable-logic clock
        bytes_per_cycle:   DDR -> logic payload per clock cycle
        channels:          memory channels behind that payload
        bandwidth:         aggregate bytes/s (derived from the two above when omitted; cross-checked when given)
        uram_block_bits, uram_blocks:  on-chip memory geometry
        ddr_capacity_bytes:            external memory size
        resource_anchor_double:        % resources at II=1 in double (pct = anchor/II)
        resource_ratio_single, resource_ratio_fixed32:  the other formats relative to double
    """
    name: str = DEFAULT_PROFILE
    frequency_hz: float = 300e6
    bytes_per_cycle: float = 256
    channels: int = 4
    bandwidth: float = None
    uram_block_bits: int = 288 * 1024
    uram_blocks: int = 1280
    ddr_capacity_bytes: int = 64 * 2 ** 30
    resource_anchor_double: float = 100.0
    resource_ratio_single: float = 0.5
    resource_ratio_fixed32: float = 0.35

    def __post_init__(self):
        derived = self.bytes_per_cycle * self.frequency_hz
        if self.bandwidth is None:
            object.__setattr__(self, 'bandwidth', derived)
        elif not math.isinf(self.bandwidth) and abs(self.bandwidth - derived) > 1e-6 * derived:
            raise ValueError("Profile {}: bandwidth {:g} B/s disagrees with {:g} B/cycle x {:g} Hz = {:g} B/s".format(
                self.name, self.bandwidth, self.bytes_per_cycle, self.frequency_hz, derived))
        for f in dc_fields(self):
            value = getattr(self, f.name)
            if f.name != 'name' and not value > 0:
                raise ValueError("Profile {}: {} must be positive, got {}".format(self.name, f.name, value))

    def resource_anchor(self, precision):
        ratio = {DOUBLE: 1.0, SINGLE: self.resource_ratio_single, FIXED32: self.resource_ratio_fixed32}
        return self.resource_anchor_double * ratio[perf_precision(precision)]


@dataclass(frozen=True)
class KernelParams:
    flops_per_stencil: int = STENCIL_FLOPS
    reconstruction_flops: int = RECONSTRUCTION_FLOPS
    words: int = STENCIL_WORDS
    compressed_words: int = COMPRESSED_STENCIL_WORDS
    stage_latencies: tuple = (1, 14, 70, 57)
    pipelines: dict = field(default_factory=lambda: {SINGLE: 2, DOUBLE: 1, FIXED32: 2})
    word_bytes: dict = field(default_factory=lambda: {SINGLE: 4, DOUBLE: 8, FIXED32: 4})

    def __post_init__(self):
        if self.flops_per_stencil <= 0 or self.reconstruction_flops < 0:
            raise ValueError("Kernel FLOP counts must be positive")
        if len(self.stage_latencies) == 0 or min(self.stage_latencies) < 0:
            raise ValueError("Stage latencies must be non-negative cycles, got {}".format(self.stage_latencies))
        if min(self.pipelines.values()) < 1:
            raise ValueError("Every precision needs at least one pipeline")


@dataclass(frozen=True)
class FootprintParams:
    """ n_spinor fields resident on chip (psi, r, p, q, eta, scratch); U and U^dagger stored separately """
    n_spinor: int = 6
    duplication: int = 2

    def __post_init__(self):
        if self.n_spinor < 1 or self.duplication < 1:
            raise ValueError("Footprint parameters must be positive")


@dataclass(frozen=True)
class PerfPoint:
    initiation_interval: int
    required_bandwidth: float
    sustained_gflops: float
    resource_percentage: float
    precision: str
    compressed: bool


@dataclass(frozen=True)
class Footprint:
    dims: str
    volume: int
    precision: str
    n_spinor: int
    bytes: int
    uram_blocks: int
    fits: bool


######## Profiles ##########
_DEVICE_KEYS = {f.name: f.type for f in dc_fields(DeviceParams)}
_KERNEL_KEYS = ('flops_per_stencil', 'reconstruction_flops', 'stage_latencies',
                'pipelines_single', 'pipelines_double', 'pipelines_fixed32')


def profile_path(profile):
    """ A profile file path, or the name of a shipped profile ('u250', 'u280') """
    if os.path.isfile(profile):
        return profile
    shipped = os.path.join(PROFILE_DIR, profile + '.txt')
    if os.path.isfile(shipped):
        return shipped
    raise ProfileError("No profile file or shipped profile named '{}'".format(profile))


def load_profile(profile=DEFAULT_PROFILE):
    """
    Read a key = value profile into model parameters.
    Inputs:
        profile: path to a profile file, or a shipped profile name
    Outputs:
        device: DeviceParams
        kernel: KernelParams (defaults, overridden by any kernel keys in the profile)
    """
    raw = read_profile(profile_path(profile))
    dev, ker = {}, {}
    pipelines = dict(KernelParams().pipelines)
    for key, value in raw.items():
        try:
            if key == 'name':
                dev[key] = value
            elif key in _DEVICE_KEYS:
                dev[key] = int(float(value)) if _DEVICE_KEYS[key] is int else float(value)
            elif key == 'stage_latencies':
                ker[key] = tuple(int(v) for v in value.split(','))
            elif key.startswith('pipelines_') and key in _KERNEL_KEYS:
                pipelines[key[len('pipelines_'):]] = int(value)
            elif key in _KERNEL_KEYS:
                ker[key] = int(value)
            else:
                raise ProfileError("Unknown profile key '{}'".format(key))
        except ValueError as err:
            if isinstance(err, ProfileError):
                raise
            raise ProfileError("Bad value for '{}': {!r}".format(key, value))
    ker['pipelines'] = pipelines
    try:
        device, kernel = DeviceParams(**dev), KernelParams(**ker)
    except ValueError as err:
        raise ProfileError("{}: {}".format(profile, err))
    logger.info("Loaded profile %s (%.1f GB/s at %.0f MHz)", device.name, device.bandwidth / 1e9, device.frequency_hz / 1e6)
    return device, kernel


######## Streaming scenario ##########
def bytes_per_stencil(precision, compressed=False, kernel=KernelParams()):
    """ Input bytes of one stencil (2880 for double, uncompressed) """
    words = kernel.compressed_words if compressed else kernel.words
    return words * kernel.word_bytes[perf_precision(precision)]


def min_initiation_interval(device, kernel, precision, compressed=True):
    """ Fewest cycles per stencil that the link can feed: ceil(bytes x frequency / bandwidth) """
    if device.bandwidth <= 0:
        raise ValueError("Bandwidth must be positive")
    if math.isinf(device.bandwidth):
        return 1
    cycles = Fraction(bytes_per_stencil(precision, compressed, kernel)) * Fraction(device.frequency_hz) / Fraction(device.bandwidth)
    return max(1, math.ceil(cycles))


def pipelines_for(kernel, precision, scenario):
    """ Stencil pipelines fed in parallel: one stream when link-bound, the per-precision count on chip """
    return kernel.pipelines[perf_precision(precision)] if scenario == EMBEDDED else 1


def sustained_gflops(device, kernel, ii, precision, include_reconstruction=False, scenario=STREAMING):
    """ pipelines x FLOPs per stencil x frequency / II, in GFLOPs """
    if ii < 1:
        raise ValueError("Initiation interval must be at least 1, got {}".format(ii))
    flops = kernel.flops_per_stencil
    if include_reconstruction:
        flops += NLINKS * kernel.reconstruction_flops
    return pipelines_for(kernel, precision, scenario) * flops * device.frequency_hz / ii / 1e9


def required_bandwidth(device, kernel, ii, precision, compressed=True):
    """ Bytes/s the link must deliver for one stencil every ii cycles """
    if ii < 1:
        raise ValueError("Initiation interval must be at least 1, got {}".format(ii))
    return bytes_per_stencil(precision, compressed, kernel) * device.frequency_hz / ii


def resource_usage(ii, precision, device=DeviceParams()):
    """ Percentage of all logic resources: anchor / II, clamped at 100 """
    if ii < 1:
        raise ValueError("Initiation interval must be at least 1, got {}".format(ii))
    return min(100.0, device.resource_anchor(precision) / ii)


def pipeline_latency(kernel=KernelParams()):
    return sum(kernel.stage_latencies)


def implied_reconstruction_flops(device, kernel, ii, gflops):
    """ Per-link reconstruction surcharge that would make a single stream at `ii` reach `gflops` """
    per_stencil = gflops * 1e9 * ii / device.frequency_hz
    return (per_stencil - kernel.flops_per_stencil) / NLINKS


def perf_curve(device, kernel, precision, compressed=True, ii_range=range(1, 21)):
    """ One PerfPoint per initiation interval (streaming scenario) """
    p = perf_precision(precision)
    return [PerfPoint(int(ii), required_bandwidth(device, kernel, ii, p, compressed),
                      sustained_gflops(device, kernel, ii, p), resource_usage(ii, p, device), p, bool(compressed))
            for ii in ii_range]


######## Embedded scenario ##########
def _dims(geom):
    if isinstance(geom, LatticeDims):
        return geom
    if hasattr(geom, 'dims'):
        return geom.dims
    return LatticeDims(*geom)


def bram_footprint(geom, precision, fp=FootprintParams(), device=DeviceParams(), kernel=KernelParams()):
    """
    On-chip storage of one lattice.
    Inputs:
        geom: LatticeGeometry, LatticeDims or 4-tuple
        precision: 'single', 'double' or 'fixed32'
        fp: FootprintParams
    Outputs:
        Footprint. Bytes = V x (duplication x 4 x 18 + n_spinor x 24) x word. Every gauge direction
        (duplication x 4 arrays) and every spinor field is its own array, each rounded up to whole
        URAM blocks.
    """
    dims = _dims(geom)
    p = perf_precision(precision)
    V = dims.volume
    word = kernel.word_bytes[p]
    gauge_array = V * LINK_WORDS * word
    spinor_array = V * SPINOR_WORDS * word
    n_gauge = fp.duplication * NDIM
    nbytes = n_gauge * gauge_array + fp.n_spinor * spinor_array
    block_bytes = Fraction(device.uram_block_bits, 8)
    blocks = n_gauge * math.ceil(gauge_array / block_bytes) + fp.n_spinor * math.ceil(spinor_array / block_bytes)
    return Footprint(str(dims), V, p, fp.n_spinor, nbytes, blocks, blocks <= device.uram_blocks)


def streamed_bytes(volume, precision, fp=FootprintParams(), kernel=KernelParams()):
    """ DDR storage of one lattice with compressed links, no U^dagger copy """
    word = kernel.word_bytes[perf_precision(precision)]
    return volume * (NDIM * COMPRESSED_LINK_WORDS + fp.n_spinor * SPINOR_WORDS) * word


def node_estimates(geom, target_volume, precision, device=DeviceParams(), kernel=KernelParams(), fp=FootprintParams()):
    """
    Cards needed for a lattice of target_volume sites.
        embedded:  target split into node lattices of `geom` (None if geom does not fit on chip)
        streaming: whole lattice held in DDR across cards
    """
    foot = bram_footprint(geom, precision, fp, device, kernel)
    embedded = math.ceil(target_volume / foot.volume) if foot.fits else None
    streaming = math.ceil(streamed_bytes(target_volume, precision, fp, kernel) / device.ddr_capacity_bytes)
    return OrderedDict([(EMBEDDED, embedded), (STREAMING, streaming)])


def calibration_factor(device, kernel, quoted_gflops=None):
    """ Quoted embedded double GFLOPs over the raw model value """
    quoted_gflops = ANCHORS['embedded_gflops_double'] if quoted_gflops is None else quoted_gflops
    return quoted_gflops / sustained_gflops(device, kernel, 1, DOUBLE, scenario=EMBEDDED)


def scenario_report(geom, device=DeviceParams(), kernel=KernelParams(), scenario=STREAMING,
                    precision=SINGLE, compressed=True, fp=FootprintParams(), target_factor=TARGET_FACTOR):
    """ The comparison table of one scenario, as an OrderedDict of labelled values """
    dims = _dims(geom)
    p = perf_precision(precision)
    d = OrderedDict([('scenario', scenario), ('profile', device.name), ('dims', str(dims)), ('precision', p)])
    if scenario == EMBEDDED:
        foot = bram_footprint(dims, p, fp, device, kernel)
        raw = sustained_gflops(device, kernel, 1, p, scenario=EMBEDDED)
        factor = calibration_factor(device, kernel)
        d['footprint_bytes'] = foot.bytes
        d['uram_blocks'] = foot.uram_blocks
        d['uram_available'] = device.uram_blocks
        d['fits'] = foot.fits
        d['initiation_interval'] = 1
        d['gflops_raw'] = raw
        d['calibration_factor'] = factor
        d['gflops_calibrated'] = raw * factor
    elif scenario == STREAMING:
        ii = min_initiation_interval(device, kernel, p, compressed)
        bw = required_bandwidth(device, kernel, ii, p, compressed)
        d['compressed'] = bool(compressed)
        d['initiation_interval'] = ii
        d['gflops_raw'] = sustained_gflops(device, kernel, ii, p)
        d['gflops_with_reconstruction'] = sustained_gflops(device, kernel, ii, p, include_reconstruction=compressed)
        d['required_bandwidth'] = bw
        d['bandwidth_utilization'] = bw / device.bandwidth
        d['resource_percentage'] = resource_usage(ii, p, device)
    else:
        raise ValueError("Unknown scenario {!r}; use one of {}".format(scenario, SCENARIOS))
    target = target_factor * dims.volume
    nodes = node_estimates(dims, target, p, device, kernel, fp)
    d['target_volume'] = target
    d['nodes'] = nodes[scenario]
    return d


######## Anchor audit ##########
# Values quoted for the U250 card at 300 MHz
ANCHORS = OrderedDict([
    ('input_bytes_double', 2880),
    ('flops_per_stencil', 1464),
    ('stage3_flops', 1152),
    ('pipeline_latency', 142),
    ('min_ii_single', 5),
    ('min_ii_double', 9),
    ('streaming_gflops_single', 86),
    ('streaming_gflops_double', 46),
    ('streaming_gflops_single_reconstruction', 194),
    ('embedded_gflops_double', 406),
    ('embedded_gflops_single', 812),
    ('resource_percent_double_ii5', 20),
    ('embedded_fits_12x8x8x8_double', 1),
    ('node_factor', TARGET_FACTOR),
])

# Anchors the model does not reproduce; they must appear flagged in every audit
KNOWN_DISCREPANCIES = ('min_ii_double', 'streaming_gflops_single_reconstruction')
ANCHOR_TOLERANCE = 0.10


@dataclass(frozen=True)
class AnchorRow:
    anchor: str
    quoted_value: float
    model_value: float
    relative_deviation: float
    flagged: bool
    note: str = ''


def _row(name, model, note=''):
    quoted = ANCHORS[name]
    dev = abs(model - quoted) / abs(quoted)
    return AnchorRow(name, quoted, model, dev, name in KNOWN_DISCREPANCIES, note)


def anchors(device=DeviceParams(), kernel=KernelParams()):
    """ (quoted value, model value, relative deviation) for every quoted number """
    ii_single = min_initiation_interval(device, kernel, SINGLE)
    ii_double = min_initiation_interval(device, kernel, DOUBLE)
    factor = calibration_factor(device, kernel)
    surcharge = implied_reconstruction_flops(device, kernel, ii_single, ANCHORS['streaming_gflops_single_reconstruction'])
    desk = LatticeDims(12, 8, 8, 8)
    rows = [
        _row('input_bytes_double', bytes_per_stencil(DOUBLE, False, kernel)),
        _row('flops_per_stencil', kernel.flops_per_stencil),
        _row('stage3_flops', STAGE3_FLOPS),
        _row('pipeline_latency', pipeline_latency(kernel)),
        _row('min_ii_single', ii_single),
        _row('min_ii_double', ii_double, "{} bytes per stencil need {:.3f} cycles".format(
            bytes_per_stencil(DOUBLE, True, kernel), bytes_per_stencil(DOUBLE, True, kernel) * device.frequency_hz / device.bandwidth)),
        _row('streaming_gflops_single', sustained_gflops(device, kernel, ii_single, SINGLE)),
        _row('streaming_gflops_double', sustained_gflops(device, kernel, ANCHORS['min_ii_double'], DOUBLE), "evaluated at the quoted II"),
        _row('streaming_gflops_single_reconstruction', sustained_gflops(device, kernel, ii_single, SINGLE, include_reconstruction=True),
             "implied surcharge {:.1f} flops per link vs {} modelled".format(surcharge, kernel.reconstruction_flops)),
        _row('embedded_gflops_double', sustained_gflops(device, kernel, 1, DOUBLE, scenario=EMBEDDED),
             "calibration factor {:.4f}".format(factor)),
        _row('embedded_gflops_single', sustained_gflops(device, kernel, 1, SINGLE, scenario=EMBEDDED),
             "calibration factor {:.4f}".format(factor)),
        _row('resource_percent_double_ii5', resource_usage(5, DOUBLE, device)),
        _row('embedded_fits_12x8x8x8_double', int(bram_footprint(desk, DOUBLE, device=device, kernel=kernel).fits)),
        _row('node_factor', node_estimates(desk, TARGET_FACTOR * desk.volume, DOUBLE, device, kernel)[EMBEDDED] or 0),
    ]
    for r in rows:
        if r.flagged:
            logger.warning("Known discrepancy %s: quoted %g, model %g", r.anchor, r.quoted_value, r.model_value)
    return rows


def audit(rows, tolerance=ANCHOR_TOLERANCE):
    """ Raise AnchorAuditError unless every unflagged row is within tolerance and every known discrepancy is flagged """
    flagged = {r.anchor for r in rows if r.flagged}
    missing = [name for name in KNOWN_DISCREPANCIES if name not in flagged]
    if missing:
        raise AnchorAuditError("Known discrepancies not flagged: {}".format(', '.join(missing)))
    bad = [r for r in rows if not r.flagged and r.relative_deviation > tolerance]
    if bad:
        raise AnchorAuditError("Anchors outside {:.0%}: {}".format(tolerance, ', '.join(
            "{} (quoted {:g}, model {:g})".format(r.anchor, r.quoted_value, r.model_value) for r in bad)))
    return True


######## CSV output ##########
FOOTPRINT_SWEEP = ((2, 2, 2, 2), (4, 4, 4, 4), (8, 4, 4, 4), (8, 8, 4, 4), (8, 8, 8, 4), (8, 8, 8, 8),
                   (12, 8, 8, 8), (16, 8, 8, 8), (16, 12, 12, 12), (16, 16, 16, 16))
N_SPINOR_SWEEP = range(4, 10)


def figure_rows(device=DeviceParams(), kernel=KernelParams(), ii_range=range(1, 21), precisions=None, compressed=True):
    """
    The data behind each figure, keyed by file stem.
        fig2: Footprint per lattice size, precision and n_spinor
        fig3, fig4: PerfPoint per (precision, II) for single and double
        fig5: PerfPoint per (precision, II) for single, double and fixed32
    `precisions` restricts every figure to the listed formats.
    """
    def keep(ps):
        return [p for p in ps if precisions is None or p in [perf_precision(q) for q in precisions]]

    fig2 = [bram_footprint(dims, p, FootprintParams(n_spinor=n), device, kernel)
            for p in keep((SINGLE, DOUBLE)) for dims in FOOTPRINT_SWEEP for n in N_SPINOR_SWEEP]
    curves = [pt for p in keep((SINGLE, DOUBLE)) for pt in perf_curve(device, kernel, p, compressed, ii_range)]
    fig5 = [pt for p in keep((SINGLE, DOUBLE, FIXED32)) for pt in perf_curve(device, kernel, p, compressed, ii_range)]
    return OrderedDict([('fig2', fig2), ('fig3', curves), ('fig4', list(curves)), ('fig5', fig5)])


def write_figures(folder, device=DeviceParams(), kernel=KernelParams(), ii_range=range(1, 21), precisions=None, compressed=True):
    """ Write fig2.csv .. fig5.csv and anchors.csv into folder; returns the paths and the audit rows """
    paths = []
    for stem, rows in figure_rows(device, kernel, ii_range, precisions, compressed).items():
        if rows:
            paths.append(write_csv(os.path.join(folder, stem + '.csv'), rows))
    rows = anchors(device, kernel)
    paths.append(write_csv(os.path.join(folder, 'anchors.csv'), rows))
    return paths, rows
