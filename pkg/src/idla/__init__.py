"""Internal DLA with uniformly layered walks."""
from .aggregation import (
    AbelianResult,
    BoundingRadiusExceeded,
    CardStacks,
    Cluster,
    InvariantViolation,
    MoveBudgetExceeded,
    StoppedResult,
    abelian_run,
    grow,
    grow_extended,
    grow_stopped,
    monotone_couple,
    replica_map,
    settle_independent,
)
from .analytics import (
    chi_square_two_sample,
    chi_square_uniform,
    fluctuation_metrics,
    lil_envelope,
    simulate_axis_times,
    theorem_envelopes,
)
from .io import ParseError, SnapshotHeader, read_snapshot, render_pgm, write_snapshot
from .kernels import Family, KernelSpec, transitions, validate_uniform_layering
from .lattice import ORIGIN, Site, diamond_volume, layer_site, layer_size, norm1
from .rng import RandomStream
from .walk import (
    ExitSet,
    FirstOf,
    HitLayer,
    HitSite,
    StepCapExceeded,
    escape_occupied_diamond,
    hit_origin_before_layer_prob,
    walk_until,
)

__version__ = "0.1.0"
