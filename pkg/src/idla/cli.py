"""Command-line entry point: ``idla <subcommand> --seed S ...``.

Exit codes: 0 success, 1 a check found a failure, 2 configuration error,
3 simulation error.  Data goes to stdout or the named files; progress and
errors go to stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from fractions import Fraction
from pathlib import Path

from . import analytics
from .aggregation import (
    BoundingRadiusExceeded,
    CardStacks,
    MoveBudgetExceeded,
    abelian_run,
    grow,
    monotone_couple,
    replica_map,
)
from .io import make_header, render_pgm, write_snapshot
from .kernels import Family, KernelSpec, validate_uniform_layering
from .lattice import ORIGIN, Site, diamond_volume, layer_site
from .rng import RandomStream
from .walk import FirstOf, HitLayer, HitSite, StepCapExceeded, hit_origin_before_layer_prob, walk_until

SCHEDULERS = ("fifo", "lifo", "random", "lexicographic")


class ConfigError(ValueError):
    pass


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def _site(text: str) -> Site:
    try:
        x, y = text.split(",")
        return Site(int(x), int(y))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected X,Y, got {text!r}") from None


def _spec(args) -> KernelSpec:
    family = Family(args.kernel)
    if family is Family.MIXTURE:
        if not 0 <= args.p < 1:
            raise ConfigError("p must lie in [0,1)")
        return KernelSpec.mixture(args.p)
    return KernelSpec(family)


def _add_common(p: argparse.ArgumentParser, kernel: bool = True) -> None:
    p.add_argument("--seed", type=int, required=True, help="master seed (required)")
    p.add_argument("--config", help="flat key=value file; command-line flags take precedence")
    p.add_argument("--progress", type=int, default=0, metavar="N",
                   help="report progress on stderr every N particles")
    if kernel:
        p.add_argument("--kernel", choices=[f.value for f in Family], default="mixture")
        p.add_argument("--p", type=_fraction, default=Fraction(0), help="inward weight of the mixture")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="idla", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("grow", help="grow clusters and write snapshots")
    _add_common(g)
    size = g.add_mutually_exclusive_group(required=True)
    size.add_argument("--n", type=int, help="release v_n = 2n(n+1)+1 particles")
    size.add_argument("--particles", type=int)
    g.add_argument("--start", type=_site, default=ORIGIN, help="start site X,Y (default 0,0)")
    g.add_argument("--replicas", type=int, default=1)
    g.add_argument("--shortcut", choices=("auto", "on", "off"), default="auto")
    g.add_argument("--out", help="snapshot path; replicas get .rK inserted before the suffix")
    g.add_argument("--image", help="PGM path")
    g.add_argument("--image-style", choices=("occupancy", "order"), default="occupancy")
    g.add_argument("--report", help="CSV of fluctuation rows (default stdout)")

    v = sub.add_parser("validate", help="check the layering axioms exactly")
    _add_common(v)
    v.add_argument("--kmax", type=int, default=50)

    f = sub.add_parser("fluct", help="fluctuation sweep over n and seeds")
    _add_common(f)
    f.add_argument("--n", type=int, nargs="+", required=True)
    f.add_argument("--replicas", type=int, default=1, help="seeds seed, seed+1, ...")
    f.add_argument("--shortcut", choices=("auto", "on", "off"), default="auto")
    f.add_argument("--out", help="CSV path (default stdout)")

    a = sub.add_parser("axis", help="axis hitting times T_m of the outward walk")
    _add_common(a, kernel=False)
    a.add_argument("--m", type=int, required=True)
    a.add_argument("--replicas", type=int, default=10000)
    a.add_argument("--eps", type=float, default=0.0)
    a.add_argument("--samples", help="CSV path for the individual samples")

    c = sub.add_parser("abelian-check", help="scheduler invariance and monotonicity fuzzing")
    _add_common(c)
    c.set_defaults(p=Fraction(1, 2))
    c.add_argument("--trials", type=int, default=20)
    c.add_argument("--pairs", type=int, default=200)
    c.add_argument("--max-particles", type=int, default=60)
    c.add_argument("--max-sites", type=int, default=5)

    h = sub.add_parser("hitprob", help="gambler's ruin: closed form against Monte Carlo")
    _add_common(h, kernel=False)
    h.add_argument("--p", type=_fraction, required=True)
    h.add_argument("--l", type=int, required=True)
    h.add_argument("--n", type=int, required=True)
    h.add_argument("--walks", type=int, default=50000)
    return parser


def _expand_config(argv: list[str]) -> list[str]:
    """Splice ``--config`` file entries in front of the explicit flags."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise ConfigError("--config needs a path")
    path = argv[i + 1]
    rest = argv[:i] + argv[i + 2:]
    extra: list[str] = []
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    given = {a.split("=")[0] for a in rest if a.startswith("--")}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        flag = "--" + key.strip().replace("_", "-")
        if flag in given:
            continue
        extra.append(flag)
        extra.extend(value.split())
    # subcommand first, then config values, then explicit flags
    return rest[:1] + extra + rest[1:]


def _progress(args):
    if not args.progress:
        return None
    state = {"next": args.progress}

    def report(released, settled):
        if released >= state["next"]:
            print(f"released {released} particles, {settled} sites occupied", file=sys.stderr)
            while state["next"] <= released:
                state["next"] += args.progress

    return report


def _replica_path(path: str | None, r: int, replicas: int) -> str | None:
    if path is None or replicas == 1:
        return path
    p = Path(path)
    return str(p.with_name(f"{p.stem}.r{r}{p.suffix}"))


def _radius_for(particles: int) -> int:
    n = 0
    while diamond_volume(n + 1) <= particles:
        n += 1
    return n


FLUCT_FIELDS = ["kernel", "p", "n", "seed", "delta_in", "delta_out",
                "inner_envelope", "outer_envelope", "within_envelope"]


def _fluct_row(spec, n, seed, cluster) -> dict:
    rep = analytics.fluctuation_metrics(cluster, n)
    env = analytics.theorem_envelopes(max(n, 2), spec.p if spec.family is Family.MIXTURE else None)
    within = cluster.contains_diamond(math.ceil(env.inner)) and cluster.within_diamond(env.outer)
    return {
        "kernel": spec.family.value,
        "p": str(spec.p),
        "n": n,
        "seed": seed,
        "delta_in": rep.delta_in,
        "delta_out": rep.delta_out,
        "inner_envelope": f"{env.inner:.6f}",
        "outer_envelope": f"{env.outer:.6f}",
        "within_envelope": int(within),
    }


def _grow_replica(job):
    args, r = job
    spec = _spec(args)
    particles = diamond_volume(args.n) if args.n is not None else args.particles
    starts = {args.start: particles}
    rng = RandomStream(args.seed, r)
    cluster = grow(spec, starts, rng, args.shortcut, progress=_progress(args))
    out = _replica_path(args.out, r, args.replicas)
    if out:
        write_snapshot(cluster, make_header(cluster, spec, args.seed, starts), out)
    image = _replica_path(args.image, r, args.replicas)
    if image:
        Path(image).write_bytes(render_pgm(cluster, args.image_style))
    n = args.n if args.n is not None else _radius_for(particles)
    row = _fluct_row(spec, n, args.seed, cluster)
    row["replica"] = r
    return row


def _write_rows(rows, fieldnames, path):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    if path:
        Path(path).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())


def cmd_grow(args) -> int:
    _spec(args)
    if args.replicas < 1:
        raise ConfigError("replicas must be at least 1")
    if (args.n is not None and args.n < 0) or (args.particles is not None and args.particles < 1):
        raise ConfigError("n must be >= 0 and particles >= 1")
    rows = replica_map(_grow_replica, [(args, r) for r in range(args.replicas)])
    _write_rows(rows, FLUCT_FIELDS + ["replica"], args.report)
    return 0


def cmd_validate(args) -> int:
    spec = _spec(args)
    if not 1 <= args.kmax <= 1000:
        raise ConfigError("kmax must lie in [1, 1000]")
    report = validate_uniform_layering(spec, args.kmax)
    sys.stdout.write(report.to_text())
    return 0 if report.passed else 1


def _fluct_job(job):
    args, n, seed = job
    spec = _spec(args)
    cluster = grow(spec, diamond_volume(n), RandomStream(seed), args.shortcut, progress=_progress(args))
    return _fluct_row(spec, n, seed, cluster)


def cmd_fluct(args) -> int:
    _spec(args)
    if args.replicas < 1 or any(n < 2 for n in args.n):
        raise ConfigError("need replicas >= 1 and every n >= 2")
    jobs = [(args, n, args.seed + i) for n in args.n for i in range(args.replicas)]
    rows = replica_map(_fluct_job, jobs)
    _write_rows(rows, FLUCT_FIELDS, args.out)
    return 0


def cmd_axis(args) -> int:
    if args.m < 1 or args.replicas < 2:
        raise ConfigError("need m >= 1 and replicas >= 2")
    if not 0 <= args.eps < 1:
        raise ConfigError("eps must lie in [0,1)")
    samples = analytics.simulate_axis_times(args.m, args.replicas, RandomStream(args.seed))
    ts = [s.t for s in samples]
    mean = sum(ts) / len(ts)
    var = sum((t - mean) ** 2 for t in ts) / (len(ts) - 1)
    exp_mean, exp_var = analytics.axis_time_moments(args.m)
    row = {"m": args.m, "replicas": args.replicas, "mean": f"{mean:.6f}", "variance": f"{var:.6f}",
           "expected_mean": exp_mean, "expected_variance": exp_var,
           "lil_lower": "", "lil_upper": "", "fraction_outside": ""}
    if args.m >= 16:
        lo, hi = analytics.lil_envelope(args.m, args.eps)
        outside = sum(1 for t in ts if t < lo or t > hi) / len(ts)
        row.update(lil_lower=f"{lo:.6f}", lil_upper=f"{hi:.6f}", fraction_outside=f"{outside:.6f}")
    if args.samples:
        _write_rows([{"m": s.m, "t": s.t} for s in samples], ["m", "t"], args.samples)
    _write_rows([row], list(row), None)
    return 0


def random_config(stream: RandomStream, max_particles: int, max_sites: int, radius: int = 3) -> dict:
    """Random particle configuration on at most ``max_sites`` sites of ``D_radius``."""
    nsites = 1 + stream.below(max_sites)
    config: dict[Site, int] = {}
    for _ in range(nsites):
        k = stream.below(radius + 1)
        s = layer_site(k, stream.below(4 * k) if k else 0)
        config[s] = config.get(s, 0) + 1
    extra = stream.below(max_particles - len(config) + 1) if max_particles > len(config) else 0
    sites = sorted(config)
    for _ in range(extra):
        s = sites[stream.below(len(sites))]
        config[s] += 1
    return config


def cmd_abelian_check(args) -> int:
    spec = _spec(args)
    if not spec.layered:
        raise ConfigError(f"{spec.label()} is not uniformly layered; stabilization may not terminate")
    if args.trials < 0 or args.pairs < 0 or args.max_particles < 1 or args.max_sites < 1:
        raise ConfigError("trial counts must be nonnegative and limits positive")
    stream = RandomStream(args.seed)
    failures = 0
    for trial in range(args.trials):
        config = random_config(stream, args.max_particles, args.max_sites)
        stacks = CardStacks(stream.next_u64(), spec)
        results = [abelian_run(config, stacks, s, random_seed=trial) for s in SCHEDULERS]
        ok = all(r == results[0] for r in results[1:])
        failures += not ok
        print(f"schedulers trial={trial} particles={sum(config.values())} "
              f"moves={sum(results[0].odometer.values())} {'agree' if ok else 'DISAGREE'}")
    contained = 0
    for pair in range(args.pairs):
        ys = random_config(stream, args.max_particles, args.max_sites)
        xs = {s: stream.below(c + 1) for s, c in ys.items()}
        stacks = CardStacks(stream.next_u64(), spec)
        _, _, ok = monotone_couple(xs, ys, stacks)
        contained += ok
        failures += not ok
    if args.pairs:
        print(f"monotonicity pairs={args.pairs} contained={contained}")
    return 0 if failures == 0 else 1


def cmd_hitprob(args) -> int:
    if not 0 <= args.p < 1:
        raise ConfigError("p must lie in [0,1)")
    if not 0 < args.l < args.n:
        raise ConfigError("need 0 < l < n")
    if args.walks < 1:
        raise ConfigError("walks must be positive")
    spec = KernelSpec.mixture(args.p)
    exact = hit_origin_before_layer_prob(args.p, args.l, args.n)
    stream = RandomStream(args.seed)
    rule = FirstOf(HitSite(ORIGIN), HitLayer(args.n))
    hits = 0
    for _ in range(args.walks):
        start = layer_site(args.l, stream.below(4 * args.l))
        out = walk_until(spec, start, rule, stream)
        hits += out.stop_site == ORIGIN
    est = hits / args.walks
    sigma = math.sqrt(max(exact * (1 - exact), 1e-300) / args.walks)
    row = {"p": str(args.p), "l": args.l, "n": args.n, "closed_form": f"{exact:.9f}",
           "monte_carlo": f"{est:.9f}", "walks": args.walks, "sigma": f"{sigma:.9f}",
           "diff_sigma": f"{(est - exact) / sigma:.4f}"}
    _write_rows([row], list(row), None)
    return 0


COMMANDS = {
    "grow": cmd_grow,
    "validate": cmd_validate,
    "fluct": cmd_fluct,
    "axis": cmd_axis,
    "abelian-check": cmd_abelian_check,
    "hitprob": cmd_hitprob,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_expand_config(argv))
        return COMMANDS[args.command](args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except ConfigError as exc:
        print(f"idla: error: {exc}", file=sys.stderr)
        return 2
    except (StepCapExceeded, BoundingRadiusExceeded, MoveBudgetExceeded, OverflowError) as exc:
        print(f"idla: simulation error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"idla: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
