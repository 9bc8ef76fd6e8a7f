"""Command-line entry points for runs, sweeps, and benchmarks."""

import os

import click

from . import backends
from .config import load_config
from .harness import (
    PHASE_KEYS,
    run_simulation,
    strong_scaling_sweep,
    weak_scaling_sweep,
    write_scaling_csv,
)
from .layout_lab import LAYOUT_SELECTORS, bench_backends, bench_layouts, write_bench_csv


def _load(config_path, seed, workers, layout, out):
    cfg = load_config(config_path)
    if seed is not None:
        cfg.seed = seed
    if workers is not None:
        cfg.worker_count = workers
    if layout is not None:
        cfg.layout = layout
    if out is not None:
        cfg.out_dir = out
    cfg.validate()
    return cfg


def _parse_worker_list(value):
    try:
        counts = [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter("expected N or N,N,...")
    if not counts or any(w < 1 for w in counts):
        raise click.BadParameter("worker counts must be positive")
    return counts


@click.group()
def main():
    """Electrostatic particle-in-cell benchmark engine."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--workers", type=int, default=None, help="Override worker count.")
@click.option("--layout", type=click.Choice(LAYOUT_SELECTORS), default=None)
@click.option("--out", type=click.Path(), default=None, help="Report directory.")
def run(config_path, seed, workers, layout, out):
    """Run the configured scenario and print per-phase timings."""
    cfg = _load(config_path, seed, workers, layout, out)
    metrics = run_simulation(cfg)
    click.echo(
        f"run {metrics.config_hash}: workers={metrics.worker_count} "
        f"layout={metrics.layout} backend={metrics.backend}"
    )
    for key in PHASE_KEYS + ("total",):
        click.echo(f"  {key:<8} {metrics.phase_seconds[key]:.6f} s")
    last = metrics.diagnostics[-1]
    totals = ", ".join(
        f"{k[len('total_'):]}={v}" for k, v in last.items() if k.startswith("total_")
    )
    click.echo(f"  particles: {totals}")
    t = metrics.tally
    click.echo(
        f"  collisions: elastic={t.elastic} excitation={t.excitation} "
        f"ionization={t.ionization} suppressed={t.suppressed}"
    )
    if cfg.out_dir:
        click.echo(f"  reports in {cfg.out_dir}")


@main.command("strong-scale")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=None)
@click.option("--workers", default="1,2,4", help="Comma-separated counts.")
@click.option("--layout", type=click.Choice(LAYOUT_SELECTORS), default=None)
@click.option("--out", type=click.Path(), default=None)
def strong_scale(config_path, seed, workers, layout, out):
    """Fixed problem size, varying worker count."""
    cfg = _load(config_path, seed, None, layout, None)
    report = strong_scaling_sweep(cfg, _parse_worker_list(workers))
    _emit_scaling(report, out)


@main.command("weak-scale")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=None)
@click.option("--workers", default="1,2,4", help="Comma-separated counts.")
@click.option("--out", type=click.Path(), default=None)
def weak_scale(config_path, seed, workers, out):
    """Problem size scaled with worker count."""
    cfg = _load(config_path, seed, None, None, None)
    report = weak_scaling_sweep(cfg, _parse_worker_list(workers))
    _emit_scaling(report, out)


def _emit_scaling(report, out):
    click.echo(f"{'workers':>8} {'t_total':>12} {'t_mover':>12} "
               f"{'speedup':>9} {'pe%':>8}")
    for r in report.rows:
        click.echo(
            f"{r['workers']:>8} {r['t_total']:>12.6f} {r['t_mover']:>12.6f} "
            f"{r['speedup']:>9.3f} {r['pe_percent']:>8.2f}"
        )
    if out:
        os.makedirs(out, exist_ok=True)
        path = os.path.join(out, "scaling.csv")
        write_scaling_csv(report, path)
        click.echo(f"wrote {path}")


@main.command("bench-layouts")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--reps", type=int, default=5, help="Timed repetitions (>= 3).")
@click.option("--workers", type=int, default=1)
@click.option("--out", type=click.Path(), default=None)
def bench_layouts_cmd(config_path, reps, workers, out):
    """Time the fused mover kernel across particle memory layouts."""
    cfg = _load(config_path, None, None, None, None)
    rows = bench_layouts(cfg, repetitions=reps, workers=workers)
    _emit_bench(rows, out, "layouts.csv")


@main.command("bench-backends")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--reps", type=int, default=5)
@click.option("--out", type=click.Path(), default=None)
def bench_backends_cmd(config_path, reps, out):
    """Time the fused mover kernel for the compiled and pure backends."""
    cfg = _load(config_path, None, None, None, None)
    rows = bench_backends(cfg, repetitions=reps)
    _emit_bench(rows, out, "backends.csv")


def _emit_bench(rows, out, filename):
    click.echo(f"{'variant':>18} {'scenario':>14} {'particles':>10} "
               f"{'ns/particle':>12} {'iqr':>8}")
    for r in rows:
        click.echo(
            f"{r['layout']:>18} {r['scenario']:>14} {r['ppc_total']:>10} "
            f"{r['ns_per_particle_median']:>12.2f} "
            f"{r['ns_per_particle_iqr']:>8.2f}"
        )
    if out:
        os.makedirs(out, exist_ok=True)
        path = os.path.join(out, filename)
        write_bench_csv(rows, path)
        click.echo(f"wrote {path}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def validate(config_path):
    """Parse and validate a config; print its hash."""
    cfg = load_config(config_path)
    cfg.validate()
    click.echo(f"ok {cfg.config_hash()} (backend={backends.BACKEND})")


if __name__ == "__main__":
    main()
