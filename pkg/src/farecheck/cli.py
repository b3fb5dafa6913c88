"""Command-line pipeline: synth -> analyze -> train -> generate -> evaluate, plus simulate.

Exit codes: 0 on success, 1 on domain errors (the error class name is printed
on stderr), 2 on usage errors.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import click
import numpy as np

from . import evaluate as ev
from .attack import (
    AttackScenario,
    fit_markov,
    forecast_controls,
    inspection_stats,
    min_inspection_path,
    predictability,
    selective_purchase,
)
from .errors import FarecheckError, InsufficientData
from .ingest import (
    parse_network,
    parse_ridership,
    parse_sightings,
    read_traces,
    write_network,
    write_ridership,
    write_sightings,
    write_traces,
)
from .network import DAY_TYPES, TimeSlot, TimeVaryingNetwork
from .synth import DEFAULT_SIGHTINGS_PER_DAY, SynthSpec, synth_city
from .tracegen import (
    Discriminator,
    GeneratorPolicy,
    TrainingConfig,
    derive_training_sequences,
    generate_periods,
    load_model,
    make_target,
    pretrain_policy,
    save_model,
    train_gan,
)
from .tracegen.gan import config_dict, heldout_accuracy

EXISTING = click.Path(exists=True, dir_okay=False, path_type=Path)
OUT_FILE = click.Path(dir_okay=False, path_type=Path)
OUT_DIR = click.Path(file_okay=False, path_type=Path)
POSITIVE = click.FloatRange(min=0, min_open=True)
NON_NEGATIVE = click.FloatRange(min=0)


class _Group(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except FarecheckError as exc:
            click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
            ctx.exit(1)


def _read(path: Path, parser):
    with path.open(newline="", encoding="utf-8") as fh:
        return parser(fh)


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _tvn(network: Path, ridership: Path) -> TimeVaryingNetwork:
    return TimeVaryingNetwork(_read(network, parse_network), _read(ridership, parse_ridership))


@click.group(cls=_Group)
@click.version_option(package_name="farecheck")
def main():
    """Fare-inspection analysis and randomized control-schedule generation."""


@main.command()
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--stations", type=click.IntRange(min=4), default=20, show_default=True)
@click.option("--routes", type=click.IntRange(min=1), default=5, show_default=True)
@click.option("--days", type=click.IntRange(min=1), default=1460, show_default=True)
@click.option("--concentration", type=click.FloatRange(min=1.0), default=8.0, show_default=True,
              help="Daily inspection weight of a hotspot relative to a rota station.")
@click.option("--rate", type=POSITIVE, default=DEFAULT_SIGHTINGS_PER_DAY, show_default=True,
              help="Expected sightings per day.")
@click.option("--out", type=OUT_DIR, default=Path("."), show_default=True)
def synth(seed, stations, routes, days, concentration, rate, out):
    """Write a synthetic city: network.json, ridership.csv, sightings.csv."""
    city = synth_city(SynthSpec(seed=seed, n_stations=stations, n_routes=routes, days=days,
                                concentration=concentration, sightings_per_day=rate))
    out.mkdir(parents=True, exist_ok=True)
    with (out / "network.json").open("w", encoding="utf-8") as fh:
        write_network(city.network, fh)
    with (out / "ridership.csv").open("w", newline="", encoding="utf-8") as fh:
        write_ridership(city.ridership, fh)
    with (out / "sightings.csv").open("w", newline="", encoding="utf-8") as fh:
        write_sightings(city.sightings, fh)
    click.echo(f"{len(city.network)} stations, {len(city.network.routes)} routes, "
               f"{len(city.sightings)} sightings -> {out}")


@main.command()
@click.option("--network", type=EXISTING, required=True)
@click.option("--sightings", type=EXISTING, required=True)
@click.option("--order", type=click.IntRange(min=0), default=1, show_default=True)
@click.option("--out", type=OUT_DIR, default=Path("analysis"), show_default=True)
def analyze(network, sightings, order, out):
    """Inspection statistics and predictability of a sighting log."""
    net = _read(network, parse_network)
    log = _read(sightings, parse_sightings)
    stats = inspection_stats(log, net)
    report = stats.to_json()
    report["zone_share"] = stats.zone_share(net)
    report["hotspots"] = list(ev.hotspots(stats))
    report["n_sightings"] = len(log)
    report["days_observed"] = stats.days_observed
    train, test = log.split_days(ev.SPLIT)
    try:
        model = fit_markov(train, order)
        p = predictability(model, test)
        report["predictability"] = {"order": order, "accuracy": p.accuracy,
                                    "entropy_bits": p.entropy_bits, "n_transitions": p.n_transitions}
    except InsufficientData as exc:
        report["predictability"] = {"order": order, "error": str(exc)}
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "analysis.json", report)
    _write_csv(out / "station_share.csv", ["station_id", "share"],
               [(s, repr(float(v))) for s, v in zip(stats.station_ids, stats.station_share)])
    _write_csv(out / "heatmap.csv", ["station_id", *range(24)],
               [(s, *map(int, stats.heatmap[i])) for i, s in enumerate(stats.station_ids)])
    _write_csv(out / "zone_share.csv", ["zone", "share"],
               [(z, repr(v)) for z, v in report["zone_share"].items()])
    click.echo(f"analysis of {len(log)} sightings -> {out}")


@main.command()
@click.option("--network", type=EXISTING, required=True)
@click.option("--ridership", type=EXISTING, required=True)
@click.option("--budget", type=POSITIVE, default=240.0, show_default=True,
              help="Minutes available to one controller per shift.")
@click.option("--lambda", "lam", type=click.FloatRange(0, 1), default=0.2, show_default=True,
              help="Randomness: weight of the uniform component of the target.")
@click.option("--sigma", type=NON_NEGATIVE, default=1.0, show_default=True,
              help="Hour smoothing width of the target.")
@click.option("--pretrain-epochs", type=click.IntRange(min=0), default=200, show_default=True)
@click.option("--gan-epochs", type=click.IntRange(min=0), default=300, show_default=True)
@click.option("--batch-size", type=click.IntRange(min=1), default=16, show_default=True)
@click.option("--rollouts", type=click.IntRange(min=1), default=8, show_default=True)
@click.option("--learning-rate", type=POSITIVE, default=0.01, show_default=True)
@click.option("--disc-learning-rate", type=POSITIVE, default=0.1, show_default=True)
@click.option("--n-real", type=click.IntRange(min=1), default=200, show_default=True)
@click.option("--order", type=click.IntRange(min=0), default=1, show_default=True)
@click.option("--temperature", type=POSITIVE, default=1.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=OUT_FILE, default=Path("model.json"), show_default=True)
def train(network, ridership, budget, lam, sigma, pretrain_epochs, gan_epochs, batch_size, rollouts,
          learning_rate, disc_learning_rate, n_real, order, temperature, seed, out):
    """Pretrain and adversarially train the schedule generator."""
    tvn = _tvn(network, ridership)
    try:
        config = TrainingConfig(pretrain_epochs=pretrain_epochs, gan_epochs=gan_epochs,
                                batch_size=batch_size, rollouts=rollouts, learning_rate=learning_rate,
                                disc_learning_rate=disc_learning_rate, n_real=n_real, order=order,
                                temperature=temperature, seed=seed)
        policy = GeneratorPolicy(tvn.network.ids, order, temperature)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from None
    rng = np.random.default_rng(seed)
    target = make_target(tvn, lam, sigma)
    real = derive_training_sequences(tvn, budget, n_real, target, rng)
    nll: list[float] = []
    policy = pretrain_policy(policy, real, config, nll)
    policy, disc, history = train_gan(policy, Discriminator.zeros(len(tvn.network.ids)), real, tvn,
                                      budget, config, rng)
    held_real = derive_training_sequences(tvn, budget, n_real, target, rng)
    held_fake = policy.sample_traces(tvn, budget, rng, [t.day_type for t in held_real])
    meta = {
        "budget": budget, "lambda": lam, "sigma": sigma, "config": config_dict(config),
        "nll_start": nll[0], "nll_end": nll[-1],
        "heldout_disc_accuracy": heldout_accuracy(disc, held_real, held_fake, tvn),
        "history": [[h.epoch, h.disc_accuracy, h.mean_reward, h.disc_loss] for h in history],
    }
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8") as fh:
        save_model(fh, policy, disc, tvn, meta)
    click.echo(f"NLL {nll[0]:.4f} -> {nll[-1]:.4f}, held-out discriminator accuracy "
               f"{meta['heldout_disc_accuracy']:.3f} -> {out}")


@main.command()
@click.option("--model", type=EXISTING, required=True)
@click.option("--n", "n_controllers", type=click.IntRange(min=0), default=10, show_default=True,
              help="Controllers (traces) per period.")
@click.option("--periods", type=click.IntRange(min=1), default=7, show_default=True,
              help="Consecutive days to schedule, starting on a Monday.")
@click.option("--budget", type=POSITIVE, default=None, help="Shift budget; defaults to the training budget.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=OUT_FILE, default=Path("traces.jsonl"), show_default=True)
def generate(model, n_controllers, periods, budget, seed, out):
    """Sample randomized control schedules from a trained model."""
    policy, _, tvn, meta = _read(model, load_model)
    budget = budget if budget is not None else float(meta.get("budget", 240.0))
    schedule = generate_periods(policy, tvn, budget, n_controllers, periods, np.random.default_rng(seed))
    traces = [t for day in schedule for t in day]
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8") as fh:
        write_traces(traces, fh)
    click.echo(f"{len(traces)} traces over {periods} periods -> {out}")


@main.command()
@click.option("--network", type=EXISTING, required=True)
@click.option("--ridership", type=EXISTING, required=True)
@click.option("--sightings", type=EXISTING, required=True, help="Historical log (the 'before' side).")
@click.option("--traces", type=EXISTING, required=True, help="Generated schedule (the 'after' side).")
@click.option("--lambda", "lam", type=click.FloatRange(0, 1), default=0.2, show_default=True)
@click.option("--sigma", type=NON_NEGATIVE, default=1.0, show_default=True)
@click.option("--fine", type=NON_NEGATIVE, default=100.0, show_default=True)
@click.option("--ticket", type=NON_NEGATIVE, default=3.0, show_default=True)
@click.option("--order", type=click.IntRange(min=0), default=1, show_default=True)
@click.option("--seed", type=int, default=ev.SIMILARITY_SEED, show_default=True,
              help="Seed of the reference sample drawn from the target.")
@click.option("--out", type=OUT_FILE, default=Path("evaluation.json"), show_default=True)
def evaluate(network, ridership, sightings, traces, lam, sigma, fine, ticket, order, seed, out):
    """Compare a generated schedule with the historical one."""
    tvn = _tvn(network, ridership)
    log = _read(sightings, parse_sightings)
    schedule = _read(traces, read_traces)
    report = ev.evaluate_schedule(tvn.network, log, schedule, make_target(tvn, lam, sigma), fine, ticket,
                                  order, ridership_target=make_target(tvn, 0.0, sigma), seed=seed)
    report.extra["scenario"] = {"fine": fine, "ticket": ticket, "lambda": lam, "sigma": sigma,
                                "order": order}
    _write_json(out, report.to_json())
    click.echo(f"KS D={report.ks.d_stat:.4f}, dispersion={report.dispersion_rmse:.3f}, "
               f"payoff delta={report.payoff_delta:.3f}, predictability delta="
               f"{report.predictability_delta:.3f} -> {out}")


@main.command()
@click.option("--network", type=EXISTING, required=True)
@click.option("--sightings", type=EXISTING, required=True)
@click.option("--traces", type=EXISTING, default=None,
              help="Estimate inspection odds from this schedule instead of the log.")
@click.option("--origin", required=True)
@click.option("--dest", required=True)
@click.option("--day-type", type=click.Choice(DAY_TYPES), default="WD", show_default=True)
@click.option("--hour", type=click.IntRange(0, 23), default=8, show_default=True)
@click.option("--fine", type=NON_NEGATIVE, default=100.0, show_default=True)
@click.option("--ticket", type=NON_NEGATIVE, default=3.0, show_default=True)
@click.option("--order", type=click.IntRange(min=0), default=1, show_default=True)
@click.option("--horizon", type=click.IntRange(min=0), default=3, show_default=True)
@click.option("--out", type=OUT_FILE, default=Path("simulation.json"), show_default=True)
def simulate(network, sightings, traces, origin, dest, day_type, hour, fine, ticket, order, horizon, out):
    """Play the free-rider: re-route, decide on a ticket, forecast controls."""
    net = _read(network, parse_network)
    log = _read(sightings, parse_sightings)
    if traces is None:
        stats = inspection_stats(log, net)
        seqs = log.daily_sequences()
    else:
        schedule = _read(traces, read_traces)
        stats = ev.schedule_stats(schedule, net.ids)
        seqs = [list(t.stations) for t in schedule]
    slot = TimeSlot(day_type, hour)
    path = min_inspection_path(net, stats, origin, dest, slot)
    decision = selective_purchase(AttackScenario(path.risk, fine, ticket))
    model = fit_markov(seqs, order)
    recent = next((s[-order:] if order else [] for s in reversed(seqs) if len(s) >= order), [])
    forecast = forecast_controls(model, recent, horizon)
    report = {
        "source": "schedule" if traces is not None else "log",
        "slot": str(slot),
        "path": list(path.stations),
        "risk": path.risk,
        "travel_min": path.travel_min,
        "decision": decision.decision,
        "evasion_payoff": decision.evasion_payoff,
        "forecast": {"recent": list(recent), "next": list(forecast.stations),
                     "unseen_history": forecast.unseen_history},
    }
    _write_json(out, report)
    click.echo(f"{decision.decision} (risk {path.risk:.3f}) via {' -> '.join(path.stations) or origin}")
