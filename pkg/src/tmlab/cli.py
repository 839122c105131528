"""Command-line front end: ``run`` scenarios, ``check`` histories, ``analyze`` traces."""
from __future__ import annotations

import sys
from pathlib import Path
from typing import Optional

import click

from . import harness
from .analysis import check_strict_dap, check_weak_dap, invisible_reads_violations, pattern_report
from .core import TMError, TraceParseError, format_history, format_trace, parse_history, parse_trace
from .serializability import DEFAULT_MAX_TXNS, check_strict_serializability
from .tms import TMS

EXIT_OK, EXIT_USAGE, EXIT_MISMATCH = 0, 1, 2
EXIT_NOT_SERIALIZABLE, EXIT_BOUND = 3, 4
VERDICT_EXIT = {"serializable": EXIT_OK, "not-serializable": EXIT_NOT_SERIALIZABLE,
                "bound-exceeded": EXIT_BOUND}


def _emit(text: str, report: Optional[str]) -> None:
    click.echo(text, nl=False)
    if report:
        Path(report).write_text(text)


def artifact_paths(trace_out: str, label: str, n_runs: int) -> tuple[Path, Path, Path]:
    """Trace, annotation sidecar and history paths for one run of a scenario."""
    p = Path(trace_out)
    if n_runs > 1:
        p = p.with_name(f"{p.stem}.{label}{p.suffix}")
    return p, p.with_name(p.name + ".ann"), p.with_name(p.name + ".history")


def write_artifacts(rep: harness.Report, trace_out: str) -> list[Path]:
    written = []
    for label, run in rep.runs:
        tpath, apath, hpath = artifact_paths(trace_out, label, len(rep.runs))
        tpath.write_text(format_trace(run.execution))
        apath.write_text(harness.format_annotations(run))
        hpath.write_text(format_history(run.execution.history()))
        written += [tpath, apath, hpath]
    return written


def run_scenario(tm: str, scenario: str, phases: int = 3, objects: int = 2, reads: int = 4,
                 split: Optional[int] = None, rounds: int = 1) -> harness.Report:
    if scenario == "intro":
        return harness.scenario_intro(tm, rounds)
    if scenario == "theorem1":
        return harness.scenario_theorem1(tm, phases, objects)
    if scenario == "theorem2":
        return harness.scenario_theorem2(tm)
    if scenario == "theorem3":
        return harness.scenario_theorem3(tm, reads, None if split is None else [split])
    if scenario == "lemma1":
        return harness.scenario_lemma1(tm)
    raise click.UsageError(f"unknown scenario {scenario}")


@click.group()
def cli() -> None:
    """Drive transactional memory scenarios and check their histories."""


@cli.command()
@click.option("--tm", "tm", type=click.Choice(sorted(TMS)), default="mv-invisible", show_default=True)
@click.option("--scenario", type=click.Choice(harness.SCENARIOS), required=True)
@click.option("--phases", type=click.IntRange(min=1), default=3, show_default=True,
              help="Number of phases c (theorem1).")
@click.option("--objects", type=click.IntRange(min=1), default=2, show_default=True,
              help="Number of t-objects L (theorem1).")
@click.option("--reads", type=click.IntRange(min=2), default=4, show_default=True,
              help="Read-set size m (theorem3).")
@click.option("--split", type=click.IntRange(min=1), default=None,
              help="Single split index j (theorem3); default sweeps 1..m-1.")
@click.option("--rounds", type=click.IntRange(min=1), default=1, show_default=True,
              help="Repetitions of the intro schedule.")
@click.option("--trace-out", type=click.Path(dir_okay=False), default=None,
              help="Write trace, annotation sidecar and history here.")
@click.option("--report", type=click.Path(dir_okay=False), default=None)
def run(tm, scenario, phases, objects, reads, split, rounds, trace_out, report) -> int:
    """Run a scenario; exit 0 iff every expectation holds, 2 otherwise."""
    if split is not None and split >= reads:
        raise click.UsageError(f"--split must be in 1..{reads - 1}")
    rep = run_scenario(tm, scenario, phases, objects, reads, split, rounds)
    if trace_out:
        write_artifacts(rep, trace_out)
    _emit(rep.text(), report)
    return EXIT_OK if rep.ok else EXIT_MISMATCH


@cli.command()
@click.option("--history", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--bound", type=click.IntRange(min=1), default=DEFAULT_MAX_TXNS, show_default=True,
              help="Largest transaction count the checker will search.")
@click.option("--report", type=click.Path(dir_okay=False), default=None)
def check(history, bound, report) -> int:
    """Check a history file for strict serializability (exit 0/3/4)."""
    try:
        H = parse_history(Path(history).read_text())
    except TraceParseError as exc:
        click.echo(f"error: {history}: {exc}", err=True)
        return EXIT_USAGE
    verdict = check_strict_serializability(H, max_txns=bound)
    _emit(verdict.report(), report)
    return VERDICT_EXIT[verdict.outcome]


@cli.command()
@click.option("--trace", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--report", type=click.Path(dir_okay=False), default=None)
def analyze(trace, report) -> int:
    """Report RAW/AWAR patterns, visible reads and DAP violations of a trace."""
    try:
        E = parse_trace(Path(trace).read_text())
    except TraceParseError as exc:
        click.echo(f"error: {trace}: {exc}", err=True)
        return EXIT_USAGE
    lines = pattern_report(E).lines()
    lines += [f"INVIS-VIOLATION {k} {i}" for k, i in invisible_reads_violations(E)]
    sdap = check_strict_dap(E)
    lines += [v.line() for v in sdap]
    lines.append(f"SDAP-COUNT {len(sdap)}")
    sidecar = Path(trace + ".ann")
    if sidecar.exists():
        try:
            poised, _ = harness.parse_annotations(sidecar.read_text())
        except TMError as exc:
            click.echo(f"error: {sidecar}: {exc}", err=True)
            return EXIT_USAGE
        wdap = check_weak_dap(E, poised)
        lines += [v.line() for v in wdap]
        lines.append(f"WDAP-COUNT {len(wdap)}")
    _emit("\n".join(lines) + "\n", report)
    return EXIT_OK


def main(argv=None) -> int:
    try:
        code = cli.main(args=argv, prog_name="tmlab", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
