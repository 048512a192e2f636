"""Standalone report renderer over one or more run directories."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .figures import render_run_report


@click.command()
@click.option("--run", "run_dirs", required=True, multiple=True, type=click.Path())
@click.option("--out", type=click.Path(), default=None)
def main(run_dirs, out) -> None:
    """Render triptych, history and landscape figures from run artifacts."""
    try:
        outputs = render_run_report([Path(r) for r in run_dirs], Path(out) if out else None)
    except FileNotFoundError as exc:
        click.echo(f"missing artifact: {exc}", err=True)
        sys.exit(2)
    except (KeyError, ValueError) as exc:
        click.echo(f"malformed artifact: {exc}", err=True)
        sys.exit(2)
    for f in outputs:
        click.echo(str(f))


if __name__ == "__main__":
    main()
