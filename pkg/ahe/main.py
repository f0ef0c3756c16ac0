"""
Command-line interface for AHE inpainting
=========================================

Four commands wrap the services:

* ``corrupt``  stamp seeded line scratches (or random pixels) on an image;
* ``inpaint``  reconstruct with ``plain``, ``varcoef-dr`` or ``ahe``;
* ``bench``    corrupt once, reconstruct with several methods, tabulate;
* ``demo``     write the panels of one demonstration experiment.

Parameters are merged as preset < ``--config`` file < flags. Exit codes:
0 success, 1 usage error, 2 I/O error, 3 numerical failure.
"""

from __future__ import annotations

import shutil
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, Optional

import click
import typer
from loguru import logger
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from . import __version__
from .config import load_config_file, load_preset, merge_parameters, preset_names, settings
from .errors import ImageFormatError, InvalidInputError, NumericalError
from .images import read_image, read_mask, write_image, write_mask
from .services.bench import SYNTHETIC_KINDS, CorruptionPattern, CorruptionSpec, corrupt, run_benchmark, synthetic_image
from .services.grid import PeriodicImage, ingest
from .services.pipeline import DEMOS, demo_panels, reconstruct

app = typer.Typer(add_completion=False, help="Averaging and hypoelliptic evolution inpainting.")
console = Console()

EXIT_USAGE, EXIT_IO, EXIT_NUMERICAL = 1, 2, 3


def _configure_logging(level: str) -> None:
    logger.remove()
    logger.add(sys.stderr, level=level.upper(), format="<level>{level: <8}</level> {message}")


@app.callback()
def main_options(
    threads: Optional[int] = typer.Option(None, "--threads", min=1, help="Worker threads (default: all cores)."),
    log_level: Optional[str] = typer.Option(None, "--log-level", help="loguru level, e.g. DEBUG or WARNING."),
) -> None:
    if threads is not None:
        settings.threads = threads
    if log_level is not None:
        settings.log_level = log_level
    _configure_logging(settings.log_level)


@contextmanager
def _exit_codes() -> Iterator[None]:
    try:
        yield
    except NumericalError as e:
        console.print(f"[red]❌ numerical failure:[/red] {e}")
        raise typer.Exit(EXIT_NUMERICAL)
    except ImageFormatError as e:
        console.print(f"[red]❌ I/O error:[/red] {e}")
        raise typer.Exit(EXIT_IO)
    except (InvalidInputError, ValidationError) as e:
        console.print(f"[red]❌ invalid input:[/red] {e}")
        raise typer.Exit(EXIT_USAGE)


def _parameters(preset: Optional[str], config: Optional[Path], flags: Dict[str, Any]) -> Dict[str, Any]:
    return merge_parameters(load_preset(preset), load_config_file(config) if config else {}, flags)


@app.command("corrupt")
def cmd_corrupt(
    input_path: Path = typer.Argument(..., help="Ground-truth image (PGM or PNG)."),
    output_path: Path = typer.Argument(..., help="Corrupted image (.pgm or .png)."),
    mask_path: Path = typer.Option(..., "--mask", help="Mask output, 255 = GOOD, 0 = BAD."),
    fraction: float = typer.Option(0.37, "--fraction", help="Target BAD fraction in [0, 1)."),
    width: int = typer.Option(3, "--width", help="Line width in pixels."),
    pattern: CorruptionPattern = typer.Option(CorruptionPattern.LINES, "--pattern"),
    seed: int = typer.Option(0, "--seed"),
) -> None:
    """Stamp seeded corruption on an image and write it with its mask."""
    with _exit_codes():
        spec = CorruptionSpec(pattern=pattern, line_width=width, target_fraction=fraction, rng_seed=seed)
        truth = PeriodicImage(read_image(input_path))
        f, mask = corrupt(truth, spec)
        if mask.bad_count == 0 and input_path.suffix.lower() == output_path.suffix.lower():
            shutil.copyfile(input_path, output_path)
        else:
            write_image(f, output_path, mirror=False)
        write_mask(mask, mask_path)
        console.print(f"✅ corrupted fraction={mask.bad_fraction:.4f} → {output_path}")


@app.command("inpaint")
def cmd_inpaint(
    input_path: Path = typer.Argument(..., help="Corrupted image."),
    output_path: Path = typer.Argument(..., help="Reconstruction (.pgm gets a .png mirror)."),
    mask_path: Optional[Path] = typer.Option(None, "--mask", help="Mask file; default: zero pixels are BAD."),
    method: Optional[str] = typer.Option(None, "--method", help="plain | varcoef-dr | ahe"),
    preset: Optional[str] = typer.Option(None, "--preset", help="Named parameter set from config/config.yaml."),
    config: Optional[Path] = typer.Option(None, "--config", help="key = value parameter file."),
    emit_intermediates: Optional[Path] = typer.Option(None, "--emit-intermediates", help="Directory for AHE panels."),
    layers: Optional[int] = typer.Option(None, "--layers"),
    final_time: Optional[float] = typer.Option(None, "--final-time"),
    a: Optional[float] = typer.Option(None, "--a"),
    b: Optional[float] = typer.Option(None, "--b"),
    lift: Optional[str] = typer.Option(None, "--lift", help="gradient | trivial (plain only)"),
    a0: Optional[float] = typer.Option(None, "--a0"),
    a1: Optional[float] = typer.Option(None, "--a1"),
    b0: Optional[float] = typer.Option(None, "--b0"),
    b1: Optional[float] = typer.Option(None, "--b1"),
    sigma: Optional[float] = typer.Option(None, "--sigma"),
    iterations: Optional[int] = typer.Option(None, "--iterations"),
    epsilon: Optional[float] = typer.Option(None, "--epsilon"),
    mode: Optional[str] = typer.Option(None, "--mode", help="static | dynamic | none"),
    substeps: Optional[int] = typer.Option(None, "--substeps"),
    cn_steps: Optional[int] = typer.Option(None, "--cn-steps"),
    progress: bool = typer.Option(False, "--progress", help="Show a progress bar over restoration iterations."),
) -> None:
    """Reconstruct the BAD pixels of an image."""
    with _exit_codes():
        flags = {
            "method": method, "layers": layers, "final_time": final_time, "a": a, "b": b, "lift": lift,
            "a0": a0, "a1": a1, "b0": b0, "b1": b1, "sigma": sigma,
            "iterations": iterations, "epsilon": epsilon, "mode": mode,
            "substeps": substeps, "cn_steps": cn_steps, "progress": progress or None,
        }
        params = _parameters(preset, config, flags)
        chosen = str(params.pop("method", "ahe"))
        if chosen not in ("plain", "varcoef-dr", "ahe"):
            raise InvalidInputError(f"unknown method {chosen!r}")
        if emit_intermediates is not None:
            params["emit_intermediates"] = True

        values = read_image(input_path)
        mask = read_mask(mask_path) if mask_path else None
        if mask is not None and mask.good.shape != values.shape:
            raise InvalidInputError(f"mask {mask.good.shape} and image {values.shape} differ in size")
        f, mask = ingest(values, mask)
        if mask.bad_count == 0:
            # nothing to reconstruct: hand the input back untouched
            if input_path.suffix.lower() == output_path.suffix.lower():
                shutil.copyfile(input_path, output_path)
            else:
                write_image(values, output_path, mirror=False)
            console.print(f"✅ no BAD pixels, copied input → {output_path}")
            return

        console.print(f"🔧 {chosen} on {f.size}×{f.size}, {mask.bad_fraction:.1%} BAD")
        out, intermediates = reconstruct(chosen, f, mask, params)
        write_image(out, output_path)
        if emit_intermediates is not None:
            panels = {"corrupted": f, **intermediates, "output": out}
            for i, (name, img) in enumerate(panels.items()):
                write_image(img, emit_intermediates / f"{i}-{name}.pgm")
            console.print(f"📁 {len(panels)} panels → {emit_intermediates}")
        console.print(f"✅ wrote {output_path}")


def _load_truth(input_path: Optional[Path], synthetic: str, size: int, seed: int) -> PeriodicImage:
    if input_path is not None:
        return PeriodicImage(read_image(input_path))
    return synthetic_image(synthetic, size, seed)


@app.command("bench")
def cmd_bench(
    truth_path: Optional[Path] = typer.Argument(None, help="Ground truth; omit to use a synthetic image."),
    synthetic: str = typer.Option("stripes", "--synthetic", help=" | ".join(SYNTHETIC_KINDS)),
    size: int = typer.Option(64, "--size"),
    methods: str = typer.Option("average,median,ahe", "--methods", help="Comma-separated method names."),
    fraction: float = typer.Option(0.85, "--fraction"),
    width: int = typer.Option(3, "--width"),
    pattern: CorruptionPattern = typer.Option(CorruptionPattern.LINES, "--pattern"),
    seed: int = typer.Option(0, "--seed"),
    preset: Optional[str] = typer.Option(None, "--preset"),
    config: Optional[Path] = typer.Option(None, "--config"),
    report: Optional[Path] = typer.Option(None, "--report", help="key=value report (.csv writes a table)."),
) -> None:
    """Compare reconstruction methods on one corrupted image."""
    with _exit_codes():
        truth = _load_truth(truth_path, synthetic, size, seed)
        spec = CorruptionSpec(pattern=pattern, line_width=width, target_fraction=fraction, rng_seed=seed)
        params = _parameters(preset, config, {})
        params.pop("method", None)
        table = run_benchmark(truth, spec, [m.strip() for m in methods.split(",") if m.strip()], params)

        view = Table(title=f"benchmark · {truth.size}×{truth.size} · {fraction:.0%} {pattern.value}")
        for column in table.columns:
            view.add_column(column, justify="left" if column == "method" else "right")
        for row in table.itertuples(index=False):
            view.add_row(row.method, *(f"{v:.6g}" for v in row[1:]))
        console.print(view)

        if report is not None:
            if report.suffix.lower() == ".csv":
                table.to_csv(report, index=False)
            else:
                blocks = ["\n".join(f"{k}={v}" for k, v in row.items()) for row in table.to_dict("records")]
                report.write_text("\n\n".join(blocks) + "\n", encoding="utf-8")
            console.print(f"📄 report → {report}")


@app.command("demo")
def cmd_demo(
    name: str = typer.Argument(..., help=" | ".join(DEMOS)),
    output_dir: Path = typer.Argument(..., help="Directory for the panels."),
    input_path: Optional[Path] = typer.Option(None, "--input", help="Image; default: a synthetic image."),
    mask_path: Optional[Path] = typer.Option(None, "--mask"),
    synthetic: str = typer.Option("rings", "--synthetic"),
    size: int = typer.Option(64, "--size"),
    fraction: Optional[float] = typer.Option(None, "--fraction", help="Corrupt before the demo (mosaic: 0.37)."),
    seed: int = typer.Option(0, "--seed"),
) -> None:
    """Write the panels of a demonstration experiment."""
    with _exit_codes():
        if name not in DEMOS:
            raise InvalidInputError(f"unknown demo {name!r}; choose from {', '.join(DEMOS)}")
        truth = _load_truth(input_path, synthetic, size, seed)
        if mask_path is not None:
            f, mask = ingest(truth.values, read_mask(mask_path))
        else:
            fraction = fraction if fraction is not None else (0.37 if name == "mosaic" else 0.0)
            f, mask = corrupt(truth, CorruptionSpec(target_fraction=fraction, rng_seed=seed))
        panels = demo_panels(name, f, mask)
        for i, (panel, img) in enumerate(panels.items()):
            write_image(img, output_dir / f"{name}-{i}-{panel}.pgm")
        console.print(f"✅ {len(panels)} panels → {output_dir}")


@app.command("presets")
def cmd_presets() -> None:
    """List the named parameter presets."""
    with _exit_codes():
        for name in preset_names():
            console.print(f"• {name}: {load_preset(name)}")


@app.command("version")
def cmd_version() -> None:
    console.print(f"ahe {__version__}")


def main() -> None:
    """Entry point mapping click's own usage errors to exit code 1."""
    try:
        code = app(standalone_mode=False)
    except click.UsageError as e:
        e.show()
        sys.exit(EXIT_USAGE)
    except click.ClickException as e:
        e.show()
        sys.exit(e.exit_code)
    except click.Abort:
        sys.exit(EXIT_USAGE)
    sys.exit(code or 0)


if __name__ == "__main__":
    main()
