#!/usr/bin/env python3
"""Bump the tskprune version in pyproject.toml and the package __init__."""

import re
from enum import Enum
from pathlib import Path
from typing import Annotated

import typer

PROJECT_ROOT = Path(__file__).parent.parent
PYPROJECT = PROJECT_ROOT / "pyproject.toml"
INIT_PY = PROJECT_ROOT / "src" / "tskprune" / "__init__.py"

PYPROJECT_PATTERN = re.compile(r'^version = "(\d+)\.(\d+)\.(\d+)"', re.MULTILINE)
INIT_PATTERN = re.compile(r'^__version__ = "(\d+)\.(\d+)\.(\d+)"', re.MULTILINE)


class Part(str, Enum):
    MAJOR = "major"
    MINOR = "minor"
    PATCH = "patch"


def read_version(path: Path, pattern: re.Pattern[str]) -> tuple[int, int, int]:
    match = pattern.search(path.read_text(encoding="utf-8"))
    if match is None:
        raise ValueError(f"No version string found in {path}")
    major, minor, patch = (int(group) for group in match.groups())
    return major, minor, patch


def bumped(version: tuple[int, int, int], part: Part) -> tuple[int, int, int]:
    """0.1.3 -> 0.1.4 (patch), 0.2.0 (minor) or 1.0.0 (major)."""
    major, minor, patch = version
    if part == Part.MAJOR:
        return major + 1, 0, 0
    if part == Part.MINOR:
        return major, minor + 1, 0
    return major, minor, patch + 1


def write_version(path: Path, pattern: re.Pattern[str], prefix: str, version: str) -> None:
    content = path.read_text(encoding="utf-8")
    path.write_text(pattern.sub(f'{prefix} = "{version}"', content, count=1), encoding="utf-8")


def main(
    part: Annotated[Part, typer.Argument(help="Which component to increment.")] = Part.PATCH,
) -> None:
    """Increment the version in both places it is declared."""
    try:
        current = read_version(PYPROJECT, PYPROJECT_PATTERN)
        declared = read_version(INIT_PY, INIT_PATTERN)
        if current != declared:
            raise ValueError(
                f"pyproject.toml says {'.'.join(map(str, current))} but __init__.py says "
                f"{'.'.join(map(str, declared))}"
            )
        new_version = ".".join(map(str, bumped(current, part)))
        write_version(PYPROJECT, PYPROJECT_PATTERN, "version", new_version)
        write_version(INIT_PY, INIT_PATTERN, "__version__", new_version)
    except (OSError, ValueError) as e:
        typer.echo(f"❌ Error: {e}", err=True)
        raise typer.Exit(code=1) from e
    typer.echo(f"✅ Version bumped: {'.'.join(map(str, current))} -> {new_version}")


if __name__ == "__main__":
    typer.run(main)
