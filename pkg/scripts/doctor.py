from __future__ import annotations

import importlib
import platform
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List

REQUIRED_MODULES: List[str] = [
    "numpy",
    "scipy",
    "yaml",
    "pydantic",
    "structlog",
    "dotenv",
    "prometheus_client",
    "redis",
    "rq",
]


@dataclass
class ModuleStatus:
    name: str
    installed: bool
    detail: str | None = None


def inspect_modules(modules: Iterable[str] = REQUIRED_MODULES) -> List[ModuleStatus]:
    statuses: List[ModuleStatus] = []
    for name in modules:
        try:
            importlib.import_module(name)
        except ModuleNotFoundError as exc:  # pragma: no cover - depends on user env
            statuses.append(ModuleStatus(name=name, installed=False, detail=str(exc)))
        else:
            statuses.append(ModuleStatus(name=name, installed=True))
    return statuses


def inspect_assets() -> List[str]:
    """Problems with the configured settings or the bundled models and scenarios."""

    try:
        from app.config import get_settings

        settings = get_settings()
    except Exception as exc:  # pragma: no cover - depends on user env
        return [f"settings: {exc}"]
    problems: List[str] = []
    for label, folder in (("models", settings.models_dir), ("scenarios", settings.scenarios_dir)):
        if not Path(folder).is_dir():
            problems.append(f"{label}: directory {folder} is missing (check LOCOMANIP_ASSETS_DIR)")
        elif not any(Path(folder).glob("*.yaml")):
            problems.append(f"{label}: no .yaml files in {folder}")
    return problems


def print_report(statuses: Iterable[ModuleStatus], problems: Iterable[str]) -> int:
    statuses = list(statuses)
    problems = list(problems)
    missing = [status for status in statuses if not status.installed]
    print("Python:", sys.version)
    print("Platform:", platform.platform())
    print()
    for status in statuses:
        if status.installed:
            print(f"  ok   {status.name}")
        else:
            print(f"  miss {status.name}: {status.detail}")
    print()
    for problem in problems:
        print(f"  {problem}")

    if not missing and not problems:
        print("All set. Try a bundled scenario:")
        print("  locomanip list-scenarios")
        print("  locomanip run --scenario walk_in_place")
        return 0

    if missing:
        print()
        print("Python dependencies are missing. Activate your virtual environment and install them:")
        print("  python -m venv .venv")
        if platform.system() == "Windows":
            print("  .\\.venv\\Scripts\\activate")
        else:
            print("  source .venv/bin/activate")
        print("  python -m pip install -r requirements.txt")
    return 1


def main() -> None:
    statuses = inspect_modules()
    problems = inspect_assets() if not any(not status.installed for status in statuses) else []
    sys.exit(print_report(statuses, problems))


if __name__ == "__main__":  # pragma: no cover - manual invocation
    main()
