from __future__ import annotations

from pathlib import Path
import os
import sys


def project_root() -> Path:
    # cacc_app/paths.py -> <root>/cacc_app/paths.py
    return Path(__file__).resolve().parent.parent


def experiments_dir() -> Path:
    """
    Папка с конфигурациями экспериментов (two_predecessor.json, three_predecessor.json) и результатами.

    Путь берётся из окружения, по умолчанию лежит в репозитории рядом с main_cli.py:
      CACC_DATA_DIR=PlatoonExperiments
    - может быть абсолютным путём
    - или относительным (тогда относительно project_root())
    """
    cfg = (os.environ.get("CACC_DATA_DIR") or "").strip()
    if cfg:
        p = Path(cfg)
        return (project_root() / p).resolve() if not p.is_absolute() else p
    return app_base_dir() / "PlatoonExperiments"


def default_config_path() -> Path:
    return experiments_dir() / "two_predecessor.json"


def runs_dir() -> Path:
    """Куда пишутся результаты, если --out не задан."""
    return experiments_dir() / "runs"


def app_base_dir() -> Path:
    """
    Папка, где лежит приложение.
    - В dev: корень проекта.
    - В собранном pyinstaller-exe: папка с exe.
    """
    if getattr(sys, "frozen", False):
        return Path(sys.executable).resolve().parent
    return project_root()
