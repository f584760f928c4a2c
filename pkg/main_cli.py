from __future__ import annotations

from cacc_app.cli import main


if __name__ == "__main__":
    raise SystemExit(main())
