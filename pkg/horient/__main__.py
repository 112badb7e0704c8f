from __future__ import annotations

from horient.cli import main


raise SystemExit(main())
