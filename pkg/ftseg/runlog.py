"""Optional JSONL run log."""

import json
import threading
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import anyio

from .config import FTSegSettings


class RunLog:
    """Appends one JSON object per event to `<log_dir>/runs-<UTC date>.jsonl`."""

    def __init__(self, settings: FTSegSettings | None = None):
        settings = settings or FTSegSettings()
        self._enabled: bool = bool(settings.log_runs)
        self._log_dir: Path = Path(settings.log_dir).expanduser()
        self._lock = threading.Lock()

    @property
    def enabled(self) -> bool:
        return self._enabled

    def _log_file(self) -> Path:
        day = datetime.now(timezone.utc).strftime("%Y-%m-%d")
        return self._log_dir / f"runs-{day}.jsonl"

    def _build_entry(self, event: str, payload: dict[str, Any]) -> dict[str, Any]:
        return {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "event": event,
            **payload,
        }

    def append(self, event: str, **payload: Any) -> None:
        if not self._enabled:
            return
        line = json.dumps(self._build_entry(event, payload), ensure_ascii=False, default=str)
        try:
            self._log_dir.mkdir(parents=True, exist_ok=True)
            with self._lock, self._log_file().open("a", encoding="utf-8") as f:
                f.write(line + "\n")
        except Exception:
            # Never let logging failures break a run
            pass

    async def append_async(self, event: str, **payload: Any) -> None:
        if not self._enabled:
            return
        line = json.dumps(self._build_entry(event, payload), ensure_ascii=False, default=str)
        try:
            await anyio.Path(self._log_dir).mkdir(parents=True, exist_ok=True)
            async with await anyio.open_file(str(self._log_file()), "a", encoding="utf-8") as f:
                await f.write(line + "\n")
        except Exception:
            pass
