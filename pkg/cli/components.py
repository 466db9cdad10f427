"""
Console components for the command-line interface
"""

import logging
import time
from typing import Optional

logger = logging.getLogger(__name__)


class ProgressReporter:
    """
    Logs percentage, status and estimated time remaining for a long task.

    Bound as the ``progress_callback`` of trainers and experiment runners.
    """

    def __init__(self, task: str, step_percent: int = 10, log: Optional[logging.Logger] = None):
        self.task = task
        self.step_percent = max(1, step_percent)
        self.log = log or logger
        self.start_time = None
        self._last_logged = -1

    def __call__(self, progress: float, status: str = "") -> None:
        self.update_progress(progress, status)

    def update_progress(self, progress: float, status: str = "") -> None:
        """
        Record progress and log when another step_percent has passed.

        Args:
            progress: Float between 0.0 and 1.0
            status: Optional status message
        """
        progress = max(0.0, min(1.0, progress))
        if self.start_time is None:
            self.start_time = time.time()

        percentage = int(progress * 100)
        bucket = percentage // self.step_percent
        if bucket == self._last_logged and progress < 1.0:
            return
        self._last_logged = bucket

        eta = ""
        # Only estimate after 5% progress
        if progress > 0.05 and progress < 1.0:
            elapsed = time.time() - self.start_time
            remaining = elapsed / progress - elapsed
            if remaining > 0:
                eta = f" (about {self._format_time(remaining)} remaining)"
        self.log.info("%s: %3d%% %s%s", self.task, percentage, status, eta)

    def complete(self, success: bool = True, message: str = "") -> None:
        """
        Log the final status line.
        """
        if message:
            text = message
        elif success:
            text = "✓ Complete!"
        else:
            text = "✗ Failed"
        elapsed = time.time() - self.start_time if self.start_time else 0.0
        self.log.info("%s: %s in %s", self.task, text, self._format_time(elapsed))

    @staticmethod
    def _format_time(seconds: float) -> str:
        """
        Format seconds into human-readable time string.

        Returns:
            Formatted string (e.g., "2m 30s")
        """
        if seconds < 60:
            return f"{int(seconds)}s"
        elif seconds < 3600:
            mins = int(seconds // 60)
            secs = int(seconds % 60)
            return f"{mins}m {secs}s"
        else:
            hours = int(seconds // 3600)
            mins = int((seconds % 3600) // 60)
            return f"{hours}h {mins}m"
