"""Line-protocol client for an external model process.

The child process reads one input point per line (comma-separated decimals)
and must answer with one decimal output per line, in order. The client writes
batches of up to `batch_size` lines followed by a flush, then waits for the
same number of reply lines. Replies are matched to queries by position, each
evaluated point charges the budget by one, and any protocol violation (crash,
malformed line, missing replies within the timeout) raises with captured
child diagnostics.
"""

from __future__ import annotations

import collections
import queue
import shlex
import subprocess
import threading

import numpy as np

from .errors import ModelExitError, ModelProtocolError, ModelTimeoutError
from .exact import EvalBudget

_STDERR_KEEP_LINES = 50


class ExternalModel:
    """Evaluate-only model backed by a child process speaking the line protocol."""

    def __init__(self, command, p: int, batch_size: int = 64, timeout: float = 60.0,
                 budget: EvalBudget | None = None):
        self.command = command
        self.p = int(p)
        self.batch_size = int(batch_size)
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        self.timeout = float(timeout)
        self.budget = budget if budget is not None else EvalBudget()
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
            )
        except OSError as exc:
            raise ModelProtocolError(f"could not launch external model {argv!r}: {exc}") from exc
        self._lines: queue.Queue = queue.Queue()
        self._stderr_tail: collections.deque = collections.deque(maxlen=_STDERR_KEEP_LINES)
        self._reader = threading.Thread(target=self._drain_stdout, daemon=True)
        self._reader.start()
        self._err_reader = threading.Thread(target=self._drain_stderr, daemon=True)
        self._err_reader.start()

    def _drain_stdout(self):
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)  # EOF marker

    def _drain_stderr(self):
        for line in self._proc.stderr:
            self._stderr_tail.append(line.rstrip("\n"))

    def _diagnostics(self) -> str:
        tail = "\n".join(self._stderr_tail)
        code = self._proc.poll()
        status = f"exit status {code}" if code is not None else "still running"
        return f"child {status}" + (f"; stderr tail:\n{tail}" if tail else "")

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.p:
            raise ValueError(f"expected an (n, {self.p}) batch of points, got {x.shape}")
        self.budget.charge(x.shape[0])
        out = np.empty(x.shape[0])
        for start in range(0, x.shape[0], self.batch_size):
            block = x[start : start + self.batch_size]
            out[start : start + block.shape[0]] = self._evaluate_batch(block, start)
        return out

    def _evaluate_batch(self, block: np.ndarray, offset: int) -> np.ndarray:
        payload = "".join(
            ",".join(repr(float(v)) for v in row) + "\n" for row in block
        )
        try:
            self._proc.stdin.write(payload)
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ModelExitError(
                f"external model closed its input pipe; {self._diagnostics()}"
            ) from exc
        values = np.empty(block.shape[0])
        for i in range(block.shape[0]):
            try:
                line = self._lines.get(timeout=self.timeout)
            except queue.Empty:
                raise ModelTimeoutError(
                    f"no reply for point {offset + i + 1} within {self.timeout} s; "
                    f"{self._diagnostics()}"
                ) from None
            if line is None:
                raise ModelExitError(
                    f"external model exited after {i} of {block.shape[0]} replies "
                    f"in this batch (point {offset + i + 1} unanswered); "
                    f"{self._diagnostics()}"
                )
            try:
                values[i] = float(line.strip())
            except ValueError:
                raise ModelProtocolError(
                    f"malformed reply line for point {offset + i + 1}: {line.strip()!r}"
                ) from None
        return values

    def close(self) -> None:
        proc = getattr(self, "_proc", None)
        if proc is None:
            return
        try:
            if proc.stdin and not proc.stdin.closed:
                proc.stdin.close()
        except OSError:
            pass
        try:
            proc.wait(timeout=2.0)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass
