"""Transport to the agent under test.

Requests and replies are single JSON documents. The subprocess transport
writes one document per line to the agent's stdin and reads one line back
from its stdout; the HTTP transport POSTs each request to a URL.
"""

from __future__ import annotations

import json
import logging
import queue
import shlex
import subprocess
import threading
import urllib.error
import urllib.request
from collections.abc import Callable, Mapping

from .errors import ConnectorError, ConnectorTimeout, MalformedArguments, ProtocolError
from .model import StepGroup, ToolCall, TurnOutput

logger = logging.getLogger(__name__)


def parse_reply(doc) -> TurnOutput:
    """Turn a reply document into a TurnOutput; raises ProtocolError."""
    if not isinstance(doc, Mapping):
        raise ProtocolError(f"reply must be an object, got {type(doc).__name__}")
    has_calls, has_text = "tool_calls" in doc, "text" in doc
    if has_calls == has_text:
        raise ProtocolError("reply must carry exactly one of 'tool_calls' or 'text'")
    if has_text:
        if not isinstance(doc["text"], str):
            raise ProtocolError("'text' must be a string")
        return TurnOutput.reply(doc["text"])
    raw = doc["tool_calls"]
    if not isinstance(raw, list) or not raw:
        raise ProtocolError("'tool_calls' must be a non-empty list")
    calls = []
    for item in raw:
        if not isinstance(item, Mapping) or not isinstance(item.get("name"), str):
            raise ProtocolError(f"malformed tool call {item!r}")
        try:
            calls.append(ToolCall(item["name"], item.get("arguments", {})))
        except MalformedArguments as exc:
            raise ProtocolError(f"malformed arguments for {item['name']}: {exc}") from None
    return TurnOutput.tool_calls(StepGroup(tuple(calls)))


class Connector:
    def request(self, doc: dict, timeout: float) -> dict:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class CallableConnector(Connector):
    """In-process agent: any callable mapping a request document to a reply."""

    def __init__(self, fn: Callable[[dict], dict]):
        self.fn = fn

    def request(self, doc: dict, timeout: float) -> dict:
        # round-trip through JSON so in-process agents see exactly the wire form
        reply = self.fn(json.loads(json.dumps(doc)))
        return json.loads(json.dumps(reply))


class SubprocessConnector(Connector):
    """Line-delimited JSON over a child process's standard streams."""

    def __init__(self, command: str | list[str]):
        self.argv = shlex.split(command) if isinstance(command, str) else list(command)
        self._proc: subprocess.Popen | None = None
        self._lines: queue.Queue = queue.Queue()

    def _spawn(self) -> None:
        self._lines = queue.Queue()
        self._proc = subprocess.Popen(
            self.argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            encoding="utf-8",
            bufsize=1,
        )
        threading.Thread(target=self._pump, args=(self._proc, self._lines), daemon=True).start()

    @staticmethod
    def _pump(proc: subprocess.Popen, lines: queue.Queue) -> None:
        for line in proc.stdout:
            lines.put(line)
        lines.put(None)

    def request(self, doc: dict, timeout: float) -> dict:
        if self._proc is None or self._proc.poll() is not None:
            self._spawn()
        try:
            self._proc.stdin.write(json.dumps(doc, ensure_ascii=False) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            self._kill()
            raise ConnectorError(f"agent process is not accepting input: {exc}") from None
        while True:
            try:
                line = self._lines.get(timeout=timeout)
            except queue.Empty:
                # a late reply would desynchronise the stream, so start over
                self._kill()
                raise ConnectorTimeout(f"no reply within {timeout}s") from None
            if line is None:
                self._kill()
                raise ProtocolError("agent process exited")
            if line.strip():
                break
        try:
            return json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"reply is not JSON: {exc}") from None

    def _kill(self) -> None:
        if self._proc is None:
            return
        proc, self._proc = self._proc, None
        if proc.poll() is None:
            proc.kill()
        proc.wait()
        for stream in (proc.stdin, proc.stdout):
            try:
                stream.close()
            except OSError:
                pass

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            try:
                self._proc.stdin.close()
                self._proc.wait(timeout=5)
            except (OSError, subprocess.TimeoutExpired):
                pass
        self._kill()


class HttpConnector(Connector):
    """One POST per turn; the response body is the reply document."""

    def __init__(self, url: str):
        self.url = url

    def request(self, doc: dict, timeout: float) -> dict:
        body = json.dumps(doc, ensure_ascii=False).encode("utf-8")
        req = urllib.request.Request(
            self.url, data=body, headers={"Content-Type": "application/json"}, method="POST"
        )
        try:
            with urllib.request.urlopen(req, timeout=timeout) as resp:
                payload = resp.read()
        except TimeoutError:
            raise ConnectorTimeout(f"no reply within {timeout}s") from None
        except urllib.error.URLError as exc:
            if isinstance(exc.reason, TimeoutError):
                raise ConnectorTimeout(f"no reply within {timeout}s") from None
            raise ConnectorError(f"HTTP request failed: {exc}") from None
        try:
            return json.loads(payload.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ProtocolError(f"reply is not JSON: {exc}") from None


def connector_from_spec(spec: str) -> Connector:
    if spec.startswith(("http://", "https://")):
        return HttpConnector(spec)
    return SubprocessConnector(spec)
