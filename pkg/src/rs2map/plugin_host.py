"""Host side of the generator plugin wire protocol.

Plugins are child processes translating tiles over stdin/stdout:

1. Handshake: the host writes one UTF-8 line
   ``{"protocol": 1, "edge": "r2m@17", "tile_size": 512}`` and the plugin
   answers one line ``{"ok": true, "name": "..."}`` or
   ``{"ok": false, "reason": "..."}``.
2. Requests: 4-byte big-endian unsigned length, then that many bytes of
   PNG (8-bit RGB, tile_size squared). The reply uses the same framing.
3. Shutdown: the host closes the child's stdin; the plugin exits 0.

Anything a plugin prints to stderr is captured and attached to errors.
A handle whose process died or broke framing is poisoned: every later
call fails fast.
"""

from __future__ import annotations

import json
import os
import queue
import select
import subprocess
import threading
import time

import numpy as np

from .errors import BackendError, PluginProtocolError, PluginTimeoutError, ShapeError
from .tile_io import decode_png, encode_png
from .tiles import validate_tile

TIMEOUT_ENV = "RS2MAP_PLUGIN_TIMEOUT"
DEFAULT_TIMEOUT = 60.0
MAX_FRAME = 64 * 1024 * 1024


def default_timeout() -> float:
    value = os.environ.get(TIMEOUT_ENV)
    if value:
        try:
            return float(value)
        except ValueError:
            pass
    return DEFAULT_TIMEOUT


class _StderrDrain(threading.Thread):
    """Drains a pipe so the child never blocks on stderr; keeps the tail."""

    def __init__(self, pipe, limit=65536):
        super().__init__(daemon=True)
        self._pipe = pipe
        self._limit = limit
        self._chunks: list[bytes] = []
        self._size = 0
        self._lock = threading.Lock()
        self.start()

    def run(self):
        try:
            while True:
                chunk = self._pipe.read(4096)
                if not chunk:
                    return
                with self._lock:
                    self._chunks.append(chunk)
                    self._size += len(chunk)
                    while self._size > self._limit and len(self._chunks) > 1:
                        self._size -= len(self._chunks.pop(0))
        except Exception:
            return

    def tail(self) -> str:
        with self._lock:
            return b"".join(self._chunks).decode("utf-8", "replace").strip()


class PluginClient:
    """One plugin process bound to one edge."""

    def __init__(self, cmd, edge, tile_size, timeout=None):
        self.cmd = list(cmd)
        self.edge = edge
        self.tile_size = tile_size
        self.timeout = default_timeout() if timeout is None else float(timeout)
        self.name = None
        self._poisoned = None
        self._proc = subprocess.Popen(
            self.cmd,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
        )
        self._stderr = _StderrDrain(self._proc.stderr)
        os.set_blocking(self._proc.stdout.fileno(), False)
        try:
            self._handshake()
        except Exception:
            self._reap()
            raise

    # -- low-level framed I/O ------------------------------------------------

    def _read_bytes(self, n, deadline):
        fd = self._proc.stdout.fileno()
        parts = []
        got = 0
        while got < n:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise PluginTimeoutError(
                    f"plugin for {self.edge} timed out after {self.timeout}s",
                    edge=self.edge,
                    diagnostics=self._stderr.tail(),
                )
            ready, _, _ = select.select([fd], [], [], min(remaining, 0.5))
            if not ready:
                continue
            chunk = os.read(fd, n - got)
            if not chunk:
                raise PluginProtocolError(
                    f"plugin for {self.edge} closed its output mid-frame",
                    edge=self.edge,
                    diagnostics=self._stderr.tail(),
                )
            parts.append(chunk)
            got += len(chunk)
        return b"".join(parts)

    def _read_line(self, deadline):
        buf = bytearray()
        while not buf.endswith(b"\n"):
            buf += self._read_bytes(1, deadline)
            if len(buf) > 65536:
                raise PluginProtocolError(
                    f"plugin for {self.edge} sent an oversized handshake line",
                    edge=self.edge,
                    diagnostics=self._stderr.tail(),
                )
        return bytes(buf)

    def _write(self, data):
        try:
            self._proc.stdin.write(data)
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise PluginProtocolError(
                f"plugin for {self.edge} closed its input: {exc}",
                edge=self.edge,
                diagnostics=self._stderr.tail(),
            ) from exc

    # -- protocol ------------------------------------------------------------

    def _handshake(self):
        deadline = time.monotonic() + self.timeout
        hello = {"protocol": 1, "edge": str(self.edge), "tile_size": self.tile_size}
        self._write(json.dumps(hello).encode() + b"\n")
        line = self._read_line(deadline)
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise PluginProtocolError(
                f"plugin for {self.edge} sent a malformed handshake: {line!r}",
                edge=self.edge,
                diagnostics=self._stderr.tail(),
            ) from exc
        if not reply.get("ok"):
            raise BackendError(
                f"plugin refused handshake for {self.edge}: {reply.get('reason', 'no reason given')}",
                edge=self.edge,
                diagnostics=self._stderr.tail(),
            )
        self.name = reply.get("name", self.cmd[0])

    def translate(self, tile: np.ndarray) -> np.ndarray:
        if self._poisoned is not None:
            raise BackendError(
                f"plugin handle for {self.edge} is poisoned: {self._poisoned}",
                edge=self.edge,
            )
        tile = validate_tile(tile, self.tile_size)
        payload = encode_png(tile)
        deadline = time.monotonic() + self.timeout
        try:
            self._write(len(payload).to_bytes(4, "big") + payload)
            header = self._read_bytes(4, deadline)
            length = int.from_bytes(header, "big")
            if length == 0 or length > MAX_FRAME:
                raise PluginProtocolError(
                    f"plugin for {self.edge} sent an invalid frame length {length}",
                    edge=self.edge,
                    diagnostics=self._stderr.tail(),
                )
            body = self._read_bytes(length, deadline)
        except BackendError as exc:
            self._poison(str(exc))
            raise
        try:
            out = decode_png(body)
        except Exception as exc:
            self._poison(f"undecodable reply frame: {exc}")
            raise PluginProtocolError(
                f"plugin for {self.edge} replied with undecodable image data: {exc}",
                edge=self.edge,
                diagnostics=self._stderr.tail(),
            ) from exc
        if out.shape != tile.shape:
            raise ShapeError(
                f"plugin for {self.edge} replied with shape {out.shape}, expected {tile.shape}"
            )
        return out

    # -- lifecycle -----------------------------------------------------------

    def _poison(self, reason):
        if self._poisoned is None:
            self._poisoned = reason
        self._reap()

    def _reap(self):
        proc = self._proc
        for stream in (proc.stdin,):
            try:
                stream.close()
            except OSError:
                pass
        try:
            proc.wait(timeout=2)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()

    def close(self):
        """Close stdin and let the plugin exit; kills it if it lingers."""
        self._reap()

    @property
    def poisoned(self) -> bool:
        return self._poisoned is not None


class PluginPool:
    """A pool of identical plugin processes serving one edge.

    Each process handles one request at a time; concurrency comes from
    checking out whichever process is idle.
    """

    def __init__(self, cmd, edge, tile_size, processes=1, timeout=None):
        if processes < 1:
            raise ValueError(f"pool size must be >= 1, got {processes}")
        self._clients: queue.Queue[PluginClient] = queue.Queue()
        self._all = []
        for _ in range(processes):
            client = PluginClient(cmd, edge, tile_size, timeout=timeout)
            self._all.append(client)
            self._clients.put(client)
        self.edge = edge

    def translate(self, tile: np.ndarray) -> np.ndarray:
        client = self._clients.get()
        try:
            return client.translate(tile)
        finally:
            self._clients.put(client)

    def close(self):
        for client in self._all:
            client.close()


def spawn_plugin(cmd, edge, tile_size, timeout=None, processes=1):
    """Spawn plugin process(es) for ``edge`` and wrap them in a
    :class:`rs2map.generators.GeneratorHandle`."""
    from .generators import GeneratorHandle

    pool = PluginPool(cmd, edge, tile_size, processes=processes, timeout=timeout)
    return GeneratorHandle(edge, "plugin", pool.translate, tile_size, closer=pool.close)


def run_conformance(cmd, tile_size=64, tiles=100, seed=0, timeout=None, edge=None):
    """Round-trip random tiles through a plugin command and require pixel-exact
    echo behaviour. Raises on any protocol violation or mismatch.

    This is the conformance gate an external translator must pass in its
    echo mode before being wired into a pipeline.
    """
    from .generators import EdgeId

    rng = np.random.default_rng(seed)
    client = PluginClient(cmd, edge or EdgeId.r2m(17), tile_size, timeout=timeout)
    try:
        for i in range(tiles):
            tile = rng.integers(0, 256, size=(tile_size, tile_size, 3), dtype=np.uint8)
            out = client.translate(tile)
            if not np.array_equal(out, tile):
                raise AssertionError(
                    f"plugin echo mismatch on tile {i}: "
                    f"{int((out != tile).sum())} differing bytes"
                )
    finally:
        client.close()
