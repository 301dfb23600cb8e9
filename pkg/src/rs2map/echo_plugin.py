"""Built-in echo plugin: answers every request frame with the same bytes.

Run as ``python -m rs2map.echo_plugin``. Useful as a protocol loopback for
tests and as a minimal reference for plugin authors.
"""

from __future__ import annotations

import json
import sys


def _read_exact(stream, n):
    parts = []
    got = 0
    while got < n:
        chunk = stream.read(n - got)
        if not chunk:
            return None
        parts.append(chunk)
        got += len(chunk)
    return b"".join(parts)


def serve(stdin=None, stdout=None) -> int:
    stdin = stdin or sys.stdin.buffer
    stdout = stdout or sys.stdout.buffer

    line = stdin.readline()
    if not line:
        return 0
    try:
        hello = json.loads(line)
        tile_size = int(hello["tile_size"])
        assert hello.get("protocol") == 1 and tile_size > 0
    except Exception as exc:
        stdout.write(json.dumps({"ok": False, "reason": f"bad handshake: {exc}"}).encode() + b"\n")
        stdout.flush()
        return 3
    stdout.write(json.dumps({"ok": True, "name": "echo"}).encode() + b"\n")
    stdout.flush()

    while True:
        header = _read_exact(stdin, 4)
        if header is None:
            return 0
        length = int.from_bytes(header, "big")
        body = _read_exact(stdin, length)
        if body is None:
            print("echo plugin: input closed mid-frame", file=sys.stderr)
            return 1
        stdout.write(length.to_bytes(4, "big") + body)
        stdout.flush()


if __name__ == "__main__":
    sys.exit(serve())
