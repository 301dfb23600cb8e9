"""
Hosting an out-of-process translator
====================================

Generators do not have to live in this process. A plugin is any program
that speaks the wire protocol: a one-line JSON handshake, then
length-prefixed PNG frames both ways. The host spawns it, checks the
handshake, and from then on it looks like any other generator backend.

The bundled echo plugin answers every tile with itself, which makes it
the reference implementation and the conformance target.
"""

import sys
import tempfile
from pathlib import Path

import numpy as np

from rs2map.generators import EdgeId
from rs2map.errors import PluginTimeoutError
from rs2map.plugin_host import PluginClient, run_conformance, spawn_plugin

ECHO = [sys.executable, "-m", "rs2map.echo_plugin"]
EDGE = EdgeId.r2m(17)

# Talk to the raw client first: handshake, one tile out, one tile back.
client = PluginClient(ECHO, EDGE, tile_size=32)
print(f"handshake accepted, plugin calls itself {client.name!r}")
rng = np.random.default_rng(0)
tile = rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8)
back = client.translate(tile)
print("echo returned the tile byte for byte:", bool(np.array_equal(back, tile)))
client.close()

# The conformance gate an external translator must pass in echo mode:
# one hundred random tiles, each required to come back pixel-exact.
run_conformance(ECHO, tile_size=32, tiles=100, seed=1)
print("conformance: 100/100 tiles echoed exactly")

# spawn_plugin wraps the client in a GeneratorHandle, so a pipeline can
# use a plugin wherever it would use a built-in generator.
handle = spawn_plugin(ECHO, EDGE, tile_size=32)
print(f"wrapped as generator handle: edge={handle.edge} backend={handle.backend}")
out = handle.translate(tile)
print("handle call round trips too:", bool(np.array_equal(out, tile)))
handle.close()

# Misbehaviour is contained: a plugin that handshakes politely and then
# stalls raises a timeout error instead of hanging the pipeline.
SLEEPY = """
import json, sys, time
sys.stdin.buffer.readline()
sys.stdout.buffer.write(json.dumps({"ok": True, "name": "sleepy"}).encode() + b"\\n")
sys.stdout.flush()
time.sleep(600)
"""
with tempfile.TemporaryDirectory() as tmp:
    script = Path(tmp) / "sleepy.py"
    script.write_text(SLEEPY)
    slow = PluginClient([sys.executable, str(script)], EDGE, tile_size=32, timeout=0.5)
    try:
        slow.translate(tile)
        print("unexpectedly fast")
    except PluginTimeoutError as err:
        print(f"stall detected and reported: {err}")
    finally:
        slow.close()
