#!/usr/bin/env python3
"""Stand-in decoder for tests: speaks just enough of the ffmpeg CLI.

Input "videos" are JSON files of the form
    {"duration": 10.0, "iframe_times": [0.0, 2.1, 4.0]}
The script honors the select=eq(pict_type,I) and fps=<r> filtergraphs, writes
one placeholder PNG per emitted frame to the output pattern, and prints
showinfo-style pts_time lines on stderr, mirroring how the real decoder
reports per-frame timestamps.
"""

import json
import re
import sys

# Smallest valid PNG (1x1 transparent pixel).
PNG_BYTES = bytes.fromhex(
    "89504e470d0a1a0a0000000d494844520000000100000001080600000"
    "01f15c4890000000d49444154789c6260010000000500010d0a2db400"
    "00000049454e44ae426082"
)


def main() -> int:
    args = sys.argv[1:]
    try:
        video = args[args.index("-i") + 1]
        vf = args[args.index("-vf") + 1]
        pattern = args[-1]
    except (ValueError, IndexError):
        print("fake_ffmpeg: unsupported argument vector", file=sys.stderr)
        return 1
    try:
        with open(video, "r", encoding="utf-8") as fh:
            meta = json.load(fh)
        duration = float(meta["duration"])
        iframe_times = [float(t) for t in meta["iframe_times"]]
    except Exception as exc:
        print(f"{video}: Invalid data found when processing input ({exc})", file=sys.stderr)
        return 1

    fps_match = re.search(r"fps=([0-9.]+)", vf)
    if "pict_type" in vf:
        times = sorted(iframe_times)
    elif fps_match:
        rate = float(fps_match.group(1))
        times = [k / rate for k in range(int(duration * rate))]
    else:
        print(f"unsupported filtergraph: {vf}", file=sys.stderr)
        return 1

    if "%05d" not in pattern:
        print(f"unsupported output pattern: {pattern}", file=sys.stderr)
        return 1
    for index, t in enumerate(times, start=1):
        with open(pattern.replace("%05d", f"{index:05d}"), "wb") as fh:
            fh.write(PNG_BYTES)
        print(
            f"[Parsed_showinfo_1 @ 0x0] n:{index - 1:4d} pts:{int(t * 90000):8d} "
            f"pts_time:{t:.6f} duration_time:0.04",
            file=sys.stderr,
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
