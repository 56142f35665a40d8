#!/usr/bin/env python3
"""Reference packet encoder, independent of the C++ codec.

Writes testdata/packets/<name>.bin and a manifest.json describing the fields
of every packet so the C++ tests can compare both directions.
"""

import argparse
import json
import pathlib
import struct

SET_COLOR = 102
SET_INFRARED = 122


def header_block(size, protocol_flags, source, target, flags, sequence, message_type):
    frame = struct.pack("<HHI", size, protocol_flags, source)
    address = struct.pack("<Q", target) + bytes(6) + struct.pack("<BB", flags, sequence)
    proto = bytes(8) + struct.pack("<H", message_type) + bytes(2)
    return frame + address + proto


def encode(p):
    if p["message_type"] == SET_COLOR:
        c = p["set_color"]
        payload = struct.pack("<BHHHHI", 0, c["hue"], c["saturation"], c["brightness"], c["kelvin"],
                              c["duration_ms"])
    elif p["message_type"] == SET_INFRARED:
        payload = struct.pack("<H", p["set_infrared"]["power_level"])
    else:
        payload = bytes(p["raw"])
    size = 36 + len(payload)
    return header_block(size, p["protocol_flags"], p["source"], p["target"], p["flags"], p["sequence"],
                        p["message_type"]) + payload


def base(message_type, **kw):
    p = {"protocol_flags": 0x1400, "source": 0, "target": 0, "flags": 0, "sequence": 0,
         "message_type": message_type}
    p.update(kw)
    return p


PACKETS = {
    "infrared_zero": base(SET_INFRARED, set_infrared={"power_level": 0}),
    "infrared_max": base(SET_INFRARED, set_infrared={"power_level": 65535}),
    "infrared_4ary_level1": base(SET_INFRARED, source=0x4C4C4541, target=0x0000D073D5000001, sequence=7,
                                 set_infrared={"power_level": 21845}),
    "color_red_full": base(SET_COLOR, set_color={"hue": 0, "saturation": 65535, "brightness": 65535,
                                                 "kelvin": 3500, "duration_ms": 0}),
    "color_mixed_fields": base(SET_COLOR, protocol_flags=0x3400, source=0xDEADBEEF, target=0x0123456789ABCDEF,
                               flags=0x03, sequence=255,
                               set_color={"hue": 43690, "saturation": 32768, "brightness": 1234,
                                          "kelvin": 9000, "duration_ms": 4294967295}),
    "unknown_type_999": base(999, source=42, raw=[1, 2, 3, 4, 5]),
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "testdata" / "packets"))
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = []
    for name, p in PACKETS.items():
        (out / f"{name}.bin").write_bytes(encode(p))
        manifest.append({"name": name, **p})
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


if __name__ == "__main__":
    main()
