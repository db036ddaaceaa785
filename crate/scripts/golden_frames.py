#!/usr/bin/env python3
"""Writes crates/core/tests/data/golden_frames.txt from a standalone encoder
that follows the wire layout documented in crates/core/src/cluster/codec.rs."""
import struct
import sys
from pathlib import Path


def u8(v): return struct.pack(">B", v)
def u32(v): return struct.pack(">I", v)
def u64(v): return struct.pack(">Q", v)


def field(tag, value):
    return u8(tag) + u32(len(value)) + value


def fields(*pairs):
    tags = [t for t, _ in pairs]
    assert tags == sorted(tags) and len(set(tags)) == len(tags)
    return b"".join(field(t, v) for t, v in pairs)


def element(kind, values):
    if kind == "f32":
        return u8(1) + u32(len(values)) + b"".join(struct.pack(">f", x) for x in values)
    if kind == "f64":
        return u8(2) + u32(len(values)) + b"".join(struct.pack(">d", x) for x in values)
    if kind == "i32":
        return u8(3) + u32(len(values)) + b"".join(struct.pack(">i", x) for x in values)
    if kind == "i64":
        return u8(4) + u32(len(values)) + b"".join(struct.pack(">q", x) for x in values)
    if kind == "bytes":
        return u8(5) + u32(len(values)) + bytes(values)
    if kind == "table":
        return u8(6) + u32(len(values)) + b"".join(u32(len(k)) + k + u64(c) for k, c in values)
    raise ValueError(kind)


def element_list(elems):
    out = u32(len(elems))
    for e in elems:
        out += u32(len(e)) + e
    return out


def frame(msg_type, payload):
    body = u8(1) + u8(msg_type) + payload
    return u32(len(body)) + body


IMPL = {"std": 1, "fpga": 2}
MODE = {"cpu": 1, "gpu": 2, "acc": 3, "jtp": 4}
KIND = {"map": 1, "map_partition": 2, "reduce_pair": 3}

CORPUS = [
    ("shutdown", frame(7, b"")),
    ("heartbeat", frame(3, fields((1, b"w1"), (2, u64(7))))),
    ("register_ack_rejected", frame(2, fields((1, u8(0)), (2, b"registry hash mismatch")))),
    ("register_ack_accepted", frame(2, fields((1, u8(1)), (2, b"")))),
    ("register_fpga", frame(1, fields(
        (1, b"fpga-0"),
        (2, u32(1)),
        (3, fields((1, u8(IMPL["fpga"])), (2, b"Altera"), (3, u8(MODE["acc"])), (4, u32(1)), (5, b"altera-acc0"))),
        (4, u64(0x0123456789ABCDEF)),
    ))),
    ("submit_reduce_pair", frame(4, fields(
        (1, u64(1)), (2, u64(2)), (3, u8(KIND["reduce_pair"])), (4, b"vectoradd"),
        (5, element_list([element("f32", [1.0, 2.0, 3.0]), element("f32", [4.0, 5.0, 6.0])])),
        (7, u8(MODE["gpu"])),
        (8, fields((1, u64(4096)), (2, u64(65536)))),
    ))),
    ("submit_map_partition", frame(4, fields(
        (1, u64(5)), (2, u64(0)), (3, u8(KIND["map_partition"])), (4, b"pi"),
        (5, element_list([])),
        (6, element_list([element("i64", [42, 500000]), element("i64", [-43, 1])])),
        (8, fields((1, u64(0)), (2, u64(0)))),
    ))),
    ("submit_map_mixed", frame(4, fields(
        (1, u64(6)), (2, u64(3)), (3, u8(KIND["map"])), (4, b"wordcount"),
        (5, element_list([element("bytes", list(b"a b\ta")), element("i32", [-1, 0, 2147483647])])),
        (7, u8(MODE["jtp"])),
        (8, fields((1, u64(1)), (2, u64(2**60)))),
    ))),
    ("result_table", frame(5, fields(
        (1, u64(3)), (2, u64(0)),
        (3, element("table", [(b"a", 2), (b"b", 1)])),
        (4, fields((1, u64(5)), (2, u64(40)), (3, u64(50060)), (4, b"simulated-accelerator"), (5, u64(1)))),
        (5, b"w2"),
    ))),
    ("result_f64", frame(5, fields(
        (1, u64(7)), (2, u64(11)),
        (3, element("f64", [0.5, -1.25])),
        (4, fields((1, u64(0)), (2, u64(0)), (3, u64(0)), (4, b"host-sequential"), (5, u64(0)))),
        (5, b"cpu-0"),
    ))),
    ("task_error", frame(6, fields((1, u64(4)), (2, u64(9)), (3, b"run"), (4, b"gid 3: boom")))),
]

if __name__ == "__main__":
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "crates/core/tests/data/golden_frames.txt"
    out.write_text("".join(f"{name} {data.hex()}\n" for name, data in CORPUS))
    print(f"wrote {len(CORPUS)} frames to {out}")
