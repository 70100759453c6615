"""Binary (P5) PGM images for score maps and masks."""

from pathlib import Path

import numpy as np


def write_pgm(path, image, maxval=65535):
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError(f"PGM needs a 2-d image, got {img.shape}")
    if img.min(initial=0) < 0 or img.max(initial=0) > maxval:
        raise ValueError(f"values outside [0, {maxval}]")
    # 16-bit samples are big-endian per the format
    dt = ">u2" if maxval > 255 else "u1"
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n{maxval}\n".encode("ascii")
    Path(path).write_bytes(header + img.astype(dt).tobytes())
    return Path(path)


def read_pgm(path):
    buf = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while buf[pos:pos + 1].isspace():
            pos += 1
        if buf[pos:pos + 1] == b"#":
            pos = buf.index(b"\n", pos) + 1
            continue
        end = pos
        while not buf[end:end + 1].isspace():
            end += 1
        fields.append(buf[pos:end])
        pos = end
    if fields[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h, maxval = (int(f) for f in fields[1:])
    dt = ">u2" if maxval > 255 else "u1"
    data = np.frombuffer(buf, dtype=dt, count=w * h, offset=pos + 1)
    return data.reshape(h, w).astype(np.uint16 if maxval > 255 else np.uint8), maxval


def score_image(scores):
    """Scores in [0, 1] -> 16-bit samples, round(score * 65535)."""
    return np.rint(np.clip(scores, 0.0, 1.0) * 65535).astype(np.uint16)


def mask_image(mask):
    return np.where(np.asarray(mask) == 1, 65535, 0).astype(np.uint16)
