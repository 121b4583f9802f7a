import io

import pytest

from idla.aggregation import Cluster, InvariantViolation, grow
from idla.io import ParseError, SnapshotHeader, make_header, read_snapshot, render_pgm, write_snapshot
from idla.kernels import KernelSpec
from idla.lattice import diamond_volume

SPEC = KernelSpec.mixture(0.5)


@pytest.fixture(scope="module")
def grown():
    return grow(SPEC, diamond_volume(20), 9)


def test_roundtrip_text(grown):
    header = make_header(grown, SPEC, 9, diamond_volume(20))
    buf = io.StringIO()
    n = write_snapshot(grown, header, buf)
    text = buf.getvalue()
    assert n == len(text.encode())
    assert text.startswith("# idla-snapshot\n")
    back, h2 = read_snapshot(io.StringIO(text))
    assert h2 == header
    assert back.order_log == grown.order_log
    assert back == grown


def test_roundtrip_file_and_bytes(grown, tmp_path):
    header = make_header(grown, SPEC, 9, diamond_volume(20))
    path = tmp_path / "c.txt"
    write_snapshot(grown, header, path)
    raw = io.BytesIO()
    write_snapshot(grown, header, raw)
    assert path.read_bytes() == raw.getvalue()
    assert read_snapshot(path)[0].order_log == grown.order_log
    assert b"\r" not in raw.getvalue()


def test_rows_follow_settlement_order(grown):
    header = make_header(grown, SPEC, 9, diamond_volume(20))
    text = io.StringIO()
    write_snapshot(grown, header, text)
    rows = [line for line in text.getvalue().splitlines() if not line.startswith("#")]
    first = rows[0].split(",")
    assert first == ["0", "0", "0"]
    assert [int(r.split(",")[2]) for r in rows] == [p for p, _ in grown.order_log]


def _snapshot_text():
    c = Cluster.diamond(1)
    buf = io.StringIO()
    write_snapshot(c, make_header(c, SPEC, 1, 5), buf)
    return buf.getvalue()


def test_parse_errors_report_line_numbers():
    text = _snapshot_text()
    bad = text.replace("1,0,", "1;0,", 1)
    with pytest.raises(ParseError) as err:
        read_snapshot(io.StringIO(bad))
    assert err.value.lineno > 1
    with pytest.raises(ParseError):
        read_snapshot(io.StringIO("not a snapshot\n"))


def test_duplicate_site_and_counts_mismatch_are_rejected():
    text = _snapshot_text()
    lines = text.splitlines()
    dup = "\n".join(lines + [lines[-1]]) + "\n"
    with pytest.raises((ParseError, InvariantViolation)):
        read_snapshot(io.StringIO(dup))
    wrong = text.replace("layer_counts=1,4", "layer_counts=1,3")
    with pytest.raises(InvariantViolation):
        read_snapshot(io.StringIO(wrong))


def test_header_fields():
    h = SnapshotHeader("mixture", "1/2", 3, 5, "abc", 8)
    assert h.format_version == 1


def test_pgm_layout():
    c = Cluster.from_sites([(0, 0), (2, 0), (0, -1)])
    img = render_pgm(c)
    head, body = img[:img.index(b"255\n") + 4], img[img.index(b"255\n") + 4:]
    assert head == b"P5\n5 5\n255\n"
    assert len(body) == 25
    # row = 2 - y, column = x + 2
    assert body[2 * 5 + 2] == 255 and body[2 * 5 + 4] == 255 and body[3 * 5 + 2] == 255
    assert sum(1 for v in body if v) == 3


def test_pgm_order_style(grown):
    img = render_pgm(grown, "order")
    M = max(max(abs(x), abs(y)) for x, y in grown.sites())
    side = 2 * M + 1
    assert img.startswith(f"P5\n{side} {side}\n255\n".encode())
    body = img[-side * side:]
    centre = body[M * side + M]
    assert centre == 255
    assert sum(1 for v in body if v) == grown.size
    with pytest.raises(ValueError):
        render_pgm(grown, "sepia")


def test_single_site_snapshot():
    text = _snapshot_text_of(Cluster.from_sites([(0, 0)]))
    assert [line for line in text.splitlines() if not line.startswith("#")] == ["0,0,0"]


def _snapshot_text_of(c):
    buf = io.StringIO()
    write_snapshot(c, make_header(c, SPEC, 0, c.size), buf)
    return buf.getvalue()


def test_roundtrip_many_random_clusters():
    from idla.kernels import KernelSpec as K

    specs = [K.mixture(0), K.mixture(0.25), K.mixture(0.75), K.reflected(), K.srw()]
    for i in range(50):
        spec = specs[i % len(specs)]
        starts = {(0, 0): 20 + 7 * i, (i % 5 - 2, 3): i % 4}
        c = grow(spec, starts, i)
        back, _ = read_snapshot(io.StringIO(_snapshot_text_of(c)))
        assert back.order_log == c.order_log


def test_diamond_image_is_rotation_symmetric():
    import numpy as np

    img = render_pgm(Cluster.diamond(7))
    assert img.startswith(b"P5\n15 15\n255\n")
    pix = np.frombuffer(img[-225:], dtype=np.uint8).reshape(15, 15)
    assert np.array_equal(pix, np.rot90(pix))
    assert int((pix == 255).sum()) == diamond_volume(7)


def test_single_site_image():
    img = render_pgm(Cluster.from_sites([(0, 0)]))
    assert img == b"P5\n1 1\n255\n\xff"
