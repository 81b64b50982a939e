"""Reference forward pass for the interface network, written against numpy.

Builds a 58-node test graph, draws random weights for a reduced configuration,
and writes a weight file plus a parity fixture the Rust tests compare against.

    python3 tools/gnn_reference.py crates/core/tests/fixtures
"""

import struct
import sys
from pathlib import Path

import numpy as np

CONFIG = dict(
    tagconv_layers=4,
    hidden=8,
    resnet_blocks=2,
    hops=2,
    edge_hidden=4,
    instance_norm_eps=1e-5,
    layer_norm_eps=1e-5,
)


def manifest(cfg):
    h, e = cfg["hidden"], cfg["edge_hidden"]
    out = [
        ("edge_pre.lin0.weight", (e, 1)),
        ("edge_pre.lin0.bias", (e,)),
        ("edge_pre.norm.weight", (e,)),
        ("edge_pre.norm.bias", (e,)),
        ("edge_pre.lin1.weight", (1, e)),
        ("edge_pre.lin1.bias", (1,)),
    ]
    for l in range(cfg["tagconv_layers"]):
        d_in = 1 if l == 0 else h
        for j in range(cfg["hops"] + 1):
            out.append((f"conv{l}.tag.weight{j}", (h, d_in)))
        out += [
            (f"conv{l}.tag.bias", (h,)),
            (f"conv{l}.norm.weight", (h,)),
            (f"conv{l}.norm.bias", (h,)),
        ]
        for b in range(cfg["resnet_blocks"]):
            p = f"conv{l}.res{b}"
            out += [
                (f"{p}.ln.weight", (h,)),
                (f"{p}.ln.bias", (h,)),
                (f"{p}.lin1.weight", (h, h)),
                (f"{p}.lin1.bias", (h,)),
                (f"{p}.lin2.weight", (h, h)),
                (f"{p}.lin2.bias", (h,)),
            ]
    out += [
        ("edge_conv.lin0.weight", (h, 2 * h + 1)),
        ("edge_conv.lin0.bias", (h,)),
        ("edge_conv.ln0.weight", (h,)),
        ("edge_conv.ln0.bias", (h,)),
        ("edge_conv.lin1.weight", (h, h)),
        ("edge_conv.lin1.bias", (h,)),
        ("edge_conv.ln1.weight", (h,)),
        ("edge_conv.ln1.bias", (h,)),
        ("edge_conv.lin2.weight", (1, h)),
        ("edge_conv.lin2.bias", (1,)),
    ]
    return out


def random_weights(cfg, rng):
    w = {}
    for name, shape in manifest(cfg):
        if name.endswith("norm.weight") or (".ln" in name and name.endswith("weight")):
            w[name] = 1.0 + 0.2 * rng.standard_normal(shape)
        else:
            w[name] = rng.standard_normal(shape) / np.sqrt(shape[-1])
    return w


def write_weights(path, cfg, w):
    lines = ["MLORAS-W v1"]
    lines.append(
        "config "
        + " ".join(
            f"{k}={v:.0e}".replace("e-05", "e-5") if isinstance(v, float) else f"{k}={v}"
            for k, v in cfg.items()
        )
    )
    entries = manifest(cfg)
    lines.append(f"tensors {len(entries)}")
    offset = 0
    for name, shape in entries:
        lines.append(f"{name} {'x'.join(map(str, shape))} {offset}")
        offset += int(np.prod(shape))
    lines.append("end")
    blob = ("\n".join(lines) + "\n").encode("ascii")
    for name, _ in entries:
        blob += struct.pack(f"<{w[name].size}d", *w[name].ravel())
    Path(path).write_bytes(blob)


def build_graph():
    """6 x 10 lattice minus two corners, shifted 5-point stencil."""
    nx, ny = 10, 6
    coords = [(i, j) for j in range(ny) for i in range(nx) if (i, j) not in {(0, 0), (nx - 1, ny - 1)}]
    index = {c: k for k, c in enumerate(coords)}
    n = len(coords)
    a = np.zeros((n, n))
    for k, (i, j) in enumerate(coords):
        a[k, k] = 4.0 + 0.05 * ((i * 7 + j * 3) % 5)
        for d in [(1, 0), (-1, 0), (0, 1), (0, -1)]:
            nb = (i + d[0], j + d[1])
            if nb in index:
                a[k, index[nb]] = -1.0
    owner = np.array([0 if i < 3 else (1 if i < 7 else 2) for (i, j) in coords])
    return a, owner


def overlap(a, owner, delta):
    n = len(owner)
    sets = []
    for s in range(owner.max() + 1):
        inside = owner == s
        for _ in range(delta):
            grown = inside.copy()
            for p in np.nonzero(inside)[0]:
                grown |= a[p] != 0
            inside = grown
        sets.append(inside)
    return sets


def interface_mask(a, sets):
    n = a.shape[0]
    feature = np.zeros(n)
    mask = np.zeros((n, n), dtype=bool)
    for inside in sets:
        boundary = np.array([inside[p] and np.any((a[p] != 0) & ~inside) for p in range(n)])
        feature[boundary] = 1.0
        for p in np.nonzero(boundary)[0]:
            for q in np.nonzero(boundary)[0]:
                if p == q or a[p, q] != 0:
                    mask[p, q] = True
    return feature, mask


def instance_norm(x, g, b, eps):
    mu = x.mean(axis=0)
    var = ((x - mu) ** 2).mean(axis=0)
    return (x - mu) / np.sqrt(var + eps) * g + b


def layer_norm(x, g, b, eps):
    mu = x.mean(axis=1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps) * g + b


def relu(x):
    return np.maximum(x, 0.0)


def forward(cfg, w, a, feature, mask):
    lin = lambda x, p: x @ w[p + ".weight"].T + w[p + ".bias"]
    pattern = (a != 0) | np.eye(a.shape[0], dtype=bool)
    rows, cols = np.nonzero(pattern)
    vals = a[rows, cols][:, None]

    h = relu(lin(vals, "edge_pre.lin0"))
    h = instance_norm(h, w["edge_pre.norm.weight"], w["edge_pre.norm.bias"], cfg["instance_norm_eps"])
    ew = lin(h, "edge_pre.lin1")[:, 0]
    m = np.zeros_like(a)
    m[rows, cols] = ew

    x = feature[:, None]
    for l in range(cfg["tagconv_layers"]):
        y = w[f"conv{l}.tag.bias"] + sum(
            np.linalg.matrix_power(m, j) @ x @ w[f"conv{l}.tag.weight{j}"].T for j in range(cfg["hops"] + 1)
        )
        y = instance_norm(relu(y), w[f"conv{l}.norm.weight"], w[f"conv{l}.norm.bias"], cfg["instance_norm_eps"])
        for b in range(cfg["resnet_blocks"]):
            p = f"conv{l}.res{b}"
            z = layer_norm(y, w[p + ".ln.weight"], w[p + ".ln.bias"], cfg["layer_norm_eps"])
            y = y + lin(relu(lin(z, p + ".lin1")), p + ".lin2")
        x = y

    stacked = np.hstack([x[rows], x[cols], ew[:, None]])
    z = layer_norm(relu(lin(stacked, "edge_conv.lin0")), w["edge_conv.ln0.weight"], w["edge_conv.ln0.bias"], cfg["layer_norm_eps"])
    z = layer_norm(relu(lin(z, "edge_conv.lin1")), w["edge_conv.ln1.weight"], w["edge_conv.ln1.bias"], cfg["layer_norm_eps"])
    out = lin(z, "edge_conv.lin2")[:, 0]
    keep = mask[rows, cols]
    return rows, cols, a[rows, cols], keep, np.where(keep, out, 0.0)


def main(out_dir):
    out_dir = Path(out_dir)
    rng = np.random.default_rng(20240611)
    cfg = CONFIG
    w = random_weights(cfg, rng)
    write_weights(out_dir / "gnn_parity.weights", cfg, w)

    a, owner = build_graph()
    delta = 1
    feature, mask = interface_mask(a, overlap(a, owner, delta))
    rows, cols, vals, keep, out = forward(cfg, w, a, feature, mask)

    lines = [
        "MLORAS-FIXTURE v1",
        "weights gnn_parity.weights",
        f"nodes {a.shape[0]}",
        f"delta {delta}",
        "owner " + " ".join(map(str, owner)),
        "features " + " ".join(f"{v:g}" for v in feature),
        f"edges {len(rows)}",
    ]
    for p, q, v, k, o in zip(rows, cols, vals, keep, out):
        lines.append(f"{p} {q} {float(v)!r} {int(k)} {float(o)!r}")
    lines.append("end")
    (out_dir / "gnn_parity.fixture").write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else ".")
