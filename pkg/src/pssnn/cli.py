"""Command-line entry points.

Subcommands:
  share      split a plaintext input image or model into per-party share files
  run-party  run one party of a secure inference over TCP
  simulate   run all parties in-process and reveal the logits
  bench      kernel and protocol microbenchmarks (CSV + markdown)
  report     compare measured communication against the closed forms

Exit codes: 0 ok, 2 configuration error, 3 protocol abort, 4 io error.
"""

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from .field import Field, FieldParams
from .pss import PackingConfig, PackedShare, PssError
from .transport import (
    PHASE_OFFLINE,
    PHASE_ONLINE,
    PartyRuntime,
    SocketFabric,
    TransportError,
    run_parties,
    stats_to_csv,
)
from . import offline as off
from . import linear as lin
from . import nonlinear as nl
from . import nn
from . import oracle
from . import complexity as cx
from . import kernels


class ConfigMismatch(Exception):
    pass


def _build_config(args) -> PackingConfig:
    try:
        fld = Field(FieldParams(args.ell, args.ellx))
        return PackingConfig(fld, args.n, args.k)
    except ValueError as exc:
        raise ConfigMismatch(str(exc))


def _add_common(p):
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--ell", type=int, default=31)
    p.add_argument("--ellx", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", type=Path, default=None, help="JSON defaults; flags win")


def _apply_config_file(args, argv):
    if args.config is None:
        return
    try:
        loaded = json.loads(args.config.read_text())
    except OSError as exc:
        raise off.IoError(str(exc))
    explicit = {a.split("=")[0].lstrip("-").replace("-", "_") for a in argv if a.startswith("--")}
    for key, val in loaded.items():
        attr = key.replace("-", "_")
        if hasattr(args, attr) and attr not in explicit:
            setattr(args, attr, val)


_META_KEYS = ("ell", "ellx", "n", "k", "pid")


def _meta(cfg, pid):
    return np.array([cfg.field.ell, cfg.field.ell_x, cfg.n, cfg.k, pid], dtype=np.int64)


def _check_meta(meta, cfg, path):
    got = dict(zip(_META_KEYS, (int(x) for x in meta)))
    want = {"ell": cfg.field.ell, "ellx": cfg.field.ell_x, "n": cfg.n, "k": cfg.k}
    for key, val in want.items():
        if got[key] != val:
            raise ConfigMismatch(f"{path}: file has {key}={got[key]}, config wants {val}")
    return got["pid"]


# -- share -------------------------------------------------------------------------


def cmd_share(args):
    cfg = _build_config(args)
    rng = np.random.default_rng(args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if args.role == "client":
            image = np.load(args.data)
            grids = nn.share_input(cfg, image, rng)
            for pid in range(1, cfg.n + 1):
                np.savez(
                    out / f"input_party_{pid}.npz",
                    meta=_meta(cfg, pid),
                    shape=np.array(image.shape, dtype=np.int64),
                    value=grids[pid - 1],
                )
        else:
            model = nn.ModelGraph.load(args.data)
            parties = nn.share_model(cfg, model, rng)
            meta_strings = _arch_strings(model)
            for pid in range(1, cfg.n + 1):
                arrays = {"meta": _meta(cfg, pid), "arch": np.array(meta_strings)}
                for li, entry in parties[pid - 1].items():
                    arrays[f"L{li}_w"] = entry["w"]
                    arrays[f"L{li}_b"] = entry["b"]
                    if "rows" in entry:
                        arrays[f"L{li}_rows"] = np.array(entry["rows"], dtype=np.int64)
                np.savez(out / f"model_party_{pid}.npz", **arrays)
    except OSError as exc:
        raise off.IoError(str(exc))
    print(f"wrote {cfg.n} {args.role} share files to {out}")
    return 0


def _arch_strings(model: nn.ModelGraph):
    meta = [f"input:{','.join(map(str, model.input_shape))}"]
    for layer in model.layers:
        if layer.kind == "conv2d":
            meta.append(f"conv2d:{layer.out_channels},{layer.kernel},{layer.stride},{layer.padding}")
        elif layer.kind == "maxpool2d":
            meta.append(f"maxpool2d:{layer.size}")
        elif layer.kind == "dense":
            meta.append(f"dense:{layer.out_features}")
        else:
            meta.append(layer.kind)
    return meta


def _arch_from_strings(meta):
    input_shape = tuple(int(x) for x in meta[0].split(":")[1].split(","))
    layers = []
    for entry in meta[1:]:
        kind, _, rest = entry.partition(":")
        if kind == "conv2d":
            co, kk, s, p = (int(x) for x in rest.split(","))
            layers.append(nn.Conv2d(co, kk, s, p))
        elif kind == "relu":
            layers.append(nn.ReLU())
        elif kind == "maxpool2d":
            layers.append(nn.MaxPool2d(int(rest)))
        elif kind == "flatten":
            layers.append(nn.Flatten())
        elif kind == "dense":
            layers.append(nn.Dense(int(rest)))
        else:
            raise ConfigMismatch(f"unknown layer kind {kind!r} in share file")
    return nn.ModelGraph(input_shape, layers)


def _load_party_shares(cfg, model_dir, input_dir, pid):
    try:
        mdata = np.load(Path(model_dir) / f"model_party_{pid}.npz", allow_pickle=False)
        idata = np.load(Path(input_dir) / f"input_party_{pid}.npz", allow_pickle=False)
    except OSError as exc:
        raise off.IoError(str(exc))
    _check_meta(mdata["meta"], cfg, model_dir)
    _check_meta(idata["meta"], cfg, input_dir)
    model = _arch_from_strings([str(s) for s in mdata["arch"]])
    shares = {}
    for li in range(len(model.layers)):
        if f"L{li}_w" in mdata:
            entry = {"w": mdata[f"L{li}_w"], "b": mdata[f"L{li}_b"]}
            if f"L{li}_rows" in mdata:
                entry["rows"] = int(mdata[f"L{li}_rows"])
            shares[li] = entry
    return model, shares, idata["value"]


# -- offline provisioning -----------------------------------------------------------


def _make_store(cfg, rt, args, model):
    if args.offline == "dealer":
        dealer = off.Dealer(cfg, args.seed + 10_000)
        budget = nn.randomness_budget(cfg, model)
        stores = [off.RandomnessStore(cfg) for _ in range(cfg.n)]
        dealer.fill_stores(stores, budget)
        return stores[rt.pid - 1]
    return off.RandomnessStore(cfg, rt, auto=True)


def _infer_party(rt, cfg, args, model, model_shares, input_share):
    store = _make_store(cfg, rt, args, model)
    rt.set_phase(PHASE_ONLINE)
    vec = nn.infer_secure(rt, cfg, store, model, model_shares, input_share)
    logits = nn.reveal_output(rt, cfg, vec)
    return vec, logits


def _write_logits_csv(path, logits):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "logit"])
        for i, v in enumerate(logits):
            w.writerow([i, repr(float(v))])


# -- run-party / simulate -------------------------------------------------------------


def _load_hosts(path, n):
    try:
        entries = json.loads(Path(path).read_text())
    except OSError as exc:
        raise off.IoError(str(exc))
    if len(entries) != n:
        raise ConfigMismatch(f"hosts file lists {len(entries)} parties, config wants {n}")
    return [(e["host"], int(e["port"])) for e in entries]


def cmd_run_party(args):
    cfg = _build_config(args)
    model, model_shares, input_share = _load_party_shares(cfg, args.model, args.input, args.party)
    hosts = _load_hosts(args.hosts, cfg.n)
    fabric = SocketFabric(args.party, hosts, timeout=args.timeout)
    try:
        rt = PartyRuntime(args.party, cfg.n, fabric, seed=args.seed)
        vec, logits = _infer_party(rt, cfg, args, model, model_shares, input_share)
    finally:
        fabric.close(args.party)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    np.savez(out / f"output_party_{args.party}.npz", meta=_meta(cfg, args.party), value=vec.value, length=vec.length)
    _write_logits_csv(out / f"logits_party_{args.party}.csv", logits)
    if args.stats:
        Path(args.stats).write_text(stats_to_csv([rt.stats]))
    print(f"party {args.party}: logits {np.array2string(np.asarray(logits), precision=5)}")
    return 0


def cmd_simulate(args):
    cfg = _build_config(args)
    rng = np.random.default_rng(args.seed)
    model = nn.ModelGraph.load(args.model)
    image = np.load(args.input)
    model_parties = nn.share_model(cfg, model, rng)
    input_grids = nn.share_input(cfg, image, rng)

    def party(rt):
        vec, logits = _infer_party(
            rt, cfg, args, model, model_parties[rt.pid - 1], input_grids[rt.pid - 1]
        )
        return logits, rt.stats

    results = run_parties(cfg.n, party, seed=args.seed, latency_rtt_ms=args.latency_ms)
    logits = results[0][0]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_logits_csv(out / "logits.csv", logits)
    if args.stats:
        Path(args.stats).write_text(stats_to_csv([r[1] for r in results]))
    ref = oracle.plaintext_infer_float(cfg.field, model, image)
    print("secure logits:", np.array2string(np.asarray(logits), precision=5))
    print("oracle logits:", np.array2string(np.asarray(ref), precision=5))
    print("argmax:", int(np.argmax(logits)))
    return 0


# -- bench ---------------------------------------------------------------------------


def _bench_kernels(repeats=3, size=200_000):
    """Time both arithmetic backends on identical data; returns rows."""
    rows = []
    rng = np.random.default_rng(0)
    p, ell = (1 << 31) - 1, 31
    a = rng.integers(0, p, size=size, dtype=np.uint64)
    b = rng.integers(0, p, size=size, dtype=np.uint64)
    ma = rng.integers(0, p, size=(128, 128), dtype=np.uint64)
    for name in kernels.available_backends():
        impl = kernels.get_impl(name)
        impl.mul_mod(a[:8], b[:8], p, ell)  # warm any jit cache
        impl.matmul_mod(ma, ma, p, ell)
        t0 = time.perf_counter()
        for _ in range(repeats):
            impl.mul_mod(a, b, p, ell)
        t_mul = (time.perf_counter() - t0) / repeats * 1000
        t0 = time.perf_counter()
        for _ in range(repeats):
            impl.matmul_mod(ma, ma, p, ell)
        t_mat = (time.perf_counter() - t0) / repeats * 1000
        rows.append({"backend": name, "mul_ms": round(t_mul, 3), "matmul_ms": round(t_mat, 3)})
    return rows


def _measure(rt, store, fn):
    e0 = rt.stats.elements_sent(PHASE_ONLINE) + rt.stats.elements_recvd(PHASE_ONLINE)
    r0 = rt.stats.rounds[PHASE_ONLINE]
    t0 = time.perf_counter()
    fn()
    wall = (time.perf_counter() - t0) * 1000
    return {
        "rounds": rt.stats.rounds[PHASE_ONLINE] - r0,
        "elements": rt.stats.elements_sent(PHASE_ONLINE) + rt.stats.elements_recvd(PHASE_ONLINE) - e0,
        "wall_ms": round(wall, 3),
    }


def _bench_protocols(cfg, seed):
    """Microbenchmark the online protocols at one (n, k); returns rows with
    measured rounds/elements on a non-P1 party."""
    f = cfg.field
    d, k = cfg.d, cfg.k
    rng = np.random.default_rng(seed)
    u, v = 8, 8
    m_pool = 4
    batch = 8
    x = cfg.share(f.random(rng, (k, batch)), d, rng)
    y = cfg.share(f.random(rng, (k, batch)), d, rng)
    a = cfg.share(lin.pack_vector(cfg, f.random(rng, u)), d, rng)
    A = lin.share_grid(cfg, lin.pack_matrix_rb(cfg, f.random(rng, (u, v))), rng)
    spa = lin.share_grid(cfg, f.encode_int(rng.integers(-2000, 2000, (k, u, u))), rng)
    spb = lin.share_grid(cfg, f.encode_int(rng.integers(-2000, 2000, (k, u, v))), rng)
    vals = cfg.share(f.encode_int(rng.integers(-2000, 2000, (k, batch))), d, rng)
    pool = cfg.share(f.encode_int(rng.integers(-2000, 2000, (k, m_pool * batch))), d, rng)

    plan = [
        ("vec_mat_mult", {"u": u, "v": v}),
        ("pmat_mult_trunc", {"u": u, "m": v}),
        ("relu", {"batch": batch}),
        ("maxpool", {"m": m_pool, "batch": batch}),
    ]

    def party(rt):
        store = off.RandomnessStore(cfg, rt, auto=True)
        pid = rt.pid
        rt.set_phase(PHASE_ONLINE)
        meas = {}
        meas["vec_mat_mult"] = _measure(
            rt, store, lambda: lin.vec_mat_mult(
                rt, cfg, store, lin.PackedVector(a[pid - 1], u), lin.PackedMatrixRB(A[pid - 1], (u, v))
            )
        )
        meas["pmat_mult_trunc"] = _measure(
            rt, store, lambda: lin.pmat_mult_trunc(
                rt, cfg, store, lin.PackedMatrixSP(spa[pid - 1], (u, u)), lin.PackedMatrixSP(spb[pid - 1], (u, v))
            )
        )
        meas["relu"] = _measure(
            rt, store, lambda: nl.relu(rt, cfg, store, PackedShare(pid, vals[pid - 1], d))
        )
        meas["maxpool"] = _measure(
            rt, store, lambda: nl.maxpool(
                rt, cfg, store, PackedShare(pid, pool[pid - 1].reshape(m_pool, batch), d)
            )
        )
        meas["offline_elements"] = rt.stats.elements_sent(PHASE_OFFLINE) + rt.stats.elements_recvd(PHASE_OFFLINE)
        return meas

    results = run_parties(cfg.n, party, seed=seed)
    meas = results[1]  # non-P1 party
    rows = []
    for name, params in plan:
        row = {
            "n": cfg.n,
            "k": cfg.k,
            "ell": f.ell,
            "protocol": name,
            "phase": PHASE_ONLINE,
            "params": ";".join(f"{kk}={vv}" for kk, vv in params.items()),
        }
        row.update(meas[name])
        rows.append(row)
    return rows


_BENCH_FIELDS = ["n", "k", "ell", "protocol", "phase", "params", "rounds", "elements", "wall_ms"]


def cmd_bench(args):
    cfg_rows = []
    grid = [(5, 2), (7, 2), (7, 3), (11, 2), (11, 3), (11, 4)]
    if args.grid != "all":
        n_sel, k_sel = (int(x) for x in args.grid.split(","))
        grid = [(n_sel, k_sel)]
    for n, k in grid:
        fld = Field(FieldParams(args.ell, args.ellx))
        cfg = PackingConfig(fld, n, k)
        cfg_rows.extend(_bench_protocols(cfg, args.seed))
    kernel_rows = _bench_kernels()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "protocols.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=_BENCH_FIELDS)
        w.writeheader()
        w.writerows(cfg_rows)
    with open(out / "kernels.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["backend", "mul_ms", "matmul_ms"])
        w.writeheader()
        w.writerows(kernel_rows)
    md = io.StringIO()
    md.write("| n | k | protocol | rounds | elements | wall ms |\n")
    md.write("|---|---|----------|--------|----------|---------|\n")
    for r in cfg_rows:
        md.write(f"| {r['n']} | {r['k']} | {r['protocol']} | {r['rounds']} | {r['elements']} | {r['wall_ms']} |\n")
    md.write("\n| kernel backend | mul ms | matmul ms |\n|---|---|---|\n")
    for r in kernel_rows:
        md.write(f"| {r['backend']} | {r['mul_ms']} | {r['matmul_ms']} |\n")
    (out / "bench.md").write_text(md.getvalue())
    print(md.getvalue())
    return 0


# -- report ---------------------------------------------------------------------------


def cmd_report(args):
    deviations = 0
    lines = ["protocol,n,k,params,measured_rounds,predicted_rounds,measured_elements,predicted_elements,deviation"]
    for path in args.stats_files:
        try:
            with open(path, newline="") as fh:
                rows = list(csv.DictReader(fh))
        except OSError as exc:
            raise off.IoError(str(exc))
        for row in rows:
            fld = Field(FieldParams(int(row["ell"])))
            cfg = PackingConfig(fld, int(row["n"]), int(row["k"]))
            params = {}
            for item in row["params"].split(";"):
                key, _, val = item.partition("=")
                params[key] = int(val)
            pred = cx.predict(cfg, row["protocol"], **params)
            dev = int(
                pred["rounds"] != int(row["rounds"]) or pred["elements"] != int(row["elements"])
            )
            deviations += dev
            lines.append(
                f"{row['protocol']},{row['n']},{row['k']},{row['params']},"
                f"{row['rounds']},{pred['rounds']},{row['elements']},{pred['elements']},{dev}"
            )
    report = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(report)
    print(report)
    if deviations:
        print(f"{deviations} deviation(s) from the closed forms", file=sys.stderr)
        return 3
    print("all measurements match the closed forms")
    return 0


# -- entry point ------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="pssnn")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("share", help="split plaintext data into per-party share files")
    _add_common(p)
    p.add_argument("--role", choices=["client", "owner"], required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(fn=cmd_share)

    p = sub.add_parser("run-party", help="run one party over TCP")
    _add_common(p)
    p.add_argument("--party", type=int, required=True)
    p.add_argument("--hosts", type=Path, required=True)
    p.add_argument("--model", type=Path, required=True, help="model share directory")
    p.add_argument("--input", type=Path, required=True, help="input share directory")
    p.add_argument("--offline", choices=["dealer", "interactive"], default="interactive")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--stats", type=Path, default=None)
    p.add_argument("--timeout", type=float, default=60.0)
    p.set_defaults(fn=cmd_run_party)

    p = sub.add_parser("simulate", help="run all parties in-process")
    _add_common(p)
    p.add_argument("--model", type=Path, required=True, help="plaintext model npz")
    p.add_argument("--input", type=Path, required=True, help="plaintext input npy")
    p.add_argument("--offline", choices=["dealer", "interactive"], default="interactive")
    p.add_argument("--latency-ms", type=float, default=0.0)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--stats", type=Path, default=None)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("bench", help="kernel and protocol microbenchmarks")
    p.add_argument("--ell", type=int, default=31)
    p.add_argument("--ellx", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", default="all", help="'all' or a single 'n,k' pair")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("report", help="measured vs predicted communication")
    p.add_argument("stats_files", nargs="+")
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(fn=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "config", None) is not None:
            _apply_config_file(args, sys.argv[1:] if argv is None else argv)
        return args.fn(args)
    except ConfigMismatch as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except off.IoError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 4
    except (TransportError, PssError, off.OfflineError, nn.ModelError) as exc:
        print(f"protocol abort: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
