"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 statistical degeneracy (e.g. no contributing trajectories).
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
import tempfile
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .catalog import CATALOG, DEMO_ALPHA, DEMO_JUMP_COUNTS, catalog_model, coherent_state
from .config import DEFAULT_TOL
from .darkstates import certify_trace_preservation
from .errors import (
    DegenerateEstimateError,
    DomainError,
    IntegrationError,
    ModelFormatError,
    ModelInvalidError,
    NumericalDegeneracyError,
    TheoremViolationError,
    UnravelError,
)
from .jumptime import evolve_jumptime, waiting_time
from .model import LindbladModel, load_model, require_state
from .phasespace import grid, wigner, write_grid
from .trajectories import (
    NO_LIMIT,
    RNG_STREAM_VERSION,
    empirical_waiting_times,
    run_ensemble,
)
from .walltime import evolve_walltime

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_STATS = 0, 2, 3, 4


class ConfigError(UnravelError):
    pass


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


# --- parsing helpers ---------------------------------------------------------


def _parse_kv(items: Sequence[str] | None, what: str) -> dict[str, float]:
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"{what} expects k=v, got '{item}'")
        try:
            out[key.strip()] = float(val)
        except ValueError:
            raise ConfigError(f"{what} value for '{key}' is not a number: '{val}'") from None
    return out


def _parse_floats(text: str | None) -> list[float]:
    if not text:
        return []
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got '{text}'") from None


def _parse_ints(text: str | None) -> list[int]:
    if not text:
        return []
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got '{text}'") from None


def build_model(source: str, params: dict[str, float], tol=DEFAULT_TOL) -> LindbladModel:
    if source in CATALOG:
        if "cutoff" in params:
            params = dict(params, cutoff=int(params["cutoff"]))
        try:
            return catalog_model(source, **params)
        except TypeError as exc:
            raise ConfigError(f"bad parameters for catalog model '{source}': {exc}") from None
    path = Path(source)
    if not path.exists():
        raise ConfigError(f"'{source}' is neither a catalog model {sorted(CATALOG)} nor a file")
    if params:
        raise ConfigError("--set only applies to catalog models")
    return load_model(path, tol)


def parse_state(text: str, dim: int) -> np.ndarray:
    """Density matrix from a state description.

    ``fock:N`` (alias ``basis:N``), ``plus``, ``minus``, ``coherent:RE,IM``,
    ``demo`` (coherent alpha = 2 exp(i pi/4)), ``bloch:X,Y,Z`` (qubits),
    ``file:PATH`` (.npy, or JSON list of rows of [re, im] pairs).
    """
    kind, _, arg = text.partition(":")
    if kind in ("fock", "basis"):
        n = int(arg)
        if not 0 <= n < dim:
            raise ConfigError(f"basis index {n} outside dimension {dim}")
        v = np.zeros(dim, dtype=complex)
        v[n] = 1
        return np.outer(v, v.conj())
    if kind in ("plus", "minus"):
        if dim != 2:
            raise ConfigError(f"'{kind}' needs a qubit model")
        v = np.array([1, 1 if kind == "plus" else -1], dtype=complex) / np.sqrt(2)
        return np.outer(v, v.conj())
    if kind in ("coherent", "demo"):
        if kind == "demo":
            alpha = DEMO_ALPHA
        else:
            re, im = (_parse_floats(arg) + [0.0, 0.0])[:2]
            alpha = complex(re, im)
        v = coherent_state(alpha, dim)
        return np.outer(v, v.conj())
    if kind == "bloch":
        if dim != 2:
            raise ConfigError("bloch states need a qubit model")
        r = _parse_floats(arg)
        if len(r) != 3:
            raise ConfigError("bloch state needs three components")
        from .catalog import SX, SY, SZ

        return 0.5 * (np.eye(2) + r[0] * SX + r[1] * SY + r[2] * SZ)
    if kind == "file":
        path = Path(arg)
        if not path.exists():
            raise ConfigError(f"state file '{arg}' not found")
        if path.suffix == ".npy":
            rho = np.load(path)
        else:
            data = json.loads(path.read_text(encoding="utf-8"))
            rho = np.array([[complex(a, b) for a, b in row] for row in data])
        if rho.ndim == 1:
            rho = np.outer(rho, rho.conj())
        if rho.shape != (dim, dim):
            raise ConfigError(f"state file has shape {rho.shape}, model dim is {dim}")
        return rho
    raise ConfigError(f"unknown state '{text}'")


# --- output ------------------------------------------------------------------


class Output:
    """Writes into a temporary directory and promotes files only on success."""

    def __init__(self, out_dir: Path, fmt: str, meta: dict):
        self.out_dir = out_dir
        self.fmt = fmt
        self.meta = meta
        self.tmp = Path(tempfile.mkdtemp(prefix=".unravel-", dir=out_dir))
        self.files: list[str] = []

    def header_lines(self) -> list[str]:
        return [f"# {k}: {v}" for k, v in self.meta.items()]

    def table(self, name: str, columns: Sequence[str], rows: Sequence[Sequence]) -> None:
        if self.fmt == "json":
            doc = {"meta": self.meta, "columns": list(columns),
                   "rows": [[_json_num(v) for v in r] for r in rows]}
            self._write(f"{name}.json", json.dumps(doc, indent=1) + "\n")
        else:
            lines = self.header_lines() + [",".join(columns)]
            lines += [",".join(_csv_val(v) for v in r) for r in rows]
            self._write(f"{name}.csv", "\n".join(lines) + "\n")

    def states(self, name: str, labels: Sequence, states: Sequence[np.ndarray],
               label_name: str) -> None:
        rows = []
        for lab, s in zip(labels, states):
            d = s.shape[0]
            for i in range(d):
                for j in range(d):
                    rows.append((lab, i, j, s[i, j].real, s[i, j].imag))
        self.table(name, [label_name, "row", "col", "re", "im"], rows)

    def text(self, name: str, body: str) -> None:
        self._write(name, "\n".join(self.header_lines()) + "\n" + body)

    def wigner(self, name: str, w, extra: dict) -> None:
        write_grid(w, self.tmp / name, header={**self.meta, **extra})
        self.files.append(name)

    def _write(self, name: str, content: str) -> None:
        (self.tmp / name).write_text(content, encoding="utf-8")
        self.files.append(name)

    def commit(self) -> list[Path]:
        paths = []
        for name in self.files:
            dest = self.out_dir / name
            shutil.move(str(self.tmp / name), dest)
            paths.append(dest)
        shutil.rmtree(self.tmp, ignore_errors=True)
        return paths

    def abort(self) -> None:
        shutil.rmtree(self.tmp, ignore_errors=True)


def _csv_val(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return _fmt(v)
    return str(v)


def _json_num(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


# --- commands ----------------------------------------------------------------


def cmd_evolve_jumptime(args, model, rho0, out: Output) -> str:
    seq = evolve_jumptime(model, rho0, args.n_max)
    ns = list(range(len(seq)))
    out.states("states", ns, seq.states, "n")
    out.table("traces", ["n", "trace"], [(n, t) for n, t in zip(ns, seq.traces)])
    return f"{len(seq)} jumptime states, final trace {_fmt(seq.traces[-1])}"


def cmd_evolve_walltime(args, model, rho0, out: Output) -> str:
    times = _parse_floats(args.times)
    if not times:
        raise ConfigError("--times is required")
    states = evolve_walltime(model, rho0, times)
    out.states("states", times, states, "t")
    out.table("traces", ["t", "trace"], [(t, np.trace(s).real) for t, s in zip(times, states)])
    return f"{len(states)} walltime states"


def cmd_sample(args, model, rho0, out: Output) -> str:
    times = _parse_floats(args.times)
    ns = _parse_ints(args.n_list)
    horizon = args.horizon if args.horizon is not None else 60.0 / model.gamma
    if times and max(times) > horizon:
        raise ConfigError("--times beyond --horizon")
    run = run_ensemble(model, rho0, n_samples=args.samples, seed=args.seed, max_time=horizon,
                       max_jumps=NO_LIMIT if times else max(ns + [args.waiting_from + 1, 1]),
                       capture_times=times, capture_jumps=ns, threads=args.threads)
    if times:
        rows = []
        for t in times:
            rho = run.walltime_mean(t)
            d = rho.shape[0]
            rows += [(t, i, j, rho[i, j].real, rho[i, j].imag) for i in range(d) for j in range(d)]
        out.table("walltime_average", ["t", "row", "col", "re", "im"], rows)
    if ns:
        rows, counts = [], []
        for n in ns:
            rho, k = run.jumptime_mean(n)
            d = rho.shape[0]
            rows += [(n, i, j, rho[i, j].real, rho[i, j].imag) for i in range(d) for j in range(d)]
            counts.append((n, k, args.samples, k / args.samples))
        out.table("jumptime_average", ["n", "row", "col", "re", "im"], rows)
        out.table("jumptime_counts", ["n", "n_contributing", "n_samples", "fraction"], counts)
    hist = empirical_waiting_times(run.records, args.waiting_from, bins=args.bins)
    out.table("waiting_histogram", ["left", "right", "count", "density"],
              [(hist.edges[i], hist.edges[i + 1], hist.counts[i], hist.density[i])
               for i in range(len(hist.counts))])
    if args.log:
        out.text("trajectories.jsonl", "\n".join(r.to_json() for r in run.records) + "\n")
    if args.reference:
        if times:
            ref = evolve_walltime(model, rho0, times)
            out.states("walltime_reference", times, ref, "t")
        if ns:
            seq = evolve_jumptime(model, rho0, max(ns))
            out.states("jumptime_reference", ns, [seq.states[n] for n in ns], "n")
    return f"{args.samples} trajectories, {hist.n_contributing} waits after jump {args.waiting_from}"


def cmd_check(args, model, rho0, out: Output) -> str:
    cert = certify_trace_preservation(model)
    rep = cert.report
    out.table("check", ["key", "value"], [
        ("dim", model.dim),
        ("dark_dim", rep.dark_dim),
        ("trace_preserving", cert.is_tp),
        ("completeness_deficiency", cert.deficiency),
        ("min_imag_eigenvalue", rep.min_imag),
    ])
    out.table("spectrum", ["re", "im"], [(z.real, z.imag) for z in rep.eigenvalues])
    if rep.dark_dim:
        d = model.dim
        out.table("dark_basis", ["vector", "component", "re", "im"],
                  [(k, i, rep.dark_basis[i, k].real, rep.dark_basis[i, k].imag)
                   for k in range(rep.dark_dim) for i in range(d)])
    return cert.summary()


def cmd_waiting_time(args, model, rho0, out: Output) -> str:
    seq = evolve_jumptime(model, rho0, args.from_jump)
    rho_n = seq.states[args.from_jump]
    if args.taus:
        taus = _parse_floats(args.taus)
    else:
        taus = np.linspace(0.0, args.tau_max / model.gamma, args.points)
    curve = waiting_time(model, rho_n, taus, from_jump=args.from_jump)
    out.table("waiting_time", ["tau", "density"], list(zip(curve.taus, curve.densities)))
    return f"waiting-time density after jump {args.from_jump} on {len(taus)} points"


def cmd_wigner(args, model, rho0, out: Output) -> str:
    ns = _parse_ints(args.n_list) or list(DEMO_JUMP_COUNTS)
    seq = evolve_jumptime(model, rho0, max(ns))
    xs = grid(args.extent, args.points)
    for n in ns:
        w = wigner(seq.states[n], xs, xs)
        out.wigner(f"wigner_n{n}.txt", w, {"n": n, "trace_rho_n": _fmt(seq.traces[n])})
    return f"{len(ns)} Wigner grids"


COMMANDS = {
    "evolve-jumptime": cmd_evolve_jumptime,
    "evolve-walltime": cmd_evolve_walltime,
    "sample": cmd_sample,
    "check": cmd_check,
    "waiting-time": cmd_waiting_time,
    "wigner": cmd_wigner,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", required=True, help="catalog name or model file path")
    common.add_argument("--set", action="append", metavar="K=V", help="catalog parameter")
    common.add_argument("--state", default=None,
                        help="fock:N, plus, minus, coherent:RE,IM, demo, bloch:X,Y,Z or "
                             "file:PATH (default fock:0)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--tol", action="append", metavar="K=V", help="tolerance override")

    ap = argparse.ArgumentParser(prog="unravel", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("replay", help="re-run the command recorded in an output file header")

    p = sub.add_parser("evolve-jumptime", parents=[common], help="iterate the jump map")
    p.add_argument("--n-max", type=int, required=True)

    p = sub.add_parser("evolve-walltime", parents=[common], help="Lindblad evolution")
    p.add_argument("--times", required=True, help="comma-separated times")

    p = sub.add_parser("sample", parents=[common], help="quantum-jump trajectories")
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=float, default=None, help="default 60/gamma")
    p.add_argument("--times", default=None, help="walltime capture times")
    p.add_argument("--n-list", default=None, help="jump counts to average at")
    p.add_argument("--waiting-from", type=int, default=0, help="histogram t_{n+1} - t_n")
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--log", action="store_true", help="write trajectories.jsonl")
    p.add_argument("--reference", action="store_true",
                   help="also write the deterministic walltime/jumptime reference")

    sub.add_parser("check", parents=[common], help="dark states and trace preservation")

    p = sub.add_parser("waiting-time", parents=[common], help="waiting-time density")
    p.add_argument("--from-jump", type=int, default=0)
    p.add_argument("--taus", default=None, help="comma-separated grid")
    p.add_argument("--tau-max", type=float, default=40.0, help="in units of 1/gamma")
    p.add_argument("--points", type=int, default=200)

    p = sub.add_parser("wigner", parents=[common], help="Wigner grids of jumptime states")
    p.add_argument("--n-list", default=None, help="default 0,2,5,10")
    p.add_argument("--extent", type=float, default=5.0)
    p.add_argument("--points", type=int, default=201)
    return ap


def _metadata(args, model: LindbladModel) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "threads")}
    return {
        "tool": f"unravel {__version__}",
        "command": args.command,
        "model": model.label or args.model,
        "model_hash": model.fingerprint(),
        "seed": getattr(args, "seed", ""),
        "rng_stream": RNG_STREAM_VERSION,
        "config": json.dumps(config, sort_keys=True),
    }


def argv_from_config(config: dict) -> list[str]:
    """Rebuild a command line from the ``config`` metadata of an output file."""
    argv = [config["command"]]
    for key, val in config.items():
        if key == "command" or val is None or val is False:
            continue
        flag = "--" + key.replace("_", "-")
        if val is True:
            argv.append(flag)
        elif isinstance(val, list):
            for item in val:
                argv += [flag, str(item)]
        else:
            argv += [flag, str(val)]
    return argv


def argv_from_header(path: str | Path) -> list[str]:
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.startswith("#"):
            break
        key, _, val = line[1:].partition(":")
        if key.strip() == "config":
            return argv_from_config(json.loads(val))
    raise ConfigError(f"{path} has no config metadata line")


def run(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv[:1] == ["replay"]:
        return _replay(argv[1:])
    parser = build_parser()
    args = parser.parse_args(argv)
    out = None
    try:
        tol = DEFAULT_TOL.with_overrides(**_parse_kv(args.tol, "--tol"))
        model = build_model(args.model, _parse_kv(args.set, "--set"), tol)
        rho0 = require_state(parse_state(args.state or "fock:0", model.dim), tol)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        out = Output(out_dir, args.format, _metadata(args, model))
        message = COMMANDS[args.command](args, model, rho0, out)
        paths = out.commit()
    except DegenerateEstimateError as exc:
        _fail(out)
        print(f"unravel: statistical degeneracy: {exc}", file=sys.stderr)
        return EXIT_STATS
    except (ConfigError, ModelFormatError, ModelInvalidError, DomainError, KeyError,
            ValueError, OSError) as exc:
        _fail(out)
        print(f"unravel: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalDegeneracyError, IntegrationError, TheoremViolationError,
            ArithmeticError) as exc:
        _fail(out)
        print(f"unravel: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(message)
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


def _replay(argv: list[str]) -> int:
    ap = argparse.ArgumentParser(prog="unravel replay",
                                 description="re-run the command recorded in an output header")
    ap.add_argument("file")
    ap.add_argument("--out", default=".")
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args(argv)
    try:
        rebuilt = argv_from_header(args.file)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"unravel: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    extra = ["--out", args.out]
    if args.threads is not None and rebuilt[0] == "sample":
        extra += ["--threads", str(args.threads)]
    return run(rebuilt + extra)


def _fail(out: Output | None) -> None:
    if out is not None:
        out.abort()


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
