"""Command-line front end: `herrlt fg|op|mod|cx|coh|pair|corpus ...`.

Every command writes deterministic text.  Timings are only printed when
`--timings` is passed, so reports of identical jobs compare byte for byte.

Exit codes: 0 success, 2 validation failure, 3 non-stabilized result under
`--strict`, 4 I/O error.
"""

from __future__ import annotations

import argparse
import fnmatch
import os
import sys
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

from .cohomlinalg import CohomologyError, complex_cohomology, psi_fixed_and_coker
from .complexes import BUILDERS, ComplexError, build_complex, d2_residual
from .formalgroup import FormalGroup
from .frobpsi import OperatorContext
from .okring import INF, BaseField, OKElem, OKError
from .phigamma import (EtaleModule, ModuleElem, ModuleError, character_module, chi_lt_module, dual,
                       ft_unipotent_module, module_from_text, module_to_text, rank2_constant_module,
                       residue_pairing, tensor, trivial_module, validate)
from .series import LaurentElem

EXIT_OK, EXIT_INVALID, EXIT_UNSTABLE, EXIT_IO = 0, 2, 3, 4
OUTPUT_DIR_ENV = "HERRLT_OUTPUT_DIR"
MODULE_MARKER = "--- module ---"


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------------ config


def _parse_ints(text: str) -> list[int]:
    return [int(c) for c in text.strip().strip("[]").split(",") if c.strip()]


@dataclass
class JobConfig:
    """One computation: context, module source, complex kind, schedule, output and seed."""

    name: str = "job"
    p: int = 3
    family: str = "unramified"
    g: str = "0,1"
    n: int = 1
    xprec: int = 24
    gens: str = ""
    module: str = "trivial"
    c_phi: str = ""
    exponents: str = ""
    kind: str = "lt"
    task: str = "cohomology"
    schedule: str = ""
    degrees: str = ""
    output: str = ""
    seed: int = 0
    group_degree: int = 8

    @classmethod
    def from_text(cls, text: str, name: str = "job") -> "JobConfig":
        known = {f.name: f.type for f in fields(cls)}
        vals: dict[str, object] = {"name": name}
        for ln in text.splitlines():
            ln = ln.split("#", 1)[0].strip()
            if not ln:
                continue
            if "=" not in ln:
                raise ConfigError(f"expected key=value, got {ln!r}")
            k, v = (s.strip() for s in ln.split("=", 1))
            if k not in known:
                raise ConfigError(f"unknown key {k!r}")
            if known[k] in ("int", int):
                try:
                    vals[k] = int(v)
                except ValueError:
                    raise ConfigError(f"{k} must be an integer") from None
            else:
                vals[k] = v
        cfg = cls(**vals)
        cfg.validate()
        return cfg

    def to_text(self) -> str:
        return "".join(f"{f.name}={getattr(self, f.name)}\n" for f in fields(self) if f.name != "name")

    def validate(self) -> None:
        try:
            self.field()
        except OKError as e:
            raise ConfigError(str(e)) from None
        if self.n < 1:
            raise ConfigError("n must be at least 1")
        if self.xprec < 2:
            raise ConfigError("xprec must be at least 2")
        if self.task not in ("cohomology", "psi", "validate", "d2"):
            raise ConfigError(f"unknown task {self.task!r}")
        if self.kind not in BUILDERS:
            raise ConfigError(f"unknown complex kind {self.kind!r}")
        if self.schedule:
            s = self.schedule_list()
            if len(s) < 3 or any(a >= b for a, b in zip(s, s[1:])) or s[0] < 1:
                raise ConfigError("schedule must be at least 3 strictly increasing positive windows")
        _check_module_source(self.module)

    def field(self) -> BaseField:
        return BaseField(self.p, self.family, tuple(_parse_ints(self.g)))

    def schedule_list(self) -> list[int] | None:
        return _parse_ints(self.schedule) if self.schedule else None

    def degree_list(self) -> list[int] | None:
        return _parse_ints(self.degrees) if self.degrees else None

    def context(self) -> OperatorContext:
        return make_context(self.field(), self.n, self.gens, self.group_degree)

    def build_module(self, octx: OperatorContext | None = None) -> EtaleModule:
        octx = octx or self.context()
        M = builtin_module(octx, self.module, self.c_phi, self.exponents)
        M.xprec = self.xprec
        return M


def make_context(ctx: BaseField, n: int, gens: str = "", group_degree: int = 8) -> OperatorContext:
    g = None
    if gens:
        g = [ctx.elem(_parse_ints(part), n + 64) for part in gens.split(";") if part.strip()]
    return OperatorContext(ctx, n, g, None, group_degree)


# ------------------------------------------------------------- modules

BUILTIN = ("trivial", "chi_lt", "unramified_twist", "character", "rank2", "ft_unipotent")


def _check_module_source(source: str) -> None:
    if source.startswith("file:"):
        return
    if source.startswith("dual:"):
        return _check_module_source(source[5:])
    if source.startswith("tensor:"):
        parts = source[7:].split(",")
        if len(parts) != 2:
            raise ConfigError("tensor: takes two module names")
        for s in parts:
            _check_module_source(s)
        return
    if source not in BUILTIN:
        raise ConfigError(f"unknown module {source!r}")


def _parse_ok(ctx: BaseField, text: str, n: int) -> OKElem:
    text = text.strip()
    if text.startswith("["):
        if "mod" in text:
            return OKElem.parse(ctx, text).reduce(n)
        return ctx.elem(_parse_ints(text), n)
    return ctx.elem(int(text), n)


def builtin_module(octx: OperatorContext, source: str, c_phi: str = "", exponents: str = "") -> EtaleModule:
    """Modules by name: trivial, chi_lt, unramified_twist, character, rank2, ft_unipotent,
    `dual:<source>`, `tensor:<a>,<b>` and `file:<path>`."""
    ctx, n = octx.ctx, octx.n
    if source.startswith("file:"):
        return module_from_text(Path(source[5:]).read_text(), octx)
    if source.startswith("dual:"):
        return dual(builtin_module(octx, source[5:], c_phi, exponents), name=source)
    if source.startswith("tensor:"):
        a, b = source[7:].split(",")
        return tensor(builtin_module(octx, a, c_phi, exponents), builtin_module(octx, b, c_phi, exponents),
                      name=source)
    if source == "trivial":
        return trivial_module(octx)
    if source == "chi_lt":
        return chi_lt_module(octx, _parse_ok(ctx, c_phi, n) if c_phi else 1)
    if source == "unramified_twist":
        u = _parse_ok(ctx, c_phi, n) if c_phi else ctx.elem(-1, n)
        return character_module(octx, u, [1] * octx.d, 1, name="unramified_twist")
    if source == "character":
        if not c_phi:
            raise ModuleError("character module needs c_phi")
        return character_module(octx, _parse_ok(ctx, c_phi, n), [1] * octx.d, 1)
    if source == "rank2":
        return rank2_constant_module(octx)
    if source == "ft_unipotent":
        return ft_unipotent_module(octx, _parse_ints(exponents) if exponents else None)
    raise ModuleError(f"unknown module {source!r}")


def reduce_module(M: EtaleModule, k: int) -> EtaleModule:
    """M modulo pi^k over a fresh operator context at precision k."""
    if k > M.n:
        raise ModuleError("cannot raise the precision of a stored module")
    octx = M.octx
    new = OperatorContext(M.ctx, k, octx.gamma_gens, octx.zeta, octx.group.deg_prec)

    def red(A):
        return [[x.truncate(INF, k) for x in row] for row in A]

    GT = red(M.GammaTilde) if M.GammaTilde is not None else None
    return EtaleModule(new, red(M.Phi), [red(A) for A in M.Gamma], red(M.Delta), GT, M.ft, M.name, M.xprec)


def elem_to_text(m: ModuleElem) -> str:
    out = []
    for i, c in enumerate(m.coords):
        out.append(f"[coord {i}]")
        out.append(c.to_text())
    return "\n".join(out) + "\n"


def elem_from_text(ctx: BaseField, text: str) -> ModuleElem:
    chunks: list[list[str]] = []
    for ln in text.splitlines():
        if ln.startswith("[coord"):
            chunks.append([])
        elif ln.strip():
            if not chunks:
                raise ModuleError("element file must start with a [coord i] section")
            chunks[-1].append(ln)
    return ModuleElem([LaurentElem.from_text(ctx, "\n".join(c)) for c in chunks])


# ------------------------------------------------------------ complexes


def complex_file_text(kind: str, M: EtaleModule, source: str = "") -> str:
    C = build_complex(kind, M)
    head = C.to_text()
    if source:
        head += f"source={source}\n"
    return head + MODULE_MARKER + "\n" + module_to_text(M)


def read_complex_file(text: str) -> tuple[str, str, EtaleModule]:
    if MODULE_MARKER not in text:
        raise ComplexError("complex file carries no module section")
    head, body = text.split(MODULE_MARKER, 1)
    first = head.splitlines()[0]
    if not first.startswith("complex kind="):
        raise ComplexError("not a complex file")
    kind = first.split("kind=", 1)[1].split()[0]
    source = ""
    for ln in head.splitlines():
        if ln.startswith("source="):
            source = ln[len("source="):].strip()
    return kind, source, module_from_text(body.lstrip("\n"))


# ------------------------------------------------------------------ jobs


def _flag(b: bool) -> str:
    return "true" if b else "false"


def _factors(ks) -> str:
    return "[" + ",".join(str(k) for k in ks) + "]"


def run_job(cfg: JobConfig, timings: bool = False) -> tuple[str, bool]:
    """Run one job; returns (report text, every flagged quantity stabilized)."""
    octx = cfg.context()
    M = cfg.build_module(octx)
    head = [f"job={cfg.name}", f"field {M.ctx}", f"n={M.n}", f"module={cfg.module}", f"task={cfg.task}"]
    if cfg.task == "validate":
        rep = validate(M)
        return "\n".join(head + [str(rep), f"ok={_flag(rep.ok)}"]) + "\n", rep.ok
    if cfg.task == "d2":
        C = build_complex(cfg.kind, M)
        r = d2_residual(C, samples=5, seed=cfg.seed)
        ok = r == INF
        return "\n".join(head + [f"kind={cfg.kind}", f"d2_zero={_flag(ok)}"]) + "\n", ok
    if cfg.task == "psi":
        res = psi_fixed_and_coker(M, cfg.schedule_list())
        lines = head + [f"ker(psi-1): {_factors(res.kernel)} stabilized={_flag(res.kernel_stabilized)}",
                        f"coker(psi-1): {_factors(res.cokernel)} stabilized={_flag(res.cokernel_stabilized)}",
                        f"constants_in_kernel={_flag(res.constants_in_kernel)}"]
        return "\n".join(lines) + "\n", res.kernel_stabilized and res.cokernel_stabilized
    C = build_complex(cfg.kind, M)
    res = complex_cohomology(C, cfg.schedule_list(), degrees=cfg.degree_list())
    text = "\n".join(head + [f"kind={cfg.kind}"]) + "\n" + res.report()
    if timings:
        text += "".join(f"time window={b}: {t:.3f}s\n" for b, t in sorted(res.timings.items()))
    return text, all(res.stabilized.values())


# -------------------------------------------------------------- commands


def _add_field_args(ap: argparse.ArgumentParser, with_n: bool = True) -> None:
    ap.add_argument("--p", type=int, default=3)
    ap.add_argument("--family", default="unramified", choices=["unramified", "eisenstein"])
    ap.add_argument("--g", default="0,1", help="defining polynomial, ascending coefficients")
    if with_n:
        ap.add_argument("--n", type=int, default=3, help="pi-adic precision")


def _field(args) -> BaseField:
    return BaseField(args.p, args.family, tuple(_parse_ints(args.g)))


def _emit(text: str, out: str | None) -> None:
    if out:
        write_output(Path(out), text)
    else:
        sys.stdout.write(text)


def write_output(path: Path, text: str) -> None:
    """Overwrite `path` atomically (no appends, no partial files)."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def cmd_fg(args) -> int:
    ctx = _field(args)
    if args.fg_cmd == "law":
        G = FormalGroup(ctx, args.degree, args.n)
        _emit(G.F.to_text() + "\n", args.out)
    else:
        G = FormalGroup(ctx, 2, args.n)
        a = _parse_ok(ctx, args.a, G.work)
        _emit(G.endomorphism(a, args.xprec).to_text() + "\n", args.out)
    return EXIT_OK


def cmd_op(args) -> int:
    ctx = _field(args)
    x = LaurentElem.from_text(ctx, Path(args.input).read_text())
    octx = OperatorContext(ctx, x.n)
    if args.op_cmd == "phi":
        y = octx.phi(x)
    elif args.op_cmd == "psi":
        y = octx.psi(x)
    else:
        if args.a is None:
            raise ConfigError("gamma needs --a")
        a = _parse_ok(ctx, args.a, octx.hi_prec)
        if not a.is_unit():
            raise ConfigError("--a must be a unit")
        y = octx.gamma(a, x, args.xprec)
    _emit(y.to_text() + "\n", args.out)
    return EXIT_OK


def _module_cfg(args, module: str) -> JobConfig:
    cfg = JobConfig(p=args.p, family=args.family, g=args.g, n=args.n, xprec=args.xprec, gens=args.gens,
                    module=module, c_phi=args.c_phi, exponents=args.exponents)
    cfg.validate()
    return cfg


def cmd_mod(args) -> int:
    sub = args.mod_cmd
    if sub == "new":
        M = _module_cfg(args, args.builtin).build_module()
        _emit(module_to_text(M), args.out)
        return EXIT_OK
    if sub == "pair":
        return cmd_pair(args)
    M = module_from_text(Path(args.input).read_text())
    if sub == "validate":
        rep = validate(M)
        _emit(str(rep) + f"\nok={_flag(rep.ok)}\n", args.out)
        return EXIT_OK if rep.ok else EXIT_INVALID
    if sub == "dual":
        _emit(module_to_text(dual(M)), args.out)
        return EXIT_OK
    M2 = module_from_text(Path(args.other).read_text(), M.octx)
    _emit(module_to_text(tensor(M, M2)), args.out)
    return EXIT_OK


def cmd_pair(args) -> int:
    M = module_from_text(Path(args.module).read_text())
    m = elem_from_text(M.ctx, Path(args.m).read_text())
    F = elem_from_text(M.ctx, Path(args.f).read_text())
    if len(m.coords) != M.rank or len(F.coords) != M.rank:
        raise ConfigError("element rank does not match the module")
    _emit(f"pairing: {residue_pairing(M, m, F)}\n", args.out)
    return EXIT_OK


def cmd_cx(args) -> int:
    if args.cx_cmd == "build":
        if args.module:
            M, source = module_from_text(Path(args.module).read_text()), ""
        else:
            cfg = _module_cfg(args, args.builtin)
            M = cfg.build_module()
            source = f"{cfg.module};{cfg.c_phi};{cfg.exponents}"
        _emit(complex_file_text(args.kind, M, source), args.out)
        return EXIT_OK
    if args.module:
        M = module_from_text(Path(args.module).read_text())
    else:
        M = _module_cfg(args, args.builtin).build_module()
    kinds = [args.kind] if args.kind else [k for k in ("lt", "lt-psi", "ft", "ft-psi")
                                           if not k.startswith("ft") or M.GammaTilde is not None]
    lines, ok = [], True
    for k in kinds:
        r = d2_residual(build_complex(k, M), samples=args.samples, seed=args.seed)
        lines.append(f"{k}: d2_zero={_flag(r == INF)}")
        ok &= r == INF
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK if ok else EXIT_INVALID


def cmd_coh(args) -> int:
    if args.config:
        cfg = JobConfig.from_text(Path(args.config).read_text(), Path(args.config).stem)
        text, stable = run_job(cfg, args.timings)
        _emit(text, args.out or cfg.output or None)
        return EXIT_UNSTABLE if args.strict and not stable else EXIT_OK
    if not args.complex:
        raise ConfigError("coh run needs --complex or --config")
    kind, source, M = read_complex_file(Path(args.complex).read_text())
    if args.n is not None and args.n != M.n:
        if args.n < M.n:
            M = reduce_module(M, args.n)
        elif source:
            octx = OperatorContext(M.ctx, args.n, M.octx.gamma_gens, M.octx.zeta)
            source, c_phi, exps = source.split(";")
            xprec = M.xprec
            M = builtin_module(octx, source, c_phi, exps)
            M.xprec = xprec
        else:
            raise ConfigError("cannot raise the precision of a stored module without a source")
    schedule = _parse_ints(args.schedule) if args.schedule else None
    degrees = _parse_ints(args.degrees) if args.degrees else None
    res = complex_cohomology(build_complex(kind, M), schedule, degrees=degrees)
    text = res.report()
    if args.timings:
        text += "".join(f"time window={b}: {t:.3f}s\n" for b, t in sorted(res.timings.items()))
    _emit(text, args.out)
    return EXIT_UNSTABLE if args.strict and not all(res.stabilized.values()) else EXIT_OK


def corpus_dir() -> Path:
    return Path(str(resources.files("herrlt") / "corpus"))


def output_dir(default: Path) -> Path:
    env = os.environ.get(OUTPUT_DIR_ENV)
    return Path(env) if env else default


@dataclass
class CorpusOutcome:
    name: str
    matched: bool
    stable: bool
    report: str = field(repr=False, default="")


def run_corpus(pattern: str = "*", directory: Path | None = None, out: Path | None = None,
               update: bool = False) -> list[CorpusOutcome]:
    directory = directory or corpus_dir()
    out = out or output_dir(Path.cwd() / "corpus-out")
    results = []
    for path in sorted(directory.glob("*.cfg")):
        if not fnmatch.fnmatch(path.stem, pattern):
            continue
        cfg = JobConfig.from_text(path.read_text(), path.stem)
        text, stable = run_job(cfg)
        golden = path.with_suffix(".golden")
        if update:
            write_output(golden, text)
        matched = golden.exists() and golden.read_text() == text
        write_output(out / f"{path.stem}.report", text)
        results.append(CorpusOutcome(path.stem, matched, stable, text))
    return results


def cmd_corpus(args) -> int:
    directory = Path(args.dir) if args.dir else None
    res = run_corpus(args.filter, directory, Path(args.out) if args.out else None, args.update)
    for r in res:
        print(f"{r.name}: {'pass' if r.matched else 'FAIL'} stabilized={_flag(r.stable)}")
    if not all(r.matched for r in res):
        return EXIT_INVALID
    if args.strict and not all(r.stable for r in res):
        return EXIT_UNSTABLE
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _add_module_args(ap: argparse.ArgumentParser) -> None:
    _add_field_args(ap)
    ap.add_argument("--xprec", type=int, default=24)
    ap.add_argument("--gens", default="", help="Gamma* generators, ';'-separated coefficient lists")
    ap.add_argument("--c-phi", dest="c_phi", default="")
    ap.add_argument("--exponents", default="")


def _pair_args(ap: argparse.ArgumentParser) -> None:
    ap.add_argument("--module", required=True)
    ap.add_argument("--m", required=True, help="element file of M")
    ap.add_argument("--f", required=True, help="element file of the dual")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="herrlt", description="Herr complexes for Lubin-Tate extensions")
    sub = ap.add_subparsers(dest="cmd", required=True)

    fg = sub.add_parser("fg", help="formal group law and endomorphisms")
    fgs = fg.add_subparsers(dest="fg_cmd", required=True)
    law = fgs.add_parser("law")
    _add_field_args(law)
    law.add_argument("--degree", type=int, default=6)
    law.add_argument("--out")
    endo = fgs.add_parser("endo")
    _add_field_args(endo)
    endo.add_argument("--a", required=True)
    endo.add_argument("--xprec", type=int, default=6)
    endo.add_argument("--out")

    op = sub.add_parser("op", help="phi, psi and gamma on a series file")
    ops = op.add_subparsers(dest="op_cmd", required=True)
    for name in ("phi", "psi", "gamma"):
        o = ops.add_parser(name)
        _add_field_args(o, with_n=False)
        o.add_argument("--a")
        o.add_argument("--in", dest="input", required=True)
        o.add_argument("--xprec", type=int, default=None)
        o.add_argument("--out")

    mod = sub.add_parser("mod", help="etale modules")
    mods = mod.add_subparsers(dest="mod_cmd", required=True)
    new = mods.add_parser("new")
    _add_module_args(new)
    new.add_argument("--builtin", default="trivial")
    new.add_argument("--out")
    for name in ("validate", "dual", "tensor"):
        o = mods.add_parser(name)
        o.add_argument("--in", dest="input", required=True)
        if name == "tensor":
            o.add_argument("--with", dest="other", required=True)
        o.add_argument("--out")
    mp = mods.add_parser("pair")
    _pair_args(mp)
    mp.add_argument("--out")

    pr = sub.add_parser("pair", help="residue pairing of two elements")
    _pair_args(pr)
    pr.add_argument("--out")

    cx = sub.add_parser("cx", help="Herr complexes")
    cxs = cx.add_subparsers(dest="cx_cmd", required=True)
    b = cxs.add_parser("build")
    _add_module_args(b)
    b.add_argument("--kind", required=True, choices=sorted(BUILDERS))
    b.add_argument("--module", help="module file (default: the built-in named by --builtin)")
    b.add_argument("--builtin", default="trivial")
    b.add_argument("--out")
    c = cxs.add_parser("check-d2")
    _add_module_args(c)
    c.add_argument("--module")
    c.add_argument("--builtin", default="trivial")
    c.add_argument("--kind", choices=sorted(BUILDERS))
    c.add_argument("--samples", type=int, default=10)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out")

    coh = sub.add_parser("coh", help="windowed cohomology")
    cohs = coh.add_subparsers(dest="coh_cmd", required=True)
    r = cohs.add_parser("run")
    r.add_argument("--complex")
    r.add_argument("--config")
    r.add_argument("--schedule")
    r.add_argument("--n", type=int)
    r.add_argument("--degrees")
    r.add_argument("--strict", action="store_true")
    r.add_argument("--timings", action="store_true")
    r.add_argument("--out")

    cp = sub.add_parser("corpus", help="regression corpus")
    cps = cp.add_subparsers(dest="corpus_cmd", required=True)
    cr = cps.add_parser("run")
    cr.add_argument("--filter", default="*")
    cr.add_argument("--dir")
    cr.add_argument("--out")
    cr.add_argument("--update", action="store_true", help="rewrite the golden files")
    cr.add_argument("--strict", action="store_true")
    return ap


HANDLERS = {"fg": cmd_fg, "op": cmd_op, "mod": cmd_mod, "pair": cmd_pair, "cx": cmd_cx, "coh": cmd_coh,
            "corpus": cmd_corpus}


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_INVALID if e.code else EXIT_OK
    try:
        return HANDLERS[args.cmd](args)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, OKError, KeyError, ValueError, CohomologyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
