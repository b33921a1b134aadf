"""``privcone`` command-line front end.

Exit codes: 0 success or guarantee holds, 1 guarantee violated or
derivation incomplete, 2 input error, 3 internal limit reached.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from fractions import Fraction
from pathlib import Path

from . import formats, mechanisms, noisecone, relax, rowcone, semantics
from .errors import ParseError, PrivconeError, SingularMatrix
from .numerics import LabeledMatrix, invert, parse_rational

EXIT_OK, EXIT_VIOLATED, EXIT_INPUT, EXIT_LIMIT = 0, 1, 2, 3


def _rationals(text: str, n: int | None = None, what: str = "value") -> list[Fraction]:
    parts = [t for t in text.split(",") if t.strip()]
    vals = [parse_rational(t) for t in parts]
    if n is not None and len(vals) != n:
        raise ParseError(f"expected {n} comma-separated {what}s, got {text!r}")
    return vals


def _rr_arg(text: str) -> mechanisms.RRSpec:
    parts = text.split(",")
    if len(parts) != 2:
        raise ParseError(f"--rr takes 'p,k', got {text!r}")
    try:
        k = int(parts[1])
    except ValueError:
        raise ParseError(f"k must be an integer, got {parts[1]!r}") from None
    return mechanisms.RRSpec(parse_rational(parts[0]), k)


def _subset(text: str) -> semantics.ParityQuery:
    try:
        return semantics.ParityQuery(frozenset(int(t) for t in text.split(",") if t.strip()))
    except ValueError:
        raise ParseError(f"--subset takes bit positions like '1,2', got {text!r}") from None


# -- subcommands ----------------------------------------------------------

def cmd_analyze(args) -> tuple[dict, str, int]:
    mf = formats.load_mechanism(args.input)
    report: dict = {"schema": formats.SCHEMA, "analysis": "analyze", "mechanism": mf.kind}
    lines = [f"mechanism: {mf.kind}"]
    code = EXIT_OK
    if mf.kind == "noise":
        noise_report, text, code = _noise_report(mf.noise, mf.window, args)
        report.update(noise_report)
        return report, "\n".join(lines + [text]), code
    if mf.rr is not None:
        system = rowcone.rr_constraints(mf.rr)
    elif mf.pram is not None:
        if mf.gamma is None:
            raise ParseError("pram files need 'gamma' to build the approximation cone")
        q = mf.pram.q
        ok = mechanisms.check_gamma_amplification(q, mf.gamma)
        report["gamma_amplification"] = ok
        lines.append(f"gamma-amplification of q at gamma={mf.gamma}: {'yes' if ok else 'no'}")
        system = rowcone.frapp_approx_constraints(mf.gamma, q.shape[0], mf.pram.k, q.col_labels)
        if not ok:
            code = EXIT_VIOLATED
    elif mf.sampling is not None:
        system = rowcone.sampling_constraints(mf.sampling)
    else:
        m = mf.matrix
        try:
            if m.shape[0] != m.shape[1]:
                raise SingularMatrix("matrix is not square")
            inv = invert(m)
        except SingularMatrix:
            report["invertible"] = False
            lines.append("matrix is not square and invertible; no exact row cone from its inverse")
            system = None
        else:
            report["invertible"] = True
            system = rowcone.constraints_from_inverse(inv, m.order)
            verdicts = {lab: rowcone.membership(row, inv) for lab, row in zip(m.row_labels, m.entries)}
            report["row_membership"] = {lab: formats.verdict_to_json(v) for lab, v in verdicts.items()}
            bad = [lab for lab, v in verdicts.items() if not v.ok]
            lines.append("rows against own inverse: " + ("all inside or boundary" if not bad else f"outside: {bad}"))
            if bad:
                code = EXIT_VIOLATED
    if system is not None:
        report["constraints"] = formats.system_to_json(system)
        lines.append(formats.render_system(system))
    if args.export:
        m = mf.mechanism_matrix()
        Path(args.export).write_text(formats.dumps(formats.matrix_to_json(m)))
        lines.append(f"matrix written to {args.export}")
    return report, "\n".join(lines), code


def _against_inverse(mf: formats.MechanismFile) -> LabeledMatrix:
    if mf.rr is not None:
        return mechanisms.rr_inverse(mf.rr)
    return invert(mf.mechanism_matrix())


def cmd_check(args) -> tuple[dict, str, int]:
    m = formats.load_mechanism(args.mechanism).mechanism_matrix()
    inv = _against_inverse(formats.load_mechanism(args.against))
    report: dict = {"schema": formats.SCHEMA, "analysis": "check"}
    if args.rows:
        verdicts = {lab: rowcone.membership(row, inv) for lab, row in zip(m.row_labels, m.entries)}
        ok = all(v.ok for v in verdicts.values())
        report["mode"] = "rows"
        report["holds"] = ok
        report["rows"] = {lab: formats.verdict_to_json(v) for lab, v in verdicts.items()}
        lines = [f"row {lab}: {v.status.value}" + (f" (column {v.witness})" if v.witness else "")
                 for lab, v in verdicts.items()]
    else:
        res = rowcone.cnf_membership(m, inv)
        ok = res.holds
        report["mode"] = "cnf"
        report["holds"] = ok
        report["offending"] = [list(p) for p in res.offending]
        lines = [f"M @ inverse nonnegative: {'yes' if ok else 'no'}"]
        lines += [f"  negative entry at row {r}, column {c}" for r, c in res.offending]
    return report, "\n".join(lines), EXIT_OK if ok else EXIT_VIOLATED


def _parity_target(args):
    if args.rr and args.mechanism:
        raise ParseError("give either --rr or --mechanism, not both")
    if args.rr:
        spec = _rr_arg(args.rr)
        return mechanisms.rr_matrix(spec), spec.p
    if args.mechanism:
        return formats.load_mechanism(args.mechanism).mechanism_matrix(), None
    raise ParseError("verify-parity needs --rr or --mechanism")


def cmd_verify_parity(args) -> tuple[dict, str, int]:
    m, p = _parity_target(args)
    report: dict = {"schema": formats.SCHEMA, "analysis": "verify-parity"}
    if args.sweep:
        if args.p is not None:
            p = parse_rational(args.p)
        if p is None:
            raise ParseError("--sweep needs --p when the mechanism is given as a matrix")
        res = semantics.sweep_parity_protection(m, p, args.grid)
        report["sweep"] = {"p": formats.rational(p), "grid": args.grid}
    else:
        if not args.prior or not args.subset:
            raise ParseError("verify-parity needs --prior and --subset (or --sweep)")
        prior = semantics.BitPrior(tuple(_rationals(args.prior, what="prior")))
        query = _subset(args.subset)
        res = semantics.verify_parity_protection(m, prior, query)
        report["prior"] = [formats.rational(q) for q in prior.q]
        report["subset"] = sorted(query.j)
    report["guarantee"] = formats.guarantee_to_json(res)
    lines = [f"parity protection: {res.verdict.value} ({res.checked} checks)"]
    for w in res.witnesses:
        lines.append(f"  output {w.output}, J={w.query}: prior even/odd "
                     f"{w.prior_preference[0]} vs {w.prior_preference[1]} -> posterior "
                     f"{w.posterior_preference[0]} vs {w.posterior_preference[1]}")
    if res.skipped:
        lines.append(f"  zero-evidence outputs skipped: {', '.join(res.skipped)}")
    return report, "\n".join(lines), EXIT_OK if res.holds else EXIT_VIOLATED


def cmd_verify_sampling(args) -> tuple[dict, str, int]:
    spec = mechanisms.SamplingSpec(parse_rational(args.p), args.n, args.w)
    m = (formats.load_mechanism(args.mechanism).mechanism_matrix() if args.mechanism
         else mechanisms.sampling_matrix(spec))
    q = parse_rational(args.q) if args.q else semantics.sampling_threshold(spec.p)
    records = [r for r in args.records.split(",") if r] if args.records else list(spec.tuple_values[:1]) * spec.w
    res = semantics.verify_sampling_parity(m, spec, q, records)
    report = {"schema": formats.SCHEMA, "analysis": "verify-sampling",
              "q": formats.rational(q), "threshold": formats.rational(semantics.sampling_threshold(spec.p)),
              "records": records, "guarantee": formats.guarantee_to_json(res)}
    lines = [f"sampling guarantee at q={q}: {res.verdict.value} ({res.checked} outputs)"]
    lines += [f"  output {w.output}: {w.query}" for w in res.witnesses]
    return report, "\n".join(lines), EXIT_OK if res.holds else EXIT_VIOLATED


def cmd_relax(args) -> tuple[dict, str, int]:
    if not args.rr:
        raise ParseError("relax needs --rr p,k")
    spec = _rr_arg(args.rr)
    report: dict = {"schema": formats.SCHEMA, "analysis": "relax"}
    if args.derive_dp:
        d = relax.derive_dp_trace(spec)
        report["alpha"] = formats.rational(d.alpha)
        report["constraints"] = formats.system_to_json(d.system)
        report["steps"] = [{"pair": list(s.pair), "traces": [formats.trace_to_json(t) for t in s.traces]}
                           for s in d.steps]
        text = f"alpha = {d.alpha}\n" + formats.render_system(d.system)
        return report, text, EXIT_OK
    if not args.eliminate:
        raise ParseError("relax needs --derive-dp or --eliminate")
    traces = relax.eliminate_all(rowcone.rr_constraints(spec), [v for v in args.eliminate.split(",") if v])
    report["traces"] = [formats.trace_to_json(t) for t in traces]
    report["constraints"] = formats.system_to_json(traces[-1].result)
    return report, formats.render_system(traces[-1].result), EXIT_OK


def _noise_spec(args) -> noisecone.NoiseSpec:
    kind = noisecone.NoiseKind(args.kind)
    if kind is noisecone.NoiseKind.SKELLAM:
        return noisecone.NoiseSpec(kind, l1=args.l1, l2=args.l2)
    if kind is noisecone.NoiseKind.CUSTOM:
        if not args.pmf_table:
            raise ParseError("custom noise needs --pmf-table")
        try:
            text = Path(args.pmf_table).read_text()
        except OSError as exc:
            raise ParseError(f"cannot read {args.pmf_table}: {exc.strerror}") from exc
        return noisecone.NoiseSpec(kind, table=noisecone.parse_pmf_table(text))
    return noisecone.NoiseSpec(kind, p=args.p_float, r=args.r)


def _noise_report(spec: noisecone.NoiseSpec, window: noisecone.Window, args) -> tuple[dict, str, int]:
    tail = spec.check_window(window)
    grid = getattr(args, "grid", None) or noisecone.DEFAULT_GRID
    m = noisecone.mechanism_matrix(spec, window)
    deficit = noisecone.column_deficits(m)
    out: dict = {"noise": spec.kind.value, "window": window.half_width,
                 "tail_mass": tail, "max_column_deficit": float(deficit.max())}
    lines = [f"{spec.kind.value} noise on window +-{window.half_width} (tail mass {formats.float17(tail)})"]
    table = {int(k): spec.pmf(int(k)) for k in window.ks}
    if spec.kind in (noisecone.NoiseKind.DNB, noisecone.NoiseKind.GEOMETRIC):
        system = noisecone.dnb_constraints(spec.p, spec.r, window)
        delta_expected = ((1 - spec.p) / (1 + spec.p)) ** (2 * spec.r)
    elif spec.kind is noisecone.NoiseKind.SKELLAM:
        system = noisecone.skellam_constraints(spec.l1, spec.l2, window)
        delta_expected = math.exp(-2 * (spec.l1 + spec.l2))
    else:
        system = noisecone.general_noise_stencil(table, window, grid).as_system(window)
        delta_expected = 1.0
    conv = noisecone.verify_inverse_convolution(table, system.coefficients, window)
    rows = noisecone.check_mechanism_rows(m, system)
    tol = args.tolerance
    holds = rows.holds(tol)
    out["stencil"] = {"offset": system.offset, "coefficients": list(system.stencil),
                      "normalized": list(system.normalized_stencil()),
                      "truncation_error": system.truncation_error}
    out["delta_identity"] = {"value_at_0": conv.value_at_0, "expected": delta_expected,
                             "max_offcenter": conv.max_offcenter}
    out["row_check"] = {"min_value": rows.min_value, "tolerance": tol, "holds": holds}
    lines.append("stencil (c_-1 = -1): " + ", ".join(formats.float17(v) for v in system.normalized_stencil()))
    lines.append(f"(f * g)(0) = {formats.float17(conv.value_at_0)} (expected {formats.float17(delta_expected)}), "
                 f"max off-center {formats.float17(conv.max_offcenter)}")
    lines.append(f"windowed rows satisfy interior constraints: {'yes' if holds else 'no'} "
                 f"(min {formats.float17(rows.min_value)})")
    if getattr(args, "fourier", False):
        fs = noisecone.general_noise_stencil(table, window, grid)
        out["fourier"] = {"grid": grid, "min_abs_transform": fs.min_abs_transform,
                          "dropped_mass": fs.dropped_mass,
                          "coefficients": {str(k): v for k, v in fs.coefficients.items()},
                          "cosine_similarity": noisecone.cosine_similarity(fs.coefficients, system.coefficients)}
        lines.append(f"Fourier stencil cosine similarity: {formats.float17(out['fourier']['cosine_similarity'])}")
    if spec.kind in (noisecone.NoiseKind.DNB, noisecone.NoiseKind.GEOMETRIC) and spec.r == 1:
        tr = noisecone.dp_from_dnb_telescoping(spec.p, window)
        out["telescoping"] = {"epsilon_direct": tr.epsilon_direct, "epsilon_telescoping": tr.epsilon_telescoping,
                              "max_disagreement": tr.max_disagreement, "pairs": tr.pairs_checked}
        lines.append(f"epsilon from ratios {formats.float17(tr.epsilon_direct)}, "
                     f"from telescoping {formats.float17(tr.epsilon_telescoping)}")
        holds &= tr.holds(max(tol, 1e-9))
    return out, "\n".join(lines), EXIT_OK if holds else EXIT_VIOLATED


def cmd_noise(args) -> tuple[dict, str, int]:
    spec = _noise_spec(args)
    window = (noisecone.Window(args.window, args.tail_tolerance) if args.window
              else noisecone.choose_window(spec, args.tail_tolerance))
    out, text, code = _noise_report(spec, window, args)
    return {"schema": formats.SCHEMA, "analysis": "noise", **out}, text, code


# -- entry point ----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="privcone", description="Row-cone analysis of privacy mechanisms.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log skipped outputs and progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--json", metavar="PATH", help="write the JSON report ('-' for stdout)")
        p.add_argument("--text", action="store_true", help="print the text report (default when --json is absent)")

    p = sub.add_parser("analyze", help="row-cone constraints of a mechanism file")
    p.add_argument("input")
    p.add_argument("--export", metavar="PATH", help="write the exact matrix as a matrix file")
    p.add_argument("--grid", type=int, default=noisecone.DEFAULT_GRID, help="Fourier grid for custom noise")
    p.add_argument("--tolerance", type=float, default=1e-8, help="noise row-check tolerance")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("check", help="CNF or per-row membership against another mechanism")
    p.add_argument("mechanism")
    p.add_argument("--against", required=True)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--cnf", action="store_true", help="test M @ inverse >= 0 (default)")
    mode.add_argument("--rows", action="store_true", help="test each row, reporting witnesses")
    common(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("verify-parity", help="brute-force parity-protection check")
    p.add_argument("--rr", metavar="P,K")
    p.add_argument("--mechanism", metavar="PATH")
    p.add_argument("--prior", metavar="Q1,Q2,...")
    p.add_argument("--subset", metavar="J")
    p.add_argument("--sweep", action="store_true", help="all admissible grid priors and subsets")
    p.add_argument("--p", help="retention probability for --sweep on matrix files")
    p.add_argument("--grid", type=int, default=8, help="prior grid denominator for --sweep")
    common(p)
    p.set_defaults(func=cmd_verify_parity)

    p = sub.add_parser("verify-sampling", help="assignment and non-participation parity check")
    p.add_argument("--p", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--w", type=int, required=True)
    p.add_argument("--q", help="participation probability (default 1/(2-p))")
    p.add_argument("--records", help="comma-separated record values, one per individual")
    p.add_argument("--mechanism", metavar="PATH")
    common(p)
    p.set_defaults(func=cmd_verify_sampling)

    p = sub.add_parser("relax", help="Fourier-Motzkin relaxation of the RR cone")
    p.add_argument("--rr", metavar="P,K")
    p.add_argument("--derive-dp", action="store_true")
    p.add_argument("--eliminate", metavar="LABELS")
    common(p)
    p.set_defaults(func=cmd_relax)

    p = sub.add_parser("noise", help="stencil constraints of an integer-noise mechanism")
    p.add_argument("--kind", choices=[k.value for k in noisecone.NoiseKind], required=True)
    p.add_argument("--p", dest="p_float", type=float)
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--l1", type=float)
    p.add_argument("--l2", type=float)
    p.add_argument("--pmf-table", metavar="PATH")
    p.add_argument("--window", type=int)
    p.add_argument("--tail-tolerance", type=float, default=noisecone.DEFAULT_TAIL_TOLERANCE)
    p.add_argument("--tolerance", type=float, default=1e-8, help="row-check tolerance")
    p.add_argument("--fourier", action="store_true", help="also run the characteristic-function route")
    p.add_argument("--grid", type=int, default=noisecone.DEFAULT_GRID)
    common(p)
    p.set_defaults(func=cmd_noise)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        report, text, code = args.func(args)
    except PrivconeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.hint:
            print(f"hint: {exc.hint}", file=sys.stderr)
        return exc.exit_code
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON: {exc}", file=sys.stderr)
        return EXIT_INPUT
    report["exit_code"] = code
    if args.json:
        payload = formats.dumps(report)
        if args.json == "-":
            sys.stdout.write(payload)
        else:
            Path(args.json).write_text(payload)
    if args.text or not args.json:
        print(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
