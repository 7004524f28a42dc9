"""Command-line front end.

    inversive-flow run        evolve (Q, rho) and write snapshots, summary, report
    inversive-flow loxodrome  emit log-spiral figures and check their geometry
    inversive-flow analyze    invariants of a curve given as a u,re,im CSV
    inversive-flow roundtrip  curve or Q profile -> Q -> rebuilt curve

Settings come from an optional ``--config`` file and may be overridden by
``--key value`` flags.  Failures print ``error: CODE: message`` on stderr and
exit with status 2; CODE is one of the InversiveError codes.
"""

import argparse
import cmath
import math
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import csvio, svg
from .config import Settings, load_config, parse_overrides
from .diagnostics import (class_of_spiral, dissipation_report, fit_to_class, lox_length_bound,
                          measured_class, predict_limit_Q, run_report)
from .errors import InversiveError
from .flow import FlowState, StepperConfig, band_limited_noise, evolve
from .frenet import (LoxodromeSpec, integrate_gauss, loxodrome_path, path_monodromy,
                     periodic_path, reconstruct_curve, roundtrip)
from .invariants import (SampledCurve, curvature_jet, fundamental_invariant_raw,
                         invariant_arclength, normal_form_residual, winding_number)
from .mobius import MobiusMap, MonodromyClass, normal_form

EXIT_ERROR = 2
DEFAULT_FRAME = ((1.0, 0.3), (0.2j, 1.0))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InversiveError("USAGE", message)


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _mobius_from(cfg: Settings, prefix: str, default=None) -> Optional[MobiusMap]:
    keys = [f"{prefix}_{c}" for c in "abcd"]
    if not any(k in cfg for k in keys):
        return None if default is None else MobiusMap(default)
    if not all(k in cfg for k in keys):
        raise InversiveError("CONFIG", f"{prefix} needs all of {', '.join(keys)}")
    a, b, c, d = (cfg.complex(k) for k in keys)
    return MobiusMap([[a, b], [c, d]])


def _class_from(cfg: Settings) -> Optional[MonodromyClass]:
    if "r" not in cfg:
        for k in ("theta", "n"):
            if k in cfg:
                raise InversiveError("CONFIG", f"{k} given without r")
        return None
    return MonodromyClass(cfg.float("r"), cfg.float("theta", 0.0), cfg.int("n", 1))


# ------------------------------------------------------------------- run


def _stepper(cfg: Settings) -> StepperConfig:
    d = StepperConfig()
    sc = StepperConfig(
        dt_init=cfg.float("dt_init", d.dt_init),
        dt_min=cfg.float("dt_min", d.dt_min),
        dt_max=cfg.float("dt_max", d.dt_max),
        rtol=cfg.float("rtol", d.rtol),
        atol=cfg.float("atol", d.atol),
        scheme=cfg.str("scheme", d.scheme).upper(),
        remesh_interval=cfg.int("remesh_interval", d.remesh_interval),
        max_steps=cfg.int("max_steps", d.max_steps),
    )
    if sc.scheme not in ("IMEX", "ERK"):
        raise InversiveError("CONFIG", f"scheme must be IMEX or ERK, not {sc.scheme}")
    if not (0 < sc.dt_min <= sc.dt_init <= sc.dt_max) or sc.rtol <= 0 or sc.atol <= 0:
        raise InversiveError("CONFIG", "need 0 < dt_min <= dt_init <= dt_max and positive tolerances")
    return sc


def _trig_resample(values: np.ndarray, N: int) -> np.ndarray:
    M = len(values)
    if M == N:
        return values.copy()
    c = np.fft.rfft(values) / M
    out = np.zeros(N // 2 + 1, dtype=complex)
    m = min(len(c), len(out))
    out[:m] = c[:m]
    if M % 2 == 0 and m == M // 2 + 1:
        out[m - 1] *= 0.5 if N > M else 1.0
    return np.fft.irfft(out * N, N)


def initial_state(cfg: Settings) -> FlowState:
    """Initial (Q, rho) from the settings; rho is uniform."""
    N = cfg.int("n_grid", 256)
    if N < 16 or N & (N - 1):
        raise InversiveError("CONFIG", f"n_grid must be a power of two >= 16, got {N}")
    q0 = cfg.float("q0", 0.375)
    kind = cfg.str("init", "noise")
    if kind == "constant":
        Q = np.full(N, q0)
    elif kind == "noise":
        Q = q0 + band_limited_noise(N, cfg.float("amplitude", 0.5), cfg.int("max_mode", 8),
                                    cfg.int("seed", 0))
    elif kind == "file":
        path = cfg.str("q_file")
        if path is None:
            raise InversiveError("CONFIG", "init = file needs q_file")
        _, values = csvio.read_profile(path)
        Q = _trig_resample(values, N)
    else:
        raise InversiveError("CONFIG", f"init must be constant, noise or file, not {kind!r}")
    cls = _class_from(cfg)
    if cls is not None:
        Q, ell = fit_to_class(Q, cls)
        return FlowState(Q, np.full(N, ell), 0.0, cls)
    ell = cfg.float("ell")
    if ell is None:
        # one loxodrome period of the mean value, times the requested turns
        alpha = cmath.sqrt(float(np.mean(Q)) + 0.5j).real
        ell = cfg.int("turns", 1) * math.pi / alpha
    state = FlowState(Q, np.full(N, ell), 0.0, None)
    return FlowState(state.Q, state.rho, 0.0, measured_class(state))


def terminal_curve(state: FlowState, cls: MonodromyClass, periods=(-1, 0, 1, 2)):
    """Several periods of the reconstructed curve, moved so the spiral centre is 0."""
    path = periodic_path(state.Q, state.rho)
    z = reconstruct_curve(path).z
    L = path_monodromy(path)
    out = []
    for k in periods:
        Lk = MobiusMap(np.linalg.matrix_power(L.matrix, k)) if k >= 0 else \
            MobiusMap(np.linalg.matrix_power(L.inverse().matrix, -k))
        out.append((cls.T @ Lk).act(z))
    return np.concatenate(out)


def cmd_run(cfg: Settings, out: Path, want_svg: bool) -> int:
    state0 = initial_state(cfg)
    stepper = _stepper(cfg)
    t_end = cfg.float("t_end", 10.0)
    every = cfg.int("snapshot_every", 10)
    cls = state0.cls
    rows = []

    def summary_row(state, rec):
        rep = dissipation_report(state)
        rows.append((rec.t, rec.ell, rec.normQ2, rec.normQs2, rep.residual))

    code = 0
    try:
        traj = evolve(state0, t_end, stepper, observer=summary_row, snapshot_every=every)
    except InversiveError as exc:
        traj = getattr(exc, "trajectory", None)
        if traj is None:
            raise
        code = EXIT_ERROR
        print(f"error: {exc.code}: {exc.message}", file=sys.stderr)
    first = traj.records[0]
    rows.insert(0, (first.t, first.ell, first.normQ2, first.normQs2,
                    dissipation_report(state0).residual))
    csvio.write_snapshots(out / "snapshots.csv", traj.snapshots)
    csvio.write_summary(out / "summary.csv", rows)
    report = run_report(traj, cls)
    if cls is not None:
        final_cls = measured_class(traj.final)
        report += (f"terminal monodromy class: r={final_cls.r:.12g} theta={final_cls.theta:.12g} "
                   f"n={final_cls.n}\n")
    _write_text(out / "report.txt", report)
    sys.stdout.write(report)
    if want_svg:
        t = np.array([r[0] for r in rows])
        svg.save(out / "length.svg", svg.line_plot([(t, [r[1] for r in rows], "ell")],
                                                   "invariant length", "t", "ell"))
        svg.save(out / "normQ.svg", svg.line_plot(
            [(t, np.sqrt([r[2] for r in rows]), "|Q|_2")], "L2 norm of Q", "t", "|Q|_2"))
        svg.save(out / "normQs.svg", svg.line_plot(
            [(t, np.sqrt([r[3] for r in rows]), "|Q_s|_2")], "L2 norm of Q_s", "t",
            "log10 |Q_s|_2", logy=True))
        if cls is not None:
            try:
                z = terminal_curve(traj.final, cls)
                svg.save(out / "terminal_curve.svg", svg.curve_plot([(z, "terminal curve")],
                                                                     "terminal curve, four periods"))
            except InversiveError as exc:
                print(f"warning: terminal curve not drawn: {exc.code}", file=sys.stderr)
    return code


# ------------------------------------------------------------- loxodrome


def spiral_samples(a: float, turns: float, n: int):
    """Euclidean arc length and points of u -> exp((a+i)u), u in [-2 pi turns, 0]."""
    v = np.linspace(-2 * math.pi * turns, 0.0, n)
    z = np.exp((a + 1j) * v)
    arc = math.hypot(a, 1.0) / a * (np.exp(a * v) - math.exp(a * v[0]))
    return arc, z, v


def spiral_geometry(z: np.ndarray):
    """(turns, growth per turn) measured from samples of a spiral about 0."""
    ang = np.unwrap(np.angle(z))
    turns = (ang[-1] - ang[0]) / (2 * math.pi)
    slope = np.polyfit(ang, np.log(np.abs(z)), 1)[0]
    return float(turns), float(math.exp(2 * math.pi * slope))


def measure_constant_q(curve: SampledCurve, trim: float = 0.1):
    """Mean and spread of Q over the interior samples of a curve."""
    Q = fundamental_invariant_raw(curvature_jet(curve))
    k = int(trim * len(Q))
    Qi = Q[k: len(Q) - k]
    return float(np.mean(Qi)), float(np.ptp(Qi))


def cmd_loxodrome(cfg: Settings, out: Path, want_svg: bool) -> int:
    n = cfg.int("samples", 1200)
    turns = cfg.float("turns", 3.0)
    lines = []
    ok = True
    curves = []
    q0 = cfg.float("q0")
    if q0 is not None:
        spec = LoxodromeSpec(q0, _mobius_from(cfg, "g", ((1, 0), (0, 1))))
        path = loxodrome_path(spec, np.linspace(0.0, cfg.float("s_end", 4 * math.pi), n))
        curve = reconstruct_curve(path)
        csvio.write_curve(out / f"loxodrome_q{q0:g}.csv", curve.u, curve.z)
        mean, spread = measure_constant_q(curve)
        lines.append(f"Q0={q0:g}: measured Q mean {mean:.10g} spread {spread:.3e}")
        if want_svg:
            svg.save(out / f"loxodrome_q{q0:g}.svg",
                     svg.curve_plot([(curve.z, f"Q0 = {q0:g}")], f"loxodrome with Q = {q0:g}"))
    for a in cfg.floats("a", [0.05, 0.15, 0.45]):
        if a <= 0:
            raise InversiveError("CONFIG", f"spiral parameter a must be positive, got {a}")
        arc, z, _ = spiral_samples(a, turns, n)
        csvio.write_curve(out / f"spiral_a{a:g}.csv", arc, z)
        curves.append((z, f"a = {a:g}"))
        t_meas, growth = spiral_geometry(z)
        g_ok = abs(growth / math.exp(2 * math.pi * a) - 1) < 0.01
        t_ok = abs(t_meas - turns) < 0.01 * turns
        ok &= g_ok and t_ok
        # the package measures curvature with sign, and z -> conj(z) makes
        # this spiral admissible without changing its shape up to reflection
        mean, spread = measure_constant_q(SampledCurve(arc, np.conj(z)))
        lines.append(
            f"a={a:g}: turns {t_meas:.6f} (expected {turns:g}) "
            f"growth/turn {growth:.6g} (expected {math.exp(2 * math.pi * a):.6g}) "
            f"{'ok' if g_ok and t_ok else 'MISMATCH'}; "
            f"Q mean {mean:.8g} spread {spread:.2e} (expected {(1 - a * a) / (4 * a):.8g})"
        )
    r = cfg.float("r", 0.5)
    theta = cfg.float("theta", math.pi / 3)
    n_periods = cfg.float("periods", 3.0)
    for w in cfg.ints("windings", [0, 1, 2]):
        cls = MonodromyClass(r, theta, w)
        a = math.log(1 / r**2) / cls.turning
        tau = np.linspace(0.0, n_periods * cls.turning, n)
        z = np.exp((-a + 1j) * tau)
        lam2 = cls.eigenvalue ** 2
        marks = lam2 ** np.arange(int(n_periods) + 1)
        arc = math.hypot(a, 1.0) / a * (1 - np.exp(-a * tau))
        csvio.write_curve(out / f"winding_n{w}.csv", arc, z)
        lines.append(f"winding n={w}: r={r:g} theta={theta:.6g} turning per period "
                     f"{cls.turning:.6g} spiral a={a:.6g} Q_inf={predict_limit_Q(cls):.8g}")
        if want_svg:
            svg.save(out / f"winding_n{w}.svg", svg.curve_plot(
                [(z, f"n = {w}")], f"n = {w}: period ends marked", marks=[marks]))
    if want_svg and curves:
        svg.save(out / "spirals.svg", svg.curve_plot(curves, "u -> exp((a+i)u)"))
        svg.save(out / "spirals_sphere.svg", svg.sphere_plot(curves, "the same curves on the sphere"))
    text = "\n".join(lines) + "\n"
    _write_text(out / "loxodrome_report.txt", text)
    sys.stdout.write(text)
    if not ok:
        raise InversiveError("FIGURE_CHECK", "a spiral failed the turn or growth check")
    return 0


# --------------------------------------------------------------- analyze


def _load_curve(cfg: Settings) -> SampledCurve:
    path = cfg.str("curve")
    if path is None:
        raise InversiveError("CONFIG", "curve = PATH is required")
    u, z = csvio.read_curve(path)
    curve = SampledCurve(u, z, _mobius_from(cfg, "L"))
    return curve.reversed() if cfg.bool("reverse") else curve


def cmd_analyze(cfg: Settings, out: Path, want_svg: bool) -> int:
    curve = _load_curve(cfg)
    jet = curvature_jet(curve, cfg.float("smoothing"))
    lines = [f"samples: {len(curve)}"]
    try:
        s = invariant_arclength(jet)
    except InversiveError as exc:
        lines += ["verdict: INADMISSIBLE", f"detail: {exc.message}"]
        csvio.write_rows(out / "profile.csv", ("u", "k", "k_u", "k_uu", "k_uuu"),
                         zip(jet.u, jet.k, jet.k_u, jet.k_uu, jet.k_uuu))
        text = "\n".join(lines) + "\n"
        _write_text(out / "analysis.txt", text)
        sys.stdout.write(text)
        return 0
    Q = fundamental_invariant_raw(jet)
    csvio.write_rows(out / "profile.csv", ("u", "k", "k_u", "k_uu", "k_uuu", "s", "Q"),
                     zip(jet.u, jet.k, jet.k_u, jet.k_uu, jet.k_uuu, s, Q))
    trim = int(cfg.float("trim", 0.1) * len(Q))
    Qi = Q[trim: len(Q) - trim]
    lines += ["verdict: ADMISSIBLE", f"invariant length: {s[-1]:.12g}",
              f"Q (interior): mean {np.mean(Qi):.10g} min {np.min(Qi):.10g} max {np.max(Qi):.10g}"]
    if np.ptp(Qi) < cfg.float("constant_tol", 1e-3):
        lines.append(f"Q constant: {np.mean(Qi):.10g} (loxodrome)")
    if curve.monodromy is not None:
        cls = normal_form(curve.monodromy)
        lines.append(f"monodromy normal form: r={cls.r:.12g} theta={cls.theta:.12g}")
        try:
            w = winding_number(curve, cls)
            lines.append(f"winding number: {w}")
        except InversiveError as exc:
            lines.append(f"winding number: unavailable ({exc.code}: {exc.message})")
    rows = []
    count = cfg.int("residual_points", 5)
    window = cfg.int("residual_window", 12)
    for i in np.linspace(window + 1, len(curve) - window - 2, count).astype(int):
        _, _, beta = normal_form_residual(curve, jet, int(i), window)
        rows.append((int(i), s[i], beta))
    csvio.write_rows(out / "residuals.csv", ("i", "s", "exponent"), rows)
    betas = [r[2] for r in rows]
    lines.append("normal-form residual exponents: " + " ".join(f"{b:.3f}" for b in betas))
    if want_svg:
        svg.save(out / "Q.svg", svg.line_plot([(s, Q, "Q")], "Q along the curve", "s", "Q"))
        svg.save(out / "curve.svg", svg.curve_plot([(curve.z, "input")], "input curve"))
    text = "\n".join(lines) + "\n"
    _write_text(out / "analysis.txt", text)
    sys.stdout.write(text)
    return 0


# ------------------------------------------------------------- roundtrip


def curve_from_profile(cfg: Settings) -> SampledCurve:
    """Integrate a Q profile file (columns s, Q) into a sampled curve."""
    from scipy.interpolate import make_interp_spline

    s, Q = csvio.read_profile(cfg.str("q_profile"))
    if np.any(np.diff(s) <= 0):
        raise InversiveError("NONMONOTONE_PARAM", "profile s values must increase")
    target = _class_from(cfg)
    if target is not None:
        # the profile is one period: its monodromy must match the stated class
        period = s[-1] - s[0]
        Qp = Q[:-1] if abs(Q[-1] - Q[0]) < 1e-12 * max(1.0, abs(Q[0])) else Q
        got = measured_class(FlowState(Qp, np.full(len(Qp), period)))
        if (abs(got.r - target.r) > 1e-6 * target.r or abs(got.theta - target.theta) > 1e-6
                or got.n != target.n):
            raise InversiveError(
                "INCONSISTENT",
                f"profile period has class r={got.r:.6g} theta={got.theta:.6g} n={got.n}, "
                f"config says r={target.r:.6g} theta={target.theta:.6g} n={target.n}")
    n = cfg.int("samples", 900)
    spl = make_interp_spline(s, Q, k=min(5, len(s) - 1))
    G0 = _mobius_from(cfg, "g", DEFAULT_FRAME)
    path = integrate_gauss(lambda x: spl(x + s[0]), (s[-1] - s[0]) / (n - 1), G0, n - 1)
    return reconstruct_curve(path)


def cmd_roundtrip(cfg: Settings, out: Path, want_svg: bool) -> int:
    if cfg.str("q_profile") is not None:
        curve = curve_from_profile(cfg)
    else:
        curve = _load_curve(cfg)
        if curve.monodromy is not None:
            from .invariants import period_end

            try:
                period_end(curve, curve.monodromy)
            except InversiveError as exc:
                raise InversiveError("INCONSISTENT",
                                     f"curve is not invariant under the given L ({exc.message})")
    lo = cfg.float("window_start", 1.0 / 3.0)
    hi = cfg.float("window_end", 2.0 / 3.0)
    rt = roundtrip(curve, (lo, hi), cfg.float("smoothing"))
    M = rt.alignment.matrix
    text = (f"max alignment error (relative to diameter): {rt.error:.6e}\n"
            f"best-fit Moebius alignment: [[{M[0, 0]:.12g}, {M[0, 1]:.12g}], "
            f"[{M[1, 0]:.12g}, {M[1, 1]:.12g}]]\n"
            f"measured Q on window: mean {np.mean(rt.Q):.10g} spread {np.ptp(rt.Q):.3e}\n")
    tol = cfg.float("tolerance")
    if tol is not None:
        text += f"tolerance {tol:g}: {'pass' if rt.error < tol else 'FAIL'}\n"
    csvio.write_rows(out / "roundtrip.csv", ("s", "Q", "re_target", "im_target", "re_rebuilt",
                                             "im_rebuilt"),
                     zip(rt.s, rt.Q, rt.target.real, rt.target.imag,
                         *(lambda w: (w.real, w.imag))(rt.alignment.act(rt.rebuilt[: len(rt.s)]))))
    _write_text(out / "roundtrip.txt", text)
    sys.stdout.write(text)
    if want_svg:
        svg.save(out / "roundtrip.svg", svg.curve_plot(
            [(rt.target, "input"), (rt.alignment.act(rt.rebuilt), "rebuilt")], "round trip"))
    if tol is not None and rt.error >= tol:
        raise InversiveError("TOLERANCE", f"round-trip error {rt.error:.3e} >= {tol:g}")
    return 0


# ------------------------------------------------------------------ main

COMMANDS = {"run": cmd_run, "loxodrome": cmd_loxodrome, "analyze": cmd_analyze,
            "roundtrip": cmd_roundtrip}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="inversive-flow", description=__doc__.split("\n\n")[0],
                epilog="Any other setting can be given as --key value.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", metavar="PATH")
    p.add_argument("--out", metavar="DIR", default="out")
    p.add_argument("--seed", metavar="U64", type=int)
    p.add_argument("--n-grid", metavar="N", type=int)
    p.add_argument("--t-end", metavar="T", type=float)
    p.add_argument("--svg", action="store_true")
    return p


def main(argv: Optional[List[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args, rest = build_parser().parse_known_args(argv)
        values = load_config(args.config) if args.config else {}
        values.update(parse_overrides(rest))
        for key in ("seed", "n_grid", "t_end"):
            v = getattr(args, key)
            if v is not None:
                values[key] = str(v)
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise InversiveError("CONFIG", "seed must be an unsigned 64-bit integer")
        cfg = Settings(values)
        want_svg = args.svg or cfg.bool("svg")
        out = Path(args.out)
        code = COMMANDS[args.command](cfg, out, want_svg)
        for key in cfg.unused():
            print(f"warning: setting {key!r} was not used by {args.command}", file=sys.stderr)
        return code
    except InversiveError as exc:
        print(f"error: {exc.code}: {exc.message}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
