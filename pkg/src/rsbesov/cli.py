"""Config-driven experiment runner.

Subcommands synthesize inputs, run the pipelines, and write reproducible
plot-data tables.  Exit codes: 0 ok, 1 numerical certificate failure,
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import math
import sys
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import __version__
from . import besov, embeddings, mra, modelled, reconstruction as rc, schauder, structures
from .pyramid import save_rsbf
from .reports import write_rows
from .scaling import Scaling

SUBCOMMANDS = (
    "synthesize",
    "besov",
    "dnorm",
    "reconstruct",
    "roundtrip",
    "lift",
    "embed",
    "schauder",
    "report",
)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    d: int = 1
    s: tuple[int, ...] = (1,)
    levels: int = 8
    wavelet_order: int = 6
    structure: str = "polynomial"  # polynomial | noise | extended
    gamma: float = 2.5
    p: float = 2.0
    q: float = math.inf
    alpha: float = -0.5
    beta: float = 0.7
    seed: int = 0
    out: str = "out"
    format: str = "csv"
    rng_algorithm: str = field(default="numpy-PCG64", init=False)

    def validate(self) -> None:
        if self.d != len(self.s) or any(si < 1 for si in self.s):
            raise ConfigError("scaling entries must be positive and match d")
        if self.levels < 2:
            raise ConfigError("need at least two levels")
        if self.structure not in ("polynomial", "noise", "extended"):
            raise ConfigError(f"unknown structure {self.structure!r}")
        if not (self.p >= 1 and self.q >= 1):
            raise ConfigError("p and q must lie in [1, inf]")
        if self.format not in ("csv", "jsonl"):
            raise ConfigError("format must be csv or jsonl")
        if self.structure == "polynomial" and self.gamma <= 0:
            raise ConfigError("gamma must be positive")
        if self.structure in ("noise", "extended"):
            if not (self.alpha < 0 <= self.gamma):
                raise ConfigError("noise structures need alpha < 0 <= gamma")
        if self.structure == "extended" and not (0 < self.beta):
            raise ConfigError("beta must be positive")
        # Assumption: gamma avoids the homogeneities of the chosen structure
        homos = {float(k) for k in range(int(self.gamma) + 2)}
        if self.structure in ("noise", "extended"):
            homos.add(self.alpha)
        if any(abs(self.gamma - z) < 1e-9 for z in homos):
            raise ConfigError("gamma must avoid the homogeneities")

    def meta(self) -> dict:
        m = asdict(self)
        m["s"] = "x".join(map(str, self.s))
        m["version"] = __version__
        del m["out"]  # run location is not part of the reproducible payload
        return m


def _parse_pq(text: str) -> float:
    if text.strip().lower() in ("inf", "infinity"):
        return math.inf
    return float(text)


def load_config(path: str | None) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    sec = parser["experiment"] if parser.has_section("experiment") else parser["DEFAULT"]
    if "d" in sec:
        cfg.d = sec.getint("d")
    if "s" in sec:
        cfg.s = tuple(int(v) for v in sec.get("s").split(","))
        cfg.d = len(cfg.s)
    if "levels" in sec:
        cfg.levels = sec.getint("levels")
    if "wavelet_order" in sec:
        cfg.wavelet_order = sec.getint("wavelet_order")
    if "structure" in sec:
        cfg.structure = sec.get("structure")
    for key in ("gamma", "alpha", "beta"):
        if key in sec:
            setattr(cfg, key, sec.getfloat(key))
    for key in ("p", "q"):
        if key in sec:
            setattr(cfg, key, _parse_pq(sec.get(key)))
    if "seed" in sec:
        cfg.seed = sec.getint("seed")
    if "out" in sec:
        cfg.out = sec.get("out")
    if "format" in sec:
        cfg.format = sec.get("format")
    return cfg


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="rsbesov",
        description="wavelet Besov norms, modelled distributions, reconstruction,"
        " embeddings, and singular-kernel convolution on periodic dyadic grids",
    )
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", type=str, default=None)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--levels", type=int, default=None)
    ap.add_argument("--gamma", type=float, default=None)
    ap.add_argument("--p", type=str, default=None)
    ap.add_argument("--q", type=str, default=None)
    ap.add_argument("--alpha", type=float, default=None)
    ap.add_argument("--beta", type=float, default=None)
    ap.add_argument("--wavelet-order", type=int, default=None)
    ap.add_argument("--structure", type=str, default=None)
    ap.add_argument("--out", type=str, default=None)
    ap.add_argument("--format", type=str, default=None, choices=("csv", "jsonl"))
    return ap


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.levels is not None:
        cfg.levels = args.levels
    if args.gamma is not None:
        cfg.gamma = args.gamma
    if args.p is not None:
        cfg.p = _parse_pq(args.p)
    if args.q is not None:
        cfg.q = _parse_pq(args.q)
    if args.alpha is not None:
        cfg.alpha = args.alpha
    if args.beta is not None:
        cfg.beta = args.beta
    if args.wavelet_order is not None:
        cfg.wavelet_order = args.wavelet_order
    if args.structure is not None:
        cfg.structure = args.structure
    if args.out is not None:
        cfg.out = args.out
    if args.format is not None:
        cfg.format = args.format
    cfg.validate()
    return cfg


def _family(cfg: ExperimentConfig):
    r = max(2, int(math.ceil(abs(cfg.gamma))) + (0 if abs(cfg.gamma - round(cfg.gamma)) > 1e-9 else 1))
    r = min(r, 3)
    order = max(cfg.wavelet_order, 2)
    from .filters import min_order_for

    r_eff = r
    while min_order_for(r_eff) > order:
        r_eff -= 1
    if r_eff < 1:
        raise ConfigError("wavelet order too small for any regularity budget")
    return mra.build_wavelet(order, r_eff), r_eff


def _sin_lift(cfg, st, sc, N):
    pts = sc.grid_points(N)
    x0 = pts[..., 0]
    vals = np.zeros((*sc.grid_shape(N), st.dim))
    for i, sym in enumerate(st.symbols):
        k = sym.k[0]
        if any(sym.k[1:]):
            continue
        deriv = np.sin(2 * np.pi * x0 + k * np.pi / 2.0) * (2 * np.pi) ** k
        vals[..., i] = deriv / math.factorial(k)
    return modelled.ModelledDistribution(st, cfg.gamma, N, vals)


def _noise_setup(cfg, fam, sc, N):
    xi = besov.synthesize_random_besov(sc, N, cfg.alpha, cfg.seed)
    st, model = structures.noise_structure(cfg.alpha, xi, cfg.gamma, fam)
    vals = np.zeros((*sc.grid_shape(N), st.dim))
    vals[..., st.index("Xi")] = 1.0
    return xi, st, model, modelled.ModelledDistribution(st, cfg.gamma, N, vals)


def _out(cfg, name) -> Path:
    ext = "csv" if cfg.format == "csv" else "jsonl"
    return Path(cfg.out) / f"{name}.{ext}"


def cmd_synthesize(cfg: ExperimentConfig) -> int:
    sc = Scaling(cfg.s)
    fam, r = _family(cfg)
    N = cfg.levels
    pyr = besov.synthesize_random_besov(sc, N, cfg.alpha, cfg.seed)
    Path(cfg.out).mkdir(parents=True, exist_ok=True)
    save_rsbf(Path(cfg.out) / "field.rsbf", pyr)
    params = besov.BesovParams(cfg.alpha, cfg.p, cfg.q, max(r, int(abs(cfg.alpha)) + 1))
    rep = besov.besov_norm_wavelet(pyr, params)
    rows = [(n, j, v) for (n, j, v) in rep.rows()]
    write_rows(
        _out(cfg, "synthesize"),
        ["level", "psi_index", "value"],
        rows,
        cfg.format,
        cfg.meta() | {"norm": rep.value},
    )
    write_rows(
        _out(cfg, "synthesize_plot"),
        ["level", "value"],
        [(n, v) for n, v in enumerate(rep.level_max())],
        cfg.format,
        cfg.meta(),
    )
    return 0


def cmd_besov(cfg: ExperimentConfig) -> int:
    sc = Scaling(cfg.s)
    fam, _ = _family(cfg)
    N = cfg.levels
    x0 = np.full(sc.d, 0.5)
    pyr = besov.synthesize_dirac(sc, N, fam, x0)
    rows = []
    for p in (1.0, 2.0, math.inf):
        meas = besov.critical_exponent(pyr, p)
        want = -sc.total + (0.0 if math.isinf(p) else sc.total / p)
        rows.append(("inf" if math.isinf(p) else p, meas, want, abs(meas - want)))
    write_rows(
        _out(cfg, "besov"),
        ["p", "measured_alpha", "predicted_alpha", "abs_error"],
        rows,
        cfg.format,
        cfg.meta(),
    )
    return 0


def cmd_dnorm(cfg: ExperimentConfig) -> int:
    sc = Scaling(cfg.s)
    fam, _ = _family(cfg)
    N = cfg.levels
    if cfg.structure == "polynomial":
        st, model = structures.polynomial_structure(cfg.gamma, sc, fam, N)
        f = _sin_lift(cfg, st, sc, N)
    else:
        _, st, model, f = _noise_setup(cfg, fam, sc, N)
    rep = modelled.d_norm(f, model, cfg.p, cfg.q)
    write_rows(
        _out(cfg, "dnorm"),
        ["zeta", "n", "term_kind", "value"],
        list(rep.rows()),
        cfg.format,
        cfg.meta() | {"total": rep.total},
    )
    return 0


def cmd_reconstruct(cfg: ExperimentConfig) -> int:
    sc = Scaling(cfg.s)
    fam, r = _family(cfg)
    rows = []
    bound_rows = []
    for N in range(max(4, cfg.levels - 4), cfg.levels + 1):
        if cfg.structure == "polynomial":
            st, model = structures.polynomial_structure(cfg.gamma, sc, fam, N)
            f = _sin_lift(cfg, st, sc, N)
            out, cert = rc.reconstruct(f, model, cfg.p, cfg.q)
            an_target = mra.analyze_v_coefficients(
                _exact_sin_coeffs(fam, sc, N), fam, sc, N
            )
            err = out.plus(an_target.scaled(-1.0)).l2() / an_target.l2()
            rows.append((N, err))
            if N == cfg.levels:
                d = besov.make_dictionary(max(r, 2), range(2, N - 1))
                scales, raw, normed = rc.reconstruction_bound(
                    f, model, out, cfg.p, cfg.q, d
                )
                bound_rows = [
                    (int(m), rv, nv) for m, rv, nv in zip(scales, raw, normed)
                ]
        else:
            xi, st, model, f = _noise_setup(cfg, fam, sc, N)
            out, cert = rc.reconstruct(f, model, cfg.p, cfg.q)
            err = out.max_abs_diff(xi)
            rows.append((N, err))
    write_rows(
        _out(cfg, "reconstruct"),
        ["levels", "rel_error"],
        rows,
        cfg.format,
        cfg.meta(),
    )
    if bound_rows:
        write_rows(
            _out(cfg, "reconstruct_bound"),
            ["scale", "raw", "normalized"],
            bound_rows,
            cfg.format,
            cfg.meta(),
        )
    if cert is not None:
        cert_rows = [(n, "A", v, "") for n, v in enumerate(cert.sewing.a_table)]
        cert_rows += [
            (n, "deltaA", v, "") for n, v in enumerate(cert.sewing.da_table)
        ]
        if cert.bound_scales is not None:
            budget = cert.budget if cert.budget is not None else ""
            cert_rows += [
                (int(m), "bound", v, budget)
                for m, v in zip(cert.bound_scales, cert.bound_normalized)
            ]
        write_rows(
            _out(cfg, "reconstruct_certificate"),
            ["scale", "term", "value", "budget"],
            cert_rows,
            cfg.format,
            cfg.meta(),
        )
    return 0


def _exact_sin_coeffs(fam, sc, N):
    from . import analysis as an

    kern = an.SeparableKernel(
        [(1.0, [an.Fn1D(lambda x: np.sin(2 * np.pi * x), None)])]
        if sc.d == 1
        else [
            (
                1.0,
                [an.Fn1D(lambda x: np.sin(2 * np.pi * x), None)]
                + [an.Fn1D(lambda x: np.ones_like(x), None) for _ in range(sc.d - 1)],
            )
        ]
    )
    return an.analyze_kernel(kern, fam, sc, N)


def cmd_roundtrip(cfg: ExperimentConfig) -> int:
    sc = Scaling(cfg.s)
    fam, _ = _family(cfg)
    N = cfg.levels
    if cfg.structure == "polynomial":
        st, model = structures.polynomial_structure(cfg.gamma, sc, fam, N)
        f = _sin_lift(cfg, st, sc, N)
    else:
        _, st, model, f = _noise_setup(cfg, fam, sc, N)
    fbar = modelled.average(f, model)
    f2, rep = modelled.unaverage(fbar, model, p=cfg.p if not math.isinf(cfg.p) else 2.0)
    rows = []
    for z, arr in sorted(rep.increments.items()):
        for n, v in enumerate(arr):
            rows.append((z, n, v))
    meta = cfg.meta() | {
        f"slope_zeta_{z}": s for z, s in sorted(rep.slopes.items())
    } | {"exact_at_finest": float(np.max(np.abs(f2.values - f.values)))}
    write_rows(
        _out(cfg, "roundtrip"), ["zeta", "n", "increment_lp"], rows, cfg.format, meta
    )
    return 0


def cmd_lift(cfg: ExperimentConfig) -> int:
    sc = Scaling(cfg.s)
    fam, _ = _family(cfg)
    N = cfg.levels
    gamma = cfg.gamma
    pyr = besov.synthesize_smooth(
        sc, N, fam, lambda pts: np.sin(2 * np.pi * pts[..., 0])
    )
    for n in (N - 2, N - 1):
        pyr.details[n][:] = 0.0
    f, rep = rc.lift(pyr, gamma, cfg.p, cfg.q, fam, check_roundtrip=True)
    rows = [("roundtrip_rel_error", rep.roundtrip_rel_error)]
    for z, s in sorted(rep.unaverage.slopes.items()):
        rows.append((f"unaverage_slope_zeta_{z}", s))
    rows.append(("besov_norm", rep.besov_report.value))
    write_rows(_out(cfg, "lift"), ["quantity", "value"], rows, cfg.format, cfg.meta())
    return 0


def cmd_embed(cfg: ExperimentConfig) -> int:
    sc = Scaling(cfg.s)
    fam, _ = _family(cfg)
    gamma = cfg.gamma if cfg.structure == "polynomial" else 1.3
    rows = []
    for N in range(4, cfg.levels + 1):
        st, model = structures.polynomial_structure(gamma, sc, fam, N)
        fbar = _random_fbar(st, gamma, N, cfg.seed)
        cases = [
            embeddings.EmbeddingCase(1, gamma, 2.0, 2.0, gamma, 2.0, math.inf),
            embeddings.EmbeddingCase(2, gamma, 2.0, 2.0, gamma - 0.45, 2.0, 2.0),
            embeddings.EmbeddingCase(3, gamma, 2.0, 2.0, gamma, 1.0, 2.0),
            embeddings.EmbeddingCase(
                4, gamma, 2.0, math.inf, gamma - sc.total / 2.0 - 0.01, math.inf, math.inf
            ),
        ]
        for case in cases:
            rep = embeddings.embed_check(fbar, model, case)
            rows.append(
                (
                    case.case,
                    case.gamma,
                    case.p,
                    "inf" if math.isinf(case.q) else case.q,
                    case.gamma_t,
                    "inf" if math.isinf(case.p_t) else case.p_t,
                    "inf" if math.isinf(case.q_t) else case.q_t,
                    N,
                    rep.ratio,
                )
            )
    write_rows(
        _out(cfg, "embed"),
        ["case", "gamma", "p", "q", "gamma_t", "p_t", "q_t", "N", "ratio"],
        rows,
        cfg.format,
        cfg.meta(),
    )
    return 0


def _random_fbar(st, gamma, N, seed):
    sc = st.scaling
    rng = np.random.default_rng(seed)
    levels = []
    prev = None
    for n in range(N + 1):
        if prev is None:
            lv = rng.uniform(-1, 1, (*sc.grid_shape(0), st.dim))
        else:
            up = prev
            for ax, si in enumerate(sc.s):
                up = np.repeat(up, 2**si, axis=ax)
            noise = rng.uniform(-1, 1, (*sc.grid_shape(n), st.dim))
            decay = np.array([2.0 ** (-n * (gamma - s.zeta)) for s in st.symbols])
            lv = up + noise * decay
        levels.append(lv)
        prev = lv
    return modelled.AveragedMD(st, gamma, N, levels)


def cmd_schauder(cfg: ExperimentConfig) -> int:
    sc = Scaling(cfg.s)
    fam, r = _family(cfg)
    N = cfg.levels
    rows = []
    if sc.d >= 2:
        K = schauder.decompose_kernel("heat", sc, r=2)
        rows.append(("kernel", "heat"))
    else:
        K = schauder.decompose_kernel("riesz", sc, r=3, beta=cfg.beta)
        rows.append(("kernel", "riesz"))
    for m in sc.multi_indices_below(2.1):
        label = "p0_moment_" + "_".join(map(str, m))
        rows.append((label, K.p0_moment(tuple(m))))
    rng = np.random.default_rng(cfg.seed)
    pts = rng.uniform(-0.9, 0.9, (2000, sc.d))
    g = schauder.s_gauge(sc, pts)
    keep = (g > 2.0 ** (-min(N, 8))) & (g < 0.9)
    pts = pts[keep]
    approx = K.partial_sum(pts, min(N, 8), corrected=False) + K.tail(pts)
    truth = K.P(pts)
    rel = float(
        np.max(np.abs(approx - truth) / np.maximum(np.abs(truth), 1e-12))
    )
    rows.append(("telescoping_rel_error", rel))
    if sc.d == 1:
        gamma = cfg.gamma if cfg.structure != "polynomial" else 1.25
        alpha = cfg.alpha
        xi = besov.synthesize_random_besov(sc, N, alpha, cfg.seed)
        stn, nm = structures.noise_structure(alpha, xi, gamma, fam)
        st_e, em_model = schauder.extend_structure(stn, nm, K, gamma)
        vals = np.zeros((*sc.grid_shape(N), stn.dim))
        vals[..., stn.index("Xi")] = 1.0
        fXi = modelled.ModelledDistribution(stn, gamma, N, vals)
        rel_id, _ = schauder.convolution_identity_check(fXi, em_model, cfg.p, cfg.q)
        rows.append(("convolution_identity_rel_error", rel_id))
        from . import analysis as an

        cN = mra.level_coefficients(xi, fam, N)
        conv = mra.forward_transform(
            an.correlate(cN, em_model.w_arrays[(0,) * sc.d]), fam, sc
        )
        gain = besov.critical_exponent(conv, 2.0) - besov.critical_exponent(xi, 2.0)
        rows.append(("besov_gain", gain))
        rows.append(("beta", K.beta))
    write_rows(_out(cfg, "schauder"), ["quantity", "value"], rows, cfg.format, cfg.meta())
    return 0


def cmd_report(cfg: ExperimentConfig) -> int:
    rcodes = [
        cmd_synthesize(cfg),
        cmd_besov(cfg),
        cmd_dnorm(cfg),
        cmd_reconstruct(cfg),
        cmd_roundtrip(cfg),
        cmd_embed(cfg),
        cmd_lift(cfg),
        cmd_schauder(cfg),
    ]
    return max(rcodes)


def main(argv=None) -> int:
    ap = build_parser()
    if argv is None:
        argv = sys.argv[1:]
    if not argv:
        ap.print_usage(sys.stderr)
        return 2
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        cfg = resolve_config(args)
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    runner = {
        "synthesize": cmd_synthesize,
        "besov": cmd_besov,
        "dnorm": cmd_dnorm,
        "reconstruct": cmd_reconstruct,
        "roundtrip": cmd_roundtrip,
        "lift": cmd_lift,
        "embed": cmd_embed,
        "schauder": cmd_schauder,
        "report": cmd_report,
    }[args.subcommand]
    try:
        return runner(cfg)
    except rc.CertificateError as exc:
        print(f"certificate failure: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
