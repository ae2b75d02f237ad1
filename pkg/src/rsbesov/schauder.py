"""Singular-kernel machinery: exact dyadic kernel decompositions, admissible
model extension by an abstract integration symbol, the order-raising
convolution operator, and the reconstruction/convolution identity check.

Only exactly self-similar kernels are accepted: the level pieces are then
generated by the scaling identity and never measured.  Moment cancellation
is arranged by subtracting derivative-of-bump correctors whose coefficients
solve a small triangular system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product as iproduct

import numpy as np

from . import analysis as an
from . import besov as bs
from . import mra
from .modelled import ModelledDistribution, d_norm
from .pyramid import CoeffPyramid
from .scaling import Scaling, wrap_displacement
from .structures import Model, NoiseModel, RegularityStructure, Symbol, polynomial_symbols
from .util import multi_factorial


def _smooth_step():
    """S: 1 below 1/4, 0 above 1/2, a spline CDF in between."""
    bump = bs.bspline_bump(8)
    anti = bump.antiderivative()
    mass = float(anti(1.0) - anti(-1.0))

    def S(u):
        u = np.asarray(u, dtype=float)
        v = (u - 0.375) / 0.125  # [1/4, 1/2] -> [-1, 1]
        out = np.empty_like(u)
        lo = v <= -1.0
        hi = v >= 1.0
        mid = ~(lo | hi)
        out[lo] = 1.0
        out[hi] = 0.0
        out[mid] = 1.0 - (anti(v[mid]) - anti(-1.0)) / mass
        return out

    return S


_STEP = _smooth_step()


def s_gauge(scaling: Scaling, pts: np.ndarray) -> np.ndarray:
    """Smooth s-homogeneous gauge g with g(2^s x) = 2 g(x)."""
    m = math.lcm(*scaling.s)
    acc = np.zeros(pts.shape[:-1])
    for i, si in enumerate(scaling.s):
        acc = acc + np.abs(pts[..., i]) ** (2 * m // si)
    return acc ** (1.0 / (2 * m))


def annular_cutoff(scaling: Scaling, pts: np.ndarray) -> np.ndarray:
    """chi = S(g) - S(2 g): supported in the dyadic annulus g in [1/8, 1/2]."""
    g = s_gauge(scaling, pts)
    return _STEP(g) - _STEP(2.0 * g)


def heat_kernel(scaling: Scaling):
    """Space-time heat kernel; first coordinate is time, beta = 2."""
    dsp = scaling.d - 1
    if dsp < 1 or scaling.s[0] != 2 or any(si != 1 for si in scaling.s[1:]):
        raise ValueError("heat kernel needs scaling (2, 1, ..., 1)")

    def P(pts):
        t = pts[..., 0]
        out = np.zeros(pts.shape[:-1])
        pos = t > 0
        if np.any(pos):
            r2 = np.zeros_like(out)
            for i in range(1, scaling.d):
                r2 = r2 + pts[..., i] ** 2
            out[pos] = (4.0 * np.pi * t[pos]) ** (-dsp / 2.0) * np.exp(
                -r2[pos] / (4.0 * t[pos])
            )
        return out

    return P, 2.0


def riesz_kernel(scaling: Scaling, beta: float):
    """|x|^{beta - |s|} profile; exactly self-similar for any beta in (0, |s|)."""
    if not (0.0 < beta < scaling.total):
        raise ValueError("need 0 < beta < |s|")

    def P(pts):
        g = np.maximum(s_gauge(scaling, pts), 1e-300)
        return g ** (beta - scaling.total)

    return P, beta


@dataclass
class KernelDecomposition:
    """beta-regularising kernel split into exactly self-similar dyadic pieces."""

    scaling: Scaling
    beta: float
    r: int
    P: object  # full kernel, pointwise on (..., d) arrays
    correction_coeffs: dict = field(default_factory=dict)
    corrector_scale: float = 0.5
    _mom_cache: dict = field(default_factory=dict, repr=False)

    # -- evaluation --------------------------------------------------------
    def p0_raw(self, pts: np.ndarray) -> np.ndarray:
        return self.P(pts) * annular_cutoff(self.scaling, pts)

    def _corrector(self, k: tuple[int, ...], pts: np.ndarray) -> np.ndarray:
        """D^k of the tensor corrector bump (exact spline derivatives)."""
        out = np.ones(pts.shape[:-1])
        for i, ki in enumerate(k):
            b = bs.bspline_bump(10)
            der = b.derivative(ki) if ki else b
            u = pts[..., i] / self.corrector_scale
            vals = np.nan_to_num(der(u), nan=0.0) / self.corrector_scale ** (1 + ki)
            out = out * vals
        return out

    def p0(self, pts: np.ndarray) -> np.ndarray:
        out = self.p0_raw(pts)
        for k, c in self.correction_coeffs.items():
            out = out - c * self._corrector(k, pts)
        return out

    def pn(self, n: int, pts: np.ndarray, corrected: bool = True) -> np.ndarray:
        scaled = pts * 2.0 ** (n * np.array(self.scaling.s, dtype=float))
        f = self.p0 if corrected else self.p0_raw
        return 2.0 ** (n * (self.scaling.total - self.beta)) * f(scaled)

    def p0_deriv(self, k: tuple[int, ...], pts: np.ndarray, h: float = 1e-3) -> np.ndarray:
        """d^k P0: the annular part by nested central differences at high
        resolution, the corrector part by exact spline derivatives."""
        out = _fd_partial(self.p0_raw, k, pts, h)
        for kc, c in self.correction_coeffs.items():
            kk = tuple(a + b for a, b in zip(kc, k))
            out = out - c * self._corrector(kk, pts)
        return out

    def pn_deriv(self, k: tuple[int, ...], n: int, pts: np.ndarray) -> np.ndarray:
        scaled = pts * 2.0 ** (n * np.array(self.scaling.s, dtype=float))
        expo = self.scaling.total - self.beta + self.scaling.scaled_degree(k)
        return 2.0 ** (n * expo) * self.p0_deriv(k, scaled)

    def partial_sum(
        self, pts: np.ndarray, levels: int, corrected: bool = True
    ) -> np.ndarray:
        acc = np.zeros(pts.shape[:-1])
        for n in range(levels):
            acc = acc + self.pn(n, pts, corrected=corrected)
        return acc

    def tail(self, pts: np.ndarray) -> np.ndarray:
        """P minus the full uncorrected dyadic part: P * (1 - S(g))."""
        return self.P(pts) * (1.0 - _STEP(s_gauge(self.scaling, pts)))

    # -- moments -----------------------------------------------------------
    def p0_moment(self, m: tuple[int, ...], mesh_bits: int = 11) -> float:
        key = ("m", m, mesh_bits)
        if key not in self._mom_cache:
            self._mom_cache[key] = _box_moment(self.p0, self.scaling, m, mesh_bits)
        return self._mom_cache[key]

    def pplus_moment(self, m: tuple[int, ...], levels: int | None = None) -> float:
        """Moments of the (possibly truncated) singular part: geometric sums
        of the exactly scaled level moments."""
        base = self.p0_moment(m)
        rho = 2.0 ** (-(self.beta + self.scaling.scaled_degree(m)))
        if levels is None:
            return base / (1.0 - rho)
        return base * (1.0 - rho**levels) / (1.0 - rho)


def _fd_partial(f, k: tuple[int, ...], pts: np.ndarray, h: float) -> np.ndarray:
    if not any(k):
        return f(pts)
    ax = next(i for i, ki in enumerate(k) if ki)
    km = tuple(ki - (1 if i == ax else 0) for i, ki in enumerate(k))
    up = pts.copy()
    up[..., ax] += h
    dn = pts.copy()
    dn[..., ax] -= h
    return (_fd_partial(f, km, up, h) - _fd_partial(f, km, dn, h)) / (2.0 * h)


def _box_moment(f, scaling: Scaling, m: tuple[int, ...], mesh_bits: int) -> float:
    axes = []
    weights = 1.0
    for si in scaling.s:
        n = 2**mesh_bits
        x = np.linspace(-1.0, 1.0, n, endpoint=False) + 1.0 / n
        axes.append(x)
        weights *= 2.0 / n
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack(mesh, axis=-1)
    vals = f(pts)
    mono = np.ones(vals.shape)
    for i, mi in enumerate(m):
        if mi:
            mono = mono * mesh[i] ** mi
    return float(np.sum(vals * mono) * weights)


def self_similarity_defect(P, scaling: Scaling, beta: float, n_pts: int = 512, seed: int = 1) -> float:
    """Relative defect of P(2^s x) = 2^{-(|s|-beta)} P(x) on annulus samples."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1, 1, (n_pts, scaling.d))
    g = s_gauge(scaling, pts)
    keep = (g > 0.1) & (g < 0.9)
    pts = pts[keep]
    scaled = pts * 2.0 ** np.array(scaling.s, dtype=float)
    a = P(scaled)
    b = 2.0 ** (-(scaling.total - beta)) * P(pts)
    denom = np.maximum(np.abs(b), 1e-30)
    return float(np.max(np.abs(a - b) / denom))


def decompose_kernel(
    kind: str,
    scaling: Scaling,
    r: int,
    beta: float | None = None,
    custom=None,
    ss_tol: float = 1e-9,
) -> KernelDecomposition:
    """Build the dyadic decomposition of a self-similar kernel and correct the
    base-piece moments up to scaled degree r."""
    if kind == "heat":
        P, beta = heat_kernel(scaling)
    elif kind == "riesz":
        if beta is None:
            raise ValueError("riesz kernel needs beta")
        P, beta = riesz_kernel(scaling, beta)
    elif kind == "custom":
        if custom is None or beta is None:
            raise ValueError("custom kernels need a callable and beta")
        defect = self_similarity_defect(custom, scaling, beta)
        if defect > ss_tol:
            raise ValueError(
                f"kernel is not exactly self-similar (relative defect {defect:.2e})"
            )
        P = custom
    else:
        raise ValueError(f"unknown kernel kind: {kind}")
    K = KernelDecomposition(scaling, float(beta), int(r), P)
    # moment correction: solve sum_k c_k mom(D^k B, m) = mom(P0_raw, m)
    ks = [
        k
        for k in iproduct(*[range(r + 1) for _ in range(scaling.d)])
        if scaling.scaled_degree(k) <= r
    ]
    raw = {m: _box_moment(K.p0_raw, scaling, m, 11) for m in ks}
    bmom = {}
    b = bs.bspline_bump(10)
    bfn = an.Fn1D(lambda u: np.nan_to_num(b(u), nan=0.0), (-1, 1))
    mx = max(max(k) for k in ks) if ks else 0
    mom1d = [an.kernel_moment_1d(bfn, j) for j in range(mx + 1)]
    sc_ = K.corrector_scale
    A = np.zeros((len(ks), len(ks)))
    rhs = np.zeros(len(ks))
    for im, m in enumerate(ks):
        rhs[im] = raw[m]
        for ik, k in enumerate(ks):
            if all(a <= b_ for a, b_ in zip(k, m)):
                val = 1.0
                for i in range(scaling.d):
                    j = m[i] - k[i]
                    # int u^{m_i} D^{k_i}B(u/s)/s^{1+k_i} du = (-1)^{k_i} m_i!/(m_i-k_i)! s^{j} mom1d[j]
                    val *= (
                        (-1.0) ** k[i]
                        * math.factorial(m[i])
                        / math.factorial(j)
                        * sc_**j
                        * mom1d[j]
                    )
                A[im, ik] = val
    coeffs = np.linalg.solve(A, rhs)
    K.correction_coeffs = {k: float(c) for k, c in zip(ks, coeffs)}
    return K


# ---------------------------------------------------------------------------
# admissible model extension


class ExtendedModel(NoiseModel):
    """Noise model extended by the abstract integral of Xi.

    Pi_x(I Xi) is the truncated convolution minus its Taylor polynomial at x;
    Gamma picks up the polynomial corrections forced by Pi-compatibility.
    """

    def __init__(
        self,
        structure: RegularityStructure,
        fam: mra.WaveletFamily,
        xi: CoeffPyramid,
        alpha: float,
        kernel: KernelDecomposition,
        gamma_max: float,
        conv_levels: int,
        margin: int = 8,
    ):
        super().__init__(structure, fam, xi, alpha)
        self.kernel = kernel
        self.gamma_max = gamma_max
        self.conv_levels = conv_levels
        self.ixi_index = structure.index("IXi")
        self.zeta_i = alpha + kernel.beta
        sc = self.scaling
        N = self.N
        self.taylor_ks = [
            tuple(k)
            for k in sc.multi_indices_below(self.zeta_i)
        ]
        self.deriv_ks = [
            tuple(k) for k in sc.multi_indices_below(gamma_max + kernel.beta)
        ]
        cN = self.xi_levels[N]
        self.w_arrays: dict = {}
        for k in self.deriv_ks:
            self.w_arrays[k] = _deriv_kernel_array(
                kernel, k, fam, sc, N, conv_levels, margin=margin
            )
        # t_l(x) = <xi, d^l P+(x - .)> on the fine grid, exact for xi in V_N
        self.t_tables = {
            k: an.correlate(cN, self.w_arrays[k]) for k in self.deriv_ks
        }
        # point values of the truncated convolution and its quasi-interpolant
        self.conv_values = self.t_tables[(0,) * sc.d]
        self.conv_pyramid = mra.forward_transform(self.conv_values, fam, sc)
        self.conv_levels_coeffs = mra.all_level_coefficients(self.conv_pyramid, fam)

    # -- Gamma --------------------------------------------------------------
    def gamma(self, x, y) -> np.ndarray:
        M = super().gamma(x, y)  # polynomial block + fixed Xi
        xi_idx = self._grid_index(x)
        yi_idx = self._grid_index(y)
        delta = wrap_displacement(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
        for k in self.taylor_ks:
            M[self.structure.index(_poly_name(k)), self.ixi_index] = self._c_coeff(
                k, xi_idx, yi_idx, delta
            )
        return M

    def _grid_index(self, x):
        sc = self.scaling
        idx = []
        for i, si in enumerate(sc.s):
            m = 2 ** (self.N * si)
            j = np.floor(np.asarray(x, dtype=float)[..., i] * m + 0.5).astype(int) % m
            idx.append(j)
        return tuple(idx)

    def _c_coeff(self, k, x_idx, y_idx, delta):
        """Gamma_{x,y} IXi polynomial coefficient on X^k."""
        acc = self.t_tables[k][x_idx] / multi_factorial(k)
        for ell in self.taylor_ks:
            if all(a <= b for a, b in zip(k, ell)):
                diff = tuple(b - a for a, b in zip(k, ell))
                acc = acc - (
                    self.t_tables[ell][y_idx]
                    / (multi_factorial(diff) * multi_factorial(k))
                ) * float(np.prod(np.asarray(delta) ** np.asarray(diff)))
        return acc

    def gamma_apply_field(self, vals, delta, x_index=None):
        out = super().gamma_apply_field(vals, delta, x_index)
        ix = vals[..., self.ixi_index]
        if not np.any(ix):
            return out
        sc = self.scaling
        N = self.N
        delta = np.asarray(delta, dtype=float)
        steps = []
        for i, si in enumerate(sc.s):
            st = delta[i] * 2 ** (N * si)
            sti = int(round(st))
            if abs(st - sti) > 1e-9:
                raise ValueError("transport displacement off the fine grid")
            steps.append(sti)
        if x_index is None:
            x_index = np.ix_(*[np.arange(2 ** (N * si)) for si in sc.s])
        y_index = tuple(
            (x_index[i] + steps[i]) % (2 ** (N * sc.s[i])) for i in range(sc.d)
        )
        wdel = wrap_displacement(-delta)  # x - y
        for k in self.taylor_ks:
            c = self.t_tables[k][x_index] / multi_factorial(k)
            for ell in self.taylor_ks:
                if all(a <= b for a, b in zip(k, ell)):
                    diff = tuple(b - a for a, b in zip(k, ell))
                    c = c - (
                        self.t_tables[ell][y_index]
                        / (multi_factorial(diff) * multi_factorial(k))
                    ) * float(np.prod(wdel ** np.asarray(diff)))
            out[..., self.structure.index(_poly_name(k))] += c * ix
        return out

    # -- Pi -------------------------------------------------------------------
    def pi_center_weights(self, n):
        out = []
        for i, s in enumerate(self.structure.symbols):
            if i == self.xi_index:
                out.append(self.xi_levels[n])
            elif i == self.ixi_index:
                w = self.conv_levels_coeffs[n].copy()
                for ell in self.taylor_ks:
                    pairing = self.poly_father_pairing(ell, n)
                    tl = an.subsample(self.t_tables[ell], self.scaling, self.N, n)
                    w = w - tl / multi_factorial(ell) * pairing
                out.append(w)
            else:
                out.append(self.poly_father_pairing(s.k, n))
        return out

    def abstract_father_point(self, sym, n, x, z, z_idx):
        if sym == self.xi_index:
            return float(self.xi_levels[n][z_idx])
        if sym != self.ixi_index:
            raise NotImplementedError
        acc = float(self.conv_levels_coeffs[n][z_idx])
        x_idx = self._grid_index(np.asarray(x))
        delta = wrap_displacement(np.asarray(z, dtype=float) - np.asarray(x, dtype=float))
        for ell in self.taylor_ks:
            acc -= (
                float(self.t_tables[ell][x_idx])
                / multi_factorial(ell)
                * float(self.poly_father_pairing(ell, n, delta))
            )
        return acc

    def pi_profile_table(self, sym, scale_n, profile):
        if sym == self.xi_index:
            return self._profile_corr(self.xi_levels[self.N], scale_n, profile, "xi")
        if sym == self.ixi_index:
            conv = self._profile_corr(
                self.conv_levels_coeffs[self.N], scale_n, profile, "conv"
            )
            out = conv
            for ell in self.taylor_ks:
                out = out - self.t_tables[ell] / multi_factorial(ell) * (
                    self.poly_profile_moment(ell, scale_n, profile)
                )
            return out
        return self.poly_profile_moment(self.structure.symbols[sym].k, scale_n, profile)


def _poly_name(k) -> str:
    return "1" if not any(k) else "X^" + ",".join(map(str, k))


def _deriv_kernel_array(
    kernel: KernelDecomposition,
    k: tuple[int, ...],
    fam: mra.WaveletFamily,
    scaling: Scaling,
    N: int,
    levels: int,
    margin: int = 8,
) -> np.ndarray:
    """V_N coefficients of u -> d^k P+_{<levels}(-u) (summed over levels)."""
    d = scaling.d

    def make_eval(n):
        def f(pts):
            return kernel.pn_deriv(k, n, -pts)

        return f

    out = np.zeros(scaling.grid_shape(N))
    for n in range(levels):
        fn = make_eval(n)
        if d == 1:
            supp = 2.0 ** (-n)
            fac = an.Fn1D(lambda u, fn=fn: fn(u[..., None]), (-supp, supp))
            out = out + an.analyze_kernel(
                an.SeparableKernel([(1.0, [fac])]), fam, scaling, N, margin=margin
            )
        else:
            out = out + _analyze_kernel_nd(fn, n, fam, scaling, N)
    return out


def _analyze_kernel_nd(fn, n, fam, scaling: Scaling, N: int, taylor: int = 2) -> np.ndarray:
    """Direct tensor quadrature for non-separable kernels: one-point corrected
    sampling on a moderately refined grid, then exact cascades per axis."""
    margin = max(2, 6 - max(0, n))  # coarser margin for the coarse levels
    shapes = [2 ** ((N + margin) * si) for si in scaling.s]
    axes = [
        (np.arange(m) + fam.center) / m - (1.0 if False else 0.0) for m in shapes
    ]
    # wrap sample points into [-1/2, 1/2) so compact kernels see their support
    mesh = np.meshgrid(*[((a + 0.5) % 1.0) - 0.5 for a in axes], indexing="ij")
    pts = np.stack(mesh, axis=-1)
    S = fn(pts)
    c = S
    mu = fam.centered_father_moments
    if taylor >= 2:
        for ax in range(scaling.d):
            c = c + (mu[2] / 2.0) * (
                np.roll(S, -1, axis=ax) - 2.0 * S + np.roll(S, 1, axis=ax)
            )
    c = c * 2.0 ** (-sum((N + margin) * si for si in scaling.s) / 2.0)
    for ax in range(scaling.d):
        for _ in range(margin * scaling.s[ax]):
            c = mra._analysis_axis(c, fam.h, ax)
    return c


def extend_structure(
    base_structure: RegularityStructure,
    base_model: NoiseModel,
    kernel: KernelDecomposition,
    gamma: float,
    conv_levels: int | None = None,
    margin: int = 8,
):
    """Add the abstract integral I Xi at homogeneity alpha + beta and build
    the admissible extended model (integer collisions rejected)."""
    alpha = base_model.alpha
    zeta_i = alpha + kernel.beta
    if abs(zeta_i - round(zeta_i)) < 1e-6:
        raise ValueError("homogeneity of the extension collides with an integer")
    if abs(gamma + kernel.beta - round(gamma + kernel.beta)) < 1e-6:
        raise ValueError("gamma + beta too close to an integer")
    sc = base_structure.scaling
    syms = polynomial_symbols(sc, gamma + kernel.beta)
    syms.append(Symbol("Xi", alpha, "abstract"))
    syms.append(Symbol("IXi", zeta_i, "abstract"))
    import numpy as _np

    ambient = tuple(float(k) for k in range(int(_np.ceil(gamma + kernel.beta)) + 2))
    st = RegularityStructure(syms, sc, ambient)
    N = base_model.N
    model = ExtendedModel(
        st,
        base_model.fam,
        base_model.xi,
        alpha,
        kernel,
        gamma,
        conv_levels if conv_levels is not None else N,
        margin=margin,
    )
    return st, model


def integration_matrix(structure: RegularityStructure) -> np.ndarray:
    """The abstract integration map: Xi -> IXi, polynomials -> 0."""
    M = np.zeros((structure.dim, structure.dim))
    if "Xi" in structure._by_name and "IXi" in structure._by_name:
        M[structure.index("IXi"), structure.index("Xi")] = 1.0
    return M


def embed_md(f: ModelledDistribution, target: RegularityStructure, gamma: float) -> ModelledDistribution:
    """Re-express a modelled distribution on a larger structure."""
    vals = np.zeros((*f.values.shape[:-1], target.dim))
    for i, s in enumerate(f.structure.symbols):
        vals[..., target.index(s.name)] = f.values[..., i]
    return ModelledDistribution(target, gamma, f.N, vals)


def schauder_apply(
    f: ModelledDistribution,
    ext_model: ExtendedModel,
    p,
    q,
    reconstruction: CoeffPyramid | None = None,
    with_norm: bool = True,
):
    """The order-raising operator: abstract integral plus Taylor terms plus
    the nonlocal reconstruction term, landing in order gamma + beta."""
    gamma = f.gamma
    beta = ext_model.kernel.beta
    if gamma <= 0 or abs(gamma - round(gamma)) < 1e-6:
        raise ValueError("need gamma > 0 away from the integers")
    if abs(gamma + beta - round(gamma + beta)) < 1e-6:
        raise ValueError("gamma + beta too close to an integer")
    st_out = ext_model.structure
    sc = st_out.scaling
    N = f.N
    # reconstruct f with the extended model (it restricts to the base symbols)
    f_ext = embed_md(f, st_out, gamma) if f.structure is not st_out else f
    if reconstruction is None:
        from .reconstruction import reconstruct

        reconstruction, _ = reconstruct(f_ext, ext_model, p, q)
    cN_rec = mra.level_coefficients(reconstruction, ext_model.fam, N)
    vals = np.zeros((*sc.grid_shape(N), st_out.dim))
    # 1) abstract part: I(f(x))
    xi_idx_out = st_out.index("Xi")
    f_xi = f_ext.values[..., xi_idx_out]
    vals[..., st_out.index("IXi")] = f_xi
    # 2+3) polynomial parts
    for k in ext_model.deriv_ks:
        if sc.scaled_degree(k) >= gamma + beta:
            continue
        kidx = st_out.index(_poly_name(k))
        rec_pair = an.correlate(cN_rec, ext_model.w_arrays[k])
        germ_pair = np.zeros_like(rec_pair)
        for i, s in enumerate(st_out.symbols):
            fi = f_ext.values[..., i]
            if not np.any(fi):
                continue
            if s.name == "Xi":
                germ_pair = germ_pair + fi * ext_model.t_tables[k]
            elif s.kind == "poly":
                germ_pair = germ_pair + fi * _poly_deriv_pairing(
                    ext_model.kernel, s.k, k, ext_model.conv_levels
                )
            else:  # IXi never occurs in the input (order gamma < zeta_I + ...)
                raise ValueError("input may not already contain the extension symbol")
        # Taylor part: only sectors with zeta + beta > |k|_s contribute
        taylor = np.zeros_like(rec_pair)
        deg = sc.scaled_degree(k)
        for i, s in enumerate(st_out.symbols):
            fi = f_ext.values[..., i]
            if not np.any(fi):
                continue
            if s.zeta + beta <= deg or s.zeta >= gamma:
                continue
            if s.name == "Xi":
                taylor = taylor + fi * ext_model.t_tables[k]
            elif s.kind == "poly":
                taylor = taylor + fi * _poly_deriv_pairing(
                    ext_model.kernel, s.k, k, ext_model.conv_levels
                )
        nonlocal_part = rec_pair - germ_pair
        vals[..., kidx] += (taylor + nonlocal_part) / multi_factorial(k)
    out = ModelledDistribution(st_out, gamma + beta, N, vals)
    report = d_norm(out, ext_model, p, q) if with_norm else None
    return out, report


def _poly_deriv_pairing(kernel: KernelDecomposition, m, k, levels) -> float:
    """<(. - x)^m, d^k P+(x - .)> = (-1)^{|m|+|k|} m!/(m-k)! mom(P+, m - k)."""
    if any(a > b for a, b in zip(k, m)):
        return 0.0
    diff = tuple(mi - ki for ki, mi in zip(k, m))
    sgn = (-1.0) ** (sum(m) + sum(k))
    fac = multi_factorial(m) / multi_factorial(diff)
    return sgn * fac * kernel.pplus_moment(diff, levels)


def convolution_identity_check(
    f: ModelledDistribution,
    ext_model: ExtendedModel,
    p,
    q,
    reconstruction: CoeffPyramid | None = None,
):
    """Relative error between reconstruct(P+_gamma f) and the direct
    finest-grid convolution of reconstruct(f) with the truncated kernel."""
    from .reconstruction import reconstruct

    sc = ext_model.scaling
    N = f.N
    f_ext = embed_md(f, ext_model.structure, f.gamma) if f.structure is not ext_model.structure else f
    if reconstruction is None:
        reconstruction, _ = reconstruct(f_ext, ext_model, p, q)
    pf, _ = schauder_apply(f, ext_model, p, q, reconstruction=reconstruction, with_norm=False)
    lhs, _ = reconstruct(pf, ext_model, p, q)
    cN_rec = mra.level_coefficients(reconstruction, ext_model.fam, N)
    conv_vals = an.correlate(cN_rec, ext_model.w_arrays[(0,) * sc.d])
    rhs = mra.forward_transform(conv_vals, ext_model.fam, sc)
    num = lhs.plus(rhs.scaled(-1.0)).l2()
    den = rhs.l2()
    rel = num / den if den > 0 else num
    per_level = []
    for n in range(N):
        dn = float(np.sqrt(np.sum((lhs.details[n] - rhs.details[n]) ** 2)))
        per_level.append((n, dn))
    return rel, per_level
