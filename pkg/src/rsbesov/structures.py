"""Regularity structures and models.

A structure is a graded basis of symbols; a model realises symbols as
distributions (Pi) and re-expands coefficients between base points (Gamma,
stored as dense lower-triangular matrices in the homogeneity grading).
Polynomial pairings are computed exactly from scaling-function moments;
abstract symbols are backed by coefficient pyramids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import analysis as an
from . import mra
from .besov import Profile, TestDictionary, profile_kernel
from .pyramid import CoeffPyramid
from .scaling import Scaling, wrap_displacement
from .util import multi_binom, multi_factorial


@dataclass(frozen=True)
class Symbol:
    name: str
    zeta: float
    kind: str  # "poly" | "abstract"
    k: tuple[int, ...] | None = None


class RegularityStructure:
    """Ordered graded basis with homogeneities bounded below.

    ambient_homogeneities may extend beyond the truncated basis (the
    polynomial sector contributes every natural number); order parameters
    must avoid the ambient set.
    """

    def __init__(
        self,
        symbols: list[Symbol],
        scaling: Scaling,
        ambient: tuple[float, ...] = (),
    ):
        self.scaling = scaling
        self.symbols = sorted(symbols, key=lambda s: (s.zeta, s.kind, s.name))
        self.dim = len(self.symbols)
        self.homogeneities = sorted({s.zeta for s in self.symbols})
        self.ambient_homogeneities = sorted(set(self.homogeneities) | set(ambient))
        self._by_name = {s.name: i for i, s in enumerate(self.symbols)}
        if len(self._by_name) != self.dim:
            raise ValueError("duplicate symbol names")

    def index(self, name: str) -> int:
        return self._by_name[name]

    def sector(self, zeta: float) -> list[int]:
        return [i for i, s in enumerate(self.symbols) if s.zeta == zeta]

    def sectors_below(self, gamma: float) -> list[float]:
        return [z for z in self.homogeneities if z < gamma]

    def indices_below(self, gamma: float) -> list[int]:
        return [i for i, s in enumerate(self.symbols) if s.zeta < gamma]

    def poly_indices(self) -> list[int]:
        return [i for i, s in enumerate(self.symbols) if s.kind == "poly"]

    def check_gamma(self, gamma: float) -> None:
        if any(abs(gamma - z) < 1e-12 for z in self.ambient_homogeneities):
            raise ValueError(f"gamma={gamma} coincides with a homogeneity")


def polynomial_symbols(scaling: Scaling, gamma: float) -> list[Symbol]:
    syms = []
    for k in scaling.multi_indices_below(gamma):
        name = "1" if not any(k) else "X^" + ",".join(map(str, k))
        syms.append(Symbol(name, float(scaling.scaled_degree(k)), "poly", tuple(k)))
    return syms


class Model:
    """Base model: Gamma from nearest-image displacements, Pi per symbol."""

    def __init__(self, structure: RegularityStructure, fam: mra.WaveletFamily, N: int):
        self.structure = structure
        self.scaling = structure.scaling
        self.fam = fam
        self.N = N
        self._gamma_cache: dict = {}
        self._profile_cache: dict = {}

    # -- Gamma ------------------------------------------------------------
    def gamma_disp(self, delta: tuple[float, ...]) -> np.ndarray:
        key = tuple(np.round(np.asarray(delta, dtype=float), 14))
        if key not in self._gamma_cache:
            self._gamma_cache[key] = self._gamma_matrix(np.asarray(key))
        return self._gamma_cache[key]

    def gamma(self, x, y) -> np.ndarray:
        """Gamma_{x,y}: re-expansion from base point y to base point x.

        Returns a fresh matrix (position-dependent models fill extra entries
        in place, and the displacement-keyed cache must stay pristine).
        """
        return self.gamma_disp(
            tuple(wrap_displacement(np.asarray(x) - np.asarray(y)))
        ).copy()

    def gamma_apply_field(
        self, vals: np.ndarray, delta, x_index=None
    ) -> np.ndarray:
        """Apply Gamma_{x, x+delta} to vals, where vals[idx] = f(x_idx + delta).

        idx runs over the target points; delta = source - target.  x_index
        (per-axis fine-grid indices) only matters for position-dependent
        models; translation-invariant models apply one matrix.
        """
        M = self.gamma_disp(tuple(wrap_displacement(-np.asarray(delta, dtype=float))))
        return vals @ M.T

    def _gamma_matrix(self, delta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _poly_gamma_block(self, M: np.ndarray, delta: np.ndarray) -> None:
        """Fill Gamma X^k = sum_{l<=k} binom(k,l) delta^{k-l} X^l."""
        st = self.structure
        for kidx in st.poly_indices():
            k = st.symbols[kidx].k
            for lidx in st.poly_indices():
                l = st.symbols[lidx].k
                if all(a <= b for a, b in zip(l, k)):
                    diff = tuple(b - a for a, b in zip(l, k))
                    M[lidx, kidx] = multi_binom(k, l) * float(
                        np.prod(np.asarray(delta) ** np.asarray(diff))
                    )

    # -- Pi ---------------------------------------------------------------
    def poly_father_pairing(self, k: tuple[int, ...], n: int, delta=None):
        """<(. - x)^k, phi^n_z> on the cover, delta = z - x (None: centered).

        Exact via father moments: per dimension
        2^{-n s (k+1/2)} sum_b binom(k,b) (2^{n s} delta)^(k-b) M_b.
        """
        fam, sc = self.fam, self.scaling
        out = 1.0
        for i, si in enumerate(sc.s):
            ki = k[i]
            scale = 2.0 ** (n * si)
            if delta is None:
                di = 0.0
            else:
                di = np.asarray(delta)[..., i]
            acc = 0.0
            for b in range(ki + 1):
                acc += (
                    math.comb(ki, b)
                    * (scale * di) ** (ki - b)
                    * fam.father_moments[b]
                )
            out = out * (2.0 ** (-n * si * (ki + 0.5)) * acc)
        return out

    def pi_center_weights(self, n: int) -> list:
        """Per symbol: <Pi_x tau, phi^n_x> as a scalar or a Lambda_n array."""
        raise NotImplementedError

    def pi_father_general(self, sym: int, n: int, x: np.ndarray, z_delta: np.ndarray):
        """<Pi_x tau, phi^n_z> with z = x + z_delta (arrays broadcast over x)."""
        raise NotImplementedError

    def pi_profile_table(self, sym: int, scale_n: int, profile: Profile) -> np.ndarray | float:
        """<Pi_x tau, eta^lambda_x> for all x on Lambda_N (or a scalar)."""
        raise NotImplementedError

    def _profile_corr(self, cN: np.ndarray, scale_n: int, profile: Profile, tag) -> np.ndarray:
        key = (tag, scale_n, profile.name)
        if key not in self._profile_cache:
            k = an.analyze_kernel(
                profile_kernel(profile, self.scaling, scale_n),
                self.fam,
                self.scaling,
                self.N,
            )
            self._profile_cache[key] = an.correlate(cN, k)
        return self._profile_cache[key]

    def poly_profile_moment(self, k: tuple[int, ...], scale_n: int, profile: Profile) -> float:
        """<(. - x)^k, eta^lambda_x> = lambda^{|k|_s} * prod moments."""
        lam = 2.0 ** (-scale_n)
        out = lam ** self.scaling.scaled_degree(k)
        for ki in k:
            out *= profile.moment(ki)
        return out


class PolynomialModel(Model):
    """Pi_x X^k = (. - x)^k, Gamma the translation action."""

    def __init__(self, structure, fam, N):
        super().__init__(structure, fam, N)

    def _gamma_matrix(self, delta):
        M = np.eye(self.structure.dim)
        self._poly_gamma_block(M, delta)
        return M

    def pi_center_weights(self, n):
        return [
            self.poly_father_pairing(s.k, n) for s in self.structure.symbols
        ]

    def pi_profile_table(self, sym, scale_n, profile):
        return self.poly_profile_moment(self.structure.symbols[sym].k, scale_n, profile)


class NoiseModel(Model):
    """One abstract symbol Xi realised by a fixed coefficient pyramid."""

    def __init__(self, structure, fam, xi: CoeffPyramid, alpha: float):
        super().__init__(structure, fam, xi.N)
        self.alpha = alpha
        self.xi = xi
        self.xi_levels = mra.all_level_coefficients(xi, fam)
        self.xi_index = structure.index("Xi")

    def _gamma_matrix(self, delta):
        M = np.eye(self.structure.dim)
        self._poly_gamma_block(M, delta)
        return M

    def pi_center_weights(self, n):
        out = []
        for i, s in enumerate(self.structure.symbols):
            if i == self.xi_index:
                out.append(self.xi_levels[n])
            else:
                out.append(self.poly_father_pairing(s.k, n))
        return out

    def abstract_father_point(self, sym, n, x, z, z_idx) -> float:
        if sym != self.xi_index:
            raise NotImplementedError
        return float(self.xi_levels[n][z_idx])

    def pi_profile_table(self, sym, scale_n, profile):
        if sym == self.xi_index:
            return self._profile_corr(self.xi_levels[self.N], scale_n, profile, "xi")
        return self.poly_profile_moment(self.structure.symbols[sym].k, scale_n, profile)


def polynomial_structure(
    gamma: float, scaling: Scaling, fam: mra.WaveletFamily, N: int
):
    """The polynomial structure up to order gamma with its canonical model."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    ambient = tuple(float(k) for k in range(int(np.ceil(gamma)) + 2))
    st = RegularityStructure(polynomial_symbols(scaling, gamma), scaling, ambient)
    st.check_gamma(gamma)
    return st, PolynomialModel(st, fam, N)


def noise_structure(
    alpha: float, xi: CoeffPyramid, gamma: float, fam: mra.WaveletFamily
):
    """Polynomial symbols plus one noise symbol Xi at homogeneity alpha < 0."""
    if not (alpha < 0 <= gamma):
        raise ValueError("need alpha < 0 <= gamma")
    scaling = xi.scaling
    syms = polynomial_symbols(scaling, gamma) + [Symbol("Xi", alpha, "abstract")]
    ambient = tuple(float(k) for k in range(int(np.ceil(gamma)) + 2))
    st = RegularityStructure(syms, scaling, ambient)
    st.check_gamma(gamma)
    return st, NoiseModel(st, fam, xi, alpha)


# ---------------------------------------------------------------------------
# norms and validation


@dataclass
class ModelNorms:
    pi: float
    gamma: float
    pi_table: list = field(default_factory=list)


def sector_abs(structure: RegularityStructure, vec: np.ndarray, zeta: float) -> np.ndarray:
    """|tau|_zeta: max modulus of the coefficients in the zeta sector."""
    idx = structure.sector(zeta)
    return np.max(np.abs(vec[..., idx]), axis=-1)


def gamma_norm(
    model: Model,
    gamma: float,
    levels: tuple[int, ...] = (1, 2, 3),
    n_base: int = 3,
) -> float:
    """||Gamma|| over grid pairs: sup |Gamma_{x,y} tau|_beta / ||x-y||^{zeta-beta}.

    Shipped models are translation-invariant up to the extension corrections,
    so a few base points suffice alongside the displacement sweep.
    """
    st = model.structure
    sc = model.scaling
    worst = 0.0
    zs = st.sectors_below(gamma)
    rng = np.random.default_rng(0)
    shape = sc.grid_shape(model.N)
    bases = [np.zeros(sc.d)] + [
        np.array([rng.integers(0, shape[i]) / shape[i] for i in range(sc.d)])
        for _ in range(n_base - 1)
    ]
    for m in levels:
        if m > model.N:
            continue
        pts = sc.grid_points(m).reshape(-1, sc.d)
        for delta in pts:
            dn = sc.snorm(delta)
            if dn == 0.0 or dn > 0.5:
                continue
            for x in bases:
                y = (x - wrap_displacement(delta)) % 1.0
                M = model.gamma(x, y)
                for zi, z in enumerate(zs):
                    for tau in st.sector(z):
                        col = M[:, tau]
                        for b in zs[: zi + 1]:
                            if b == z:
                                continue
                            v = float(np.max(np.abs(col[st.sector(b)])))
                            worst = max(worst, v / dn ** (z - b))
    return worst


def pi_norm(
    model: Model, gamma: float, dictionary: TestDictionary, sub_level: int = 3
) -> ModelNorms:
    """Finite-dictionary, dyadic-scale evaluation of ||Pi|| (and ||Gamma||)."""
    st = model.structure
    sc = model.scaling
    worst = 0.0
    table = []
    for n in dictionary.scales:
        if n > model.N - 2:
            continue
        lam = 2.0 ** (-n)
        for prof in dictionary.profiles:
            for i, s in enumerate(st.symbols):
                if s.zeta >= gamma:
                    continue
                tab = model.pi_profile_table(i, n, prof)
                val = float(np.max(np.abs(tab)))
                ratio = val / lam**s.zeta
                table.append((n, prof.name, s.name, ratio))
                worst = max(worst, ratio)
    return ModelNorms(worst, gamma_norm(model, gamma), table)


def model_norms(model: Model, gamma: float, dictionary: TestDictionary) -> ModelNorms:
    return pi_norm(model, gamma, dictionary)


@dataclass
class ValidationReport:
    triangularity: float
    group_law: float
    identity: float
    compatibility: float

    @property
    def max_violation(self) -> float:
        return max(self.triangularity, self.group_law, self.identity, self.compatibility)

    def valid(self, tol: float = 1e-8) -> bool:
        return self.max_violation <= tol


def validate_model(
    model: Model,
    gamma: float,
    n_samples: int = 200,
    seed: int = 0,
    radius: float = 1.0 / 8.0,
) -> ValidationReport:
    """Check triangularity, the group laws, and Pi_x Gamma_{x,y} = Pi_y on
    sampled nearby triples (displacements within the given s-radius)."""
    st, sc = model.structure, model.scaling
    rng = np.random.default_rng(seed)
    N = model.N
    zetas = [s.zeta for s in st.symbols]

    tri = 0.0
    grp = 0.0
    idm = 0.0
    compat = 0.0
    shape = sc.grid_shape(N)

    def rand_point():
        return np.array([rng.integers(0, shape[i]) / shape[i] for i in range(sc.d)])

    def rand_disp(r):
        lim = [max(1, int(r ** sc.s[i] * shape[i])) for i in range(sc.d)]
        return np.array(
            [rng.integers(-lim[i], lim[i] + 1) / shape[i] for i in range(sc.d)]
        )

    for _ in range(n_samples):
        x = rand_point()
        y = (x + rand_disp(radius)) % 1.0
        z = (y + rand_disp(radius)) % 1.0
        Mxy, Myz, Mxz = model.gamma(x, y), model.gamma(y, z), model.gamma(x, z)
        grp = max(grp, float(np.max(np.abs(Mxy @ Myz - Mxz))))
        idm = max(idm, float(np.max(np.abs(model.gamma(x, x) - np.eye(st.dim)))))
        for j in range(st.dim):
            for i in range(st.dim):
                want = 1.0 if i == j else 0.0
                if zetas[i] > zetas[j] or (zetas[i] == zetas[j] and i != j) or i == j:
                    tri = max(tri, abs(Mxy[i, j] - want))

    # Pi compatibility on father pairings: base points and test centres on
    # the level grid so that abstract-symbol pairings are exact lookups.
    # Levels >= 3 keep the sampled triples inside a quarter period, where
    # nearest-image displacements are additive.
    levels = sorted({min(3, N), min(5, N)})
    for n in levels:
        shape_n = sc.grid_shape(n)
        for _ in range(n_samples // 4 + 1):
            xi_idx = tuple(rng.integers(0, shape_n[i]) for i in range(sc.d))
            off_y = tuple(int(rng.integers(-1, 2)) for _ in range(sc.d))
            off_z = tuple(int(rng.integers(-1, 2)) for _ in range(sc.d))
            x = np.array([xi_idx[i] / shape_n[i] for i in range(sc.d)])
            y = np.array(
                [((xi_idx[i] + off_y[i]) % shape_n[i]) / shape_n[i] for i in range(sc.d)]
            )
            z_idx = tuple((xi_idx[i] + off_z[i]) % shape_n[i] for i in range(sc.d))
            z = np.array([z_idx[i] / shape_n[i] for i in range(sc.d)])
            Mxy = model.gamma(x, y)
            for j in range(st.dim):
                acc = 0.0
                for i in range(st.dim):
                    if Mxy[i, j] != 0.0:
                        acc += Mxy[i, j] * _pi_father_point(model, i, n, x, z, z_idx)
                rhs = _pi_father_point(model, j, n, y, z, z_idx)
                compat = max(compat, abs(acc - rhs))
    return ValidationReport(tri, grp, idm, compat)


def _pi_father_point(model: Model, sym: int, n: int, x, z, z_idx) -> float:
    """<Pi_x tau, phi^n_z> at a single Lambda_n point z (index z_idx)."""
    s = model.structure.symbols[sym]
    if s.kind == "poly":
        delta = wrap_displacement(np.asarray(z) - np.asarray(x))
        return float(model.poly_father_pairing(s.k, n, delta))
    pairer = getattr(model, "abstract_father_point", None)
    if pairer is None:
        raise NotImplementedError("no pointwise Pi evaluation for this symbol")
    return pairer(sym, n, x, z, z_idx)
