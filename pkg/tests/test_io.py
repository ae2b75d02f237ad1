import numpy as np

from rsbesov import besov, io, modelled as md, schauder as sch, structures as rs
from conftest import make_sin_lift


def test_md_file_roundtrip(tmp_path, sc1, fam6):
    st, model, f = make_sin_lift(sc1, fam6, 6)
    path = tmp_path / "f.rsmd"
    io.save_md(path, f)
    back = io.load_md(path, st)
    assert back.gamma == f.gamma and back.N == f.N
    np.testing.assert_array_equal(back.values, f.values)


def test_model_manifest_roundtrip(tmp_path, sc1, fam6):
    xi = besov.synthesize("random_besov", sc1, 6, fam6, alpha=-0.5, seed=1)
    st, nm = rs.noise_structure(-0.5, xi, 1.25, fam6)
    files = io.save_model_manifest(tmp_path / "model", nm)
    symbols, scaling, levels, tables = io.load_model_manifest(files[0])
    assert scaling == sc1 and levels == 6
    assert [s.name for s in symbols] == [s.name for s in st.symbols]
    assert [s.zeta for s in symbols] == [s.zeta for s in st.symbols]
    assert "Xi" in tables
    from rsbesov.pyramid import load_rsbf

    back = load_rsbf(tmp_path / tables["Xi"])
    assert back.max_abs_diff(xi) == 0.0


def test_kernel_profile_roundtrip(tmp_path, sc1):
    K = sch.decompose_kernel("riesz", sc1, r=2, beta=0.6)
    path = tmp_path / "kernel.rskp"
    io.save_kernel_profile(path, K, resolution_bits=8)
    header, vals = io.load_kernel_profile(path)
    assert header["s"] == (1,) and header["beta"] == 0.6 and header["r"] == 2
    n = 2 ** header["resolution_bits"]
    pts = (np.linspace(-1, 1, n, endpoint=False) + 1.0 / n)[:, None]
    np.testing.assert_allclose(vals, K.p0(pts), atol=0)
