"""File formats beyond the coefficient pyramid: modelled-distribution blocks,
model manifests, and sampled kernel profiles."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .modelled import ModelledDistribution
from .pyramid import RSBF_MAGIC, RSBF_VERSION, save_rsbf
from .scaling import Scaling
from .structures import Model, RegularityStructure, Symbol

MD_MAGIC = b"RSMD"


def save_md(path, f: ModelledDistribution) -> None:
    """RSBF-style header (magic, version, d, s, N, nsym) followed by one
    lexicographic sample block per symbol."""
    sc = f.structure.scaling
    with open(path, "wb") as fh:
        fh.write(MD_MAGIC)
        fh.write(struct.pack("<I", RSBF_VERSION))
        fh.write(struct.pack("<I", sc.d))
        for si in sc.s:
            fh.write(struct.pack("<I", si))
        fh.write(struct.pack("<I", f.N))
        fh.write(struct.pack("<I", f.structure.dim))
        fh.write(struct.pack("<d", f.gamma))
        for i in range(f.structure.dim):
            fh.write(np.ascontiguousarray(f.values[..., i], dtype="<f8").tobytes())


def load_md(path, structure: RegularityStructure) -> ModelledDistribution:
    with open(path, "rb") as fh:
        if fh.read(4) != MD_MAGIC:
            raise ValueError("not a modelled-distribution file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != RSBF_VERSION:
            raise ValueError(f"unsupported version {version}")
        (d,) = struct.unpack("<I", fh.read(4))
        s = tuple(struct.unpack("<I", fh.read(4))[0] for _ in range(d))
        (N,) = struct.unpack("<I", fh.read(4))
        (nsym,) = struct.unpack("<I", fh.read(4))
        (gamma,) = struct.unpack("<d", fh.read(8))
        sc = Scaling(s)
        if nsym != structure.dim or sc != structure.scaling:
            raise ValueError("file does not match the given structure")
        vals = np.zeros((*sc.grid_shape(N), nsym))
        cnt = sc.grid_size(N)
        for i in range(nsym):
            vals[..., i] = np.frombuffer(fh.read(8 * cnt), dtype="<f8").reshape(
                sc.grid_shape(N)
            )
        return ModelledDistribution(structure, gamma, N, vals)


def save_model_manifest(prefix, model: Model) -> list[str]:
    """Text manifest of the structure plus one RSBF table per abstract symbol.

    Returns the written file names (manifest first)."""
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    st = model.structure
    lines = ["format: rsbesov-model/1"]
    lines.append("scaling: " + ",".join(map(str, st.scaling.s)))
    lines.append("levels: " + str(model.N))
    lines.append(
        "homogeneities: " + ",".join(format(z, ".17g") for z in st.homogeneities)
    )
    written = [str(prefix) + ".manifest"]
    for sym in st.symbols:
        tag = f"symbol: {sym.name} zeta={format(sym.zeta, '.17g')} kind={sym.kind}"
        if sym.k is not None:
            tag += " k=" + ",".join(map(str, sym.k))
        lines.append(tag)
    xi = getattr(model, "xi", None)
    if xi is not None:
        name = str(prefix) + ".Xi.rsbf"
        save_rsbf(name, xi)
        lines.append("table: Xi " + Path(name).name)
        written.append(name)
    with open(written[0], "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return written


def load_model_manifest(path) -> tuple[list[Symbol], Scaling, int, dict]:
    """Parse a manifest back into symbols, scaling, levels, and table names."""
    symbols = []
    tables = {}
    scaling = None
    levels = None
    for line in Path(path).read_text().splitlines():
        if line.startswith("scaling:"):
            scaling = Scaling(tuple(int(x) for x in line.split(":")[1].split(",")))
        elif line.startswith("levels:"):
            levels = int(line.split(":")[1])
        elif line.startswith("symbol:"):
            parts = line.split()
            name = parts[1]
            fields = dict(p.split("=", 1) for p in parts[2:])
            k = (
                tuple(int(x) for x in fields["k"].split(","))
                if "k" in fields
                else None
            )
            symbols.append(Symbol(name, float(fields["zeta"]), fields["kind"], k))
        elif line.startswith("table:"):
            _, name, fname = line.split()
            tables[name] = fname
    if scaling is None or levels is None:
        raise ValueError("incomplete manifest")
    return symbols, scaling, levels, tables


KERNEL_MAGIC = b"RSKP"


def save_kernel_profile(path, kernel, resolution_bits: int = 9) -> None:
    """Sampled base piece with header (d, s, beta, r, resolution)."""
    sc = kernel.scaling
    with open(path, "wb") as fh:
        fh.write(KERNEL_MAGIC)
        fh.write(struct.pack("<I", RSBF_VERSION))
        fh.write(struct.pack("<I", sc.d))
        for si in sc.s:
            fh.write(struct.pack("<I", si))
        fh.write(struct.pack("<d", kernel.beta))
        fh.write(struct.pack("<I", kernel.r))
        fh.write(struct.pack("<I", resolution_bits))
        n = 2**resolution_bits
        axes = [np.linspace(-1.0, 1.0, n, endpoint=False) + 1.0 / n for _ in sc.s]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack(mesh, axis=-1)
        fh.write(np.ascontiguousarray(kernel.p0(pts), dtype="<f8").tobytes())


def load_kernel_profile(path):
    """Header fields and the raw sample block of a stored base piece."""
    with open(path, "rb") as fh:
        if fh.read(4) != KERNEL_MAGIC:
            raise ValueError("not a kernel profile file")
        (version,) = struct.unpack("<I", fh.read(4))
        (d,) = struct.unpack("<I", fh.read(4))
        s = tuple(struct.unpack("<I", fh.read(4))[0] for _ in range(d))
        (beta,) = struct.unpack("<d", fh.read(8))
        (r,) = struct.unpack("<I", fh.read(4))
        (bits,) = struct.unpack("<I", fh.read(4))
        n = 2**bits
        vals = np.frombuffer(fh.read(8 * n**d), dtype="<f8").reshape((n,) * d)
        return {"s": s, "beta": beta, "r": r, "resolution_bits": bits}, vals
