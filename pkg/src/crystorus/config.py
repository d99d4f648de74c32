"""TOML configuration for the command line tools.

Exact quantities (Gram entries, translation parts, torus points) are written
as strings such as ``"1/2"`` so they are parsed into ``Fraction`` without
passing through floating point.  Floats are accepted only in the lattice
basis and in the bundle-section, elasticity, k-path and simulation tables.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Any

import jsonschema
import numpy as np
import tomli
import tomli_w

from . import bundle as bd
from . import crystal as cr
from . import phonon as ph


class ConfigError(ValueError):
    """Schema violation; ``path`` names the offending field."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


_RATIONAL = {
    "oneOf": [
        {"type": "integer"},
        {"type": "string", "pattern": r"^\s*[-+]?\d+\s*(/\s*\d+\s*)?$"},
    ]
}
_NUMBER = {"type": "number"}


def _matrix(item):
    return {"type": "array", "minItems": 1, "items": {"type": "array", "minItems": 1, "items": item}}


SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["lattice", "generators"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "lattice": {
            "type": "object",
            "required": ["basis", "gram"],
            "additionalProperties": False,
            "properties": {"basis": _matrix(_NUMBER), "gram": _matrix(_RATIONAL)},
        },
        "generators": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["matrix"],
                "additionalProperties": False,
                "properties": {
                    "matrix": _matrix({"type": "integer"}),
                    "translation": {"type": "array", "items": _RATIONAL},
                },
            },
        },
        "bundle": {
            "type": "object",
            "required": ["charts", "edges"],
            "additionalProperties": False,
            "properties": {
                "charts": {"type": "integer", "minimum": 1},
                "edges": {
                    "type": "array",
                    "items": {
                        "type": "array",
                        "minItems": 3,
                        "maxItems": 3,
                        "items": {"type": "integer", "minimum": 0},
                    },
                },
                "triangles": {
                    "type": "array",
                    "items": {
                        "type": "array",
                        "minItems": 3,
                        "maxItems": 3,
                        "items": {"type": "integer", "minimum": 0},
                    },
                },
                "basepoint": {"type": "integer", "minimum": 0},
                "section": {
                    "type": "object",
                    "required": ["intervals", "samples", "base_point"],
                    "additionalProperties": False,
                    "properties": {
                        "intervals": _matrix(_NUMBER),
                        "period": {"type": "number", "exclusiveMinimum": 0},
                        "samples": {"type": "integer", "minimum": 3},
                        "base_point": {"type": "array", "items": _RATIONAL},
                        "perturbation_amplitude": {"type": "array", "items": _NUMBER},
                        "perturbation_wavenumber": {"type": "integer"},
                        "tolerance": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
            },
        },
        "elasticity": {
            "type": "object",
            "required": ["model"],
            "additionalProperties": False,
            "properties": {
                "model": {"enum": ["isotropic", "cubic", "full-tensor"]},
                "lambda": _NUMBER,
                "mu": _NUMBER,
                "c11": _NUMBER,
                "c12": _NUMBER,
                "c44": _NUMBER,
                "density": {"oneOf": [_NUMBER, _matrix(_NUMBER)]},
                "tensor": {"type": "array"},
                "objective": {"type": "boolean"},
                "dim": {"type": "integer", "minimum": 1},
            },
        },
        "kpath": {
            "type": "object",
            "required": ["waypoints"],
            "additionalProperties": False,
            "properties": {
                "waypoints": _matrix(_NUMBER),
                "samples": {"type": "integer", "minimum": 1},
            },
        },
        "simulation": {
            "type": "object",
            "required": ["direction"],
            "additionalProperties": False,
            "properties": {
                "direction": {"type": "array", "items": _NUMBER},
                "n": {"type": "integer", "minimum": 3},
                "length": {"type": "number", "exclusiveMinimum": 0},
                "mode": {"type": "integer", "minimum": 1},
                "branch": {"type": "integer", "minimum": 0},
                "amplitude": _NUMBER,
                "steps": {"type": "integer", "minimum": 0},
                "cfl": {"type": "number", "exclusiveMinimum": 0},
                "dt": {"type": "number", "exclusiveMinimum": 0},
            },
        },
    },
}


def _q(x) -> Fraction:
    return Fraction(x.replace(" ", "")) if isinstance(x, str) else Fraction(x)


def _qstr(x: Fraction) -> str:
    return str(Fraction(x))


def _tup(rows, conv=float):
    return tuple(tuple(conv(x) for x in r) for r in rows)


@dataclass(frozen=True)
class GeneratorSpec:
    matrix: tuple[tuple[int, ...], ...]
    translation: tuple[Fraction, ...]


@dataclass(frozen=True)
class SectionSpec:
    intervals: tuple[tuple[float, float], ...]
    samples: int
    base_point: tuple[Fraction, ...]
    period: float | None = None
    perturbation_amplitude: tuple[float, ...] = ()
    perturbation_wavenumber: int = 1
    tolerance: float = 1e-9


@dataclass(frozen=True)
class BundleSpec:
    charts: int
    edges: tuple[tuple[int, int, int], ...]
    triangles: tuple[tuple[int, int, int], ...] = ()
    basepoint: int = 0
    section: SectionSpec | None = None


@dataclass(frozen=True)
class ElasticitySpec:
    model: str
    params: tuple[tuple[str, Any], ...] = ()

    def get(self, key, default=None):
        return dict(self.params).get(key, default)


@dataclass(frozen=True)
class KPathSpec:
    waypoints: tuple[tuple[float, ...], ...]
    samples: int = 20


@dataclass(frozen=True)
class SimulationSpec:
    direction: tuple[float, ...]
    n: int = 256
    length: float = 1.0
    mode: int = 1
    branch: int = 0
    amplitude: float = 1e-3
    steps: int = 1000
    cfl: float = 0.5
    dt: float | None = None


@dataclass(frozen=True)
class CrystalConfig:
    name: str
    basis_rows: tuple[tuple[float, ...], ...]
    gram: tuple[tuple[Fraction, ...], ...]
    generators: tuple[GeneratorSpec, ...]
    description: str = ""
    bundle: BundleSpec | None = None
    elasticity: ElasticitySpec | None = None
    kpath: KPathSpec | None = None
    simulation: SimulationSpec | None = None

    @property
    def dim(self) -> int:
        return len(self.gram)

    # -- building library objects --------------------------------------

    def lattice(self) -> cr.Lattice:
        return cr.Lattice(np.array(self.basis_rows, dtype=float).T, self.gram)

    def space_group(self) -> cr.SpaceGroup:
        return cr.build_space_group(
            self.lattice(), [(g.matrix, g.translation) for g in self.generators]
        )

    def flat_bundle(self, sg: cr.SpaceGroup | None = None) -> bd.FlatBundle:
        if self.bundle is None:
            raise ConfigError("no [bundle] table", "bundle")
        sg = sg or self.space_group()
        base = bd.BaseComplex(
            self.bundle.charts,
            [(a, b) for a, b, _ in self.bundle.edges],
            self.bundle.triangles,
        )
        return bd.FlatBundle(base, sg, {(a, b): g for a, b, g in self.bundle.edges})

    def elastic_system(self) -> tuple[ph.DensityMatrix, ph.ElasticTensor, Any]:
        """Density, tensor and the moduli object (``None`` for a full tensor)."""
        e = self.elasticity
        if e is None:
            raise ConfigError("no [elasticity] table", "elasticity")
        density = e.get("density", 1.0)
        if e.model == "isotropic":
            m = ph.IsotropicModuli(e.get("lambda", 0.0), e.get("mu", 0.0), float(density))
            rho, C = ph.assemble_isotropic(m, e.get("dim", self.dim))
            return rho, C, m
        if e.model == "cubic":
            m = ph.CubicModuli(e.get("c11"), e.get("c12"), e.get("c44"), float(density))
            if None in (m.c11, m.c12, m.c44):
                raise ConfigError("cubic model needs c11, c12, c44", "elasticity")
            rho, C = ph.assemble_cubic(m)
            return rho, C, m
        tensor = e.get("tensor")
        if tensor is None:
            raise ConfigError("full-tensor model needs 'tensor'", "elasticity.tensor")
        C = ph.ElasticTensor(np.array(tensor, dtype=float), objective=bool(e.get("objective", False)))
        if isinstance(density, tuple):
            rho = ph.DensityMatrix(np.array(density, dtype=float))
        else:
            rho = ph.DensityMatrix.scalar(float(density), C.dim)
        return rho, C, None

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"name": self.name}
        if self.description:
            out["description"] = self.description
        out["lattice"] = {
            "basis": [list(r) for r in self.basis_rows],
            "gram": [[_qstr(x) for x in r] for r in self.gram],
        }
        out["generators"] = [
            {"matrix": [list(r) for r in g.matrix], "translation": [_qstr(x) for x in g.translation]}
            for g in self.generators
        ]
        if self.bundle is not None:
            b = self.bundle
            bt: dict[str, Any] = {
                "charts": b.charts,
                "edges": [list(e) for e in b.edges],
                "triangles": [list(t) for t in b.triangles],
                "basepoint": b.basepoint,
            }
            if b.section is not None:
                s = b.section
                st: dict[str, Any] = {
                    "intervals": [list(i) for i in s.intervals],
                    "samples": s.samples,
                    "base_point": [_qstr(x) for x in s.base_point],
                    "perturbation_amplitude": list(s.perturbation_amplitude),
                    "perturbation_wavenumber": s.perturbation_wavenumber,
                    "tolerance": s.tolerance,
                }
                if s.period is not None:
                    st["period"] = s.period
                bt["section"] = st
            out["bundle"] = bt
        if self.elasticity is not None:
            et: dict[str, Any] = {"model": self.elasticity.model}
            for k, v in self.elasticity.params:
                et[k] = _untuple(v)
            out["elasticity"] = et
        if self.kpath is not None:
            out["kpath"] = {"waypoints": [list(w) for w in self.kpath.waypoints], "samples": self.kpath.samples}
        if self.simulation is not None:
            sim = {k: _untuple(v) for k, v in asdict(self.simulation).items() if v is not None}
            out["simulation"] = sim
        return out

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())


def _untuple(v):
    if isinstance(v, tuple):
        return [_untuple(x) for x in v]
    return v


def _retuple(v):
    if isinstance(v, list):
        return tuple(_retuple(x) for x in v)
    if isinstance(v, int) and not isinstance(v, bool):
        return float(v)
    return v


def _schema_path(err: jsonschema.ValidationError) -> str:
    path = ""
    for p in err.absolute_path:
        path += f"[{p}]" if isinstance(p, int) else (f".{p}" if path else str(p))
    return path or "<root>"


def from_dict(data: dict) -> CrystalConfig:
    """Validate against :data:`SCHEMA` and build a :class:`CrystalConfig`."""
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(err.message, _schema_path(err))

    lat = data["lattice"]
    gram = _tup(lat["gram"], _q)
    basis = _tup(lat["basis"], float)
    d = len(gram)
    if len(basis) != d or any(len(r) != d for r in basis) or any(len(r) != d for r in gram):
        raise ConfigError(f"basis and gram must be {d} x {d}", "lattice")

    gens = []
    for i, g in enumerate(data["generators"]):
        m = _tup(g["matrix"], int)
        if len(m) != d or any(len(r) != d for r in m):
            raise ConfigError(f"generator matrix must be {d} x {d}", f"generators[{i}].matrix")
        t = tuple(_q(x) for x in g.get("translation", [0] * d))
        if len(t) != d:
            raise ConfigError(f"translation must have {d} entries", f"generators[{i}].translation")
        gens.append(GeneratorSpec(m, t))

    bundle = None
    if "bundle" in data:
        b = data["bundle"]
        section = None
        if "section" in b:
            s = b["section"]
            if any(len(iv) != 2 for iv in s["intervals"]):
                raise ConfigError("intervals must be [start, stop] pairs", "bundle.section.intervals")
            if len(s["intervals"]) != b["charts"]:
                raise ConfigError("need one interval per chart", "bundle.section.intervals")
            if len(s["base_point"]) != d:
                raise ConfigError(f"base_point must have {d} entries", "bundle.section.base_point")
            amp = tuple(float(x) for x in s.get("perturbation_amplitude", []))
            if amp and len(amp) != d:
                raise ConfigError(f"perturbation_amplitude must have {d} entries",
                                  "bundle.section.perturbation_amplitude")
            section = SectionSpec(
                intervals=_tup(s["intervals"], float),
                samples=s["samples"],
                base_point=tuple(_q(x) for x in s["base_point"]),
                period=float(s["period"]) if "period" in s else None,
                perturbation_amplitude=amp,
                perturbation_wavenumber=s.get("perturbation_wavenumber", 1),
                tolerance=float(s.get("tolerance", 1e-9)),
            )
        bundle = BundleSpec(
            charts=b["charts"],
            edges=_tup(b["edges"], int),
            triangles=_tup(b.get("triangles", []), int),
            basepoint=b.get("basepoint", 0),
            section=section,
        )

    elasticity = None
    if "elasticity" in data:
        e = dict(data["elasticity"])
        model = e.pop("model")
        params = []
        for k in sorted(e):
            v = e[k]
            if k in ("objective", "dim"):
                params.append((k, v))
            else:
                params.append((k, _retuple(v)))
        elasticity = ElasticitySpec(model, tuple(params))

    kpath = None
    if "kpath" in data:
        k = data["kpath"]
        kpath = KPathSpec(_tup(k["waypoints"], float), k.get("samples", 20))

    simulation = None
    if "simulation" in data:
        s = dict(data["simulation"])
        s["direction"] = tuple(float(x) for x in s["direction"])
        for key in ("length", "amplitude", "cfl", "dt"):
            if key in s:
                s[key] = float(s[key])
        simulation = SimulationSpec(**s)

    return CrystalConfig(
        name=data.get("name", "unnamed"),
        description=data.get("description", ""),
        basis_rows=basis,
        gram=gram,
        generators=tuple(gens),
        bundle=bundle,
        elasticity=elasticity,
        kpath=kpath,
        simulation=simulation,
    )


def loads(text: str) -> CrystalConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from None
    return from_dict(data)


def load(path) -> CrystalConfig:
    with open(path, "rb") as fh:
        try:
            data = tomli.load(fh)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML: {exc}") from None
    return from_dict(data)


def section_from_spec(b: bd.FlatBundle, spec: SectionSpec, samples: int | None = None, basepoint: int = 0):
    """Compatible section described by a ``[bundle.section]`` table."""
    n = samples or spec.samples
    edges = [e for e in b.base.edges]
    grids, overlaps = bd.interval_cover(spec.intervals, edges, n, spec.period)
    amp = np.array(spec.perturbation_amplitude, dtype=float)
    pert = None
    if amp.size:
        period = spec.period or 1.0
        kw = spec.perturbation_wavenumber

        def pert(x):
            return np.outer(np.sin(2 * np.pi * kw * x / period), amp)

    return bd.compatible_section(b, grids, overlaps, spec.base_point, pert, basepoint)


__all__ = [
    "ConfigError",
    "CrystalConfig",
    "SCHEMA",
    "from_dict",
    "load",
    "loads",
    "section_from_spec",
]
