"""Built-in configurations.

Edge triples ``(a, b, g)`` index point-group elements in the order produced
by :func:`crystorus.crystal.build_point_group`: the identity is 0 and the
generators follow in the order listed.
"""

from __future__ import annotations

from .config import CrystalConfig, from_dict

_CUBIC_BASIS = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
_CUBIC_GRAM = [["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]]

_RAW: dict[str, dict] = {
    "mobius-1d": {
        "name": "mobius-1d",
        "description": "circle of three charts over the 1-torus, one reflecting transition",
        "lattice": {"basis": [[1.0]], "gram": [["1"]]},
        "generators": [{"matrix": [[-1]], "translation": ["0"]}],
        "bundle": {
            "charts": 3,
            "edges": [[0, 1, 0], [1, 2, 0], [2, 0, 1]],
            "triangles": [],
            "basepoint": 0,
            "section": {
                "intervals": [[0.0, 0.4], [0.3, 0.7], [0.6, 1.05]],
                "period": 1.0,
                "samples": 40,
                "base_point": ["1/2"],
                "perturbation_amplitude": [0.01],
                "perturbation_wavenumber": 1,
                "tolerance": 1e-12,
            },
        },
    },
    "screw-p21-3d": {
        "name": "screw-p21-3d",
        "description": "two-fold screw along z; two interval charts glued by the screw",
        "lattice": {"basis": _CUBIC_BASIS, "gram": _CUBIC_GRAM},
        "generators": [
            {"matrix": [[-1, 0, 0], [0, -1, 0], [0, 0, 1]], "translation": ["0", "0", "1/2"]}
        ],
        "bundle": {
            "charts": 2,
            "edges": [[0, 1, 1]],
            "triangles": [],
            "basepoint": 0,
            "section": {
                "intervals": [[0.0, 0.6], [0.4, 1.0]],
                "samples": 40,
                "base_point": ["1/4", "1/3", "1/5"],
                "perturbation_amplitude": [0.01, 0.02, 0.03],
                "perturbation_wavenumber": 1,
                "tolerance": 1e-12,
            },
        },
    },
    "glide-pg-2d": {
        "name": "glide-pg-2d",
        "description": "square lattice with a glide reflection",
        "lattice": {"basis": [[1.0, 0.0], [0.0, 1.0]], "gram": [["1", "0"], ["0", "1"]]},
        "generators": [{"matrix": [[-1, 0], [0, 1]], "translation": ["0", "1/2"]}],
    },
    "cubic-oh-3d": {
        "name": "cubic-oh-3d",
        "description": "simple cubic lattice with full octahedral symmetry and cubic elasticity",
        "lattice": {"basis": _CUBIC_BASIS, "gram": _CUBIC_GRAM},
        "generators": [
            {"matrix": [[0, -1, 0], [1, 0, 0], [0, 0, 1]], "translation": ["0", "0", "0"]},
            {"matrix": [[-1, 0, 0], [0, -1, 0], [0, 0, -1]], "translation": ["0", "0", "0"]},
            {"matrix": [[0, 0, 1], [1, 0, 0], [0, 1, 0]], "translation": ["0", "0", "0"]},
        ],
        "elasticity": {"model": "cubic", "c11": 1.0, "c12": 0.5, "c44": 0.3, "density": 1.0},
        "kpath": {
            "waypoints": [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [1.0, 1.0, 1.0], [0.0, 0.0, 0.0]],
            "samples": 20,
        },
        "simulation": {
            "direction": [1.0, 0.0, 0.0],
            "n": 256,
            "length": 1.0,
            "mode": 1,
            "branch": 2,
            "amplitude": 0.001,
            "steps": 10000,
            "cfl": 0.5,
        },
    },
    "trivial-pm": {
        "name": "trivial-pm",
        "description": "single mirror with zero translation; trivial bundle on a triangle of charts",
        "lattice": {"basis": _CUBIC_BASIS, "gram": _CUBIC_GRAM},
        "generators": [
            {"matrix": [[1, 0, 0], [0, -1, 0], [0, 0, 1]], "translation": ["0", "0", "0"]}
        ],
        "bundle": {
            "charts": 3,
            "edges": [[0, 1, 0], [1, 2, 0], [2, 0, 0]],
            "triangles": [[0, 1, 2]],
            "basepoint": 0,
        },
        "elasticity": {"model": "isotropic", "lambda": 1.0, "mu": 0.5, "density": 1.0},
        "kpath": {"waypoints": [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 1.0]], "samples": 10},
        "simulation": {
            "direction": [0.0, 0.0, 1.0],
            "n": 128,
            "mode": 1,
            "branch": 0,
            "steps": 2000,
        },
    },
}


def names() -> list[str]:
    return sorted(_RAW)


def raw(name: str) -> dict:
    if name not in _RAW:
        raise KeyError(f"unknown fixture {name!r}; available: {', '.join(names())}")
    import copy

    return copy.deepcopy(_RAW[name])


def load_fixture(name: str) -> CrystalConfig:
    return from_dict(raw(name))


def describe(name: str) -> str:
    return _RAW[name].get("description", "")
