import io
import math

import numpy as np
import pytest
import tomli
import tomli_w

from crystorus import cli, fixtures
from crystorus.config import ConfigError, from_dict, loads


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.main(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def write_config(tmp_path, data, name="c.toml"):
    p = tmp_path / name
    p.write_text(tomli_w.dumps(data))
    return str(p)


# -- config and fixtures --------------------------------------------------------


@pytest.mark.parametrize("name", fixtures.names())
def test_fixture_round_trip(name):
    cfg = fixtures.load_fixture(name)
    assert loads(cfg.to_toml()) == cfg
    cfg.space_group()
    if cfg.bundle is not None:
        from crystorus import bundle as bd

        assert bd.validate_bundle(cfg.flat_bundle()).ok
    if cfg.elasticity is not None:
        _, _, moduli = cfg.elastic_system()
        moduli.check()


def test_rationals_parsed_exactly():
    cfg = fixtures.load_fixture("screw-p21-3d")
    from fractions import Fraction

    assert cfg.generators[0].translation == (0, 0, Fraction(1, 2))


def test_schema_error_names_field():
    data = fixtures.raw("glide-pg-2d")
    data["generators"][0]["translation"] = ["0", "half"]
    with pytest.raises(ConfigError) as info:
        from_dict(data)
    assert info.value.path == "generators[0].translation[1]"


def test_unknown_key_rejected():
    data = fixtures.raw("glide-pg-2d")
    data["lattice"]["colour"] = "blue"
    with pytest.raises(ConfigError):
        from_dict(data)


def test_dimension_mismatch_rejected():
    data = fixtures.raw("glide-pg-2d")
    data["generators"][0]["translation"] = ["0", "1/2", "0"]
    with pytest.raises(ConfigError, match="translation"):
        from_dict(data)


# -- verbs --------------------------------------------------------------------


def test_fixtures_list_and_dump(tmp_path):
    code, out, _ = run("fixtures", "list")
    assert code == 0
    assert [line.split("\t")[0] for line in out.splitlines()] == fixtures.names()
    code, out, _ = run("fixtures", "dump", "mobius-1d")
    assert code == 0 and loads(out) == fixtures.load_fixture("mobius-1d")
    assert run("fixtures", "dump", "nope")[0] == 1


def test_analyze_trivial_pm():
    code, out, _ = run("analyze", "--fixture", "trivial-pm")
    assert code == 0
    assert "cocycle table: all zero" in out
    assert "symmorphic: yes, witness shift t = (0, 0, 0)" in out


def test_analyze_screw():
    code, out, _ = run("analyze", "--fixture", "screw-p21-3d")
    assert code == 0
    assert "c(1,1) = (0, 0, 1)" in out
    assert "symmorphic: no" in out
    assert "cocycle identity: holds (8 triples)" in out


def test_analyze_glide():
    code, out, _ = run("analyze", "--fixture", "glide-pg-2d")
    assert code == 0 and "symmorphic: no" in out


def test_analyze_from_config_file(tmp_path):
    path = write_config(tmp_path, fixtures.raw("cubic-oh-3d"))
    code, out, _ = run("analyze", "--config", path)
    assert code == 0 and "point group order: 48" in out


def test_inadmissible_translation_exit_2(tmp_path):
    data = fixtures.raw("screw-p21-3d")
    data["generators"].append({"matrix": [[1, 0, 0], [0, 1, 0], [0, 0, 1]], "translation": ["1/2", "0", "0"]})
    code, _, err = run("analyze", "--config", write_config(tmp_path, data))
    assert code == 2 and "not a crystallographic extension" in err


def test_schema_error_exit_1(tmp_path):
    data = fixtures.raw("glide-pg-2d")
    data["lattice"]["gram"] = [["1", "0"], ["0", "x"]]
    code, _, err = run("analyze", "--config", write_config(tmp_path, data))
    assert code == 1 and "lattice.gram[1][1]" in err


def test_usage_errors_exit_1(tmp_path):
    assert run("analyze")[0] == 1
    assert run("frobnicate")[0] == 1
    assert run("analyze", "--config", str(tmp_path / "missing.toml"))[0] == 1
    (tmp_path / "bad.toml").write_text("lattice = [")
    assert run("analyze", "--config", str(tmp_path / "bad.toml"))[0] == 1


def test_holonomy_mobius(tmp_path):
    csv_path = tmp_path / "glue.csv"
    code, out, _ = run("holonomy", "--fixture", "mobius-1d", "--out", str(csv_path))
    assert code == 0
    assert "fixed points: finite: {[0], [1/2]}" in out
    assert "v -> [[-1]] v + (0)" in out
    assert "section gluing: pass" in out
    assert "derivative gluing" in out
    rows = csv_path.read_text().splitlines()
    assert rows[0].startswith("source,target,element,section_residual")
    assert len(rows) == 4


def test_holonomy_trivial_bundle():
    code, out, _ = run("holonomy", "--fixture", "trivial-pm")
    assert code == 0 and "entire torus (dimension 3)" in out


def test_holonomy_samples_override():
    _, out40, _ = run("holonomy", "--fixture", "screw-p21-3d")
    _, out80, _ = run("holonomy", "--fixture", "screw-p21-3d", "--samples", "80")
    assert "h = 0.025" in out40 and "h = 0.0125" in out80


def test_holonomy_invalid_bundle_exit_2(tmp_path):
    data = fixtures.raw("trivial-pm")
    data["bundle"]["edges"][2] = [2, 0, 1]
    code, out, _ = run("holonomy", "--config", write_config(tmp_path, data))
    assert code == 2 and "cocycle condition fails" in out


def test_holonomy_without_bundle_exit_1():
    assert run("holonomy", "--fixture", "glide-pg-2d")[0] == 1


def parse_csv(text):
    lines = text.strip().splitlines()
    return lines[0].split(","), np.array([[float(x) for x in r.split(",")] for r in lines[1:]])


def test_dispersion_cubic_longitudinal_slope(tmp_path):
    out_path = tmp_path / "d.csv"
    code, _, _ = run("dispersion", "--fixture", "cubic-oh-3d", "--out", str(out_path))
    assert code == 0
    header, rows = parse_csv(out_path.read_text())
    assert header == ["t", "kx", "ky", "kz", "omega1", "omega2", "omega3"]
    seg = rows[1:21]  # the [100] leg
    np.testing.assert_allclose(seg[:, 6] / seg[:, 1], math.sqrt(1.0 / 1.0), rtol=1e-12)
    np.testing.assert_allclose(seg[:, 4] / seg[:, 1], math.sqrt(0.3), rtol=1e-12)


def test_dispersion_deterministic():
    a = run("dispersion", "--fixture", "cubic-oh-3d")[1]
    b = run("dispersion", "--fixture", "cubic-oh-3d")[1]
    assert a == b and a.count("\n") == 82


def test_dispersion_isotropic_two_slopes():
    code, out, _ = run("dispersion", "--fixture", "trivial-pm", "--samples", "5")
    assert code == 0
    _, rows = parse_csv(out)
    k = np.linalg.norm(rows[1:, 1:4], axis=1)
    slopes = rows[1:, 4:] / k[:, None]
    np.testing.assert_allclose(slopes[:, 0], math.sqrt(0.5), rtol=1e-12)
    np.testing.assert_allclose(slopes[:, 1], math.sqrt(0.5), rtol=1e-12)
    np.testing.assert_allclose(slopes[:, 2], math.sqrt(2.0), rtol=1e-12)


def test_dispersion_unstable_refused(tmp_path):
    data = fixtures.raw("cubic-oh-3d")
    data["elasticity"]["c44"] = -0.3
    path = write_config(tmp_path, data)
    code, _, err = run("dispersion", "--config", path)
    assert code == 3 and "stability" in err
    code, out, _ = run("dispersion", "--config", path, "--allow-unstable")
    assert code == 0 and out.startswith("t,")


def test_dispersion_full_tensor_negative_eigenvalue_refused(tmp_path):
    data = fixtures.raw("cubic-oh-3d")
    C = -np.array(_cubic_tensor())
    data["elasticity"] = {"model": "full-tensor", "tensor": C.tolist(), "density": 1.0}
    path = write_config(tmp_path, data)
    assert run("dispersion", "--config", path)[0] == 3
    assert run("dispersion", "--config", path, "--allow-unstable")[0] == 0


def _cubic_tensor():
    from crystorus import phonon as ph

    return ph.assemble_cubic(ph.CubicModuli(1.0, 0.5, 0.3))[1].coeffs


def test_project_invariant_matches_projected_run(tmp_path):
    rng = np.random.default_rng(0)
    from crystorus import phonon as ph

    noise = np.einsum("n,nabij->abij", 0.05 * rng.standard_normal(21), ph.objective_basis(3))
    C = _cubic_tensor() + noise
    data = fixtures.raw("cubic-oh-3d")
    data["elasticity"] = {"model": "full-tensor", "tensor": C.tolist(), "density": 1.0, "objective": True}
    perturbed = write_config(tmp_path, data, "p.toml")
    cfg = from_dict(data)
    rho, T, _ = cfg.elastic_system()
    P = ph.project_invariant(T, __import__("crystorus").crystal.cartesian_representation(cfg.space_group()))
    data["elasticity"]["tensor"] = P.coeffs.tolist()
    projected = write_config(tmp_path, data, "q.toml")

    _, out_a, _ = run("dispersion", "--config", perturbed, "--project-invariant")
    _, out_b, _ = run("dispersion", "--config", projected)
    _, out_c, _ = run("dispersion", "--config", perturbed)
    _, a = parse_csv(out_a)
    _, b = parse_csv(out_b)
    _, c = parse_csv(out_c)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)
    assert np.abs(a - c).max() > 1e-4


def test_simulate_cubic(tmp_path):
    data = fixtures.raw("cubic-oh-3d")
    data["simulation"]["steps"] = 3000
    out_path = tmp_path / "e.csv"
    code, out, _ = run("simulate", "--config", write_config(tmp_path, data), "--out", str(out_path))
    assert code == 0
    line = next(l for l in out.splitlines() if l.strip().startswith("branch 2"))
    rel = float(line.rsplit(" ", 1)[1])
    assert rel < 0.01
    header, rows = parse_csv(out_path.read_text())
    assert header == ["step", "time", "kinetic", "elastic", "total"]
    assert len(rows) == 3001
    assert np.abs(rows[:, 4] - rows[0, 4]).max() < 1e-6 * rows[0, 4]


def test_simulate_zero_initial(tmp_path):
    data = fixtures.raw("cubic-oh-3d")
    data["simulation"].update(amplitude=0.0, steps=10, n=16)
    code, out, err = run("simulate", "--config", write_config(tmp_path, data))
    assert code == 0
    _, rows = parse_csv(out)
    assert not rows[:, 2:].any()
    assert "not excited" in err


def test_simulate_cfl_refusal(tmp_path):
    data = fixtures.raw("cubic-oh-3d")
    data["simulation"].update(dt=0.1, steps=10, n=16)
    code, _, err = run("simulate", "--config", write_config(tmp_path, data), "--cfl", "0.5")
    assert code == 3 and "suggested dt <= 0.03125" in err


def test_simulate_deterministic(tmp_path):
    data = fixtures.raw("trivial-pm")
    data["simulation"]["steps"] = 50
    path = write_config(tmp_path, data)
    assert run("simulate", "--config", path)[1] == run("simulate", "--config", path)[1]


def test_simulate_requires_table():
    assert run("simulate", "--fixture", "glide-pg-2d")[0] == 1


def test_bad_flags():
    assert run("dispersion", "--fixture", "cubic-oh-3d", "--samples", "0")[0] == 1
    assert run("simulate", "--fixture", "cubic-oh-3d", "--cfl", "-1")[0] == 1
