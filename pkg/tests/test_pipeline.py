"""Pipeline and persistence tests: schedule parsing, reproducibility,
model round-trips, CLI surface and exit codes, regression invariants."""

import json
import math
import subprocess
import sys

import numpy as np
import pytest

from boxchain.errors import MemoryBudgetError, ParseError
from boxchain.ia import UsageError
from boxchain.maps import MapModel
from boxchain.pipeline import (
    PRESETS,
    RunConfig,
    load_model,
    parse_schedule,
    run_pipeline,
    save_model,
)
from boxchain.render import RenderConfig, render_plane


def small_config(**over):
    base = dict(
        kind="quad_poly",
        c="0",
        r_prime=2.0,
        schedule=["uniform"] * 4,
    )
    base.update(over)
    return RunConfig(**base)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def test_parse_schedule_forms():
    assert parse_schedule("uniform*3") == ["uniform"] * 3
    assert parse_schedule("uniform,sink_basin*2") == [
        "uniform",
        "sink_basin",
        "sink_basin",
    ]
    assert parse_schedule(["uniform"]) == ["uniform"]
    with pytest.raises(ParseError):
        parse_schedule("wobble*2")
    with pytest.raises(ParseError):
        parse_schedule("uniform*0")
    with pytest.raises(ParseError):
        parse_schedule("uniform*x")


def test_config_validation():
    with pytest.raises(UsageError):
        small_config(schedule=[]).validate()
    with pytest.raises(UsageError):
        small_config(delta_ratio=1.0).validate()
    with pytest.raises(UsageError):
        small_config(prune_iters=0).validate()
    with pytest.raises(UsageError):
        small_config(threads=0).validate()
    with pytest.raises(UsageError):
        RunConfig.from_preset("nope")
    small_config().validate()


def test_presets_complete():
    assert set(PRESETS) == {
        "altper2",
        "per31",
        "complexhorse",
        "realhorse",
        "cubicdouble",
    }
    for name, params in PRESETS.items():
        cfg = RunConfig.from_preset(name, schedule=["uniform"])
        cfg.validate()
        model = cfg.build_model()
        assert model.r_prime > model.R


# ---------------------------------------------------------------------------
# pipeline behavior
# ---------------------------------------------------------------------------


def test_reproducibility_identical_records():
    r1 = run_pipeline(small_config())
    r2 = run_pipeline(small_config(threads=2))
    c1 = [s.core_fields() for s in r1.record.steps]
    c2 = [s.core_fields() for s in r2.record.steps]
    assert c1 == c2
    assert r1.record.separating == r2.record.separating


def test_circle_run_covers_unit_circle_every_step(circle_run):
    for snap in circle_run.snapshots:
        addrs = snap.gamma_addresses
        # every sampled circle point lies inside some recurrent-model box
        rp = 2.0
        for k in range(180):
            th = 2 * math.pi * k / 180
            x, y = math.cos(th), math.sin(th)
            hit = False
            for depth, idx in addrs:
                cell = math.ldexp(rp, 1 - depth)
                lo0 = -rp + idx[0] * cell
                lo1 = -rp + idx[1] * cell
                if lo0 <= x <= lo0 + cell and lo1 <= y <= lo1 + cell:
                    hit = True
                    break
            assert hit, (snap.record.index, th)


def test_circle_run_components(circle_run):
    # origin component separate from the circle component once boxes shrink
    last = circle_run.snapshots[-1]
    assert last.record.n_components >= 2
    assert last.separating
    assert last.fixed_points_covered and last.exact_sinks_covered


def test_bounds_invariants_every_step(circle_run, per31_run):
    for run in (circle_run, per31_run):
        for snap in run.snapshots:
            s = snap.record
            assert s.epsilon < s.epsilon_prime
            assert s.delta_prime < s.delta
            assert s.boxes_original >= s.upsilon_boxes >= s.gamma_boxes


def test_nesting_across_steps(
    circle_run, per31_run, altper2_run, realhorse_run, cubic_run
):
    for run in (circle_run, per31_run, altper2_run, realhorse_run, cubic_run):
        snaps = run.snapshots
        for prev, cur in zip(snaps, snaps[1:]):
            for depth, idx in cur.gamma_addresses:
                found = False
                for d0 in range(depth, -1, -1):
                    anc = (d0, tuple(i >> (depth - d0) for i in idx))
                    if anc in prev.gamma_addresses:
                        found = True
                        break
                assert found, f"leaf {(depth, idx)} not nested in previous step"


def test_fixed_point_coverage_all_regression_steps(
    circle_run, per31_run, altper2_run, realhorse_run, cubic_run
):
    for run in (circle_run, per31_run, altper2_run, realhorse_run, cubic_run):
        for snap in run.snapshots:
            assert snap.fixed_points_covered
            assert snap.exact_sinks_covered


def test_separating_flag_monotone(
    circle_run, per31_run, altper2_run, realhorse_run, cubic_run
):
    for run in (circle_run, per31_run, altper2_run, realhorse_run, cubic_run):
        seen_true = False
        for snap in run.snapshots:
            if seen_true:
                assert snap.separating
            seen_true = seen_true or snap.separating


def test_realhorse_bounds_match_reference_row(realhorse_run):
    last = realhorse_run.snapshots[-1].record
    assert abs(last.epsilon_prime - 0.26) / 0.26 < 0.03
    assert abs(last.delta_prime - 6.3e-6) / 6.3e-6 < 0.03


def test_altper2_separates_already_at_mixed_depth_6_7(altper2_run):
    # the crudest separating model: one sink-basin refinement on top of
    # the depth-6 grid (step 7, boxes at depths 6 and 7)
    step7 = altper2_run.snapshots[6]
    assert step7.record.depths == (6, 7)
    assert step7.separating
    assert step7.record.n_components >= 2


def test_enclosure_defect_diagnostic():
    from boxchain.bounds import enclosure_defect_sample

    model = MapModel("henon_complex", c="-1.17", a="0.3", r_prime=2.01)
    # the Henon outputs are separable sums of univariate quadratics, so
    # the structured grid attains the exact hull: the measured defect is
    # the genuine interval slack (rounding-level for this map)
    d = enclosure_defect_sample(model, 0.05, n_boxes=24, n_samples=64, seed=3)
    assert 0.0 <= d < 1e-9
    # the cubic's Horner form carries a genuine O(epsilon) dependency
    # slack between (z^2 - 3a^2) and z; the diagnostic surfaces it and
    # it shrinks linearly with the box side
    cub = MapModel("cubic_poly", c="-0.19,1.1", a="0,0.1", r_prime=2.1)
    d2 = enclosure_defect_sample(cub, 0.01, n_boxes=16, n_samples=64, seed=5)
    assert 0.0 <= d2 < 0.25
    d3 = enclosure_defect_sample(cub, 0.0025, n_boxes=16, n_samples=64, seed=5)
    assert d3 < d2


def test_bounds_text_block():
    from boxchain.bounds import report_for_map

    model = MapModel("henon_complex", c="-1.1875", a="0.15", r_prime=1.9)
    rep = report_for_map(model, 0.059375, with_sink=False)
    block = rep.text_block()
    assert "epsilon_prime = " in block and "delta_prime = " in block
    for line in block.splitlines():
        assert " = " in line


def test_selective_step_fraction_roughly_half(altper2_run):
    # the first sink_basin step on the alternate basilica subdivides
    # roughly half of the surviving leaves (qualitative band 25-75%)
    snaps = altper2_run.snapshots
    before = snaps[5].record.gamma_boxes
    after_boxes = snaps[6].record.boxes_original
    children = 16
    selected = (after_boxes - before) / (children - 1)
    frac = selected / before
    assert 0.25 <= frac <= 0.75, frac


def test_complexhorse_prune_fraction_band():
    cfg = RunConfig.from_preset("complexhorse", schedule=["uniform"] * 6)
    result = run_pipeline(cfg)
    last = result.record.steps[-1]
    frac = last.boxes_escaping / last.boxes_original
    assert frac > 0.5
    assert 0.5667 <= frac <= 0.8667  # reference 43k/60k with +-15pp


def test_memory_budget_abort_carries_partial_record():
    cfg = small_config(schedule=["uniform"] * 5, mem_budget_mb=0.005)
    with pytest.raises(MemoryBudgetError) as ei:
        run_pipeline(cfg)
    assert ei.value.record.aborted is not None


# ---------------------------------------------------------------------------
# model persistence
# ---------------------------------------------------------------------------


def _run_small_model(tmp_path, json_mode=False, edges=True):
    cfg = small_config(
        model_out=str(tmp_path / ("m.json" if json_mode else "m.txt")),
        save_edges=edges,
        json_model=json_mode,
    )
    result = run_pipeline(cfg)
    return cfg.model_out, result


def test_model_roundtrip_byte_identical(tmp_path):
    path, result = _run_small_model(tmp_path)
    first = open(path, "rb").read()
    model, tree, gamma = load_model(path)
    save_model(str(tmp_path / "resaved.txt"), model, gamma, include_edges=True)
    second = open(tmp_path / "resaved.txt", "rb").read()
    assert first == second


def test_model_roundtrip_json(tmp_path):
    path, result = _run_small_model(tmp_path, json_mode=True)
    first = open(path, "rb").read()
    model, tree, gamma = load_model(path)
    save_model(
        str(tmp_path / "resaved.json"), model, gamma, json_mode=True, include_edges=True
    )
    assert first == open(tmp_path / "resaved.json", "rb").read()
    json.loads(first)  # valid JSON document


def test_model_roundtrip_preserves_everything(tmp_path):
    path, result = _run_small_model(tmp_path)
    gamma0 = result.gamma
    tree0 = result.tree
    model, tree, gamma = load_model(path)
    assert gamma.n_vertices == gamma0.n_vertices
    assert gamma.n_edges == gamma0.n_edges
    assert gamma.delta == gamma0.delta
    assert gamma.epsilon == gamma0.epsilon
    assert gamma.epsilon_min == gamma0.epsilon_min
    assert np.array_equal(gamma.comp, gamma0.comp)
    assert tree.addresses() == tree0.addresses()
    # adjacency identical under the address correspondence
    for u in range(gamma.n_vertices):
        assert np.array_equal(gamma.out_neighbors(u), gamma0.out_neighbors(u))


def test_loaded_model_renders_identically(tmp_path):
    path, result = _run_small_model(tmp_path)
    model, tree, gamma = load_model(path)
    cfg = RenderConfig(resolution=32, half_width=2.2, kplus_iters=30)
    img_mem = render_plane(result.gamma, result.model, cfg)
    img_load = render_plane(gamma, model, cfg)
    assert img_mem.ppm_bytes() == img_load.ppm_bytes()


def test_truncated_model_rejected(tmp_path):
    path, _ = _run_small_model(tmp_path)
    text = open(path).read().splitlines()
    bad = tmp_path / "trunc.txt"
    bad.write_text("\n".join(text[: len(text) // 2]) + "\n")
    with pytest.raises(ParseError):
        load_model(str(bad))
    garbled = tmp_path / "bad.txt"
    garbled.write_text("not a model\n")
    with pytest.raises(ParseError):
        load_model(str(garbled))


# ---------------------------------------------------------------------------
# CLI surface
# ---------------------------------------------------------------------------


def _cli(*argv):
    return subprocess.run(
        [sys.executable, "-m", "boxchain.cli", *argv],
        capture_output=True,
        text=True,
    )


def test_cli_run_and_render_roundtrip(tmp_path):
    model_path = str(tmp_path / "model.txt")
    image_path = str(tmp_path / "out.ppm")
    r = _cli(
        "run",
        "--map",
        "quad_poly",
        "--c",
        "0",
        "--rprime",
        "2",
        "--schedule",
        "uniform*4",
        "--model-out",
        model_path,
        "--quiet",
    )
    assert r.returncode == 0, r.stderr
    assert "separating" in r.stdout
    r2 = _cli(
        "render",
        "--model-in",
        model_path,
        "--image-out",
        image_path,
        "--window",
        "0,0,1.5",
        "--resolution",
        "32",
    )
    assert r2.returncode == 0, r2.stderr
    data = open(image_path, "rb").read()
    assert data.startswith(b"P6\n32 32\n255\n")
    r3 = _cli("inspect", "--model-in", model_path)
    assert r3.returncode == 0 and "boxes:" in r3.stdout


def test_cli_json_record(tmp_path):
    r = _cli(
        "run",
        "--map",
        "quad_poly",
        "--c",
        "0",
        "--rprime",
        "2",
        "--schedule",
        "uniform*3",
        "--json",
        "--quiet",
    )
    assert r.returncode == 0
    lines = [json.loads(line) for line in r.stdout.splitlines() if line.strip()]
    assert any("step" in obj for obj in lines)
    assert any("final" in obj for obj in lines)


def test_cli_exit_codes(tmp_path):
    # 2: config error (empty schedule token / bad map kind)
    r = _cli("run", "--map", "wavy", "--c", "0", "--schedule", "uniform")
    assert r.returncode == 2
    # 2: rprime below trapping radius
    r = _cli(
        "run", "--map", "quad_poly", "--c", "2", "--rprime", "1.5",
        "--schedule", "uniform",
    )
    assert r.returncode == 2
    # 4: parse error in schedule
    r = _cli(
        "run", "--map", "quad_poly", "--c", "0", "--rprime", "2",
        "--schedule", "bogus",
    )
    assert r.returncode == 4
    # 4: parse error on model load
    bad = tmp_path / "bad.txt"
    bad.write_text("nonsense\n")
    r = _cli("render", "--model-in", str(bad), "--image-out", str(tmp_path / "x.ppm"))
    assert r.returncode == 4
    # 3: memory budget abort
    r = _cli(
        "run", "--map", "quad_poly", "--c", "0", "--rprime", "2",
        "--schedule", "uniform*5", "--mem-budget-mb", "0.005", "--quiet",
    )
    assert r.returncode == 3


def test_cli_bounds_table_output():
    r = _cli("bounds", "--preset", "per31", "--m", "1000")
    assert r.returncode == 0
    out = r.stdout
    assert "tau = 0.029871571" in out
    assert "kappa = 2.5448759" in out
    assert "epsilon_star = 3.8807934e-05" in out
    assert "exact sink data" in out
    # one-dimensional superattracting case
    r2 = _cli("bounds", "--map", "quad_poly", "--c", "0", "--rprime", "2")
    assert "eta = 2.5000000e-01" in r2.stdout
    assert "kappa = 2.001" in r2.stdout
    # horseshoe: section absent
    r3 = _cli("bounds", "--preset", "complexhorse")
    assert "section absent" in r3.stdout
