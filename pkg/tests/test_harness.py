from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

import pytest

from infracp.channel import ChannelConfig, NoiseSetting, share
from infracp.cli import EXIT_CONFIG, EXIT_OK, main
from infracp.config import (DEFAULT_OUTPUT, OUTPUT_ENV, RunOptions, config_from_mapping, dump_config,
                            load_config, parse_noise, parse_seeds, resolve_output_dir)
from infracp.evaluation import reports_to_json
from infracp.fusion import FusionMethod, FusionVariant, RangeShape
from infracp.harness import CPMode, ConfigError, ExperimentConfig, run_experiment, select_agents_for
from infracp.scene import AgentKind, Archetype, Scene, ScenarioSpec, generate

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def tiny(mode=CPMode.V2X, archetypes=(Archetype.MERGE_RAMP,), **kw):
    scen = tuple(ScenarioSpec(a, n_actors=8, n_frames=2) for a in archetypes)
    return ExperimentConfig(name="tiny", cp_mode=mode, scenarios=scen, seeds=(0, 1),
                            noise=(NoiseSetting.perfect(), NoiseSetting.simple()), **kw)


class TestAgentSelection:
    spec = ScenarioSpec(Archetype.FOUR_WAY, n_vehicle_agents=3, n_infra_agents=1)

    def test_modes(self):
        assert select_agents_for(self.spec, CPMode.NO_FUSION) == ("V0", [])
        assert select_agents_for(self.spec, CPMode.NO_FUSION, AgentKind.INFRASTRUCTURE) == ("I0", [])
        assert select_agents_for(self.spec, CPMode.V2V) == ("V0", ["V1", "V2"])
        assert select_agents_for(self.spec, CPMode.V2X) == ("V0", ["V1", "I0"])
        assert select_agents_for(self.spec, CPMode.I2X) == ("I0", ["V0", "V1"])

    def test_v2x_swaps_exactly_one_aux(self):
        for n in (2, 3, 4):
            spec = replace(self.spec, n_vehicle_agents=n)
            _, v2v = select_agents_for(spec, CPMode.V2V)
            _, v2x = select_agents_for(spec, CPMode.V2X)
            assert len(v2v) == len(v2x)
            assert set(v2v) - set(v2x) == {v2v[-1]} and set(v2x) - set(v2v) == {"I0"}
            assert not any(a.startswith("I") for a in v2v)

    def test_ego_kinds(self):
        assert select_agents_for(self.spec, CPMode.I2X)[0].startswith("I")
        for m in (CPMode.V2V, CPMode.V2X):
            assert select_agents_for(self.spec, m)[0].startswith("V")


class TestConfig:
    def test_v2x_without_infrastructure_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(cp_mode=CPMode.V2X, scenarios=(ScenarioSpec(Archetype.FOUR_WAY, n_infra_agents=0),))

    @pytest.mark.parametrize("kw", [
        {"scenarios": ()}, {"seeds": ()}, {"noise": ()}, {"resolution": 0.0},
        {"cp_mode": CPMode.V2V, "scenarios": (ScenarioSpec(Archetype.FOUR_WAY, n_vehicle_agents=1),)},
        {"scenarios": (ScenarioSpec(Archetype.FOUR_WAY), replace(ScenarioSpec(Archetype.FOUR_WAY), regime="v2xsim"))},
        {"scenarios": (replace(ScenarioSpec(Archetype.FOUR_WAY), regime="v2xsim"),),
         "range_shape": RangeShape.RECTANGLE},
        {"fusion": FusionMethod(FusionVariant.WEIGHTED, (0.5, 0.25, 0.25))},
    ])
    def test_invalid(self, kw):
        base = {"cp_mode": CPMode.V2X, "scenarios": (ScenarioSpec(Archetype.FOUR_WAY),)}
        with pytest.raises(ConfigError):
            ExperimentConfig(**{**base, **kw})

    def test_round_trip(self):
        cfg = tiny(fusion=FusionMethod(FusionVariant.WEIGHTED, (0.75, 0.25)),
                   archetypes=(Archetype.FOUR_WAY,))
        assert ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg

    def test_yaml_files(self):
        for path in sorted(CONFIGS.glob("*.yaml")):
            cfg, opts = load_config(path)
            assert cfg.scenarios and opts.workers >= 1

    def test_mapping(self):
        cfg, opts = config_from_mapping({
            "cp_mode": "I2X", "scenarios": [{"archetype": "MergeRamp", "n_actors": 4}], "seeds": 3,
            "noise": ["Perfect", "Harsh(2)"], "fusion": "IntermediateMax", "range_shape": "Square",
            "workers": 2, "output_dir": "x"})
        assert cfg.seeds == (0, 1, 2) and [n.label for n in cfg.noise] == ["Perfect", "Harsh(2)"]
        assert cfg.fusion.variant is FusionVariant.MAX and cfg.range_shape is RangeShape.SQUARE
        assert opts == RunOptions(2, "x")
        again, opts2 = config_from_mapping(__import__("yaml").safe_load(dump_config(cfg, opts)))
        assert again == cfg and opts2 == opts

    @pytest.mark.parametrize("doc", [
        [], {"scenarios": [{"archetype": "MergeRamp"}]}, {"cp_mode": "V2X"},
        {"cp_mode": "V2X", "scenarios": [{"archetype": "MergeRamp"}], "colour": 1},
        {"cp_mode": "V3X", "scenarios": [{"archetype": "MergeRamp"}]},
        {"cp_mode": "V2X", "scenarios": [{"archetype": "Roundabout"}]},
        {"cp_mode": "V2X", "scenarios": "MergeRamp"},
        {"cp_mode": "V2X", "scenarios": [{"archetype": "MergeRamp"}], "workers": 0},
        {"cp_mode": "V2X", "scenarios": [{"archetype": "MergeRamp"}], "noise": ["Loud"]},
        {"cp_mode": "V2X", "scenarios": [{"archetype": "MergeRamp"}], "fusion": 3},
    ])
    def test_mapping_rejects(self, doc):
        with pytest.raises(ConfigError):
            config_from_mapping(doc)

    def test_parsers(self):
        assert len(parse_noise("sweep")) == 6
        assert parse_seeds([4, 9]) == (4, 9)
        for bad in (True, 0, [1.5], "3"):
            with pytest.raises(ConfigError):
                parse_seeds(bad)

    def test_output_precedence(self, monkeypatch):
        monkeypatch.delenv(OUTPUT_ENV, raising=False)
        assert resolve_output_dir() == Path(DEFAULT_OUTPUT)
        assert resolve_output_dir(None, "cfg") == Path("cfg")
        monkeypatch.setenv(OUTPUT_ENV, "env")
        assert resolve_output_dir(None, "cfg") == Path("env")
        assert resolve_output_dir("cli", "cfg") == Path("cli")


class TestRun:
    def test_report_per_noise_setting(self):
        reports = run_experiment(tiny())
        assert [r.config["noise_label"] for r in reports] == ["Perfect", "Simple"]
        for r in reports:
            assert [s.scene_id for s in r.per_scene] == ["MergeRamp-s0", "MergeRamp-s1"]
            assert r.config["cp_mode"] == "V2X" and r.config["range_tag"] == "Rectangle"
            assert r.config["agents"]["MergeRamp"] == {"ego": "V0", "aux": ["I0"]}
            assert r.ap70 <= r.ap50

    def test_deterministic_across_runs_and_workers(self):
        cfg = tiny()
        a = reports_to_json(run_experiment(cfg))
        assert a == reports_to_json(run_experiment(cfg))
        assert a == reports_to_json(run_experiment(cfg, workers=2))

    def test_no_fusion_sanity(self):
        scen = tuple(replace(ScenarioSpec(a, n_vehicle_agents=1, n_infra_agents=0, n_actors=3, occluder_density=0.0,
                                          n_frames=5), regime="v2xsim") for a in Archetype)
        (r,) = run_experiment(ExperimentConfig(cp_mode=CPMode.NO_FUSION, scenarios=scen, seeds=(0, 1)))
        assert r.ap70 >= 0.9

    def test_no_fusion_ignores_noise(self):
        cfg = tiny(CPMode.NO_FUSION)
        a, b = run_experiment(cfg)
        assert a.per_scene == b.per_scene

    def test_mode_isolation(self):
        """Shared aux agents report the same noisy poses in V2V and V2X."""
        spec = ScenarioSpec(Archetype.FOUR_WAY, n_vehicle_agents=4, n_actors=6, n_frames=3, seed=5)
        scene = generate(spec)
        ch = ChannelConfig(NoiseSetting.harsh(5), 3)
        poses = {}
        for mode in (CPMode.V2V, CPMode.V2X):
            ego, aux = select_agents_for(spec, mode)
            msgs = share(scene, 2, scene.agent(ego), [scene.agent(a) for a in aux], ch)
            poses[mode] = {m.agent_id: (m.reported_pose, m.payload.tobytes()) for m in msgs}
        shared = set(poses[CPMode.V2V]) & set(poses[CPMode.V2X])
        assert shared == {"V0", "V1", "V2"}
        for k in shared:
            assert poses[CPMode.V2V][k] == poses[CPMode.V2X][k]

    @pytest.mark.parametrize("variant", list(FusionVariant))
    def test_fusion_variants_run(self, variant):
        fusion = FusionMethod(variant, (0.5, 0.5)) if variant is FusionVariant.WEIGHTED else FusionMethod(variant)
        (r,) = run_experiment(replace(tiny(), noise=(NoiseSetting.perfect(),), seeds=(0,), fusion=fusion))
        assert r.per_scene[0].n_pred > 0


class TestCli:
    def test_run_writes_outputs(self, tmp_path, monkeypatch):
        monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
        cfg = tmp_path / "c.yaml"
        cfg.write_text("cp_mode: V2X\nscenarios: [{archetype: MergeRamp, n_actors: 6, n_frames: 2}]\n"
                       "seeds: [0]\nnoise: [Perfect, Simple]\n")
        assert main(["run", str(cfg)]) == EXIT_OK
        out = tmp_path / "env"
        doc = json.loads((out / "report.json").read_text())
        assert doc["schema"] == "infracp.report" and len(doc["reports"]) == 2
        assert doc["meta"]["config"]["cp_mode"] == "V2X"
        assert (out / "table.csv").read_text().splitlines()[0] == "noise,ap50,ap70,mean_ap50,mean_ap70"
        assert (out / "ap_vs_noise.svg").read_text().startswith("<svg")
        assert (out / "scenes.csv").exists()

    def test_run_overrides_and_out_flag(self, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("cp_mode: V2X\nscenarios: [{archetype: FourWayIntersection, n_actors: 4, n_frames: 1}]\n"
                       "seeds: 4\noutput_dir: " + str(tmp_path / "cfg") + "\n")
        assert main(["run", str(cfg), "--seeds", "7", "--mode", "I2X", "--noise", "Harsh(1)",
                     "--range-shape", "Square", "--out", str(tmp_path / "cli")]) == EXIT_OK
        doc = json.loads((tmp_path / "cli" / "report.json").read_text())
        (r,) = doc["reports"]
        assert r["config"]["cp_mode"] == "I2X" and r["config"]["seeds"] == [7]
        assert r["config"]["noise_label"] == "Harsh(1)" and r["config"]["range_shape"] == "Square"
        assert not (tmp_path / "cfg").exists()

    @pytest.mark.parametrize("text", [
        "cp_mode: V2X\nscenarios: [{archetype: MergeRamp, n_infra_agents: 0}]\n",
        "cp_mode: [\n", "just a string\n", "cp_mode: V2X\nscenarios: [{archetype: MergeRamp}]\nnoise: Harsh(9)\n"])
    def test_config_errors_exit_2(self, tmp_path, text):
        cfg = tmp_path / "bad.yaml"
        cfg.write_text(text)
        assert main(["run", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG
        assert not (tmp_path / "report.json").exists()

    def test_usage_errors(self, tmp_path):
        assert main(["nonsense"]) == EXIT_CONFIG
        assert main([]) == EXIT_CONFIG
        assert main(["run", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG
        assert main(["e1", "--seeds", "0"]) == EXIT_CONFIG
        assert main(["--help"]) == EXIT_OK

    def test_scene_and_render(self, tmp_path):
        path = tmp_path / "s.json"
        assert main(["scene", "MergeRamp", "--seed", "3", "--actors", "5", "--frames", "2", "-o", str(path)]) == 0
        scene = Scene.from_json(path.read_text())
        assert scene.spec.seed == 3 and scene.n_frames == 2
        svg = tmp_path / "v.svg"
        assert main(["render", str(path), "--frame", "1", "-o", str(svg)]) == EXIT_OK
        text = svg.read_text()
        assert text.startswith("<svg") and text.rstrip().endswith("</svg>")
        assert main(["render", str(path), "--frame", "5", "-o", str(svg)]) == EXIT_CONFIG
        assert main(["render", str(tmp_path / "none.json")]) == EXIT_CONFIG
        assert main(["scene", "MergeRamp", "--vehicles", "0", "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_noise_levels(self, capsys):
        assert main(["noise-levels", "--json"]) == EXIT_OK
        levels = json.loads(capsys.readouterr().out)
        assert len(levels) == 8 and levels[-1]["sigma_xy"] == 0.5
        assert main(["noise-levels"]) == EXIT_OK
        assert "Harsh(5)" in capsys.readouterr().out

    def test_experiment_subcommand(self, tmp_path, monkeypatch):
        import infracp.cli as cli
        from infracp.experiments import Bundle, Check

        def fake(seeds, workers):
            return Bundle("e2", [], ["a"], [[1.0]], [Check("x", False, "forced")])

        monkeypatch.setitem(cli.EXPERIMENTS, "e2", fake)
        assert main(["e2", "--out", str(tmp_path)]) == 1
        assert json.loads((tmp_path / "e2" / "report.json").read_text())["checks"][0]["passed"] is False
