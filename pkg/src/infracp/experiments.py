"""The four built-in studies and the acceptance properties each one checks.

E1  V2V against V2X on every archetype, Perfect and Simple noise.
E2  Rectangle against square detection range for V2X and I2X at junctions.
E3  V2X against I2X (plus single-agent baselines), Perfect and Simple noise.
E4  V2X and I2X over the harsh noise sweep.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .channel import NoiseSetting
from .evaluation import REPORT_SCHEMA, REPORT_SCHEMA_VERSION, EvalReport, reports_to_csv
from .fusion import RangeShape
from .harness import CPMode, ExperimentConfig, run_experiment
from .scene import AgentKind, Archetype, ScenarioSpec

ALL_ARCHETYPES = tuple(Archetype)
JUNCTIONS = (Archetype.FOUR_WAY, Archetype.THREE_WAY)

MERGE_GAIN_MIN = 0.05
TWIN_GAIN_MAX = 0.02
SHAPE_MARGIN = 0.02
SWEEP_WOBBLE = 0.01


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


@dataclass
class Bundle:
    """Reports, a summary table and acceptance checks for one study."""

    name: str
    reports: list[EvalReport]
    header: list[str]
    rows: list[list]
    checks: list[Check] = field(default_factory=list)
    series: dict[str, list[float | None]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def table_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.rows:
            w.writerow(["" if v is None else (f"{v:.4f}" if isinstance(v, float) else v) for v in row])
        return buf.getvalue()

    def report_json(self) -> str:
        doc = {
            "schema": REPORT_SCHEMA,
            "version": REPORT_SCHEMA_VERSION,
            "experiment": self.name,
            "reports": [r.to_dict() for r in self.reports],
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks],
        }
        return json.dumps(doc, sort_keys=True, indent=1) + "\n"

    def write(self, out_dir: str | Path) -> list[Path]:
        from .plots import noise_chart

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = {
            "report.json": self.report_json(),
            "table.csv": self.table_csv(),
            "scenes.csv": reports_to_csv(self.reports),
        }
        if self.series:
            files["ap_vs_noise.svg"] = noise_chart(self.series)
        paths = []
        for name, text in files.items():
            p = out / name
            p.write_text(text)
            paths.append(p)
        return paths


def suite(archetypes: Sequence[Archetype], **kw) -> tuple[ScenarioSpec, ...]:
    return tuple(ScenarioSpec(a, **kw) for a in archetypes)


def _scene_map(r: EvalReport) -> dict[str, float | None]:
    return {s.scene_id: s.ap70 for s in r.per_scene}


def mean_ap70(r: EvalReport, archetypes: Sequence[Archetype] | None = None) -> float | None:
    names = None if archetypes is None else {a.value for a in archetypes}
    vals = [s.ap70 for s in r.per_scene
            if s.ap70 is not None and (names is None or s.scene_id.rsplit("-s", 1)[0] in names)]
    return sum(vals) / len(vals) if vals else None


def paired_gain(a: EvalReport, b: EvalReport, archetypes: Sequence[Archetype] | None = None) -> float | None:
    """Mean AP@0.7 of ``b`` minus ``a`` over scenes where both are defined."""
    names = None if archetypes is None else {x.value for x in archetypes}
    ma, mb = _scene_map(a), _scene_map(b)
    diffs = [mb[k] - ma[k] for k in ma
             if k in mb and ma[k] is not None and mb[k] is not None
             and (names is None or k.rsplit("-s", 1)[0] in names)]
    return sum(diffs) / len(diffs) if diffs else None


def _monotone_check(reports: Sequence[EvalReport]) -> Check:
    bad = [r.config.get("name", "?") for r in reports
           if r.ap50 is not None and r.ap70 is not None and r.ap70 > r.ap50
           or any(s.ap50 is not None and s.ap70 is not None and s.ap70 > s.ap50 for s in r.per_scene)]
    return Check("ap70 <= ap50 on every report", not bad, f"{len(reports)} reports, violations: {bad or 'none'}")


def _fmt(v: float | None) -> str:
    return "n/a" if v is None else f"{v:.3f}"


def _run(name: str, mode: CPMode, scenarios, seeds, noise, workers: int, **kw) -> list[EvalReport]:
    cfg = ExperimentConfig(name=name, cp_mode=mode, scenarios=scenarios, seeds=tuple(seeds),
                           noise=tuple(noise), **kw)
    return run_experiment(cfg, workers=workers)


def e1_v2v_vs_v2x(seeds: Sequence[int] = range(5), workers: int = 1,
                  noise: Sequence[NoiseSetting] = (NoiseSetting.perfect(), NoiseSetting.simple())) -> Bundle:
    """Does adding infrastructure data help a vehicle ego, and where does it not."""
    scen = suite(ALL_ARCHETYPES)
    v2v = _run("E1-V2V", CPMode.V2V, scen, seeds, noise, workers)
    v2x = _run("E1-V2X", CPMode.V2X, scen, seeds, noise, workers)
    header = ["scenario"] + [f"{m} {n.label}" for n in noise for m in ("V2V", "V2X")]
    rows = []
    for arch in (*ALL_ARCHETYPES, None):
        row = [arch.value if arch else "All"]
        for k in range(len(noise)):
            sel = None if arch is None else (arch,)
            row += [mean_ap70(v2v[k], sel), mean_ap70(v2x[k], sel)]
        rows.append(row)
    merge = paired_gain(v2v[0], v2x[0], (Archetype.MERGE_RAMP,))
    twin = paired_gain(v2v[0], v2x[0], (Archetype.TWIN,))
    overall = paired_gain(v2v[0], v2x[0])
    checks = [
        Check("infrastructure helps on MergeRamp",
              merge is not None and merge >= MERGE_GAIN_MIN,
              f"mean AP@0.7 V2X - V2V = {_fmt(merge)} (need >= {MERGE_GAIN_MIN})"),
        Check("V2X >= V2V over all archetypes", overall is not None and overall >= 0.0,
              f"mean AP@0.7 V2X - V2V = {_fmt(overall)}"),
        Check("no significant gain on TwinIntersections", twin is not None and twin <= TWIN_GAIN_MAX,
              f"mean AP@0.7 V2X - V2V = {_fmt(twin)} (need <= {TWIN_GAIN_MAX})"),
        _monotone_check(v2v + v2x),
    ]
    return Bundle("E1", v2v + v2x, header, rows, checks)


def e2_range_shape(seeds: Sequence[int] = range(5), workers: int = 1) -> Bundle:
    """Rectangle against square detection range for each ego kind."""
    scen = suite(JUNCTIONS)
    res: dict[tuple[str, str], EvalReport] = {}
    for mode in (CPMode.V2X, CPMode.I2X):
        for shape in (RangeShape.RECTANGLE, RangeShape.SQUARE):
            res[mode.value, shape.value] = _run(f"E2-{mode.value}-{shape.value}", mode, scen, seeds,
                                                (NoiseSetting.perfect(),), workers, range_shape=shape)[0]
    header = ["mode", "Rectangle", "Square"]
    rows = [[m, mean_ap70(res[m, "Rectangle"]), mean_ap70(res[m, "Square"])] for m in ("V2X", "I2X")]
    v2x = paired_gain(res["V2X", "Square"], res["V2X", "Rectangle"])
    i2x = paired_gain(res["I2X", "Rectangle"], res["I2X", "Square"])
    checks = [
        Check("V2X prefers the rectangle range", v2x is not None and v2x >= SHAPE_MARGIN,
              f"AP@0.7 rectangle - square = {_fmt(v2x)} (need >= {SHAPE_MARGIN})"),
        Check("I2X prefers the square range", i2x is not None and i2x >= SHAPE_MARGIN,
              f"AP@0.7 square - rectangle = {_fmt(i2x)} (need >= {SHAPE_MARGIN})"),
        _monotone_check(list(res.values())),
    ]
    return Bundle("E2", list(res.values()), header, rows, checks)


def e3_v2x_vs_i2x(seeds: Sequence[int] = range(5), workers: int = 1,
                  noise: Sequence[NoiseSetting] = (NoiseSetting.perfect(), NoiseSetting.simple())) -> Bundle:
    """Vehicle against infrastructure ego on the same agent set."""
    scen = suite(ALL_ARCHETYPES)
    runs = [
        ("NoFusion (vehicle)", _run("E3-NoFusion-V", CPMode.NO_FUSION, scen, seeds, noise, workers)),
        ("NoFusion (infrastructure)", _run("E3-NoFusion-I", CPMode.NO_FUSION, scen, seeds, noise, workers,
                                           nofusion_ego=AgentKind.INFRASTRUCTURE)),
        ("V2X", _run("E3-V2X", CPMode.V2X, scen, seeds, noise, workers)),
        ("I2X", _run("E3-I2X", CPMode.I2X, scen, seeds, noise, workers)),
    ]
    header = ["method"] + [n.label for n in noise]
    rows = [[name] + [mean_ap70(r) for r in reps] for name, reps in runs]
    reports = [r for _, reps in runs for r in reps]
    return Bundle("E3", reports, header, rows, [_monotone_check(reports)])


def e4_noise_sweep(seeds: Sequence[int] = range(5), workers: int = 1) -> Bundle:
    """AP@0.7 of V2X and I2X as pose noise grows."""
    scen = suite(ALL_ARCHETYPES)
    sweep = NoiseSetting.sweep()
    v2x = _run("E4-V2X", CPMode.V2X, scen, seeds, sweep, workers)
    i2x = _run("E4-I2X", CPMode.I2X, scen, seeds, sweep, workers)
    sv = [mean_ap70(r) for r in v2x]
    si = [mean_ap70(r) for r in i2x]
    header = ["level", "sigma_xy_m", "sigma_yaw_deg", "V2X", "I2X"]
    rows = [[n.level, n.sigma_xy, n.sigma_yaw, a, b] for n, a, b in zip(sweep, sv, si)]

    def non_increasing(vals):
        return all(b <= a + SWEEP_WOBBLE for a, b in zip(vals, vals[1:]))

    def rel_drop(vals):
        return (vals[0] - vals[-1]) / vals[0] if vals[0] else float("nan")

    ok = all(v is not None for v in sv + si)
    checks = [
        Check("AP@0.7 non-increasing in noise", ok and non_increasing(sv) and non_increasing(si),
              f"V2X {[_fmt(v) for v in sv]}, I2X {[_fmt(v) for v in si]} (step tolerance {SWEEP_WOBBLE})"),
        Check("I2X beats V2X at maximum noise", ok and si[-1] > sv[-1],
              f"I2X {_fmt(si[-1])} vs V2X {_fmt(sv[-1])}"),
        Check("I2X degrades relatively less", ok and rel_drop(si) < rel_drop(sv),
              f"relative drop I2X {rel_drop(si):.3f} vs V2X {rel_drop(sv):.3f}" if ok else "missing AP"),
        _monotone_check(v2x + i2x),
    ]
    return Bundle("E4", v2x + i2x, header, rows, checks, series={"V2X": sv, "I2X": si})


EXPERIMENTS = {
    "e1": e1_v2v_vs_v2x,
    "e2": e2_range_shape,
    "e3": e3_v2x_vs_i2x,
    "e4": e4_noise_sweep,
}
