"""End-to-end experiment suite: baseline/endline training, salience tagging
comparisons, intensity sweep, polarity, activation modes and the inference
benchmark. Each ``run_*`` returns plain data; ``write_*`` turns it into CSV
and SVG files.
"""

import csv
import dataclasses
import gc
import json
import logging
import os
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from sann import dataset, encoder
from sann.errors import ExperimentError, InputError
from sann.network import (
    Mode,
    TrainConfig,
    accuracy,
    from_bytes,
    init_network,
    predict,
    predict_with_response,
    to_bytes,
    train_epoch,
)
from sann.numerics import Rng
from sann.salience import SalienceConfig, response, tag, tag_sequence, write_reports_csv
from sann.svg import five_number, render_boxplot_svg, render_network_svg

log = logging.getLogger(__name__)

EXPERIMENTS = ("baseline", "salience", "intensity", "polarity", "activation", "bench")
MODULATED_MODES = (Mode.HORIZONTAL_OFFSET, Mode.GRADIENT, Mode.AMPLITUDE)


@dataclass
class ExperimentPlan:
    seed: int = 7
    data_seed: int = 0
    baseline_epochs: int = 355
    endline_epochs: int = 500
    encoder_epochs: int = 200
    learning_rate: float = 2.0
    encoder_learning_rate: float = 60.0
    level: float = 1.0
    theta: float = 0.1
    gamma: float = 1.0
    tagged_ids: list = field(default_factory=lambda: ["cat0"])
    # The sweep multiplies this level; 1/3 keeps 3x inside [-1, 1] so every factor is distinct.
    intensity_level: float = 1.0 / 3.0
    intensity_factors: list = field(default_factory=lambda: [0.0, 1.0, 2.0, 3.0])
    activation_modes: list = field(default_factory=lambda: [m.value for m in MODULATED_MODES])
    positive_id: str = "cat0"
    negative_id: str = "dog0"
    repetitions: int = 1200
    warmup: int = 100
    experiments: list = field(default_factory=lambda: list(EXPERIMENTS))

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not 1 <= self.baseline_epochs <= self.endline_epochs:
            raise InputError(f"need 1 <= baseline_epochs ({self.baseline_epochs}) <= endline_epochs ({self.endline_epochs})")
        if self.encoder_epochs < 1:
            raise InputError("encoder_epochs must be at least 1")
        if self.repetitions < 1:
            raise InputError("repetitions must be at least 1")
        if self.warmup < 0:
            raise InputError("warmup must be >= 0")
        if not self.intensity_factors:
            raise InputError("intensity_factors must not be empty")
        if not self.tagged_ids:
            raise InputError("tagged_ids must name at least one image")
        for m in self.activation_modes:
            if Mode.parse(m) is Mode.NONE:
                raise InputError("activation_modes may only list modulated modes")
        unknown = set(self.experiments) - set(EXPERIMENTS)
        if unknown:
            raise InputError(f"unknown experiments {sorted(unknown)} (known: {', '.join(EXPERIMENTS)})")
        self.salience_config()
        SalienceConfig(level=self.intensity_level)

    def salience_config(self, **overrides):
        kw = dict(level=self.level, theta=self.theta, gamma=self.gamma)
        kw.update(overrides)
        return SalienceConfig(**kw)

    @classmethod
    def fields(cls):
        return [f.name for f in dataclasses.fields(cls)]

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.fields())
        if unknown:
            raise InputError(f"unknown plan keys: {', '.join(sorted(unknown))}")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as f:
            try:
                d = json.load(f)
            except json.JSONDecodeError as e:
                raise InputError(f"plan file {path} is not valid JSON: {e}") from None
        if not isinstance(d, dict):
            raise InputError(f"plan file {path} must hold a JSON object")
        return cls.from_dict(d)

    def to_dict(self):
        return dataclasses.asdict(self)


# -- data preparation ---------------------------------------------------------


@dataclass
class Workbench:
    """Images, the frozen encoder and the codes every experiment consumes."""

    images: list
    autoencoder: encoder.Autoencoder
    codes: np.ndarray
    encoder_losses: list
    reconstruction_accuracy: float

    @property
    def pairs(self):
        return dataset.training_pairs(self.images, self.codes)

    @property
    def ids(self):
        return [im.id for im in self.images]

    def code_of(self, image_id):
        return self.codes[self.ids.index(dataset.find_image(self.images, image_id).id)]


def prepare(plan, images=None):
    if images is None:
        images = dataset.generate_silhouettes(plan.data_seed)
    ae = encoder.Autoencoder.create(seed=plan.seed)
    cfg = TrainConfig(plan.encoder_learning_rate, plan.encoder_epochs, plan.seed)
    losses = encoder.train_encoder(ae, images, plan.encoder_epochs, cfg)
    codes = encoder.encode_batch(ae, images)
    return Workbench(images, ae, codes, losses, encoder.reconstruction_accuracy(ae, images))


# -- baseline / endline -------------------------------------------------------


@dataclass
class TrainingRun:
    baseline: bytes
    endline: bytes
    baseline_epoch: int
    first_perfect_epoch: int
    losses: list
    class_accuracy: list
    individual_accuracy: list


def run_baseline_endline(plan, bench):
    """Train one network to ``endline_epochs``, snapshotting the baseline on the way.

    The baseline is the first epoch >= ``baseline_epochs`` with 100% class and
    individual accuracy.
    """
    pairs = bench.pairs
    net = init_network((encoder.CODE_DIM, 16, 15), plan.seed)
    cfg = TrainConfig(plan.learning_rate, plan.endline_epochs, plan.seed)
    rng = Rng(plan.seed)
    losses, cls_acc, ind_acc = [], [], []
    first_perfect = baseline_epoch = None
    baseline = None
    for epoch in range(1, plan.endline_epochs + 1):
        losses.append(train_epoch(net, pairs, cfg, rng, epoch))
        ca, ia = accuracy(net, pairs)
        cls_acc.append(ca)
        ind_acc.append(ia)
        perfect = ca == 1.0 and ia == 1.0
        if perfect and first_perfect is None:
            first_perfect = epoch
        if perfect and baseline is None and epoch >= plan.baseline_epochs:
            baseline, baseline_epoch = to_bytes(net), epoch
    if baseline is None:
        raise ExperimentError(
            f"network did not reach 100% accuracy by epoch {plan.endline_epochs} "
            f"(final class {cls_acc[-1]:.3f}, individual {ind_acc[-1]:.3f})"
        )
    log.info("100%% accuracy first at epoch %d; baseline snapshot at epoch %d", first_perfect, baseline_epoch)
    return TrainingRun(baseline, to_bytes(net), baseline_epoch, first_perfect, losses, cls_acc, ind_acc)


# -- confidence bookkeeping -----------------------------------------------------


@dataclass
class ConfidenceRecord:
    image_id: str
    group: str
    class_confidence: float
    individual_confidence: float
    response: float


def confidence_records(net, bench, group, ids=None):
    out = []
    for image_id, code in zip(bench.ids, bench.codes):
        if ids is not None and image_id not in ids:
            continue
        p, r = predict_with_response(net, code)
        out.append(ConfidenceRecord(image_id, group, p.class_confidence, p.individual_confidence, r))
    return out


def summarize(records):
    """Five-number summaries keyed ``<group>1`` (class) and ``<group>2`` (individual), in first-seen order."""
    groups = {}
    for rec in records:
        groups.setdefault(rec.group, []).append(rec)
    out = {}
    for g, recs in groups.items():
        out[f"{g}1"] = five_number([r.class_confidence for r in recs])
        out[f"{g}2"] = five_number([r.individual_confidence for r in recs])
    return out


def _tag_all(net, bench, ids, cfg):
    return [tag(net, bench.code_of(i), cfg, label=i) for i in ids]


@dataclass
class SalienceResult:
    records: list
    summaries: dict
    reports: list
    tagged: object  # the tagged network


def run_salience_confidence(plan, bench, baseline, endline, cfg=None):
    """Groups A (baseline), B (endline), C (tagged images after tagging), D (untagged images after tagging)."""
    cfg = cfg or plan.salience_config()
    base = from_bytes(baseline)
    end = from_bytes(endline)
    tagged = from_bytes(baseline)
    reports = _tag_all(tagged, bench, plan.tagged_ids, cfg)
    untagged = [i for i in bench.ids if i not in plan.tagged_ids]
    records = (
        confidence_records(base, bench, "A")
        + confidence_records(end, bench, "B")
        + confidence_records(tagged, bench, "C", plan.tagged_ids)
        + confidence_records(tagged, bench, "D", untagged)
    )
    return SalienceResult(records, summarize(records), reports, tagged)


# -- intensity ------------------------------------------------------------------


@dataclass
class IntensityResult:
    factor: float
    effective_level: float
    class_improvement: float
    individual_improvement: float
    records: list
    pre_tag_snapshot: bytes

    @property
    def improvement(self):
        return 0.5 * (self.class_improvement + self.individual_improvement)


def run_intensity_sweep(plan, bench, baseline):
    """Tag identical baseline clones at each intensity factor; improvements are means over all 12 images."""
    before = confidence_records(from_bytes(baseline), bench, "base")
    out = []
    for factor in plan.intensity_factors:
        net = from_bytes(baseline)
        snap = to_bytes(net)
        cfg = plan.salience_config(level=plan.intensity_level, intensity_factor=float(factor))
        _tag_all(net, bench, plan.tagged_ids, cfg)
        after = confidence_records(net, bench, f"{factor:g}x")
        dc = np.mean([a.class_confidence - b.class_confidence for a, b in zip(after, before)])
        di = np.mean([a.individual_confidence - b.individual_confidence for a, b in zip(after, before)])
        out.append(IntensityResult(float(factor), cfg.effective_level, float(dc), float(di), after, snap))
    return out


# -- polarity ---------------------------------------------------------------------


@dataclass
class PolarityResult:
    ids: list
    positive_salience: np.ndarray
    negative_salience: np.ndarray
    positive_response: np.ndarray
    negative_response: np.ndarray
    confidences_identical: bool
    combined_response: np.ndarray
    combined: object  # network after the +/- sequence

    @property
    def salience_asymmetry(self):
        return float(np.max(np.abs(self.positive_salience + self.negative_salience)))

    @property
    def response_asymmetry(self):
        return float(np.max(np.abs(self.positive_response + self.negative_response)))

    def combined_of(self, image_id):
        return float(self.combined_response[self.ids.index(image_id)])


def run_polarity_suite(plan, bench, baseline):
    cfg = plan.salience_config()
    pos = from_bytes(baseline)
    neg = from_bytes(baseline)
    _tag_all(pos, bench, plan.tagged_ids, cfg)
    _tag_all(neg, bench, plan.tagged_ids, cfg.negated())
    rec_pos = confidence_records(pos, bench, "pos")
    rec_neg = confidence_records(neg, bench, "neg")
    identical = all(
        a.class_confidence == b.class_confidence and a.individual_confidence == b.individual_confidence
        for a, b in zip(rec_pos, rec_neg)
    )

    combined = from_bytes(baseline)
    plus = plan.salience_config(level=abs(plan.level))
    tag_sequence(combined, [(bench.code_of(plan.positive_id), plus), (bench.code_of(plan.negative_id), plus.negated())])
    r = np.array([response(combined, c).response for c in bench.codes])
    return PolarityResult(
        bench.ids,
        pos.salience.copy(),
        neg.salience.copy(),
        np.array([x.response for x in rec_pos]),
        np.array([x.response for x in rec_neg]),
        identical,
        r,
        combined,
    )


# -- activation modes -------------------------------------------------------------


@dataclass
class ActivationResult:
    mode: Mode
    records: list
    tagged_class_gain: float
    tagged_individual_gain: float


def run_activation_variants(plan, bench, baseline):
    """Tag once per mode with weight strengthening off; record confidences for every image."""
    base_recs = {r.image_id: r for r in confidence_records(from_bytes(baseline), bench, "baseline")}
    out = []
    for m in plan.activation_modes:
        mode = Mode.parse(m)
        net = from_bytes(baseline)
        _tag_all(net, bench, plan.tagged_ids, plan.salience_config(affect_weights=False, activation_mode=mode))
        recs = confidence_records(net, bench, mode.value)
        tid = plan.tagged_ids[0]
        after = next(r for r in recs if r.image_id == tid)
        gain_c = after.class_confidence - base_recs[tid].class_confidence
        gain_i = after.individual_confidence - base_recs[tid].individual_confidence
        out.append(ActivationResult(mode, recs, gain_c, gain_i))
    return out, list(base_recs.values())


# -- benchmark -------------------------------------------------------------------


@dataclass
class BenchmarkRecord:
    with_response: bool
    times_us: list

    @property
    def median(self):
        return statistics.median(self.times_us)

    @property
    def mean(self):
        return statistics.fmean(self.times_us)


def run_benchmark(net, inputs, repetitions=1200, warmup=100):
    """Time ``predict`` against ``predict_with_response`` on a monotonic clock.

    The two are interleaved, alternating which goes first, so drift hits both
    equally. GC is paused while timing.
    """
    if repetitions < 1:
        raise InputError("repetitions must be at least 1")
    inputs = [np.asarray(x, dtype=np.float64) for x in inputs]
    if not inputs:
        raise InputError("benchmark needs at least one input")
    clock = time.perf_counter_ns
    if time.get_clock_info("perf_counter").monotonic is not True:
        raise ExperimentError("perf_counter is not monotonic on this platform")
    for k in range(warmup):
        x = inputs[k % len(inputs)]
        predict(net, x)
        predict_with_response(net, x)

    without, with_r = [], []
    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        for k in range(repetitions):
            x = inputs[k % len(inputs)]
            for first in ((False, True) if k % 2 == 0 else (True, False)):
                t0 = clock()
                if first:
                    predict_with_response(net, x)
                else:
                    predict(net, x)
                dt = (clock() - t0) / 1000.0
                (with_r if first else without).append(dt)
    finally:
        if gc_was_enabled:
            gc.enable()
    return BenchmarkRecord(False, without), BenchmarkRecord(True, with_r)


# -- writers ---------------------------------------------------------------------


def _writer(path):
    f = open(path, "w", newline="", encoding="utf-8")
    return f, csv.writer(f, lineterminator="\n")


def _r(x):
    return repr(float(x))


def write_curves(run, path):
    f, w = _writer(path)
    with f:
        w.writerow(["epoch", "loss", "class_accuracy", "individual_accuracy"])
        for k, (l, c, i) in enumerate(zip(run.losses, run.class_accuracy, run.individual_accuracy), 1):
            w.writerow([k, _r(l), _r(c), _r(i)])


def write_records(records, path):
    f, w = _writer(path)
    with f:
        w.writerow(["image_id", "group", "class_confidence", "individual_confidence", "response"])
        for r in records:
            w.writerow([r.image_id, r.group, _r(r.class_confidence), _r(r.individual_confidence), _r(r.response)])


def write_summaries(summaries, path):
    f, w = _writer(path)
    with f:
        w.writerow(["group", "min", "q1", "median", "q3", "max"])
        for g, s in summaries.items():
            w.writerow([g] + [_r(v) for v in s])


def write_intensity(results, path):
    f, w = _writer(path)
    with f:
        w.writerow(["factor", "effective_level", "class_improvement", "individual_improvement", "mean_improvement"])
        for r in results:
            w.writerow([_r(r.factor), _r(r.effective_level), _r(r.class_improvement), _r(r.individual_improvement), _r(r.improvement)])


def write_polarity(res, path):
    f, w = _writer(path)
    with f:
        w.writerow(["image_id", "response_positive", "response_negative", "response_combined"])
        for k, i in enumerate(res.ids):
            w.writerow([i, _r(res.positive_response[k]), _r(res.negative_response[k]), _r(res.combined_response[k])])


def write_benchmark(records, path):
    f, w = _writer(path)
    with f:
        w.writerow(["run", "without_response_us", "with_response_us"])
        for k, (a, b) in enumerate(zip(records[0].times_us, records[1].times_us)):
            w.writerow([k, f"{a:.3f}", f"{b:.3f}"])


# -- orchestration -------------------------------------------------------------------


@dataclass
class Check:
    name: str
    passed: bool
    detail: str


@dataclass
class SuiteReport:
    plan: ExperimentPlan
    out_dir: str
    files: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    lines: list = field(default_factory=list)

    @property
    def ok(self):
        return all(c.passed for c in self.checks)

    def check(self, name, passed, detail):
        self.checks.append(Check(name, bool(passed), detail))

    def note(self, line):
        self.lines.append(line)


def run_suite(plan, out_dir, bench=None, training=None, experiments=None):
    """Run the selected experiments, writing every artifact under ``out_dir``."""
    experiments = list(experiments or plan.experiments)
    os.makedirs(out_dir, exist_ok=True)
    rep = SuiteReport(plan, out_dir)

    def out(name):
        p = os.path.join(out_dir, name)
        rep.files.append(p)
        return p

    if bench is None:
        bench = prepare(plan)
    rep.note(f"encoder: reconstruction accuracy {bench.reconstruction_accuracy:.2f}%, final loss {bench.encoder_losses[-1]:.5f}")
    encoder.write_codes_csv(bench.ids, bench.codes, out("codes.csv"))
    if training is None:
        training = run_baseline_endline(plan, bench)
    write_curves(training, out("baseline_curves.csv"))
    with open(out("baseline.sann"), "wb") as f:
        f.write(training.baseline)
    with open(out("endline.sann"), "wb") as f:
        f.write(training.endline)
    base_acc = accuracy(from_bytes(training.baseline), bench.pairs)
    rep.note(
        f"training: 100% accuracy first at epoch {training.first_perfect_epoch}, baseline snapshot at epoch "
        f"{training.baseline_epoch}, endline at {plan.endline_epochs} (final loss {training.losses[-1]:.5f})"
    )
    rep.check("baseline accuracy is 100%", base_acc == (1.0, 1.0), f"class {base_acc[0]:.3f}, individual {base_acc[1]:.3f}")
    render_network_svg(from_bytes(training.baseline), out("network_baseline.svg"), "baseline")

    if "salience" in experiments:
        res = run_salience_confidence(plan, bench, training.baseline, training.endline)
        write_records(res.records, out("salience_confidence.csv"))
        write_summaries(res.summaries, out("salience_summary.csv"))
        write_reports_csv(res.reports, out("tagging_report.csv"))
        groups = [(g, [getattr(r, "class_confidence" if g.endswith("1") else "individual_confidence") for r in res.records if r.group == g[0]]) for g in res.summaries]
        render_boxplot_svg(groups, out("salience_boxplot.svg"), "confidence before/after salience tagging", "confidence")
        render_network_svg(res.tagged, out("network_tagged.svg"), "after one-time tagging")
        s = res.summaries
        rep.note("salience medians: " + ", ".join(f"{g} {v[2]:.4f}" for g, v in s.items()))
        a = {r.image_id: r for r in res.records if r.group == "A"}
        for r in (r for r in res.records if r.group == "C"):
            ok = r.class_confidence > a[r.image_id].class_confidence and r.individual_confidence > a[r.image_id].individual_confidence
            rep.check(f"tagging raises confidence of {r.image_id}", ok,
                      f"class {a[r.image_id].class_confidence:.5f} -> {r.class_confidence:.5f}, "
                      f"individual {a[r.image_id].individual_confidence:.5f} -> {r.individual_confidence:.5f}")
        rep.check("untagged median class confidence does not drop", s["D1"][2] >= s["A1"][2] - 1e-9, f"A1 {s['A1'][2]:.5f}, D1 {s['D1'][2]:.5f}")

    if "intensity" in experiments:
        sweep = run_intensity_sweep(plan, bench, training.baseline)
        write_intensity(sweep, out("intensity.csv"))
        write_records([r for s in sweep for r in s.records], out("intensity_confidence.csv"))
        render_boxplot_svg([(f"{s.factor:g}x", [r.class_confidence for r in s.records]) for s in sweep],
                           out("intensity_boxplot.svg"), "class confidence by salience intensity", "confidence")
        rep.note("intensity: " + ", ".join(f"{s.factor:g}x {s.improvement:+.5f}" for s in sweep))
        ordered = sorted(sweep, key=lambda s: s.factor)
        mono = all(b.improvement >= a.improvement - 1e-9 for a, b in zip(ordered, ordered[1:]))
        rep.check("improvement grows with intensity", mono, ", ".join(f"{s.improvement:.6f}" for s in ordered))

    if "polarity" in experiments:
        pol = run_polarity_suite(plan, bench, training.baseline)
        write_polarity(pol, out("polarity.csv"))
        render_network_svg(pol.combined, out("network_polarity.svg"), f"+{plan.positive_id} then -{plan.negative_id}")
        rep.check("negated level mirrors salience and response", max(pol.salience_asymmetry, pol.response_asymmetry) <= 1e-9 and pol.confidences_identical,
                  f"salience {pol.salience_asymmetry:.2e}, response {pol.response_asymmetry:.2e}, confidences identical {pol.confidences_identical}")
        rp, rn = pol.combined_of(plan.positive_id), pol.combined_of(plan.negative_id)
        rep.check("combined tagging gives +R and -R", rp > 0 and rn < 0, f"R({plan.positive_id}) {rp:+.4f}, R({plan.negative_id}) {rn:+.4f}")

    if "activation" in experiments:
        variants, base_recs = run_activation_variants(plan, bench, training.baseline)
        write_records(base_recs + [r for v in variants for r in v.records], out("activation_confidence.csv"))
        groups = [("baseline", [r.class_confidence for r in base_recs])] + [(v.mode.value, [r.class_confidence for r in v.records]) for v in variants]
        render_boxplot_svg(groups, out("activation_boxplot.svg"), "class confidence by activation mode", "confidence")
        for v in variants:
            rep.note(f"activation {v.mode.value}: tagged class gain {v.tagged_class_gain:+.5f}, individual {v.tagged_individual_gain:+.5f}")
            if v.mode in (Mode.AMPLITUDE, Mode.HORIZONTAL_OFFSET):
                rep.check(f"{v.mode.value} raises tagged class confidence", v.tagged_class_gain > 0, f"{v.tagged_class_gain:+.5f}")

    if "bench" in experiments:
        net = from_bytes(training.baseline)
        _tag_all(net, bench, plan.tagged_ids, plan.salience_config())
        records = run_benchmark(net, bench.codes, plan.repetitions, plan.warmup)
        write_benchmark(records, out("benchmark.csv"))
        render_boxplot_svg([("without R", records[0].times_us), ("with R", records[1].times_us)],
                           out("benchmark_boxplot.svg"), f"{plan.repetitions} classifications", "microseconds")
        ratio = records[1].mean / records[0].mean
        rep.note(
            f"benchmark: without R median {records[0].median:.2f}us mean {records[0].mean:.2f}us; "
            f"with R median {records[1].median:.2f}us mean {records[1].mean:.2f}us; ratio {ratio:.4f}"
        )
        rep.check("response overhead at most 10%", ratio <= 1.10, f"mean ratio {ratio:.4f}")

    summary = out("summary.csv")
    f, w = _writer(summary)
    with f:
        w.writerow(["check", "passed", "detail"])
        for c in rep.checks:
            w.writerow([c.name, int(c.passed), c.detail])
    return rep
