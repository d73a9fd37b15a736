"""Command-line entry point: ``sann <subcommand> ...``.

Exit codes: 0 success, 1 input error, 2 experiment expectation failed, 3 I/O error.
"""

import argparse
import logging
import os
import sys
from dataclasses import dataclass

from sann import __version__, dataset, encoder, experiments
from sann.errors import ExperimentError, InputError
from sann.network import TrainConfig, accuracy, init_network, load_network, predict_with_response, save_network, train
from sann.numerics import Rng
from sann.salience import SalienceConfig, response, tag, write_reports_csv
from sann.svg import render_network_svg

log = logging.getLogger("sann")

EXIT_OK, EXIT_INPUT, EXIT_EXPERIMENT, EXIT_IO = 0, 1, 2, 3

# flag name -> plan field, for flags that can also come from a plan file
PLAN_FLAGS = {
    "seed": "seed",
    "data_seed": "data_seed",
    "baseline_epochs": "baseline_epochs",
    "epochs": "endline_epochs",
    "encoder_epochs": "encoder_epochs",
    "lr": "learning_rate",
    "encoder_lr": "encoder_learning_rate",
    "level": "level",
    "theta": "theta",
    "gamma": "gamma",
    "tagged": "tagged_ids",
    "intensity": "intensity_factors",
    "intensity_level": "intensity_level",
    "modes": "activation_modes",
    "repetitions": "repetitions",
    "warmup": "warmup",
}


class UsageError(Exception):
    def __init__(self, message, usage=""):
        super().__init__(message)
        self.usage = usage


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, self.format_usage())


@dataclass
class CliInvocation:
    command: str
    args: argparse.Namespace
    plan_path: str
    out_dir: str
    plan: experiments.ExperimentPlan = None


def _csv_list(kind):
    def parse(s):
        try:
            return [kind(x) for x in s.split(",") if x.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad list {s!r}") from None

    return parse


def _add_image_source(p):
    p.add_argument("--image", help="image id from the dataset (e.g. cat0)")
    p.add_argument("--pgm", help="28x28 binary PGM to use instead of a dataset image")
    p.add_argument("--data", help="dataset manifest.csv (default: generated silhouettes)")
    p.add_argument("--data-seed", type=int, default=0, help="seed of the generated silhouettes")
    p.add_argument("--encoder", required=True, help="encoder snapshot")


def build_parser():
    parser = _Parser(prog="sann", description="Salience affected neural network harness.")
    parser.add_argument("--version", action="version", version=f"sann {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("gen-data", help="write the silhouette set as PGM files plus manifest.csv")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="sann_out")

    p = sub.add_parser("train-encoder", help="train the 784-16-784 autoencoder")
    p.add_argument("--data", help="dataset manifest.csv (default: generated silhouettes)")
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=60.0)
    p.add_argument("--out", default="sann_out")

    p = sub.add_parser("train", help="train the 16-16-15 classifier on encoded images")
    p.add_argument("--encoder", required=True)
    p.add_argument("--data")
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--lr", type=float, default=2.0)
    p.add_argument("--out", default="sann_out")

    p = sub.add_parser("tag", help="apply one salience tagging event to a network")
    p.add_argument("--network", required=True)
    _add_image_source(p)
    p.add_argument("--level", type=float, default=1.0, help="neuromodulator level N in [-1, 1]")
    p.add_argument("--intensity", type=float, default=1.0, help="intensity factor")
    p.add_argument("--theta", type=float, default=0.1)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--mode", default="none", help="activation mode: none, horizontal_offset, gradient, amplitude")
    p.add_argument("--no-weights", action="store_true", help="do not strengthen weights")
    p.add_argument("--literal", action="store_true", help="use the (1 - S) salience update")
    p.add_argument("--out", default="sann_out")

    for name, text in (("infer", "classify one image and report the salience response"),
                       ("respond", "salience response R and desire to act D for one image")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--network", required=True)
        _add_image_source(p)
        p.add_argument("--gamma", type=float, default=1.0)

    p = sub.add_parser("experiment", help="run experiments and write CSV/SVG results")
    p.add_argument("name", choices=list(experiments.EXPERIMENTS) + ["all"])
    p.add_argument("--plan", help="JSON plan file")
    p.add_argument("--network", help="(bench) benchmark this snapshot instead of training one")
    p.add_argument("--encoder", help="(bench) encoder used to build benchmark inputs")
    p.add_argument("--out", default="sann_out")
    p.add_argument("--seed", type=int)
    p.add_argument("--data-seed", type=int)
    p.add_argument("--baseline-epochs", type=int)
    p.add_argument("--epochs", type=int, help="endline epochs")
    p.add_argument("--encoder-epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--encoder-lr", type=float)
    p.add_argument("--level", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--tagged", type=_csv_list(str), help="comma-separated image ids")
    p.add_argument("--intensity", type=_csv_list(float), help="comma-separated intensity factors")
    p.add_argument("--intensity-level", type=float)
    p.add_argument("--modes", type=_csv_list(str))
    p.add_argument("--repetitions", type=int)
    p.add_argument("--warmup", type=int)

    p = sub.add_parser("viz", help="draw a network snapshot as SVG")
    p.add_argument("--network", required=True)
    p.add_argument("--name", default="network.svg")
    p.add_argument("--out", default="sann_out")
    return parser


def parse_args(argv):
    parser = build_parser()
    if not argv:
        raise UsageError("no subcommand given", parser.format_usage())
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("no subcommand given", parser.format_usage())
    inv = CliInvocation(args.command, args, getattr(args, "plan", None), getattr(args, "out", None))
    if args.command == "experiment":
        inv.plan = _plan_from(args)
    return inv


def _plan_from(args):
    d = {}
    if args.plan:
        d = experiments.ExperimentPlan.from_json(args.plan).to_dict()
    for flag, key in PLAN_FLAGS.items():
        value = getattr(args, flag, None)
        if value is None:
            continue
        if key in d and d[key] != value:
            log.warning("flag --%s=%r overrides plan value %r", flag.replace("_", "-"), value, d[key])
        d[key] = value
    if args.name not in ("all", "baseline"):
        d["experiments"] = [args.name]
    elif args.name == "baseline":
        d["experiments"] = []
    return experiments.ExperimentPlan.from_dict(d)


# -- commands --------------------------------------------------------------------


def _images(args):
    if args.data:
        return dataset.read_manifest(args.data)
    return dataset.generate_silhouettes(args.data_seed)


def _load_encoder(path):
    return encoder.Autoencoder(load_network(path, encoder.ENCODER_DIMS))


def _input_code(args):
    ae = _load_encoder(args.encoder)
    if args.pgm:
        pixels = dataset.load_pgm(args.pgm)
        label = args.pgm
    elif args.image:
        pixels = dataset.find_image(_images(args), args.image).pixels
        label = args.image
    else:
        raise InputError("give --image ID or --pgm PATH")
    return encoder.encode(ae, pixels.reshape(-1)), label


def _out(inv, name):
    os.makedirs(inv.out_dir, exist_ok=True)
    return os.path.join(inv.out_dir, name)


def cmd_gen_data(inv):
    images = dataset.generate_silhouettes(inv.args.seed)
    path = dataset.write_dataset(images, inv.out_dir)
    print(f"wrote {len(images)} images and {path}")


def cmd_train_encoder(inv):
    a = inv.args
    images = _images(a)
    ae = encoder.Autoencoder.create(seed=a.seed)
    losses = encoder.train_encoder(ae, images, a.epochs, TrainConfig(a.lr, a.epochs, a.seed))
    acc = encoder.reconstruction_accuracy(ae, images)
    save_network(ae.net, _out(inv, "encoder.sann"))
    encoder.write_codes_csv([im.id for im in images], encoder.encode_batch(ae, images), _out(inv, "codes.csv"))
    with open(_out(inv, "encoder_loss.csv"), "w", encoding="utf-8", newline="\n") as f:
        f.write("epoch,loss\n")
        for k, l in enumerate(losses, 1):
            f.write(f"{k},{l!r}\n")
    print(f"encoder: final loss {losses[-1]:.5f}, reconstruction accuracy {acc:.2f}%")
    print(f"wrote {_out(inv, 'encoder.sann')}, {_out(inv, 'codes.csv')}, {_out(inv, 'encoder_loss.csv')}")


def cmd_train(inv):
    a = inv.args
    images = _images(a)
    ae = _load_encoder(a.encoder)
    pairs = dataset.training_pairs(images, encoder.encode_batch(ae, images))
    net = init_network((encoder.CODE_DIM, 16, 15), a.seed)
    losses = train(net, pairs, TrainConfig(a.lr, a.epochs, a.seed))
    acc = accuracy(net, pairs)
    save_network(net, _out(inv, "network.sann"))
    print(f"train: {a.epochs} epochs, final loss {losses[-1]:.5f}, class accuracy {acc[0]:.3f}, individual accuracy {acc[1]:.3f}")
    print(f"wrote {_out(inv, 'network.sann')}")
    if acc != (1.0, 1.0):
        raise ExperimentError(f"accuracy below 100% after {a.epochs} epochs")


def cmd_tag(inv):
    a = inv.args
    net = load_network(a.network)
    code, label = _input_code(a)
    cfg = SalienceConfig(a.level, a.intensity, a.theta, a.gamma, not a.no_weights, a.mode, a.literal)
    rep = tag(net, code, cfg, label=label)
    save_network(net, _out(inv, "tagged.sann"))
    write_reports_csv([rep], _out(inv, "tagging_report.csv"))
    print(f"tagged {label}: level {rep.effective_level:+.3f}, {rep.weights_touched} weights scaled, "
          f"mean salience {net.salience.mean():+.4f}, mode {net.mode.value}")
    print(f"wrote {_out(inv, 'tagged.sann')}, {_out(inv, 'tagging_report.csv')}")


def cmd_infer(inv):
    a = inv.args
    net = load_network(a.network)
    code, label = _input_code(a)
    p, r = predict_with_response(net, code)
    cls = dataset.CLASS_NAMES[p.class_index]
    print(f"{label}: class {p.class_index} ({cls}) confidence {p.class_confidence:.5f}; "
          f"individual {p.individual_index} confidence {p.individual_confidence:.5f}")
    print(f"salience response R = {r:.6g}, desire to act D = {a.gamma * r:.6g}")


def cmd_respond(inv):
    a = inv.args
    net = load_network(a.network)
    code, label = _input_code(a)
    res = response(net, code, a.gamma)
    print(f"{label}: R = {res.response:.6g}, D = {res.desire_to_act:.6g}")


def cmd_viz(inv):
    net = load_network(inv.args.network)
    path = render_network_svg(net, _out(inv, inv.args.name), os.path.basename(inv.args.network))
    print(f"wrote {path}")


def cmd_experiment(inv):
    plan = inv.plan
    a = inv.args
    if a.name == "bench" and a.network:
        net = load_network(a.network)
        if a.encoder:
            inputs = encoder.encode_batch(_load_encoder(a.encoder), dataset.generate_silhouettes(plan.data_seed))
        else:
            inputs = Rng(plan.seed).uniform(0.0, 1.0, size=(12, net.dims[0]))
        recs = experiments.run_benchmark(net, inputs, plan.repetitions, plan.warmup)
        path = _out(inv, "benchmark.csv")
        experiments.write_benchmark(recs, path)
        ratio = recs[1].mean / recs[0].mean
        print(f"without R: median {recs[0].median:.2f}us mean {recs[0].mean:.2f}us")
        print(f"with R:    median {recs[1].median:.2f}us mean {recs[1].mean:.2f}us")
        print(f"mean ratio {ratio:.4f} over {plan.repetitions} classifications")
        print(f"wrote {path}")
        if ratio > 1.10:
            raise ExperimentError(f"response overhead {ratio:.4f} exceeds 1.10")
        return
    rep = experiments.run_suite(plan, inv.out_dir)
    for line in rep.lines:
        print(line)
    for c in rep.checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}")
    print("wrote " + ", ".join(rep.files))
    if not rep.ok:
        raise ExperimentError("some experiment checks failed")


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train-encoder": cmd_train_encoder,
    "train": cmd_train,
    "tag": cmd_tag,
    "infer": cmd_infer,
    "respond": cmd_respond,
    "experiment": cmd_experiment,
    "viz": cmd_viz,
}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    logging.basicConfig(level=logging.INFO if ("-v" in argv or "--verbose" in argv) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        inv = parse_args(argv)
        COMMANDS[inv.command](inv)
    except UsageError as e:
        sys.stderr.write(e.usage)
        sys.stderr.write(f"sann: error: {e}\n")
        return EXIT_INPUT
    except InputError as e:
        sys.stderr.write(f"sann: input error: {e}\n")
        return EXIT_INPUT
    except ExperimentError as e:
        sys.stderr.write(f"sann: experiment failed: {e}\n")
        return EXIT_EXPERIMENT
    except OSError as e:
        sys.stderr.write(f"sann: I/O error: {e}\n")
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
