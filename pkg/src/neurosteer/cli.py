"""Command-line interface.

Subcommands:
    generate  synthesize a recording + trigger CSV pair
    train     run the offline pipeline and write all training artifacts
    report    spectral/evoked/topographic exports (CSV + SVG figures)
    serve     replay a recording with triggers over TCP
    classify  connect to a stream, classify windows online, write events CSV
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .cnn import save_model, load_model
from .dsp import (
    BandpassSpec,
    bandpass,
    car,
    collect_viz_epochs,
    evoked_average,
    fast_ica,
    montage_coords,
    reject_eog,
    topo_means,
    welch_psd,
    write_evoked_csv,
    write_psd_csv,
    write_topo_csv,
)
from .epochs import save_epochs
from .errors import NeurosteerError
from .metrics import format_confusion, write_confusion_csv, write_metrics_csv
from .pipeline import PipelineConfig, run_pipeline
from .recording import LABELS, load_recording, load_triggers, save_recording, save_triggers
from .stream import StreamServer, classify_stream, parse_addr, write_events_csv
from .synth import ScenarioConfig, SignalConfig, gen_recording, gen_scenario, load_config


def _cmd_generate(args: argparse.Namespace) -> int:
    if args.config:
        scenario, sig = load_config(args.config)
    else:
        scenario, sig = ScenarioConfig(), SignalConfig()
    if args.seed is not None:
        scenario = ScenarioConfig(**{**_asdict(scenario), "seed": args.seed})
    if args.rounds is not None:
        scenario = ScenarioConfig(**{**_asdict(scenario), "rounds": args.rounds})
    if args.pattern_amp is not None:
        sig = SignalConfig(**{**_asdict(sig), "pattern_amp": args.pattern_amp})
    triggers, n_samples = gen_scenario(scenario)
    rec = gen_recording(triggers, n_samples, sig, seed=scenario.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_recording(rec, out / "recording.eegr")
    save_triggers(triggers, out / "triggers.csv")
    print(f"wrote {out / 'recording.eegr'} ({rec.n_samples} samples, "
          f"{rec.duration_s:.1f} s) and {len(triggers)} triggers")
    return 0


def _asdict(cfg) -> dict:
    from dataclasses import asdict
    return asdict(cfg)


def _cmd_train(args: argparse.Namespace) -> int:
    rec = load_recording(args.rec)
    triggers = load_triggers(args.trig)
    cfg = PipelineConfig(seed=args.seed, epochs=args.epochs,
                         learning_rate=args.learning_rate,
                         batch_size=args.batch_size,
                         grouped_split=(args.split == "grouped"))
    result = run_pipeline(rec, triggers, cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_epochs(result.train_set, out / "train_balanced.epdb")
    save_epochs(result.val_set, out / "val.epdb")
    save_model(result.model, out / "model.nsmd")
    result.history.to_csv(out / "history.csv")
    write_confusion_csv(result.cm, out / "confusion.csv")
    write_metrics_csv(result.metrics, out / "metrics.csv")
    if not args.no_figures:
        from .figures import history_figure
        history_figure(result.history, out / "history.svg")
    print(format_confusion(result.cm))
    print(f"validation accuracy {result.val_accuracy:.3f} "
          f"(best epoch {result.history.best_epoch + 1}/{len(result.history)})")
    print(f"artifacts in {out}")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    rec = load_recording(args.rec)
    triggers = load_triggers(args.trig)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    filtered = car(bandpass(rec, BandpassSpec()))
    if args.ica:
        ica = fast_ica(filtered, n_comp=args.ica_components, seed=args.seed)
        filtered, removed = reject_eog(ica, filtered)
        print(f"ICA removed {len(removed)} artifact component(s)")

    psd = welch_psd(filtered.data[filtered.channel_index(args.psd_channel)],
                    filtered.sample_rate)
    write_psd_csv(psd, out / "psd.csv")

    viz = collect_viz_epochs(filtered, triggers)
    waves_by_channel = {}
    for channel in args.evoked_channels:
        times, waves = evoked_average(viz, channel)
        write_evoked_csv(times, waves, out / f"evoked_{channel}.csv")
        waves_by_channel[channel] = waves

    coords = montage_coords(viz.channels)
    maps = topo_means(viz)
    for label, values in sorted(maps.items()):
        write_topo_csv(viz.channels, coords, values, out / f"topo_{LABELS[label]}.csv")

    if not args.no_figures:
        from .figures import evoked_figure, psd_figure, topo_figure
        psd_figure(psd, out / "psd.svg", channel=args.psd_channel)
        evoked_figure(times, waves_by_channel, out / "evoked.svg")
        for label, values in sorted(maps.items()):
            topo_figure(viz.channels, coords, values,
                        out / f"topo_{LABELS[label]}.svg", title=LABELS[label])
    print(f"report written to {out}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    rec = load_recording(args.rec)
    triggers = load_triggers(args.trig)
    host, port = parse_addr(args.addr)
    server = StreamServer(rec, triggers, host, port, realtime=args.realtime)
    print(f"serving {rec.n_samples} samples, {len(triggers)} triggers "
          f"on {host}:{server.port} ({'real-time' if args.realtime else 'max rate'})")
    server.serve_once()
    return 0


def _cmd_classify(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    events, summary = classify_stream(args.addr, model)
    write_events_csv(events, args.out)
    print(f"{summary.n_events} predictions ({summary.n_truncated} truncated windows), "
          f"latency mean {summary.mean_latency_ms:.1f} ms / "
          f"p95 {summary.p95_latency_ms:.1f} ms -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="neurosteer",
        description="Steering-intention EEG pipeline: synthesize, train, report, stream.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthesize a recording + trigger CSV")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--rounds", type=int, default=None)
    p.add_argument("--pattern-amp", type=float, default=None,
                   help="class-pattern amplitude override (0 removes class information)")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("train", help="run the offline pipeline, write artifacts")
    p.add_argument("--rec", required=True)
    p.add_argument("--trig", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=80)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--learning-rate", type=float, default=2e-5)
    p.add_argument("--split", choices=("grouped", "naive"), default="grouped",
                   help="grouped keeps both windows of a trigger in one partition")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("report", help="spectral/evoked/topographic exports")
    p.add_argument("--rec", required=True)
    p.add_argument("--trig", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--psd-channel", default="C4")
    p.add_argument("--evoked-channels", nargs="+", default=["AF7", "AF8"])
    p.add_argument("--ica", action="store_true", help="remove eye-blink components first")
    p.add_argument("--ica-components", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("serve", help="replay a recording over TCP")
    p.add_argument("--rec", required=True)
    p.add_argument("--trig", required=True)
    p.add_argument("--addr", required=True, help="host:port to bind")
    p.add_argument("--realtime", action="store_true", help="pace samples at 512 Hz")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("classify", help="classify a live stream")
    p.add_argument("--model", required=True)
    p.add_argument("--addr", required=True, help="host:port to connect to")
    p.add_argument("--out", required=True, help="events CSV path")
    p.set_defaults(func=_cmd_classify)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NeurosteerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
