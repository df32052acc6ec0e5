"""Command-line experiment runner: ``confdiff generate|train|verify|sweep``.

Exit codes: 0 success, 1 a verification assertion failed, 2 usage or
configuration error, 3 a run aborted on non-finite values.
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import datasets as ds
from .config import ExperimentConfig, load_config, preset_names
from .errors import AbortedRunError, ConfigError, InvalidInputError
from .losses import CorrectionKind
from .parallel import resolve_jobs, run_tasks
from .rng import stream
from .serialize import write_json
from .synth import (
    NoiseSpec,
    corrupt_confidences,
    corrupt_prior,
    make_labeled_dataset,
    make_training_sets,
)
from .trainer import Estimator, train

log = logging.getLogger("confdiff")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_ABORT = 0, 1, 2, 3
SUITES = ("unbiasedness", "lemma4", "variance", "convergence", "robustness", "all")


class VerifyFailed(Exception):
    pass


# -- data --------------------------------------------------------------------

def _training_sets(cfg: ExperimentConfig, spec, index=0):
    return make_training_sets(spec, cfg.data.n_pairs, stream(cfg.seed, "train-data", index))


def _test_set(cfg: ExperimentConfig, spec):
    return make_labeled_dataset(spec, cfg.data.n_test, stream(cfg.seed, "test-data"))


def _run_seed(cfg: ExperimentConfig, index):
    return int(stream(cfg.seed, "run-seed", index).integers(2 ** 62))


def _noisy(data, noise: NoiseSpec, rng):
    data = corrupt_confidences(data, noise, rng)
    return data.with_prior(corrupt_prior(data.class_prior, noise))


def _load_dir(cfg, estimator):
    root = Path(cfg.train.data_dir)
    name = {
        ds.ConfDiffDataset: "confdiff.txt",
        ds.PcompDataset: "pcomp.txt",
        ds.LabeledDataset: "labeled.txt",
        ds.SoftLabeledDataset: "soft.txt",
    }[estimator.data_type]
    return ds.read_any(root / name), ds.read_labeled(root / "test.txt")


def _train_cell(cfg: ExperimentConfig, spec, estimator, index, alpha=None, fraction=1.0):
    """One training run: data for ``index``, optional noise, optional subsampling."""
    estimator = Estimator(estimator)
    if cfg.train.data_dir:
        data, test = _load_dir(cfg, estimator)
    else:
        data = _training_sets(cfg, spec, index).select(estimator.data_type)
        test = _test_set(cfg, spec)
    noise = cfg.noise.build(cfg.seed)
    if isinstance(data, ds.ConfDiffDataset) and not noise.is_clean:
        data = _noisy(data, noise, stream(cfg.seed, "noise", index))
    if fraction < 1.0:
        keep = max(1, int(round(fraction * len(data))))
        data = data.subset(np.arange(keep))
    seed = _run_seed(cfg, index)
    overrides = {} if alpha is None else {"alpha": alpha}
    tc = cfg.train.build(spec.dim, seed=seed, estimator=estimator, **overrides)
    result = train(data, test, tc)
    result.params = None
    return result


def _summary(results):
    accs = np.array([r.final_accuracy for r in results])
    return {
        "runs": len(results),
        "mean_final_accuracy": float(accs.mean()),
        "std_final_accuracy": float(accs.std(ddof=1)) if len(accs) > 1 else 0.0,
        "min_train_risk": float(min(r.min_train_risk for r in results)),
        "final_accuracies": accs.tolist(),
    }


# -- commands ----------------------------------------------------------------

def cmd_generate(cfg: ExperimentConfig, out: Path, jobs=1):
    spec = cfg.mixture.build()
    out.mkdir(parents=True, exist_ok=True)
    sets = _training_sets(cfg, spec, 0)
    pcomp = sets.pcomp
    if cfg.data.pcomp_strategy == "discard":
        from .synth import make_pcomp_dataset
        pcomp = make_pcomp_dataset(spec, cfg.data.n_pairs, stream(cfg.seed, "pcomp-discard"), "discard")
    ds.write_confdiff(out / "confdiff.txt", sets.confdiff)
    ds.write_pcomp(out / "pcomp.txt", pcomp)
    ds.write_labeled(out / "labeled.txt", sets.labeled)
    ds.write_soft(out / "soft.txt", sets.soft)
    ds.write_labeled(out / "test.txt", _test_set(cfg, spec))
    noise = cfg.noise.build(cfg.seed)
    if not noise.is_clean:
        ds.write_confdiff(out / "confdiff_noisy.txt", _noisy(sets.confdiff, noise, stream(cfg.seed, "noise", 0)))
    print(f"n={len(sets.confdiff)} prior={ds.fmt_float(sets.confdiff.class_prior)} "
          f"mean_abs_c={ds.fmt_float(np.mean(np.abs(sets.confdiff.c)))}")
    return EXIT_OK


def cmd_train(cfg: ExperimentConfig, out: Path, jobs=1):
    spec = cfg.mixture.build()
    estimator = Estimator(cfg.train.estimator)
    # fail before any training if the estimator cannot consume the data
    cfg.train.build(spec.dim, estimator=estimator)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(cfg, spec, estimator, k) for k in range(cfg.train.seeds)]
    results = run_tasks(_train_cell, tasks, jobs)
    for k, r in enumerate(results):
        (out / f"run_{k}.txt").write_text(r.to_lines())
        (out / f"run_{k}.json").write_text(r.to_json())
    summary = {"estimator": estimator.value, **_summary(results)}
    write_json(out / "summary.json", summary)
    print(f"{estimator.value}: {summary['mean_final_accuracy']:.4f} +- {summary['std_final_accuracy']:.4f} "
          f"over {len(results)} runs; min train risk {summary['min_train_risk']:.4g}")
    return EXIT_OK


def _check(lines, name, ok, detail, hard=True):
    tag = ("PASS" if ok else "FAIL") if hard else ("SOFT-OK" if ok else "SOFT-MISS")
    lines.append({"check": name, "passed": bool(ok), "hard": hard, "detail": detail})
    print(f"{tag} {name}: {detail}")
    return ok or not hard


def _suite_unbiasedness(cfg, spec, params, v):
    from .verify import mc_estimator_mean, true_risk
    checks = []
    ref = true_risk(spec, params, rng=stream(cfg.seed, "verify-true-risk"), draws=v.reference_draws)
    reports = {}
    ok = True
    for label, kw in (
        ("unbiased", {"estimator": "unbiased"}),
        (f"weighted_alpha_{v.weighted_alpha}", {"estimator": "weighted", "alpha": v.weighted_alpha}),
        ("corrected_abs", {"estimator": "corrected", "correction": CorrectionKind.ABS}),
    ):
        rep = mc_estimator_mean(spec, params, n=v.n_unbiased, trials=v.trials,
                                rng=stream(cfg.seed, "verify-unbiased", label), reference=ref, **kw)
        reports[label] = rep.to_dict()
        if label == "corrected_abs":
            passed = rep.estimate >= rep.reference - v.z_threshold * math.hypot(rep.stderr, rep.reference_stderr)
            ok &= _check(checks, "corrected_abs_bias_nonnegative", passed, f"z={rep.z_score:.3f}")
        else:
            ok &= _check(checks, f"{label}_unbiased", abs(rep.z_score) < v.z_threshold, f"z={rep.z_score:.3f}")
    return ok, {"reports": reports, "checks": checks}


def _suite_lemma4(cfg, spec, params, v):
    from .verify import check_lemma4
    checks = []
    reps = check_lemma4(spec, params, trials=v.trials, n=v.n_lemma4, rng=stream(cfg.seed, "verify-lemma4"))
    ok = True
    for k, rep in enumerate(reps, start=1):
        ok &= _check(checks, f"identity_{k}", abs(rep.z_score) < v.z_threshold, f"{rep.label}; z={rep.z_score:.3f}")
    return ok, {"reports": [r.to_dict() for r in reps], "checks": checks}


def _suite_variance(cfg, spec, params, v):
    from .verify import variance_profile
    checks = []
    prof = variance_profile(spec, params, alpha_grid=v.alpha_grid, n=v.n_variance,
                            trials=v.variance_trials, rng=stream(cfg.seed, "verify-variance"))
    var = dict(zip(prof.alphas, prof.variances))
    print("alpha    variance")
    for a, s2 in var.items():
        print(f"{a:5.2f}  {s2:.6e}")
    half = var[0.5]
    ok = _check(checks, "half_is_minimum", all(s2 >= half for s2 in var.values()), f"Var(0.5)={half:.6e}")
    worst = 0.0
    for a, s2 in var.items():
        mirror = next((s for b, s in var.items() if abs(b - (1.0 - a)) < 1e-9), None)
        if mirror is not None:
            worst = max(worst, abs(s2 - mirror) / max(abs(s2), 1e-300))
    ok &= _check(checks, "symmetric_in_alpha", worst <= 1e-10, f"max relative asymmetry {worst:.3e}")
    ok &= _check(checks, "quadratic_coef_nonnegative", prof.quadratic_coef >= 0, f"2mu1-2mu2={prof.quadratic_coef:.6e}")
    return ok, {"profile": prof.to_dict(), "checks": checks}


def _suite_convergence(cfg, spec, params, v, jobs=1):
    from .verify import convergence_study
    c = v.convergence
    checks = []
    base = cfg.train.build(spec.dim, estimator=c.estimator, epochs=c.epochs, batch_pairs=c.batch_pairs,
                           eval_tail_epochs=min(cfg.train.eval_tail_epochs, c.epochs))
    base = replace(base, model=replace(base.model, kind=c.model_kind, hidden_widths=base.model.hidden_widths if c.model_kind == "mlp" else ()),
                   optimizer=replace(base.optimizer, learning_rate=c.learning_rate))
    rep = convergence_study(spec, c.n_grid, base, seeds=c.seeds, study_seed=cfg.seed, test_size=c.test_size, jobs=jobs)
    for n, m, s in zip(rep.n_grid, rep.mean_excess, rep.stderr_excess):
        print(f"n={n:6d} excess={m:.6e} +- {s:.2e}")
    ok = _check(checks, "excess_strictly_decreasing", rep.strictly_decreasing, str(rep.mean_excess))
    lo, hi = c.slope_band
    ok &= _check(checks, "loglog_slope_in_band", lo <= rep.slope <= hi, f"slope={rep.slope:.3f} band=[{lo}, {hi}]")
    _check(checks, "estimation_gap_slope", True, f"gap slope={rep.gap_slope:.3f}", hard=False)
    return ok, {"report": rep.to_dict(), "checks": checks}


def _suite_robustness(cfg, spec, params, v, jobs=1):
    from .verify import robustness_study
    r = v.robustness
    checks = []
    base = cfg.train.build(spec.dim, estimator=r.estimator, epochs=r.epochs,
                           eval_tail_epochs=min(cfg.train.eval_tail_epochs, r.epochs))
    grid = [(e, s) for e in r.prior_scales for s in r.conf_noise_stds]
    rep = robustness_study(spec, grid, base, seeds=r.seeds, n=r.n_pairs, study_seed=cfg.seed,
                           test_size=r.test_size, jobs=jobs)
    print("eps   sigma  accuracy  stderr   mean|c_bar-c|  |pi_bar-pi|")
    for c in rep.cells:
        print(f"{c.prior_scale:4.2f}  {c.conf_noise_std:4.2f}   {c.mean_accuracy:.4f}   {c.stderr_accuracy:.4f}"
              f"   {c.mean_abs_conf_error:.4f}         {c.prior_error:.4f}")
    ok = _check(checks, "clean_cell_passthrough_exact", rep.passthrough_exact, "clean cell equals plain training")
    sc = rep.soft_checks
    _check(checks, "clean_cell_within_top", sc["clean_within_top"], f"dominated by {sc['clean_not_dominated_by']}", hard=False)
    if "prior_drop_exceeds_sigma02_drop" in sc:
        _check(checks, "prior_error_hurts_more_than_sigma_0.2", sc["prior_drop_exceeds_sigma02_drop"],
               f"prior drop {sc['prior_drop']:.4f} vs sigma drop {sc['sigma02_drop']:.4f}", hard=False)
    return ok, {"report": rep.to_dict(), "checks": checks}


def cmd_verify(cfg: ExperimentConfig, out: Path, suite: str, jobs=1):
    from .verify import reference_model
    spec = cfg.mixture.build()
    v = cfg.verify
    params = reference_model(spec.dim, v.model_hidden_widths, v.model_seed, v.weight_scale)
    out.mkdir(parents=True, exist_ok=True)
    names = SUITES[:-1] if suite == "all" else (suite,)
    runners = {
        "unbiasedness": _suite_unbiasedness,
        "lemma4": _suite_lemma4,
        "variance": _suite_variance,
        "convergence": lambda *a: _suite_convergence(*a, jobs=jobs),
        "robustness": lambda *a: _suite_robustness(*a, jobs=jobs),
    }
    all_ok = True
    for name in names:
        print(f"== {name}")
        ok, doc = runners[name](cfg, spec, params, v)
        doc["suite"] = name
        doc["passed"] = bool(ok)
        write_json(out / f"verify_{name}.json", doc)
        all_ok &= ok
    print("verification " + ("passed" if all_ok else "FAILED"))
    return EXIT_OK if all_ok else EXIT_FAIL


def cmd_sweep(cfg: ExperimentConfig, out: Path, jobs=1):
    sw = cfg.sweep
    if sw is None:
        raise ConfigError("sweep needs a 'sweep' section")
    cells = sw.cells()
    if not cells:
        raise ConfigError(f"sweep axis {sw.axis!r} has no values")
    estimators = [Estimator(e) for e in (sw.estimators or [cfg.train.estimator])]
    if sw.axis == "alpha":
        estimators = [Estimator.CONFDIFF_WEIGHTED]
    out.mkdir(parents=True, exist_ok=True)
    cell_dir = out / "cells"
    cell_dir.mkdir(exist_ok=True)

    tasks, keys = [], []
    for est in estimators:
        for cell in cells:
            ccfg, kw = _sweep_cell_config(cfg, sw.axis, cell)
            spec = ccfg.mixture.build()
            for k in range(cfg.train.seeds):
                tasks.append((ccfg, spec, est, k, kw.get("alpha"), kw.get("fraction", 1.0)))
                keys.append((est.value, cell))
    results = run_tasks(_train_cell, tasks, jobs)

    grouped = {}
    for key, res in zip(keys, results):
        grouped.setdefault(key, []).append(res)
    header = ["estimator"] + (["prior_scale", "conf_noise_std"] if sw.axis == "noise" else [sw.axis])
    header += ["mean_accuracy", "std_accuracy", "runs"]
    rows = []
    for i, ((est, cell), runs) in enumerate(grouped.items()):
        s = _summary(runs)
        write_json(cell_dir / f"cell_{i:04d}.json", {"estimator": est, "cell": list(cell), **s})
        rows.append([est, *[ds.fmt_float(v) for v in cell], ds.fmt_float(s["mean_final_accuracy"]),
                     ds.fmt_float(s["std_final_accuracy"]), s["runs"]])
    path = out / f"sweep_{sw.axis}.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    print(f"wrote {len(rows)} rows to {path}")
    return EXIT_OK


def _sweep_cell_config(cfg: ExperimentConfig, axis, cell):
    if axis == "prior":
        mix = cfg.mixture.model_copy(update={"prior_pos": cell[0]})
        return cfg.model_copy(update={"mixture": mix}), {}
    if axis == "noise":
        noise = cfg.noise.model_copy(update={"prior_scale": cell[0], "conf_noise_std": cell[1]})
        return cfg.model_copy(update={"noise": noise}), {}
    if axis == "alpha":
        return cfg, {"alpha": cell[0]}
    if not 0.0 < cell[0] <= 1.0:
        raise ConfigError("n_fraction values must lie in (0, 1]")
    return cfg, {"fraction": cell[0]}


# -- entry point ---------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML/JSON experiment document")
    common.add_argument("--preset", help=f"named base config ({', '.join(preset_names())})")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--seed", type=int, help="override the top-level seed")
    common.add_argument("--jobs", type=int, help="worker processes (env CONFDIFF_JOBS)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="confdiff", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="write synthetic datasets")
    sub.add_parser("train", parents=[common], help="train over several seeds")
    v = sub.add_parser("verify", parents=[common], help="run Monte-Carlo verification suites")
    v.add_argument("suite", choices=SUITES)
    sub.add_parser("sweep", parents=[common], help="cross-product training sweep to CSV")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg = load_config(args.config, args.preset, args.seed)
        jobs = resolve_jobs(args.jobs)
        out = Path(args.out)
        if args.command == "generate":
            return cmd_generate(cfg, out, jobs)
        if args.command == "train":
            return cmd_train(cfg, out, jobs)
        if args.command == "verify":
            return cmd_verify(cfg, out, args.suite, jobs)
        return cmd_sweep(cfg, out, jobs)
    except (ConfigError, InvalidInputError) as exc:
        print(f"confdiff: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AbortedRunError as exc:
        print(f"confdiff: run aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except OSError as exc:
        print(f"confdiff: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
