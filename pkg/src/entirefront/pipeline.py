"""Stage orchestration: checker → spectral → Γ → fronts → entire solution, plus manifest."""

from __future__ import annotations

import json
import logging
import platform
import time
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__
from .checker import check_all
from .config import ExperimentConfig, serialize
from .entire import Profiles, construct, verify_qualitative
from .errors import (ArtifactError, AssumptionError, ConstructionError, NumericalError,
                     SchemeError, SpeedError)
from .front import FrontProfile, compute_front, verify_front
from .io import (ArrayCache, cache_key, sha256_file, write_csv, write_json, write_profile_csv,
                 write_snapshots_csv)
from .model import ModelSpec, make_model
from .profile import Profile
from .sis import compute_gamma, verify_gamma
from .spectral import SpectralData, compute_cstar

log = logging.getLogger(__name__)

CLI_SPEED_FACTOR = 1.05


# ---------------------------------------------------------------------------
# profile cache


def _profile_arrays(p: Profile):
    rate, amp = p.decay_meta
    out = dict(t0=np.float64(p.t0), dt=np.float64(p.dt), values=p.values,
               rate=np.float64(rate), amp=np.asarray(amp, float),
               right_limit=np.asarray(p.right_limit, float),
               meta=np.array(json.dumps(p.meta, sort_keys=True, default=float)))
    if isinstance(p, FrontProfile):
        out.update(c=np.float64(p.c), lambda1=np.float64(p.lambda1), v1=np.asarray(p.v1))
    return out


def _profile_from(arrays):
    kw = dict(t0=float(arrays["t0"]), dt=float(arrays["dt"]), values=arrays["values"],
              decay_meta=(float(arrays["rate"]), arrays["amp"]),
              right_limit=arrays["right_limit"], meta=json.loads(str(arrays["meta"])))
    if "c" in arrays:
        return FrontProfile(c=float(arrays["c"]), lambda1=float(arrays["lambda1"]),
                            v1=arrays["v1"], **kw)
    return Profile(**kw)


def cached_profile(cache, key, build):
    """Return (profile, hit) from ``cache`` under ``key``, computing with ``build`` on a miss."""
    if cache is not None:
        hit = cache.get(key)
        if hit is not None:
            try:
                return _profile_from(hit), True
            except (KeyError, ValueError) as exc:
                log.warning("cache entry %s malformed (%s); recomputing", key, exc)
    prof = build()
    if cache is not None:
        cache.put(key, **_profile_arrays(prof))
    return prof, False


# ---------------------------------------------------------------------------
# manifest


class RunManifest(dict):
    """Plain dict with a few helpers; serialized as ``manifest.json``."""

    @property
    def exit_code(self):
        return self.get("exit_code", 0)


def _versions():
    return {"entirefront": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__, "pyyaml": yaml.__version__}


class _Run:
    def __init__(self, config: ExperimentConfig, out: Path, cache_dir):
        self.config = config
        self.out = out
        self.cache = ArrayCache(cache_dir if cache_dir is not None else out / "cache")
        self.outputs = []
        self.manifest = RunManifest(config_hash=config.digest(), name=config.name,
                                    seed=config.seed, versions=_versions(), stage_times={},
                                    verdicts={}, outputs=[], cache={}, exit_code=0)

    def file(self, path):
        self.outputs.append(Path(path))
        return path

    def stage(self, name, fn):
        t = time.perf_counter()
        try:
            return fn()
        except ArtifactError as exc:
            exc.details.setdefault("stage", name)
            self.manifest["verdicts"][name] = {"ok": False, "error": type(exc).__name__,
                                               "message": str(exc)}
            self.manifest["exit_code"] = exc.exit_code
            raise
        finally:
            self.manifest["stage_times"][name] = time.perf_counter() - t

    def finish(self):
        self.manifest["outputs"] = [
            {"path": str(p.relative_to(self.out)), "sha256": sha256_file(p)}
            for p in sorted(set(self.outputs))]
        self.manifest["cache"] = {"hits": self.cache.hits, "misses": self.cache.misses}
        write_json(self.out / "manifest.json", self.manifest)
        return self.manifest


# ---------------------------------------------------------------------------
# stages


def stage_checker(run: _Run, model: ModelSpec, spectral: SpectralData | None):
    ck = run.config.checker
    rep = check_all(model, spectral, seed=run.config.seed, samples=ck.samples, k_max=ck.k_max,
                    rays=ck.rays)
    run.file(write_json(run.out / "assumptions.json", rep.to_dict()))
    run.manifest["verdicts"]["checker"] = {"ok": rep.ok, "hard_failures": rep.hard_failures}
    if not rep.ok:
        raise AssumptionError("assumption check failed: " + ", ".join(rep.hard_failures),
                              report=rep)
    return rep


def stage_spectral(run: _Run, model: ModelSpec, speed_factor):
    sc = run.config.spectral
    sp = compute_cstar(model, lambda_max=sc.lambda_max, tol=sc.tol)
    speeds = run.config.speeds()
    info = {"c_star": sp.c_star, "lambda_star": sp.lambda_star, "growth_rate": sp.growth_rate,
            "v_star": sp.v_star, "structure": sp.structure, "unimodal": sp.unimodal,
            "speeds": {str(c): {"lambda1": sp.lambda1(c), "v": sp.v(sp.lambda1(c))}
                       for c in speeds if c > sp.c_star}}
    run.file(write_json(run.out / "spectral.json", info))
    run.file(write_csv(run.out / "spectral_scan.csv", ["lambda", "M", "M_over_lambda"],
                       [(lam, lam * q, q) for lam, q in sp.scan]))
    for c in speeds:
        if c < speed_factor * sp.c_star:
            raise SpeedError(f"speed {c} is below {speed_factor:g}·c* = "
                             f"{speed_factor * sp.c_star:.6g}", c=c, c_star=sp.c_star)
    run.manifest["verdicts"]["spectral"] = {"ok": True, "c_star": sp.c_star,
                                            "lambda_star": sp.lambda_star}
    return sp


def _check_ok(name, report):
    if not report["ok"]:
        bad = [k for k, v in report.items() if isinstance(v, dict) and not v.get("ok", True)]
        raise NumericalError(f"{name} verification failed: {', '.join(bad)}", report=report)


def stage_sis(run: _Run, bm: ModelSpec, spectral):
    sc = run.config.sis
    key = cache_key("gamma", bm.digest(), sc.tol, sc.t0, sc.t1, sc.dt)
    gamma, hit = cached_profile(run.cache, key, lambda: compute_gamma(
        bm, spectral, sc.tol, t0=sc.t0, t1=sc.t1, dt=sc.dt))
    rep = verify_gamma(bm, gamma)
    run.file(write_profile_csv(run.out / "gamma.csv", gamma.grid, gamma.values))
    run.file(write_json(run.out / "gamma_report.json", rep))
    run.manifest["verdicts"]["sis"] = {"ok": bool(rep["ok"]), "cached": hit}
    _check_ok("sis", rep)
    return gamma


def stage_fronts(run: _Run, bm: ModelSpec, spectral):
    fc = run.config.front
    fronts, verdict = {}, {}
    for c in run.config.speeds():
        key = cache_key("front", bm.digest(), c, fc.tol, fc.dxi, fc.xi_max)
        front, hit = cached_profile(run.cache, key, lambda: compute_front(
            bm, spectral, c, fc.tol, dxi=fc.dxi, xi_max=fc.xi_max))
        rep = verify_front(bm, front)
        tag = f"{c:.6g}"
        run.file(write_profile_csv(run.out / f"front_c{tag}.csv", front.grid, front.values,
                                   label="xi", name="phi"))
        run.file(write_json(run.out / f"front_c{tag}_report.json", rep))
        verdict[tag] = {"ok": bool(rep["ok"]), "cached": hit}
        fronts[c] = front
        _check_ok(f"front c={tag}", rep)
    run.manifest["verdicts"]["fronts"] = verdict
    return fronts


def stage_entire(run: _Run, model, spectral, profiles, speed_factor):
    blk = run.config.entire
    cfg = blk.resolve(model.cooperative, speed_factor)
    traj, rep = construct(cfg, model, profiles, spectral, cache=run.cache, barrier=blk.barrier,
                          raise_on_failure=False)
    qual = verify_qualitative(traj, cfg, spectral, model)
    run.file(write_snapshots_csv(run.out / "entire_snapshots.csv", traj.x, traj.times,
                                 traj.values))
    run.file(write_json(run.out / "sandwich_report.json", rep.to_dict()))
    run.file(write_json(run.out / "qualitative_report.json", qual))
    run.manifest["verdicts"]["entire"] = {"ok": rep.ok, "sandwich_ok": rep.sandwich_ok,
                                          "monotone_in_n_ok": rep.monotone_in_n_ok,
                                          "lower_margin": rep.lower_margin["value"],
                                          "upper_margin": rep.upper_margin["value"]}
    run.manifest["verdicts"]["qualitative"] = {
        "ok": qual["ok"], "report_only": True,
        **{k: v["ok"] for k, v in qual.items() if isinstance(v, dict) and "ok" in v}}
    # the construction errors are re-raised here so that the files above are written first
    _raise_on_failure(cfg, rep)
    return traj, rep, qual


def _raise_on_failure(cfg, rep):
    if cfg.mode == "cooperative" and not rep.monotone_in_n_ok:
        raise SchemeError("Uⁿ is not nondecreasing in n", min_difference=rep.monotone_in_n_min)
    if not rep.sandwich_ok:
        worst = min(rep.lower_margin, rep.upper_margin, key=lambda m: m["value"])
        raise ConstructionError("sandwich violated beyond tolerance", worst=worst)


def run_pipeline(config: ExperimentConfig, out=None, cache_dir=None, stages=None,
                 speed_factor=CLI_SPEED_FACTOR) -> RunManifest:
    """Run the requested stages (default: all) and write outputs plus ``manifest.json``.

    Stage errors propagate after the manifest is written; the error's ``details`` name the
    stage and the manifest records the exit code.
    """
    out = Path(out if out is not None else config.output)
    out.mkdir(parents=True, exist_ok=True)
    run = _Run(config, out, cache_dir)
    run.file(_write_text(out / "config.yaml", serialize(config)))
    stages = set(stages or ("checker", "spectral", "sis", "front", "entire"))
    try:
        model = run.stage("model", lambda: make_model(config.model.kind,
                                                      config.model.parameters))
        if "checker" in stages and config.checker.enabled:
            run.stage("checker", lambda: stage_checker(run, model, None))
        spectral = run.stage("spectral", lambda: stage_spectral(run, model, speed_factor))
        ent = config.entire
        mode_noncoop = (not model.cooperative) if ent is None or ent.mode == "auto" \
            else ent.mode == "noncooperative"
        bm = model.lower() if mode_noncoop else model
        need_gamma = "sis" in stages or ("entire" in stages and ent is not None
                                         and ent.chi and ent.chi[-1])
        gamma = run.stage("sis", lambda: stage_sis(run, bm, spectral)) if need_gamma else None
        fronts = {}
        if "front" in stages or "entire" in stages:
            fronts = run.stage("front", lambda: stage_fronts(run, bm, spectral))
        if "entire" in stages and ent is not None:
            profiles = Profiles(fronts, gamma)
            run.stage("entire", lambda: stage_entire(run, model, spectral, profiles,
                                                     speed_factor))
    finally:
        run.finish()
    return run.manifest


def _write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path
