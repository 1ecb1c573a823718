"""Simulation harness: baselines, federated update cycles and sweeps.

Every capture is keyed by ``(seed, platoon, lap, location, channel)`` and
seeded from that key alone, so platoon ``u`` sees the same captures in every
mode and for every platoon count.  :class:`TemporalFits` memoizes the EM
fits of those captures; a sweep over modes, platoon counts and ``k`` pays
for each fit once.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .cqa import argmin_channel, outage_probability, outage_threshold
from .federated import LearningConfig, fed_avg_merge, local_update, n_th
from .gmm import GmmParams, fit_em
from .interference import synthesize_iq_batch, synthesize_power_grid
from .rem import RemEntry, RemStore
from .scenario import ScenarioConfig
from .spectral import ChiBatch, aggregate_chi, chi_from_iq

__all__ = [
    "MODES",
    "capture_chi",
    "capture_seed",
    "TemporalFits",
    "build_baseline",
    "baseline_entry",
    "packaged_baseline",
    "thresholds",
    "outage_table",
    "rmse",
    "run_fl_cycle",
    "run_experiment",
    "channel_selection_table",
    "ExperimentReport",
    "CurveResult",
]

log = logging.getLogger(__name__)

MODES = ("SAIM", "LOCAL", "GLOBAL")
BASELINE_KEY = 2**31 - 1
PACKAGED_BASELINE = "default_baseline_rem.json"
PACKAGED_BASELINE_META = "default_baseline_meta.json"


def _seed_sequence(seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))


def capture_seed(seed: int, platoon: int, lap: int, location: int, channel: int) -> np.random.SeedSequence:
    """Seed of the capture a platoon takes at a location on a lap."""
    return _seed_sequence(seed, platoon, lap, location, channel).spawn(2)[0]


def capture_chi(
    scenario: ScenarioConfig,
    location: int,
    channel: int,
    n_s: int,
    rng_seed=None,
    method: str = "spectral",
) -> ChiBatch:
    """Capture ``n_s`` segments and reduce them to chi samples.

    ``method="iq"`` synthesizes the full IQ batch and runs the DFT pipeline;
    ``"spectral"`` draws the noise-only bins directly in the frequency domain
    (same distribution, several times faster).
    """
    ch = scenario.channels[channel]
    if method == "iq":
        iq = synthesize_iq_batch(scenario, location, channel, n_s * ch.n_subchannels_Nf, rng_seed)
        return chi_from_iq(iq, ch)
    if method == "spectral":
        grid = synthesize_power_grid(scenario, location, channel, n_s, rng_seed)
        return aggregate_chi(grid, ch.usable_subchannels_F, location, channel)
    raise ValueError(f"unknown capture method {method!r}")


def thresholds(scenario: ScenarioConfig) -> np.ndarray:
    """Outage threshold in the chi domain for every channel."""
    return np.array([outage_threshold(scenario.link_budget(i)) for i in range(scenario.n_channels)])


class TemporalFits:
    """Memo of temporal (single-capture) fits keyed by capture identity."""

    def __init__(self, scenario: ScenarioConfig, method: str = "spectral", n_init: int | None = None):
        self.scenario = scenario
        self.method = method
        self.n_init = scenario.em.n_init if n_init is None else n_init
        self._fits: dict[tuple, GmmParams] = {}

    def __len__(self):
        return len(self._fits)

    def get(self, seed, platoon, lap, location, channel, n_s) -> GmmParams:
        key = (seed, platoon, lap, location, channel, n_s)
        fit = self._fits.get(key)
        if fit is None:
            capture_ss, em_ss = _seed_sequence(seed, platoon, lap, location, channel).spawn(2)
            chi = capture_chi(self.scenario, location, channel, n_s, capture_ss, self.method)
            em = self.scenario.em
            fit = fit_em(
                chi,
                self.scenario.n_components_J,
                tol=em.tol,
                max_iter=em.max_iter,
                n_init=self.n_init,
                rng_seed=np.random.default_rng(em_ss),
            )
            self._fits[key] = fit
        return fit


def baseline_entry(
    scenario: ScenarioConfig,
    location: int,
    channel: int,
    n_large: int | None = None,
    seed: int = 0,
    n_components: int | str | None = None,
    method: str = "spectral",
) -> RemEntry:
    """Reference model of one (location, channel) from one large capture.

    ``n_components=None`` uses the scenario's fixed J; pass ``"aic"`` to pick
    J with :func:`select_j` (the result then cannot be compared with fixed-J
    models by the update rules).
    """
    from .gmm import select_j

    n_large = scenario.baseline_samples if n_large is None else n_large
    em = scenario.em
    capture_ss, em_ss = _seed_sequence(seed, BASELINE_KEY, location, channel).spawn(2)
    chi = capture_chi(scenario, location, channel, n_large, capture_ss, method)
    rng = np.random.default_rng(em_ss)
    j = scenario.n_components_J
    if n_components == "aic":
        j = select_j(chi, 15, rng_seed=rng, tol=em.tol, max_iter=em.max_iter, n_init=em.n_init)
    elif n_components is not None:
        j = int(n_components)
    model = fit_em(chi, j, tol=em.tol, max_iter=em.max_iter, n_init=em.n_init, rng_seed=rng)
    return RemEntry(model, n_large)


def build_baseline(
    scenario: ScenarioConfig,
    n_large: int | None = None,
    seed: int = 0,
    n_components: int | str | None = None,
    method: str = "spectral",
) -> RemStore:
    """Reference REM: :func:`baseline_entry` for every (location, channel)."""
    store = RemStore("baseline", "baseline")
    for loc in range(scenario.n_locations):
        for ch in range(scenario.n_channels):
            store.put(loc, ch, baseline_entry(scenario, loc, ch, n_large, seed, n_components, method))
        log.info("baseline: location %d done", loc)
    return store


def packaged_baseline(scenario: ScenarioConfig) -> RemStore | None:
    """Precomputed ``build_baseline(scenario)`` shipped with the package.

    Returns ``None`` unless ``scenario`` is the default scenario the file was
    built from (checked by digest).  Rebuilding takes minutes at the
    default baseline size, so sweeps on the default scenario load this.
    """
    meta = json.loads(resources.files("fedrem.data").joinpath(PACKAGED_BASELINE_META).read_text())
    if meta["scenario_digest"] != scenario_digest(scenario):
        return None
    with resources.as_file(resources.files("fedrem.data").joinpath(PACKAGED_BASELINE)) as path:
        return RemStore.load(path)


def outage_table(store: RemStore, scenario: ScenarioConfig, t=None) -> np.ndarray:
    """``(n_locations, n_channels)`` outage probabilities; NaN where absent."""
    t = thresholds(scenario) if t is None else t
    out = np.full((scenario.n_locations, scenario.n_channels), np.nan)
    for (loc, ch), entry in store.items():
        out[loc, ch] = outage_probability(entry.model, t[ch])
    return out


def rmse(estimate: np.ndarray, reference: np.ndarray) -> float:
    """Root-mean-square outage error over all (location, channel) pairs."""
    diff = np.asarray(estimate) - np.asarray(reference)
    return float(np.sqrt(np.mean(diff * diff)))


def run_fl_cycle(
    global_store: RemStore,
    local_stores: list[RemStore],
    scenario: ScenarioConfig,
    location: int,
    temporal_models,
    cfg: LearningConfig | None = None,
) -> dict:
    """One federated cycle at ``location``.

    ``temporal_models(u, channel)`` returns platoon ``u``'s fresh fit for the
    channel.  The global entry is first copied into every local map (each
    keeping its own sample count), locals are updated, and the global entry
    becomes the sample-weighted merge of the updated locals.  Returns the
    temporal models keyed by ``(u, channel)``.
    """
    cfg = cfg or scenario.learning
    temporal = {}
    for ch in range(scenario.n_channels):
        shared = global_store.get(location, ch)
        if shared is None:
            continue
        for local in local_stores:
            own = local.get(location, ch)
            local.put(location, ch, RemEntry(shared.model, own.n_samples_Nr if own else 0))
    for u, local in enumerate(local_stores):
        for ch in range(scenario.n_channels):
            model = temporal_models(u, ch)
            temporal[(u, ch)] = model
            local.put(location, ch, local_update(local.get(location, ch), model, cfg))
    for ch in range(scenario.n_channels):
        entries = [local.get(location, ch) for local in local_stores]
        merged = fed_avg_merge([(e.model, n_th(e.n_samples_Nr, cfg.k, cfg.n_s)) for e in entries])
        global_store.put(location, ch, RemEntry(merged, sum(e.n_samples_Nr for e in entries)))
    return temporal


# --------------------------------------------------------------------------
# sweeps


@dataclass
class CurveResult:
    """RMSE after every lap for one configuration, one row per seed."""

    mode: str
    platoons_U: int
    n_s: int
    k: int
    per_seed: np.ndarray  # (n_seeds, laps)
    seeds: tuple[int, ...]

    @property
    def key(self) -> tuple:
        return (self.mode, self.platoons_U, self.n_s, self.k)

    @property
    def mean(self) -> np.ndarray:
        return self.per_seed.mean(axis=0)

    def stabilized(self, last: int = 5) -> float:
        """Seed-averaged mean RMSE over the last ``last`` rounds."""
        return float(self.per_seed[:, -last:].mean())


@dataclass
class ExperimentReport:
    curves: dict = field(default_factory=dict)  # key -> CurveResult
    selection: dict | None = None
    metadata: dict = field(default_factory=dict)

    def curve(self, mode: str, platoons_U: int = 1, n_s: int | None = None, k: int | None = None) -> CurveResult:
        hits = [
            c
            for c in self.curves.values()
            if c.mode == mode
            and c.platoons_U == platoons_U
            and (n_s is None or c.n_s == n_s)
            and (k is None or c.k == k)
        ]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} curves match {(mode, platoons_U, n_s, k)}")
        return hits[0]

    @property
    def rmse_by_update(self) -> dict:
        return {key: c.mean.tolist() for key, c in self.curves.items()}

    def to_dict(self) -> dict:
        return {
            "metadata": self.metadata,
            "curves": [
                {
                    "mode": c.mode,
                    "platoons_U": c.platoons_U,
                    "n_s": c.n_s,
                    "k": c.k,
                    "seeds": list(c.seeds),
                    "rmse_mean": c.mean.tolist(),
                    "rmse_per_seed": c.per_seed.tolist(),
                }
                for c in self.curves.values()
            ],
            "selection": self.selection,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def to_csv(self) -> str:
        """Plot-ready rows: one per update round per configuration."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["mode", "platoons_U", "n_s", "k", "round", "rmse_mean", "rmse_std"])
        for c in self.curves.values():
            std = c.per_seed.std(axis=0)
            for r, (m, s) in enumerate(zip(c.mean, std), start=1):
                w.writerow([c.mode, c.platoons_U, c.n_s, c.k, r, repr(float(m)), repr(float(s))])
        return buf.getvalue()

    def selection_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if not self.selection:
            return ""
        sources = list(self.selection["per_seed"][0]["channels"])
        w.writerow(["seed", "location"] + sources)
        for row in self.selection["per_seed"]:
            for loc in range(len(row["channels"][sources[0]])):
                w.writerow([row["seed"], loc] + [row["channels"][s][loc] for s in sources])
        return buf.getvalue()

    def write(self, out_dir, stem: str = "report") -> list:
        from pathlib import Path

        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = [out_dir / f"{stem}.json", out_dir / f"{stem}.csv"]
        paths[0].write_text(self.to_json())
        paths[1].write_text(self.to_csv())
        if self.selection:
            paths.append(out_dir / f"{stem}_selection.csv")
            paths[2].write_text(self.selection_csv())
        return paths


def scenario_digest(scenario: ScenarioConfig) -> str:
    return hashlib.sha256(scenario.to_json().encode()).hexdigest()[:16]


def _simulate_seed(scenario, fits, seed, mode, platoons, n_s, k, laps, baseline_out, t, final=None):
    """RMSE trajectory for one seed of one configuration."""
    cfg = LearningConfig(k=k, n_s=n_s)
    n_loc, n_ch = scenario.n_locations, scenario.n_channels
    global_store = RemStore("global", "global")
    locals_ = [RemStore("local", str(u)) for u in range(platoons)]
    est = np.empty((platoons, n_loc, n_ch))
    curve = np.empty(laps)
    for lap in range(laps):
        for loc in range(n_loc):

            def temporal(u, ch, loc=loc, lap=lap):
                return fits.get(seed, u, lap, loc, ch, n_s)

            if mode == "GLOBAL":
                run_fl_cycle(global_store, locals_, scenario, loc, temporal, cfg)
                for ch in range(n_ch):
                    est[0, loc, ch] = outage_probability(global_store.get(loc, ch).model, t[ch])
            else:
                for u, local in enumerate(locals_):
                    for ch in range(n_ch):
                        model = temporal(u, ch)
                        if mode == "LOCAL":
                            entry = local_update(local.get(loc, ch), model, cfg)
                            local.put(loc, ch, entry)
                            model = entry.model
                        else:
                            local.put(loc, ch, RemEntry(model, n_s))
                        est[u, loc, ch] = outage_probability(model, t[ch])
        if mode == "GLOBAL":
            curve[lap] = rmse(est[0], baseline_out)
        else:
            curve[lap] = np.mean([rmse(est[u], baseline_out) for u in range(platoons)])
    if final is not None:
        final["store"] = global_store if mode == "GLOBAL" else locals_[0]
    return curve


def run_experiment(
    scenario: ScenarioConfig,
    mode="GLOBAL",
    sweep: dict | None = None,
    baseline: RemStore | None = None,
    fits: TemporalFits | None = None,
    selection: bool = False,
) -> ExperimentReport:
    """Sweep one or more modes over platoon counts, ``n_s`` and ``k``.

    ``sweep`` may hold lists under ``platoons_U``, ``n_s``, ``k``, ``laps_R``
    and ``seeds``; missing keys come from the scenario.  SAIM curves ignore
    ``k``.  With ``selection=True`` the report also carries the per-location
    channel choice of the baseline, the final GLOBAL store (largest platoon
    count swept) and the last SAIM fits.  Without ``baseline`` the packaged
    baseline is used for the default scenario, else one is built.
    """
    modes = [mode] if isinstance(mode, str) else list(mode)
    for m in modes:
        if m not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {m!r}")
    sweep = dict(sweep or {})
    platoon_list = list(sweep.get("platoons_U", [scenario.platoons_U]))
    ns_list = list(sweep.get("n_s", [scenario.capture.n_s]))
    k_list = list(sweep.get("k", [scenario.k]))
    laps = int(sweep.get("laps_R", scenario.laps_R))
    seeds = sweep.get("seeds", scenario.seeds)
    seeds = tuple(range(seeds)) if isinstance(seeds, int) else tuple(seeds)

    if baseline is None:
        baseline = packaged_baseline(scenario) or build_baseline(scenario)
    if fits is None:
        fits = TemporalFits(scenario)
    t = thresholds(scenario)
    base_out = outage_table(baseline, scenario, t)
    if np.isnan(base_out).any():
        raise KeyError("baseline does not cover every (location, channel)")

    report = ExperimentReport(
        metadata={
            "scenario_digest": scenario_digest(scenario),
            "laps_R": laps,
            "seeds": list(seeds),
            "capture_method": fits.method,
            "em_n_init": fits.n_init,
        }
    )
    for m in modes:
        for u in platoon_list:
            for n_s in ns_list:
                for k in [k_list[0]] if m == "SAIM" else k_list:
                    rows = [_simulate_seed(scenario, fits, s, m, u, n_s, k, laps, base_out, t) for s in seeds]
                    curve = CurveResult(m, u, n_s, k, np.array(rows), seeds)
                    report.curves[curve.key] = curve
                    log.info("%s U=%d n_s=%d k=%d: final RMSE %.3g", m, u, n_s, k, curve.mean[-1])

    if selection:
        report.selection = channel_selection_table(
            scenario, baseline, fits, seeds, max(platoon_list), ns_list[-1], k_list[0], laps
        )
    return report


def _select_all(store: RemStore, scenario: ScenarioConfig, t) -> list[int]:
    table = outage_table(store, scenario, t)
    return [argmin_channel(row, scenario.outage_resolution) for row in table]


def channel_selection_table(scenario, baseline, fits, seeds, platoons_U, n_s, k, laps) -> dict:
    """Per-location best channel under baseline, final GLOBAL store and SAIM.

    The SAIM choice at a location uses platoon 0's fits from the last lap.
    """
    t = thresholds(scenario)
    base = _select_all(baseline, scenario, t)
    per_seed = []
    for seed in seeds:
        final = {}
        _simulate_seed(scenario, fits, seed, "GLOBAL", platoons_U, n_s, k, laps, outage_table(baseline, scenario, t), t, final)
        saim = RemStore("saim", "0")
        for loc in range(scenario.n_locations):
            for ch in range(scenario.n_channels):
                saim.put(loc, ch, RemEntry(fits.get(seed, 0, laps - 1, loc, ch, n_s), n_s))
        glob = _select_all(final["store"], scenario, t)
        sa = _select_all(saim, scenario, t)
        per_seed.append(
            {
                "seed": seed,
                "channels": {"baseline": base, "global": glob, "saim": sa},
                "matches": {
                    "global": sum(a == b for a, b in zip(glob, base)),
                    "saim": sum(a == b for a, b in zip(sa, base)),
                },
            }
        )
    n_loc = scenario.n_locations
    return {
        "platoons_U": platoons_U,
        "n_s": n_s,
        "k": k,
        "laps_R": laps,
        "n_locations": n_loc,
        "mean_match_fraction": {
            src: math.fsum(r["matches"][src] for r in per_seed) / (len(per_seed) * n_loc)
            for src in ("global", "saim")
        },
        "per_seed": per_seed,
    }
