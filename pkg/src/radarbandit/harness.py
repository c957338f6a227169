"""Episode loop, campaigns over seeds, d_hat sweeps, log emission and replay."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import rng as rngmod
from .bandit import (
    DegenerateContextError,
    Exp3Policy,
    Exp3State,
    HistoryStore,
    RegretLedger,
    ThompsonSamplingPolicy,
    baseline_fixed,
    baseline_reactive,
)
from .config import ExperimentConfig, validate
from .rdproc import (
    PointTarget,
    RadarParams,
    ReplicaBank,
    cfar_2d,
    cfar_cells_tested,
    metrics,
    range_doppler,
    receive,
    truth_cell,
)
from .scene import CoexistenceChannel, JammerChannel, SyntheticLinearEnv
from .spectrum import CostParams, CostTable, bits_to_string, state_key
from .tracker import (
    DegenerateCovarianceError,
    TrackState,
    clamp_params,
    kalman_predict,
    kalman_update,
    measurement_noise,
    optimal_waveform_params,
    rmse,
    select_tracked_waveform,
    write_track_log,
)
from .waveforms import WaveformCatalog, allowed_mask, grid_catalog

log = logging.getLogger(__name__)

PRI_COLUMNS = ("t", "sensed", "true", "waveform_id", "cost", "oracle_cost", "regret_increment", "cumulative_regret")
CPI_COLUMNS = (
    "cpi", "start_pri", "pd", "false_alarms", "pfa_hat", "image_sinr_db", "peak_sidelobe_db",
    "integrated_sidelobe_db", "distinct_waveforms", "truth_range", "truth_rate", "detected",
    "meas_range", "meas_rate", "eta_db", "est_range", "est_rate", "p11", "p12", "p22",
    "chosen_T", "chosen_alpha", "nis",
)


def build_catalog(config: ExperimentConfig) -> WaveformCatalog:
    c = config.catalog
    return grid_catalog(
        channel_bandwidth=c.channel_bandwidth_hz,
        num_subchannels=c.num_subchannels,
        bandwidths=c.bandwidths_hz,
        pulse_duration=c.pulse_duration_s,
        carrier_freq=c.carrier_freq_hz,
        literal_occupancy=c.literal_occupancy,
    )


def build_cost_params(config: ExperimentConfig) -> CostParams:
    default = CostParams.default(config.catalog.channel_bandwidth_hz)
    b1 = config.cost.beta1 if config.cost.beta1 is not None else default.beta1
    b2 = config.cost.beta2 if config.cost.beta2 is not None else default.beta2
    return CostParams(b1, b2)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return format(float(v), ".17g")


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


@dataclass
class EpisodeLog:
    config: ExperimentConfig
    seed: int
    num_subchannels: int
    sensed: np.ndarray
    true: np.ndarray
    waveform: np.ndarray
    cost: np.ndarray
    oracle: np.ndarray
    regret_increment: np.ndarray
    cumulative_regret: np.ndarray
    cpi: list[dict] = field(default_factory=list)
    degenerate_pris: list[int] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.cost)

    @property
    def average_cost(self) -> float:
        return float(self.cost.mean())

    def running_average_cost(self) -> np.ndarray:
        return np.cumsum(self.cost) / np.arange(1, len(self.cost) + 1)

    def summary(self) -> dict:
        return summarize(self.config, self.seed, self.cost, self.oracle, self.regret_increment,
                         self.cumulative_regret, self.cpi, len(self.degenerate_pris), self.extra)

    def pri_rows(self):
        S = self.num_subchannels
        for t in range(len(self.cost)):
            s_hat = bits_to_string(_key_bits(self.sensed[t], S)) if self.sensed[t] >= 0 else ""
            s_true = bits_to_string(_key_bits(self.true[t], S)) if self.true[t] >= 0 else ""
            yield (t, s_hat, s_true, int(self.waveform[t]), self.cost[t], self.oracle[t],
                   self.regret_increment[t], self.cumulative_regret[t])

    def write(self, root) -> Path:
        """Write pri.csv, cpi.csv, track.csv and summary.json under the episode directory."""
        out = episode_dir(root, self.config, self.seed)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "pri.csv", "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(PRI_COLUMNS)
            wr.writerows([_fmt(v) for v in row] for row in self.pri_rows())
        with open(out / "cpi.csv", "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(CPI_COLUMNS)
            wr.writerows([_fmt(r[c]) for c in CPI_COLUMNS] for r in self.cpi)
        if self.cpi and self.config.tracker.enabled:
            write_track_log(out / "track.csv", [dict(r, cpi_index=r["cpi"]) for r in self.cpi])
        (out / "summary.json").write_text(json.dumps(_json_safe(self.summary()), indent=2, sort_keys=True) + "\n")
        return out


def _key_bits(key: int, S: int) -> np.ndarray:
    return np.array([(int(key) >> (S - 1 - i)) & 1 for i in range(S)], dtype=np.uint8)


def episode_dir(root, config: ExperimentConfig, seed: int) -> Path:
    return Path(root) / config.scenario / config.label / f"seed-{seed}"


def summarize(config, seed, cost, oracle, regret_inc, cum_regret, cpi_rows, degenerate, extra=None) -> dict:
    out = {
        "scenario": config.scenario,
        "policy": config.policy,
        "label": config.label,
        "seed": int(seed),
        "horizon": int(len(cost)),
        "d_hat": config.d_hat,
        "average_cost": float(np.mean(cost)),
        "mean_oracle_cost": float(np.mean(oracle)),
        "cumulative_regret": float(cum_regret[-1]) if len(cum_regret) else 0.0,
        "regret_increment_sum": float(np.sum(regret_inc)),
        "degenerate_events": int(degenerate),
        "num_cpis": len(cpi_rows),
    }
    if cpi_rows:
        col = lambda k: np.array([r[k] for r in cpi_rows], dtype=float)
        out["pd"] = float(np.mean(col("pd")))
        out["false_alarms"] = int(np.sum(col("false_alarms")))
        out["pfa_hat"] = float(np.mean(col("pfa_hat")))
        out["mean_image_sinr_db"] = float(np.mean(col("image_sinr_db")))
        out["mean_peak_sidelobe_db"] = float(np.mean(col("peak_sidelobe_db")))
        out["mean_integrated_sidelobe_db"] = float(np.mean(col("integrated_sidelobe_db")))
        est = col("est_range")
        if np.all(np.isfinite(est)):
            out["rmse_m"] = rmse(est, col("truth_range"))
    if extra:
        out.update(extra)
    return out


# -- CPI processing and tracking --------------------------------------------


class CpiProcessor:
    """Turns each completed CPI into a range-Doppler map, detections and a track update."""

    def __init__(self, config: ExperimentConfig, catalog: WaveformCatalog, noise_rng: np.random.Generator):
        r = config.rdproc
        self.config = config
        self.catalog = catalog
        self.rng = noise_rng
        self.params = RadarParams(
            sample_rate=r.sample_rate_hz,
            pri=r.pri_s,
            num_fast=r.num_fast,
            range_start=r.range_start_m,
            carrier_freq=catalog.carrier_freq,
            channel_bandwidth=catalog.channel_bandwidth,
            num_subchannels=catalog.num_subchannels,
        )
        self.bank = ReplicaBank(catalog, self.params)
        snr = 10 ** (r.target_snr_db / 10)
        self.gain = math.sqrt(snr * r.noise_power / float(np.mean(self.bank.energy)))
        self.dt = r.num_pulses * r.pri_s
        self.cells = cfar_cells_tested((r.num_fast, r.num_pulses), r.cfar_guard, r.cfar_training)
        t = config.tracker
        self.track = None
        if t.enabled:
            self.track = TrackState.initial(
                r.target_range_m, r.target_velocity_mps, t.initial_range_std_m**2, t.initial_rate_std_mps**2, t.sigma_a
            )
        self.tracked_params = None  # (alpha*, T*) fed back to waveform selection
        v_bin = abs(self.params.velocity_of(1 / (r.pri_s * r.num_pulses)))
        self.quant_floor = np.diag([self.params.range_bin**2 / 12, v_bin**2 / 12])

    def truth_range(self, k: int) -> float:
        r = self.config.rdproc
        return r.target_range_m + r.target_velocity_mps * k * self.dt

    def process(self, k: int, start_pri: int, ids: np.ndarray, inr: np.ndarray) -> dict:
        r = self.config.rdproc
        M = r.num_pulses
        target = PointTarget.at_range(self.truth_range(k), r.target_velocity_mps, self.gain)
        pulses = [self.catalog[int(i)] for i in ids]
        buf = receive(pulses, [target], inr, r.noise_power, self.rng, self.bank, pulse_index0=k * M)
        rd = range_doppler(buf, self.bank, r.window)
        dets = cfar_2d(rd, r.cfar_guard, r.cfar_training, r.cfar_pfa)
        cell = truth_cell(target, self.params, M)
        m = metrics(rd, [cell], dets, cells_tested=self.cells, exclusion=r.cfar_guard)
        row = {
            "cpi": k,
            "start_pri": start_pri,
            "pd": m["pd"],
            "false_alarms": m["false_alarms"],
            "pfa_hat": m["pfa_hat"],
            "image_sinr_db": m["image_sinr_db"],
            "peak_sidelobe_db": m["peak_sidelobe_db"],
            "integrated_sidelobe_db": m["integrated_sidelobe_db"],
            "distinct_waveforms": int(len(np.unique(ids))),
            "truth_range": target.range_m,
            "truth_rate": r.target_velocity_mps,
        }
        row.update(self._track(k, rd, dets, pulses))
        return row

    def _track(self, k, rd, dets, pulses) -> dict:
        nan = float("nan")
        out = dict(detected=False, meas_range=nan, meas_rate=nan, eta_db=nan, est_range=nan, est_rate=nan,
                   p11=nan, p12=nan, p22=nan, chosen_T=nan, chosen_alpha=nan, nis=nan)
        T = float(np.mean([w.pulse_duration for w in pulses]))
        alpha = float(np.mean([w.chirp_rate for w in pulses]))
        out["chosen_T"], out["chosen_alpha"] = T, alpha
        if self.track is None:
            return out
        tc = self.config.tracker
        pred = kalman_predict(self.track, self.dt) if k > 0 else self.track
        gate = max(tc.gate_min_m, tc.gate_sigma * math.sqrt(pred.P[0, 0]))
        best = None
        for d in dets:
            if abs(rd.range_m[d.range_bin] - pred.x[0]) <= gate and (best is None or d.power > best.power):
                best = d
        if best is None:
            self.track = pred
        else:
            eta = best.snr
            z = (rd.range_m[best.range_bin], rd.velocity_mps[best.doppler_bin])
            N = measurement_noise(T, alpha, eta, self.catalog.carrier_freq) + self.quant_floor
            self.track = kalman_update(pred, z, N)
            out.update(detected=True, meas_range=z[0], meas_rate=z[1], eta_db=10 * math.log10(eta),
                       nis=self.track.nis)
        P = self.track.P
        out.update(est_range=self.track.x[0], est_rate=self.track.x[1], p11=P[0, 0], p12=P[0, 1], p22=P[1, 1])
        if tc.mode != "none":
            try:
                self.tracked_params = clamp_params(*optimal_waveform_params(P, self.catalog.carrier_freq),
                                                   self.catalog.waveforms)
            except DegenerateCovarianceError:
                log.warning("CPI %d: degenerate track covariance, keeping previous waveform target", k)
        return out


# -- episodes ----------------------------------------------------------------


def _make_learner(config: ExperimentConfig, num_arms: int, dim: int = 3):
    lr = config.learner
    if config.policy == "ts":
        return ThompsonSamplingPolicy(lr.ts_v, dim)
    if config.policy == "exp3":
        return Exp3Policy(Exp3State.initial(num_arms, config.horizon, lr.exp3_epsilon, lr.exp3_gamma, dim,
                                            lr.exp3_regularization))
    return None


def run_episode(config: ExperimentConfig, seed: int) -> EpisodeLog:
    """One seeded episode: sense, constrain, select, realize, cost, update, log."""
    validate(config)
    if config.scenario == "synthetic-linear":
        return _run_synthetic(config, seed)
    streams = rngmod.StreamFactory(seed)
    catalog = build_catalog(config)
    W, S = len(catalog), catalog.num_subchannels
    table = CostTable(catalog, build_cost_params(config), config.cost.allow_negative_missed)
    g1, g2 = config.catalog.gamma1, config.catalog.gamma2
    scene_rng = streams(rngmod.SCENE)
    if config.scenario == "coexistence":
        channel = CoexistenceChannel(config.scene.coexistence, catalog, scene_rng, streams(rngmod.CALIBRATION))
    else:
        channel = JammerChannel(config.scene.jammer, catalog)
    learner = _make_learner(config, W)
    d_hat = config.d_hat if learner is not None else None
    history = HistoryStore(W, config.learner.cold_start)
    policy_rng = streams(rngmod.POLICY)
    sensing_rng = streams(rngmod.SENSING)
    flip, lag = config.sensing.flip_prob, config.sensing.lag
    proc = CpiProcessor(config, catalog, streams(rngmod.NOISE)) if config.rdproc.enabled else None
    M = config.rdproc.num_pulses
    tmode, tweight = config.tracker.mode, config.tracker.penalty_weight

    n = config.horizon
    sensed_k = np.empty(n, dtype=np.int64)
    true_k = np.empty(n, dtype=np.int64)
    chosen = np.empty(n, dtype=np.int64)
    cost = np.empty(n)
    oracle = np.empty(n)
    inc = np.empty(n)
    ledger = RegretLedger()
    cum = np.empty(n)
    cpi_rows: list[dict] = []
    degenerate: list[int] = []
    past = [np.zeros(S, dtype=np.uint8)] * (lag + 1)
    all_ids = np.arange(W)
    prev = prev2 = None
    prev_true = np.zeros(S, dtype=np.uint8)
    cpi_ids = np.empty(M, dtype=np.int64)
    cpi_inr = np.empty((M, S))
    occupancy = 0.0

    for t in range(n):
        if config.scenario == "coexistence":
            true = channel.step(scene_rng)
        else:
            true = channel.step(prev, prev2).copy()
        past = past[1:] + [true]
        sensed = past[0]
        if flip > 0:
            sensed = sensed ^ (sensing_rng.random(S) < flip).astype(np.uint8)
        key = state_key(sensed)
        ids = all_ids[allowed_mask(catalog, prev, d_hat, g1, g2)]
        costs = table(true)

        if learner is not None:
            X = history.contexts(key, ids)
            k = learner.select(ids, X, policy_rng)
            w = int(ids[k])
            observed = costs[w]
            if proc is not None and proc.tracked_params is not None and tmode != "none":
                allowed = [catalog[int(i)] for i in ids]
                if tmode == "direct":
                    w = select_tracked_waveform(proc.tracked_params, allowed, "direct").id
                    observed = costs[w]
                else:
                    pen = select_tracked_waveform(proc.tracked_params, allowed, "penalty", tweight)
                    observed = min(1.0, observed + pen[k])
            if tmode != "direct" or proc is None or proc.tracked_params is None:
                try:
                    learner.update(float(observed))
                except DegenerateContextError as exc:
                    degenerate.append(t)
                    log.warning("PRI %d: %s; update skipped", t, exc)
        elif config.policy == "fixed":
            w = baseline_fixed(sensed, catalog).id
        else:
            w = baseline_reactive(prev_true, catalog).id

        c = float(costs[w])
        history.observe(w, key, c)
        o = float(costs[ids].min())
        sensed_k[t], true_k[t], chosen[t] = key, state_key(true), w
        cost[t], oracle[t] = c, o
        inc[t] = ledger.record(c, o)
        cum[t] = ledger.cumulative_regret
        occupancy += float(true.mean())

        if proc is not None:
            j = t % M
            cpi_ids[j] = w
            # only sub-channels above the harmful threshold carry interference
            cpi_inr[j] = channel.inr() * true
            if j == M - 1:
                cpi_rows.append(proc.process(t // M, t - M + 1, cpi_ids, cpi_inr))
        prev2, prev = prev, w
        prev_true = true

    extra = {"mean_occupancy": occupancy / n, "distinct_sensed_states": int(len(np.unique(sensed_k)))}
    if config.scenario == "coexistence":
        extra["threshold_dbm"] = channel.threshold_dbm
    return EpisodeLog(config, seed, S, sensed_k, true_k, chosen, cost, oracle, inc, cum, cpi_rows, degenerate, extra)


def _run_synthetic(config: ExperimentConfig, seed: int) -> EpisodeLog:
    """Stationary linear environment; regret is measured against the known model."""
    streams = rngmod.StreamFactory(seed)
    sc = config.scene.synthetic
    scene_rng = streams(rngmod.SCENE)
    noise_rng = streams(rngmod.NOISE)
    policy_rng = streams(rngmod.POLICY)
    env = SyntheticLinearEnv(sc, scene_rng)
    learner = _make_learner(config, sc.num_arms, sc.dim)
    n = config.horizon
    ids = np.arange(sc.num_arms)
    chosen = np.empty(n, dtype=np.int64)
    cost, oracle, inc, cum = np.empty(n), np.empty(n), np.empty(n), np.empty(n)
    ledger = RegretLedger()
    degenerate = []
    for t in range(n):
        X = env.contexts(scene_rng)
        k = learner.select(ids, X, policy_rng)
        c = env.cost(k, noise_rng)
        try:
            learner.update(c)
        except DegenerateContextError as exc:
            degenerate.append(t)
            log.warning("PRI %d: %s; update skipped", t, exc)
        means = env.mean_costs()
        chosen[t], cost[t], oracle[t] = k, c, means.min()
        inc[t] = means[k] - means.min()
        ledger.cumulative_regret += inc[t]
        cum[t] = ledger.cumulative_regret
    none = np.full(n, -1, dtype=np.int64)
    return EpisodeLog(config, seed, 0, none, none, chosen, cost, oracle, inc, cum, [], degenerate,
                      {"theta": env.theta.tolist()})


# -- campaigns -----------------------------------------------------------------


def _episode_job(args):
    config, seed, root = args
    try:
        ep = run_episode(config, seed)
        if root is not None:
            ep.write(root)
        return seed, ep, None
    except Exception as exc:  # reported per seed, campaign continues
        log.exception("seed %s failed", seed)
        return seed, None, f"{type(exc).__name__}: {exc}"


def _mean_ci(values) -> dict:
    v = np.asarray([x for x in values if x is not None and np.isfinite(x)], dtype=float)
    if v.size == 0:
        return {"mean": None, "std": None, "ci95": None, "n": 0}
    std = float(v.std(ddof=1)) if v.size > 1 else 0.0
    half = float(stats.t.ppf(0.975, v.size - 1) * std / math.sqrt(v.size)) if v.size > 1 else 0.0
    return {"mean": float(v.mean()), "std": std, "ci95": half, "n": int(v.size)}


@dataclass
class CampaignResult:
    config: ExperimentConfig
    episodes: dict
    failures: dict
    aggregate: dict
    curves: dict

    def terminal_costs(self) -> np.ndarray:
        return np.array([self.episodes[s].average_cost for s in sorted(self.episodes)])

    def metric(self, name: str) -> np.ndarray:
        return np.array([self.episodes[s].summary().get(name, np.nan) for s in sorted(self.episodes)], dtype=float)


CURVE_STRIDE = 100


def run_campaign(config: ExperimentConfig, write: bool = True) -> CampaignResult:
    """Run every seed, then aggregate terminal metrics and learning curves."""
    validate(config)
    root = config.output_dir if write else None
    jobs = [(config, s, root) for s in config.seeds]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_episode_job, jobs))
    else:
        results = [_episode_job(j) for j in jobs]
    episodes, failures = {}, {}
    for i, (seed, ep, err) in enumerate(results):
        # duplicate seeds are distinct replicas
        key = seed if seed not in episodes and seed not in failures else f"{seed}#{i}"
        if err is None:
            episodes[key] = ep
        else:
            failures[key] = err
    summaries = [ep.summary() for ep in episodes.values()]
    names = ["average_cost", "cumulative_regret", "pd", "rmse_m", "mean_image_sinr_db", "mean_peak_sidelobe_db"]
    aggregate = {
        "scenario": config.scenario,
        "label": config.label,
        "seeds": [str(k) for k in episodes],
        "failures": failures,
    }
    for name in names:
        aggregate[name] = _mean_ci([s.get(name) for s in summaries])
    curves = {}
    if episodes:
        t_idx = np.arange(CURVE_STRIDE - 1, config.horizon, CURVE_STRIDE)
        if t_idx.size == 0 or t_idx[-1] != config.horizon - 1:
            t_idx = np.append(t_idx, config.horizon - 1)
        avg = np.array([ep.running_average_cost()[t_idx] for ep in episodes.values()])
        reg = np.array([ep.cumulative_regret[t_idx] for ep in episodes.values()])
        curves = {"t": t_idx + 1, "average_cost": avg, "cumulative_regret": reg}
    result = CampaignResult(config, episodes, failures, aggregate, curves)
    if write:
        _write_campaign(result)
    return result


def _write_campaign(result: CampaignResult) -> None:
    cfg = result.config
    out = Path(cfg.output_dir) / cfg.scenario / cfg.label
    out.mkdir(parents=True, exist_ok=True)
    (out / "campaign.json").write_text(json.dumps(_json_safe(result.aggregate), indent=2, sort_keys=True) + "\n")
    (out / "config.json").write_text(cfg.to_json() + "\n")
    if not result.curves:
        return
    c = result.curves
    k = c["average_cost"].shape[0]
    crit = stats.t.ppf(0.975, k - 1) / math.sqrt(k) if k > 1 else 0.0
    with open(out / "curves.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["t", "avg_cost_mean", "avg_cost_ci95", "regret_mean", "regret_ci95"])
        for j, t in enumerate(c["t"]):
            a, r = c["average_cost"][:, j], c["cumulative_regret"][:, j]
            sa = a.std(ddof=1) if k > 1 else 0.0
            sr = r.std(ddof=1) if k > 1 else 0.0
            wr.writerow([_fmt(int(t)), _fmt(a.mean()), _fmt(crit * sa), _fmt(r.mean()), _fmt(crit * sr)])


def _dhat_order(v):
    return math.inf if v is None else v


def sweep_dhat(config: ExperimentConfig, dhat_values, write: bool = True) -> list[dict]:
    """One campaign per d_hat; rows sorted by d_hat with the unconstrained case last."""
    values = list(dhat_values)
    if len(values) < 2:
        raise ValueError("sweep needs at least two d_hat values")
    rows = []
    for d in sorted(values, key=_dhat_order):
        res = run_campaign(config.replace(d_hat=d), write=write)
        rows.append({
            "d_hat": d,
            "average_cost": res.aggregate["average_cost"]["mean"],
            "average_cost_ci95": res.aggregate["average_cost"]["ci95"],
            "peak_sidelobe_db": res.aggregate["mean_peak_sidelobe_db"]["mean"],
        })
    if write:
        out = Path(config.output_dir) / config.scenario / f"sweep-{config.policy}.csv"
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["d_hat", "average_cost", "average_cost_ci95", "peak_sidelobe_db"])
            for r in rows:
                wr.writerow(["none" if r["d_hat"] is None else _fmt(r["d_hat"])] +
                            [("" if r[k] is None else _fmt(r[k])) for k in ("average_cost", "average_cost_ci95", "peak_sidelobe_db")])
    return rows


def _read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def replay(directory) -> dict:
    """Re-derive an episode's summary metrics from its stored logs and compare with summary.json."""
    d = Path(directory)
    pri = _read_csv(d / "pri.csv")
    cost = np.array([float(r["cost"]) for r in pri])
    oracle = np.array([float(r["oracle_cost"]) for r in pri])
    inc = np.array([float(r["regret_increment"]) for r in pri])
    cum = np.array([float(r["cumulative_regret"]) for r in pri])
    cpi = []
    if (d / "cpi.csv").exists():
        for r in _read_csv(d / "cpi.csv"):
            cpi.append({k: float(v) for k, v in r.items()})
    stored = json.loads((d / "summary.json").read_text())
    derived = {
        "average_cost": float(cost.mean()),
        "mean_oracle_cost": float(oracle.mean()),
        "cumulative_regret": float(cum[-1]),
        "regret_increment_sum": float(inc.sum()),
        "num_cpis": len(cpi),
    }
    if cpi:
        col = lambda k: np.array([r[k] for r in cpi])
        derived["pd"] = float(col("pd").mean())
        derived["mean_image_sinr_db"] = float(col("image_sinr_db").mean())
        derived["mean_peak_sidelobe_db"] = float(col("peak_sidelobe_db").mean())
        est = col("est_range")
        if np.all(np.isfinite(est)):
            derived["rmse_m"] = rmse(est, col("truth_range"))
    mismatches = {}
    for k, v in derived.items():
        s = stored.get(k)
        if s is None or abs(s - v) > 1e-9 * max(1.0, abs(s)):
            mismatches[k] = {"stored": s, "derived": v}
    return {"derived": derived, "consistent": not mismatches, "mismatches": mismatches,
            "regret_closure": abs(float(inc.sum()) - float(cum[-1]))}
