"""Whole-protocol runs, replicate sweeps and CSV output.

Randomness: every run has one root seed, and each actor draws from its own
labelled substream (deployment, owner round seeds, owner position choice,
per-round dummy elections, provider tie-breaks).  Two runs that share a seed
therefore share the deployment and every dummy election even when their
schemes differ.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np

from ._rng import draw_u64, substream
from .adversary import RankReport, ServiceProvider, normalized_rank, rank_by_bit_ones
from .analysis import LOCATION_REPORT_BITS
from .config import ConfigError, SimConfig
from .owner import (
    LocationEstimate,
    OwnerState,
    advanced_round,
    basic_round,
    check_termination,
    dummy_one_prob,
    estimate_location,
    initial_request,
    new_owner_state,
    plan_positions,
    retrieve_locations,
)
from .protocol import OwnerKey, TagId, batch_frames, seal_location
from .world import Deployment, deploy

__all__ = [
    "RoundRecord",
    "Metrics",
    "RunReport",
    "run_once",
    "replicate_seed",
    "SweepSpec",
    "SWEEP_PARAMS",
    "CSV_COLUMNS",
    "CSV_SCHEMA",
    "run_sweep",
    "run_replicates",
    "rows_to_csv",
    "homogenized_round",
]

CSV_SCHEMA = "# crowdfind-sweep v1"


@dataclass(frozen=True)
class RoundRecord:
    round: int
    round_seed: int
    gamma: int | None
    positions: tuple[int, ...] | None
    candidates: int
    eliminated: tuple[int, ...]
    tag_comm_bits: int
    tag_hash_ops: int
    detector_comm_bits: int
    tag_frames: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "round": self.round,
                "gamma": self.gamma,
                "candidates": self.candidates,
                "positions": list(self.positions) if self.positions is not None else None,
            },
            separators=(",", ":"),
        )


@dataclass
class Metrics:
    tag_comm_bits: int = 0
    tag_hash_ops: int = 0
    detector_comm_bits: int = 0
    owner_msgs: int = 0
    rounds: int = 0
    clamped_gamma_rounds: int = 0
    terminal_candidates: int = 0
    located: bool = False
    fp_triggered: bool = False
    capped: bool = False
    rank_bit_ones: float | None = None
    rank_p_value: float | None = None


@dataclass
class RunReport:
    config: SimConfig
    seed: int
    deployment: Deployment
    covering: frozenset[int]
    final_state: OwnerState
    requested: tuple[int, ...]
    estimate: LocationEstimate | None
    ranks: dict[str, RankReport]
    metrics: Metrics
    trace: list[RoundRecord] = field(default_factory=list)
    sound: bool = True
    provider: ServiceProvider | None = None

    @property
    def candidates(self) -> frozenset[int]:
        return self.final_state.candidates

    def tag_in_estimate(self) -> bool | None:
        if self.deployment.lost_tag is None or self.estimate is None:
            return None
        return self.estimate.contains(self.deployment.lost_tag[1])

    def write_trace(self, fh: IO[str]) -> None:
        """One JSON object per polling round."""
        for rec in self.trace:
            fh.write(rec.to_json() + "\n")


def run_once(config: SimConfig, seed: int | None = None) -> RunReport:
    """Deploy, poll until termination, retrieve, estimate and rank."""
    seed = config.seed if seed is None else int(seed)
    dep = deploy(config, substream(seed, "deploy"))
    C, f, k, q = dep.C, config.f, config.k, config.q
    c = config.avg_neighbors
    advanced = config.scheme == "advanced"

    owner_key = OwnerKey()
    provider = ServiceProvider(zones=dep.zones())
    pseudonyms = draw_u64(substream(seed, "detector-pseudonyms"), C)
    for d in range(C):
        provider.store_location(d, seal_location(dep.location(d), int(pseudonyms[d]), owner_key.public))

    if dep.lost_tag is not None:
        lost_id = dep.lost_tag[0]
    else:
        lost_id = TagId(draw_u64(substream(seed, "owner", "tag-id")))
    request = initial_request(lost_id, owner_key, substream(seed, "owner", "request"))
    provider.forward_request((request.digest, request.nonce, request.public_key))

    covering = dep.covering_detectors()
    tag_answers = dep.lost_tag is not None and request.matches(dep.lost_tag[0])
    lost_owners = np.array(sorted(covering), dtype=np.int64) if tag_answers else np.empty(0, dtype=np.int64)

    m = Metrics(detector_comm_bits=C * LOCATION_REPORT_BITS, owner_msgs=1)
    state = new_owner_state(lost_id, C, config.scheme)
    trace: list[RoundRecord] = []
    sound = True

    while True:
        x = state.round + 1
        r_x = draw_u64(substream(seed, "owner", "round-seed", x))
        owners, _, ids = dep.elect_round(x, q, substream(seed, "elect", x))
        if lost_owners.size:
            owners = np.concatenate([owners, lost_owners])
            ids = np.concatenate([ids, np.full(lost_owners.size, int(lost_id), dtype=np.uint64)])
        if advanced:
            plan = plan_positions(
                state, r_x, substream(seed, "owner", "positions", x),
                f=f, k=k, omega=config.omega, q=q, c=c, p_thre=config.p_thre, chi2_mode=config.chi2_mode,
            )
            bits, resp, hops = batch_frames(owners, ids, r_x, C, f, k, plan.positions)
            new_state = advanced_round(state, bits, plan)
            gamma, positions = plan.gamma, plan.positions
        else:
            bits, resp, hops = batch_frames(owners, ids, r_x, C, f, k)
            new_state = basic_round(state, bits, r_x, f, k)
            gamma, positions = None, None
        provider.collect(bits)
        det_bits = C * bits.shape[1]
        if new_state.eliminated & covering:
            sound = False
        trace.append(RoundRecord(x, r_x, gamma, positions, len(new_state.candidates),
                                 tuple(sorted(new_state.eliminated)), resp, hops, det_bits, int(owners.size)))
        m.tag_comm_bits += resp
        m.tag_hash_ops += hops
        m.detector_comm_bits += det_bits
        m.owner_msgs += 1
        state = new_state

        if config.fixed_rounds:
            if state.round >= config.fixed_rounds:
                break
        elif check_termination(state, config.tau):
            break
        if state.round >= config.round_cap:
            m.capped = True
            break

    m.rounds = state.round
    m.clamped_gamma_rounds = state.clamped_rounds
    m.terminal_candidates = len(state.candidates)
    m.located = bool(state.candidates & covering)
    m.fp_triggered = dep.lost_tag is None and len(state.candidates) > 0

    requested: tuple[int, ...] = ()
    estimate = None
    if C:
        lam = min(C, max(config.lam, len(state.candidates)))
        retrieval = retrieve_locations(state, lam, provider, owner_key, substream(seed, "owner", "retrieve"))
        m.owner_msgs += 1
        requested = retrieval.requested
        estimate = estimate_location([retrieval.opened[d][1] for d in sorted(state.candidates)], config.R)

    ranks: dict[str, RankReport] = {}
    if C:
        prng = substream(seed, "provider")
        ranks["bit_ones"] = provider.rank("bit_ones", prng)
        p1p = dummy_one_prob(f, k, q, c)
        if 0.0 < p1p < 1.0:
            ranks["p_value"] = provider.rank("p_value", prng, p1p, config.chi2_mode)
        m.rank_bit_ones = normalized_rank(ranks["bit_ones"], covering)
        if "p_value" in ranks:
            m.rank_p_value = normalized_rank(ranks["p_value"], covering)

    return RunReport(config, seed, dep, covering, state, requested, estimate, ranks, m, trace, sound, provider)


# -- sweeps -------------------------------------------------------------------

SWEEP_PARAMS = {"p_thre": float, "k": int, "f": int, "omega": int, "q": float, "C": int}

CSV_COLUMNS = (
    "param", "value", "replicate", "seed", "scheme", "rounds", "tag_comm_bits", "tag_hash_ops",
    "detector_comm_bits", "owner_msgs", "clamped_gamma_rounds", "terminal_candidates",
    "located", "fp_triggered", "capped", "rank_bit_ones", "rank_p_value",
)
_NUMERIC = CSV_COLUMNS[5:]


@dataclass(frozen=True)
class SweepSpec:
    param: str
    values: tuple = ()
    replicates: int = 100

    def __post_init__(self):
        if self.param not in SWEEP_PARAMS:
            raise ConfigError(self.param, f"cannot sweep; choose one of {sorted(SWEEP_PARAMS)}")
        if self.replicates < 1:
            raise ConfigError("replicates", "must be >= 1")
        cast = SWEEP_PARAMS[self.param]
        object.__setattr__(self, "values", tuple(cast(v) for v in self.values))

    def configs(self, base: SimConfig) -> list[SimConfig]:
        """One validated config per value; raises before anything runs."""
        return [base.replace(**{self.param: v}) for v in self.values]


def replicate_seed(base_seed: int, replicate: int) -> int:
    return draw_u64(substream(base_seed, "replicate", replicate))


def _run_row(args) -> dict:
    config, param, value, rep, seed = args
    m = run_once(config, seed).metrics
    row = {"param": param, "value": value, "replicate": rep, "seed": seed, "scheme": config.scheme}
    row.update({col: getattr(m, col) for col in _NUMERIC})
    return row


def _map(tasks: list, workers: int) -> list:
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_row, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    return [_run_row(t) for t in tasks]


def run_replicates(config: SimConfig, replicates: int | None = None, *, param: str = "", value="",
                   workers: int = 1) -> list[dict]:
    """Per-replicate rows for one configuration (seeds derived from ``config.seed``)."""
    n = config.replicates if replicates is None else replicates
    tasks = [(config, param, value, r, replicate_seed(config.seed, r)) for r in range(n)]
    return _map(tasks, workers)


def aggregate(rows: Sequence[dict]) -> list[dict]:
    """Mean and standard-error rows; independent of the order of ``rows``."""
    if not rows:
        return []
    rows = sorted(rows, key=lambda r: r["replicate"])
    base = {"param": rows[0]["param"], "value": rows[0]["value"], "seed": "", "scheme": rows[0]["scheme"]}
    mean_row = dict(base, replicate="mean")
    se_row = dict(base, replicate="stderr")
    for col in _NUMERIC:
        vals = [float(r[col]) for r in rows if r[col] is not None]
        if not vals:
            mean_row[col] = se_row[col] = None
            continue
        mu = math.fsum(vals) / len(vals)
        mean_row[col] = mu
        if len(vals) > 1:
            var = math.fsum((v - mu) ** 2 for v in vals) / (len(vals) - 1)
            se_row[col] = math.sqrt(var / len(vals))
        else:
            se_row[col] = 0.0
    return [mean_row, se_row]


def run_sweep(spec: SweepSpec, base: SimConfig, workers: int = 1) -> str:
    """CSV text: one row per (value, replicate), then mean and stderr rows per value."""
    configs = spec.configs(base)
    tasks = [
        (cfg, spec.param, v, r, replicate_seed(base.seed, r))
        for cfg, v in zip(configs, spec.values)
        for r in range(spec.replicates)
    ]
    results = _map(tasks, workers)
    out = []
    for i, v in enumerate(spec.values):
        block = results[i * spec.replicates:(i + 1) * spec.replicates]
        out.extend(block)
        out.extend(aggregate(block))
    return rows_to_csv(out)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    buf.write(CSV_SCHEMA + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow([_fmt(row.get(col)) for col in CSV_COLUMNS])
    return buf.getvalue()


def read_csv(text: str) -> list[dict]:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


# -- homogenized single-round model ------------------------------------------


def homogenized_round(C: int, f: int, k: int, q: float, c: int, seed: int) -> tuple[np.ndarray, int]:
    """One basic round where every detector has exactly ``c`` private dummy-capable neighbors.

    Detector ``real`` (drawn uniformly) also hears the lost tag.  Returns the
    ``(C, f)`` bit matrix and the real detector's index.
    """
    rng = substream(seed, "homogenized")
    round_seed = draw_u64(rng)
    real = int(rng.integers(C))
    joined = rng.random((C, c)) < q
    owners = np.nonzero(joined)[0]
    ids = draw_u64(rng, owners.size)
    owners = np.append(owners, real)
    ids = np.append(ids, np.uint64(draw_u64(rng)))
    bits, _, _ = batch_frames(owners, ids, round_seed, C, f, k)
    return bits, real


def homogenized_rank(C: int, f: int, k: int, q: float, c: int, seed: int) -> int:
    """Rank (1 = most suspected) of the real detector under bit-ones ranking."""
    bits, real = homogenized_round(C, f, k, q, c, seed)
    report = rank_by_bit_ones(bits, substream(seed, "provider"))
    return report.rank_of(real)
